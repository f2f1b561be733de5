"""Rollout generation and batch-matrix assembly.

Random streams
--------------
Rollouts are generated in fixed blocks of :data:`BLOCK_SIZE`. Block ``b``
of system ``s`` draws from ``PCG64(SeedSequence(seed, spawn_key=(s, b)))``
and always draws a full block, laid out rollout-major as
``[x_0, u_0..u_{T-1}, w_0..w_{T-1}]`` in standard-normal units. Rollout
``i`` therefore depends only on ``(seed, system, i)`` and the model: it
does not change with `count`, with the number of workers, or with the
order in which blocks are evaluated.
"""

from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ShapeError

BLOCK_SIZE = 256
SYSTEM_IDS = {"true": 0, "aux": 1}


@dataclass(frozen=True, eq=False)
class Rollout:
    """One trajectory: ``T+1`` states, ``T`` inputs, ``T`` noise vectors."""

    states: np.ndarray
    inputs: np.ndarray
    noises: np.ndarray

    @property
    def horizon(self):
        return self.inputs.shape[0]

    def replay(self, model):
        """Recompute the states from ``x_0``, inputs and noises."""
        x = [self.states[0]]
        for k in range(self.horizon):
            x.append(model.a(k) @ x[-1] + model.b(k) @ self.inputs[k] + self.noises[k])
        return np.array(x)


class RolloutSet:
    """A stack of rollouts from one system.

    Arrays have shapes ``(N, T+1, n)``, ``(N, T, p)`` and ``(N, T, n)``.
    Indexing with an int returns a :class:`Rollout`; indexing with a slice
    or an index array returns a new :class:`RolloutSet`.
    """

    def __init__(self, states, inputs, noises, system="true"):
        states = np.asarray(states, dtype=float)
        inputs = np.asarray(inputs, dtype=float)
        noises = np.asarray(noises, dtype=float)
        if states.ndim != 3 or inputs.ndim != 3 or noises.ndim != 3:
            raise ShapeError("rollout arrays must be 3-D (rollout, time, coordinate)")
        count, t1, n = states.shape
        if inputs.shape[:2] != (count, t1 - 1) or noises.shape != (count, t1 - 1, n):
            raise ShapeError("inconsistent rollout array shapes")
        for a in (states, inputs, noises):
            a.setflags(write=False)
        self.states, self.inputs, self.noises = states, inputs, noises
        self.system = system

    @classmethod
    def empty(cls, horizon, n, p, system="aux"):
        return cls(np.zeros((0, horizon + 1, n)), np.zeros((0, horizon, p)),
                   np.zeros((0, horizon, n)), system)

    @property
    def horizon(self):
        return self.inputs.shape[1]

    @property
    def n(self):
        return self.states.shape[2]

    @property
    def p(self):
        return self.inputs.shape[2]

    def __len__(self):
        return self.states.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return Rollout(self.states[idx], self.inputs[idx], self.noises[idx])
        return RolloutSet(self.states[idx], self.inputs[idx], self.noises[idx],
                          self.system)

    def __repr__(self):
        return (f"RolloutSet(system={self.system!r}, count={len(self)}, "
                f"T={self.horizon}, n={self.n}, p={self.p})")


def _draw_block(model, seed, system_id, block):
    n, p, horizon = model.n, model.p, model.horizon
    ss = np.random.SeedSequence(seed, spawn_key=(system_id, block))
    rng = np.random.Generator(np.random.PCG64(ss))
    raw = rng.standard_normal((BLOCK_SIZE, n + horizon * (p + n)))
    x0 = raw[:, :n] * np.sqrt(model.sigma_x2)
    u = raw[:, n:n + horizon * p].reshape(BLOCK_SIZE, horizon, p)
    w = raw[:, n + horizon * p:].reshape(BLOCK_SIZE, horizon, n)
    return x0, u * np.sqrt(model.sigma_u2), w * np.sqrt(model.sigma_w2)


def simulate_rollouts(model, count, seed, *, system="true", workers=None):
    """Simulate `count` independent rollouts of length ``model.horizon``.

    Parameters
    ----------
    model : SystemModel
    count : int
        Number of rollouts (may be zero).
    seed : int
        Master seed; see the module docstring for the stream layout.
    system : {"true", "aux"}
        Selects the substream family so that true and auxiliary rollouts
        drawn with the same seed are independent.
    workers : int, optional
        Draw blocks on a thread pool. The result does not depend on it.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    system_id = SYSTEM_IDS[system]
    n, p, horizon = model.n, model.p, model.horizon
    n_blocks = -(-count // BLOCK_SIZE)

    def draw(b):
        return _draw_block(model, seed, system_id, b)

    if workers and workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(draw, range(n_blocks)))
    else:
        blocks = [draw(b) for b in range(n_blocks)]

    if blocks:
        x0 = np.concatenate([blk[0] for blk in blocks])[:count]
        u = np.concatenate([blk[1] for blk in blocks])[:count]
        w = np.concatenate([blk[2] for blk in blocks])[:count]
    else:
        x0, u, w = np.zeros((0, n)), np.zeros((0, horizon, p)), np.zeros((0, horizon, n))

    states = np.empty((count, horizon + 1, n))
    states[:, 0] = x0
    for k in range(horizon):
        states[:, k + 1] = states[:, k] @ model.a(k).T + u[:, k] @ model.b(k).T + w[:, k]
    return RolloutSet(states, u, w, system)


# -- batch matrices ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BatchData:
    """Stacked regression data ``X = Theta Z + W + Delta``.

    Columns run over rollouts in index order, true-system rollouts first,
    and within each rollout over time steps ``k = T-1, ..., 0``. The tag
    arrays give, per column, the source (0 true, 1 auxiliary), the rollout
    index within its source and the time step.

    `delta_mat` is ``None`` when the generating models were not supplied.
    """

    x_mat: np.ndarray
    z_mat: np.ndarray
    w_mat: np.ndarray
    delta_mat: np.ndarray | None
    n_true: int
    n_aux: int
    horizon: int
    source: np.ndarray
    rollout: np.ndarray
    step: np.ndarray

    @property
    def rollout_count(self):
        return self.n_true + self.n_aux

    @property
    def n_columns(self):
        return self.z_mat.shape[1]

    @property
    def is_aux(self):
        return self.source == 1


def _columns(rollouts):
    """(X, Z, W, step) columns of one rollout set in batch order."""
    count, horizon, n, p = len(rollouts), rollouts.horizon, rollouts.n, rollouts.p
    zs = np.concatenate([rollouts.states[:, :horizon], rollouts.inputs], axis=2)
    rev = slice(None, None, -1)
    x = rollouts.states[:, 1:][:, rev].reshape(count * horizon, n).T
    z = zs[:, rev].reshape(count * horizon, n + p).T
    w = rollouts.noises[:, rev].reshape(count * horizon, n).T
    step = np.tile(np.arange(horizon)[::-1], count)
    return x, z, w, step, zs


def assemble_batch(true_rollouts, aux_rollouts=None, true_model=None, aux_model=None):
    """Build the batch matrices from true and auxiliary rollouts.

    When both models are given, ``Delta`` holds ``(Theta_k^aux - Theta) z_k``
    for auxiliary columns and zeros elsewhere, so that
    ``X = [A B] Z + W + Delta`` holds exactly.
    """
    if aux_rollouts is None:
        aux_rollouts = RolloutSet.empty(true_rollouts.horizon, true_rollouts.n,
                                        true_rollouts.p)
    if true_rollouts.horizon != aux_rollouts.horizon:
        raise ShapeError("true and auxiliary rollouts have different horizons")
    if (true_rollouts.n, true_rollouts.p) != (aux_rollouts.n, aux_rollouts.p):
        raise ShapeError("true and auxiliary rollouts have different dimensions")
    horizon = true_rollouts.horizon
    xt, zt, wt, st, _ = _columns(true_rollouts)
    xa, za, wa, sa, zs_aux = _columns(aux_rollouts)

    delta = None
    have_models = true_model is not None and (aux_model is not None or not len(aux_rollouts))
    if have_models:
        for m in (true_model, aux_model):
            if m is not None and m.horizon != horizon:
                raise ShapeError("model horizon differs from rollout horizon")
        theta = true_model.theta()
        delta_true = np.zeros_like(xt)
        if len(aux_rollouts):
            d_theta = np.stack([aux_model.theta(k) - theta for k in range(horizon)])
            per_step = np.einsum("kij,nkj->nki", d_theta, zs_aux)
            delta_aux = per_step[:, ::-1].reshape(len(aux_rollouts) * horizon, true_model.n).T
        else:
            delta_aux = np.zeros_like(xa)
        delta = np.hstack([delta_true, delta_aux])

    nt, na = len(true_rollouts), len(aux_rollouts)
    return BatchData(
        x_mat=np.hstack([xt, xa]),
        z_mat=np.hstack([zt, za]),
        w_mat=np.hstack([wt, wa]),
        delta_mat=delta,
        n_true=nt,
        n_aux=na,
        horizon=horizon,
        source=np.concatenate([np.zeros(nt * horizon, int), np.ones(na * horizon, int)]),
        rollout=np.concatenate([np.repeat(np.arange(nt), horizon),
                                np.repeat(np.arange(na), horizon)]),
        step=np.concatenate([st, sa]),
    )


# -- CSV exchange ------------------------------------------------------------

def write_rollouts_csv(path, *rollout_sets):
    """Write rollout sets to one CSV, one row per (rollout, k), k = 0..T.

    Input and noise fields are empty on the final row ``k = T``.
    """
    if not rollout_sets:
        raise ValueError("nothing to write")
    n, p = rollout_sets[0].n, rollout_sets[0].p
    header = (["system", "rollout", "k"] + [f"x_{j + 1}" for j in range(n)]
              + [f"u_{j + 1}" for j in range(p)] + [f"w_{j + 1}" for j in range(n)])
    fmt = "{:.17g}".format
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rs in rollout_sets:
            if (rs.n, rs.p) != (n, p):
                raise ShapeError("rollout sets in one file must share dimensions")
            for i in range(len(rs)):
                for k in range(rs.horizon + 1):
                    row = [rs.system, i, k] + [fmt(v) for v in rs.states[i, k]]
                    if k < rs.horizon:
                        row += [fmt(v) for v in rs.inputs[i, k]]
                        row += [fmt(v) for v in rs.noises[i, k]]
                    else:
                        row += [""] * (p + n)
                    writer.writerow(row)


def read_rollouts_csv(path):
    """Read a file written by :func:`write_rollouts_csv`.

    Returns a dict mapping system label to :class:`RolloutSet`.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(h.startswith("x_") for h in header)
        p = sum(h.startswith("u_") for h in header)
        rows = {}
        for rec in reader:
            if not rec:
                continue
            rows.setdefault(rec[0], []).append(rec)

    out = {}
    for system, recs in rows.items():
        count = max(int(r[1]) for r in recs) + 1
        horizon = max(int(r[2]) for r in recs)
        states = np.full((count, horizon + 1, n), np.nan)
        inputs = np.full((count, horizon, p), np.nan)
        noises = np.full((count, horizon, n), np.nan)
        for r in recs:
            i, k = int(r[1]), int(r[2])
            states[i, k] = [float(v) for v in r[3:3 + n]]
            if k < horizon:
                inputs[i, k] = [float(v) for v in r[3 + n:3 + n + p]]
                noises[i, k] = [float(v) for v in r[3 + n + p:3 + 2 * n + p]]
        if np.isnan(states).any() or np.isnan(inputs).any() or np.isnan(noises).any():
            raise ShapeError(f"{Path(path).name}: incomplete rollouts for system {system!r}")
        out[system] = RolloutSet(states, inputs, noises, system)
    return out
