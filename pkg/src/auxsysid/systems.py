"""Linear state-space models and their exact state-input covariances.

A :class:`SystemModel` describes

    x_{k+1} = A_k x_k + B_k u_k + w_k,

with ``x_0 ~ N(0, sigma_x2 I)``, ``u_k ~ N(0, sigma_u2 I)`` and
``w_k ~ N(0, sigma_w2 I)``. Time-invariant models store a single
``(A, B)`` pair; time-varying ones store one pair per step.
"""

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from .exceptions import ShapeError
from .numerics import as_matrix, spectral_norm


def _frozen(a):
    a = as_matrix(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Discrete-time linear system driven by Gaussian inputs and noise.

    Use :meth:`lti` or :meth:`ltv` rather than the raw constructor.
    """

    a_seq: tuple
    b_seq: tuple
    sigma_u2: float = 1.0
    sigma_w2: float = 1.0
    sigma_x2: float = 1.0
    horizon: int = 1
    time_invariant: bool = True

    def __post_init__(self):
        a_seq = tuple(_frozen(a) for a in self.a_seq)
        b_seq = tuple(_frozen(b) for b in self.b_seq)
        object.__setattr__(self, "a_seq", a_seq)
        object.__setattr__(self, "b_seq", b_seq)
        if not a_seq or not b_seq:
            raise ShapeError("at least one (A, B) pair is required")
        n = a_seq[0].shape[0]
        p = b_seq[0].shape[1]
        for a in a_seq:
            if a.shape != (n, n):
                raise ShapeError(f"A matrices must all be {n}x{n}, got {a.shape}")
        for b in b_seq:
            if b.shape != (n, p):
                raise ShapeError(f"B matrices must all be {n}x{p}, got {b.shape}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        if self.time_invariant:
            if len(a_seq) != 1 or len(b_seq) != 1:
                raise ShapeError("a time-invariant model stores exactly one (A, B) pair")
        elif len(a_seq) < self.horizon or len(b_seq) < self.horizon:
            raise ShapeError("time-varying model needs at least `horizon` matrices")
        # sigma_u2 == 0 is allowed for degenerate simulations; the state-input
        # covariance is only positive definite when sigma_u2 > 0
        if min(self.sigma_u2, self.sigma_w2, self.sigma_x2) < 0:
            raise ValueError("variances must be nonnegative")
        for name in ("sigma_u2", "sigma_w2", "sigma_x2"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def lti(cls, a, b, *, sigma_u2=1.0, sigma_w2=1.0, sigma_x2=1.0, horizon=1):
        return cls((a,), (b,), sigma_u2, sigma_w2, sigma_x2, horizon, True)

    @classmethod
    def ltv(cls, a_seq, b_seq, *, sigma_u2=1.0, sigma_w2=1.0, sigma_x2=1.0,
            horizon=None):
        if horizon is None:
            horizon = min(len(a_seq), len(b_seq))
        return cls(tuple(a_seq), tuple(b_seq), sigma_u2, sigma_w2, sigma_x2,
                   horizon, False)

    @property
    def n(self):
        return self.a_seq[0].shape[0]

    @property
    def p(self):
        return self.b_seq[0].shape[1]

    def a(self, k):
        return self.a_seq[0] if self.time_invariant else self.a_seq[k]

    def b(self, k):
        return self.b_seq[0] if self.time_invariant else self.b_seq[k]

    def theta(self, k=0):
        """``[A_k B_k]`` as an ``n x (n+p)`` matrix."""
        return np.hstack([self.a(k), self.b(k)])

    def with_(self, **changes):
        """Copy with some fields replaced (variances, horizon)."""
        fields = dict(
            a_seq=self.a_seq, b_seq=self.b_seq, sigma_u2=self.sigma_u2,
            sigma_w2=self.sigma_w2, sigma_x2=self.sigma_x2,
            horizon=self.horizon, time_invariant=self.time_invariant,
        )
        fields.update(changes)
        return SystemModel(**fields)


@dataclass(frozen=True)
class ModelDelta:
    """Per-step spectral norms of ``[A_k - A, B_k - B]``."""

    delta_theta_norms: tuple
    worst: float


def transition(model, k, l):
    """State transition ``A_{k-1} ... A_l``; the identity when ``k == l``."""
    if l < 0 or k < l:
        raise IndexError(f"transition needs k >= l >= 0, got k={k}, l={l}")
    phi = np.eye(model.n)
    for j in range(l, k):
        phi = model.a(j) @ phi
    return phi


def gf_matrices(model, k):
    """Input and noise propagation blocks ``(G_k, F_k)``.

    ``x_{k-1} = G_k [u_0; ...; u_{k-2}] + F_k [w_0; ...; w_{k-2}]
    + transition(k-1, 0) x_0``. For ``k == 1`` both blocks have zero
    columns.
    """
    if k < 1:
        raise IndexError(f"gf_matrices needs k >= 1, got {k}")
    n, p = model.n, model.p
    g_blocks = [np.zeros((n, 0))]
    f_blocks = [np.zeros((n, 0))]
    for j in range(k - 1):
        phi = transition(model, k - 1, j + 1)
        g_blocks.append(phi @ model.b(j))
        f_blocks.append(phi)
    return np.hstack(g_blocks), np.hstack(f_blocks)


def step_covariance(model, k):
    """Exact covariance of ``z_k = [x_k; u_k]`` as an ``(n+p)`` square matrix."""
    if k < 0:
        raise IndexError(f"step_covariance needs k >= 0, got {k}")
    n, p = model.n, model.p
    g, f = gf_matrices(model, k + 1)
    phi = transition(model, k, 0)
    top = model.sigma_x2 * phi @ phi.T
    if g.shape[1]:
        top = top + model.sigma_u2 * g @ g.T + model.sigma_w2 * f @ f.T
    cov = np.zeros((n + p, n + p))
    cov[:n, :n] = 0.5 * (top + top.T)
    cov[n:, n:] = model.sigma_u2 * np.eye(p)
    return cov


def step_covariances(model, horizon=None):
    """``[step_covariance(model, k) for k in range(horizon)]``."""
    horizon = model.horizon if horizon is None else horizon
    return [step_covariance(model, k) for k in range(horizon)]


def delta_norms(true_model, aux_model):
    """Spectral norms of the per-step model difference ``aux - true``."""
    if (true_model.n, true_model.p) != (aux_model.n, aux_model.p):
        raise ShapeError("models have different state or input dimensions")
    if true_model.horizon != aux_model.horizon:
        raise ShapeError("models have different horizons")
    norms = []
    for k in range(true_model.horizon):
        d = aux_model.theta(k) - true_model.theta(k)
        norms.append(spectral_norm(d) if np.any(d) else 0.0)
    return ModelDelta(tuple(norms), max(norms))


# -- serialization -----------------------------------------------------------

def model_to_dict(model):
    """Plain-data form of a model; floats survive a JSON round trip exactly."""
    if model.time_invariant:
        a = model.a_seq[0].tolist()
        b = model.b_seq[0].tolist()
    else:
        a = [m.tolist() for m in model.a_seq]
        b = [m.tolist() for m in model.b_seq]
    return {
        "n": model.n,
        "p": model.p,
        "T": model.horizon,
        "A": a,
        "B": b,
        "sigma_u2": model.sigma_u2,
        "sigma_w2": model.sigma_w2,
        "sigma_x2": model.sigma_x2,
    }


def _read_block(value, rows, cols, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.size == rows * cols:
        return False, [arr.reshape(rows, cols)]
    if arr.ndim == 2 and arr.shape == (rows, cols):
        return False, [arr]
    if arr.ndim == 2 and arr.shape[1] == rows * cols:
        return True, [m.reshape(rows, cols) for m in arr]
    if arr.ndim == 3 and arr.shape[1:] == (rows, cols):
        return True, list(arr)
    raise ShapeError(f"{name} does not match declared dimensions {rows}x{cols}")


def model_from_dict(data):
    try:
        n, p, horizon = int(data["n"]), int(data["p"]), int(data["T"])
        a_raw, b_raw = data["A"], data["B"]
    except KeyError as exc:
        raise ShapeError(f"model document is missing key {exc}") from None
    a_varying, a_seq = _read_block(a_raw, n, n, "A")
    b_varying, b_seq = _read_block(b_raw, n, p, "B")
    variances = {
        key: float(data.get(key, 1.0)) for key in ("sigma_u2", "sigma_w2", "sigma_x2")
    }
    if not (a_varying or b_varying):
        return SystemModel.lti(a_seq[0], b_seq[0], horizon=horizon, **variances)
    if not a_varying:
        a_seq = a_seq * len(b_seq)
    if not b_varying:
        b_seq = b_seq * len(a_seq)
    return SystemModel.ltv(a_seq, b_seq, horizon=horizon, **variances)


def save_model(model, path, extra=None):
    """Write `model` as JSON. `extra` is stored under a ``metadata`` key."""
    doc = model_to_dict(model)
    if extra:
        doc["metadata"] = extra
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
