"""Weighted least squares identification from true and auxiliary data.

True-system columns get weight 1 and auxiliary columns at time step k get
weight ``q_k``; the estimate is ``X Q Z' (Z Q Z')^{-1}``.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigurationError, SingularGramError
from .numerics import min_eig_sym, solve_spd, spectral_norm, symmetrize
from .simulate import assemble_batch


@dataclass(frozen=True)
class WeightSchedule:
    """Auxiliary-data weights.

    ``kind`` is one of

    * ``"constant"``: ``values == (q,)``, the same weight at every step;
    * ``"per_step"``: ``values[k]`` is the weight of auxiliary samples at
      time step ``k`` (k = 0 .. T-1);
    * ``"decaying"``: ``values == (c,)``, weight ``c / sqrt(N_r)``.
    """

    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in ("constant", "per_step", "decaying"):
            raise ConfigurationError(f"unknown weight schedule kind {self.kind!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals or any(not math.isfinite(v) or v < 0 for v in vals):
            raise ConfigurationError("weights must be finite and nonnegative")
        if self.kind != "per_step" and len(vals) != 1:
            raise ConfigurationError(f"{self.kind} schedule takes exactly one value")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, q):
        return cls("constant", (q,))

    @classmethod
    def per_step(cls, qs):
        return cls("per_step", tuple(qs))

    @classmethod
    def decaying(cls, c=1.0):
        return cls("decaying", (c,))

    @property
    def label(self):
        if self.kind == "constant":
            return f"q={self.values[0]:g}"
        if self.kind == "decaying":
            return f"q={self.values[0]:g}/sqrt(Nr)"
        return "q=[" + ",".join(f"{v:g}" for v in self.values) + "]"

    def step_weights(self, horizon, n_true=None):
        """Weights ``q_k`` for k = 0 .. horizon-1."""
        if self.kind == "constant":
            return np.full(horizon, self.values[0])
        if self.kind == "decaying":
            if not n_true:
                raise ConfigurationError("decaying schedule needs N_r >= 1")
            return np.full(horizon, self.values[0] / math.sqrt(n_true))
        if len(self.values) != horizon:
            raise ConfigurationError(
                f"per-step schedule has {len(self.values)} weights, horizon is {horizon}")
        return np.array(self.values)


def as_schedule(w):
    """Accept a WeightSchedule, a number, or a sequence of per-step weights."""
    if isinstance(w, WeightSchedule):
        return w
    if np.ndim(w) == 0:
        return WeightSchedule.constant(w)
    return WeightSchedule.per_step(w)


def column_weights(batch, weights):
    """Diagonal of Q: 1 on true columns, ``q_k`` on auxiliary columns."""
    q = as_schedule(weights).step_weights(batch.horizon, batch.n_true)
    return np.where(batch.is_aux, q[batch.step], 1.0)


@dataclass(frozen=True, eq=False)
class Estimate:
    """Result of :func:`wls`. ``theta == [a_hat b_hat]``."""

    theta: np.ndarray
    n: int
    gram: np.ndarray
    gram_min_eig: float
    weights: WeightSchedule
    n_columns: int
    ridge: float = 0.0

    @property
    def a_hat(self):
        return self.theta[:, :self.n]

    @property
    def b_hat(self):
        return self.theta[:, self.n:]

    def metadata(self):
        return {
            "weights": {"kind": self.weights.kind, "values": list(self.weights.values)},
            "gram_min_eig": self.gram_min_eig,
            "n_columns": self.n_columns,
            "ridge": self.ridge,
        }


def _weighted_solve(batch, weights, targets, ridge=False):
    """Return ``targets Q Z' (Z Q Z')^{-1}`` plus the Gram diagnostics.

    Weights are rescaled by ``1/max(q)`` before forming the Gram matrix;
    the estimate is invariant to that scale and extreme weights such as
    1e10 then stay well conditioned.
    """
    qcol = column_weights(batch, weights)
    scale = float(qcol.max()) if qcol.size else 0.0
    if scale <= 0:
        raise SingularGramError("all data columns have zero weight",
                                min_eig=0.0, n_columns=batch.n_columns)
    qn = qcol / scale
    zq = batch.z_mat * qn
    gram = symmetrize(zq @ batch.z_mat.T)
    lam = 0.0
    if ridge:
        lam = 1e-8 * spectral_norm(gram)
        gram = gram + lam * np.eye(gram.shape[0])
    sols = [solve_spd(gram, zq @ t.T, n_columns=batch.n_columns).T for t in targets]
    return sols, gram * scale, lam * scale


def wls(batch, weights, *, ridge=False):
    """Weighted least squares estimate of ``[A B]``.

    Parameters
    ----------
    batch : BatchData
    weights : WeightSchedule or float or sequence
    ridge : bool
        Add ``1e-8 * ||ZQZ'||`` to the Gram diagonal instead of failing on
        a singular Gram matrix. Off by default.

    Raises
    ------
    SingularGramError
        If ``Z Q Z'`` is not positive definite at tolerance.
    """
    schedule = as_schedule(weights)
    (theta,), gram, lam = _weighted_solve(batch, schedule, [batch.x_mat], ridge)
    n = batch.x_mat.shape[0]
    return Estimate(theta, n, gram, min_eig_sym(gram), schedule,
                    batch.n_columns, lam)


class ErrorDecomposition(NamedTuple):
    noise_term: np.ndarray
    bias_term: np.ndarray


def error_decomposition(batch, weights):
    """Split ``theta_wls - theta`` into ``W Q Z' G^-1`` and ``Delta Q Z' G^-1``."""
    if batch.delta_mat is None:
        raise ConfigurationError("batch was assembled without models; Delta unknown")
    (noise, bias), _, _ = _weighted_solve(
        batch, as_schedule(weights), [batch.w_mat, batch.delta_mat])
    return ErrorDecomposition(noise, bias)


class ErrorMetrics(NamedTuple):
    err_theta: float
    err_a: float
    err_b: float


def error_metrics(est, true_theta):
    """Spectral-norm errors of the full estimate and its A and B blocks."""
    theta = est.theta if isinstance(est, Estimate) else np.asarray(est, dtype=float)
    true_theta = np.asarray(true_theta, dtype=float)
    if theta.shape != true_theta.shape:
        raise ValueError(f"shape mismatch: {theta.shape} vs {true_theta.shape}")
    n = theta.shape[0]
    err = theta - true_theta
    return ErrorMetrics(spectral_norm(err), spectral_norm(err[:, :n]),
                        spectral_norm(err[:, n:]))


def prediction_mse(theta, rollouts):
    """Mean squared one-step prediction error of ``x_{k+1} ~ theta z_k``."""
    zs = np.concatenate([rollouts.states[:, :-1], rollouts.inputs], axis=2)
    resid = rollouts.states[:, 1:] - zs @ np.asarray(theta).T
    return float(np.mean(resid ** 2))


def select_weight_cv(true_rollouts, aux_rollouts, candidate_qs, folds=5, seed=0,
                     *, return_scores=False):
    """Pick an auxiliary weight by K-fold cross-validation over true rollouts.

    True rollouts are shuffled with `seed` and split into `folds` groups.
    Each candidate is fit on all auxiliary rollouts plus the training
    folds and scored by one-step prediction MSE on the held-out fold; the
    candidate with the lowest mean score wins, ties going to the smaller
    weight. A fit that hits a singular Gram matrix scores ``inf``.
    """
    if folds < 2:
        raise ConfigurationError("need at least 2 folds")
    if len(true_rollouts) < max(2, folds):
        raise ConfigurationError(
            f"{len(true_rollouts)} true rollouts cannot fill {folds} folds")
    candidates = [as_schedule(q) for q in candidate_qs]
    if not candidates:
        raise ConfigurationError("no candidate weights given")

    order = np.random.default_rng(seed).permutation(len(true_rollouts))
    splits = np.array_split(order, folds)
    scores = []
    for cand in candidates:
        fold_scores = []
        for held in splits:
            train = np.setdiff1d(order, held)
            batch = assemble_batch(true_rollouts[train], aux_rollouts)
            try:
                est = wls(batch, cand)
            except SingularGramError:
                fold_scores.append(math.inf)
                continue
            fold_scores.append(prediction_mse(est.theta, true_rollouts[held]))
        scores.append(float(np.mean(fold_scores)))

    ranked = sorted(range(len(candidates)),
                    key=lambda i: (scores[i], max(candidates[i].values)))
    best = candidates[ranked[0]]
    choice = best.values[0] if best.kind == "constant" else best
    if return_scores:
        return choice, dict(zip((c.label for c in candidates), scores))
    return choice
