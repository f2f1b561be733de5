"""Finite-sample error bounds for the weighted least squares estimate.

All logarithms are natural. With probability at least ``1 - 4*delta`` and
``min(N_r, N_p) >= max(N_0, N_1)``,

    max(||A_wls - A||, ||B_wls - B||) <= noise_term + bias_term

where, writing ``lam = lambda_min(N_r sum_k S_k + N_p sum_k q_k S^_k)``,

    noise_term = c0 (sqrt(N_r) sw sum_k ||S_k^1/2||
                     + sqrt(N_p) sw^ sum_k q_k ||S^_k^1/2||) / lam
    bias_term  = 9 N_p sum_k q_k ||dTheta_k|| ||S^_k|| / lam
    c0         = 16 sqrt((2n+p) log(9T/delta))

and ``S_k``, ``S^_k`` are the true and auxiliary state-input covariances.
"""

from dataclasses import dataclass, field
import math
from typing import NamedTuple

import numpy as np

from .estimator import as_schedule
from .numerics import max_eig_sym, min_eig_sym, spectral_norm, sqrt_norm_psd, symmetrize
from .systems import ModelDelta, delta_norms, step_covariances


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def thresholds(n, p, horizon, delta):
    """Rollout-count thresholds ``(N_0, N_1)``."""
    _check_delta(delta)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n0 = 8 * (n + p) + 16 * math.log(2 * horizon / delta)
    n1 = (4 * n + 2 * p) * math.log(horizon / delta)
    return n0, n1


def noise_constant(n, p, horizon, delta):
    """``c0 = 16 sqrt((2n+p) log(9T/delta))``."""
    return 16.0 * math.sqrt((2 * n + p) * math.log(9 * horizon / delta))


@dataclass(frozen=True, eq=False)
class BoundInputs:
    """Everything the bound evaluators need.

    `weights` is the per-step weight vector ``q_k`` (k = 0 .. T-1); use
    :meth:`from_models` to build one from two models and a schedule.
    """

    n: int
    p: int
    horizon: int
    n_true: int
    n_aux: int
    delta: float
    sigma_w_true: float
    sigma_w_aux: float
    weights: np.ndarray
    true_covs: tuple
    aux_covs: tuple
    delta_norms: ModelDelta

    def __post_init__(self):
        if not 0 < self.delta < 0.25:
            raise ValueError("delta must lie in (0, 0.25) so that 1 - 4 delta > 0")
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.shape != (self.horizon,) or np.any(w < 0):
            raise ValueError("weights must be horizon nonnegative values")
        object.__setattr__(self, "weights", w)
        if len(self.true_covs) != self.horizon or len(self.aux_covs) != self.horizon:
            raise ValueError("need one covariance per time step")
        if len(self.delta_norms.delta_theta_norms) != self.horizon:
            raise ValueError("need one model-difference norm per time step")

    @classmethod
    def from_models(cls, true_model, aux_model, n_true, n_aux, weights, delta):
        q = as_schedule(weights).step_weights(true_model.horizon, n_true)
        return cls(
            n=true_model.n,
            p=true_model.p,
            horizon=true_model.horizon,
            n_true=n_true,
            n_aux=n_aux,
            delta=delta,
            sigma_w_true=math.sqrt(true_model.sigma_w2),
            sigma_w_aux=math.sqrt(aux_model.sigma_w2),
            weights=q,
            true_covs=tuple(step_covariances(true_model)),
            aux_covs=tuple(step_covariances(aux_model)),
            delta_norms=delta_norms(true_model, aux_model),
        )

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return BoundInputs(**fields)


@dataclass(frozen=True)
class BoundResult:
    noise_term: float
    bias_term: float
    confidence: float
    n0: float
    n1: float
    thresholds_met: bool
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "noise_term", float(self.noise_term))
        object.__setattr__(self, "bias_term", float(self.bias_term))
        object.__setattr__(self, "total", self.noise_term + self.bias_term)


def _result(inputs, noise, bias):
    n0, n1 = thresholds(inputs.n, inputs.p, inputs.horizon, inputs.delta)
    met = min(inputs.n_true, inputs.n_aux) >= max(n0, n1)
    return BoundResult(noise, bias, 1 - 4 * inputs.delta, n0, n1, met)


def theorem1_bound(inputs):
    """Evaluate the two-term bound for per-step weights.

    The bound is returned even when the rollout counts are below the
    thresholds; ``thresholds_met`` records whether it is guaranteed.
    """
    q = inputs.weights
    nr, np_ = inputs.n_true, inputs.n_aux
    gram_lb = nr * sum(inputs.true_covs) + np_ * sum(
        qk * s for qk, s in zip(q, inputs.aux_covs))
    lam = min_eig_sym(symmetrize(gram_lb))
    c0 = noise_constant(inputs.n, inputs.p, inputs.horizon, inputs.delta)
    true_part = math.sqrt(nr) * inputs.sigma_w_true * sum(
        sqrt_norm_psd(s) for s in inputs.true_covs)
    aux_part = math.sqrt(np_) * inputs.sigma_w_aux * sum(
        qk * sqrt_norm_psd(s) for qk, s in zip(q, inputs.aux_covs))
    bias_num = 9 * np_ * sum(
        qk * d * max_eig_sym(s)
        for qk, d, s in zip(q, inputs.delta_norms.delta_theta_norms, inputs.aux_covs))
    return _result(inputs, c0 * (true_part + aux_part) / lam, bias_num / lam)


class CorollaryConstants(NamedTuple):
    c0: float
    c1: float
    c2: float
    c3: float
    m1: np.ndarray
    m2: np.ndarray


def corollary_constants(inputs):
    return CorollaryConstants(
        c0=noise_constant(inputs.n, inputs.p, inputs.horizon, inputs.delta),
        c1=9 * sum(max_eig_sym(s) for s in inputs.aux_covs),
        c2=sum(sqrt_norm_psd(s) for s in inputs.true_covs),
        c3=sum(sqrt_norm_psd(s) for s in inputs.aux_covs),
        m1=symmetrize(sum(inputs.true_covs)),
        m2=symmetrize(sum(inputs.aux_covs)),
    )


def _constant_setting(inputs):
    q = inputs.weights
    if np.ptp(q) != 0:
        raise ValueError("constant-weight bound needs q_k identical for all k")
    d = inputs.delta_norms.delta_theta_norms
    if max(d) - min(d) > 1e-12 * max(1.0, max(d)):
        raise ValueError("constant-weight bound needs a time-invariant auxiliary system")
    return float(q[0]), float(d[0])


def corollary1_bound(inputs):
    """Bound for a time-invariant auxiliary system and a constant weight.

    Returns ``(BoundResult, CorollaryConstants)``.
    """
    q, d = _constant_setting(inputs)
    c = corollary_constants(inputs)
    nr, np_ = inputs.n_true, inputs.n_aux
    lam = min_eig_sym(nr * c.m1 + q * np_ * c.m2)
    noise = c.c0 * (math.sqrt(nr) * inputs.sigma_w_true * c.c2
                    + q * math.sqrt(np_) * inputs.sigma_w_aux * c.c3) / lam
    bias = q * d * np_ * c.c1 / lam
    return _result(inputs, noise, bias), c


class BenefitCheck(NamedTuple):
    holds: bool
    lhs: float
    rhs: float


def aux_benefit_condition(inputs):
    """Sufficient condition for a nonzero weight to shrink the bound.

    ``sw c2 / (sqrt(N_r) lmin(M1)) > sw^ c3 / (sqrt(N_p) lmin(M2))
    + ||dTheta|| c1 / (lmin(M2) c0)``
    """
    _, d = _constant_setting(inputs)
    c = corollary_constants(inputs)
    lam1, lam2 = min_eig_sym(c.m1), min_eig_sym(c.m2)
    lhs = inputs.sigma_w_true * c.c2 / (math.sqrt(inputs.n_true) * lam1)
    rhs = (inputs.sigma_w_aux * c.c3 / (math.sqrt(inputs.n_aux) * lam2)
           + d * c.c1 / (lam2 * c.c0))
    return BenefitCheck(lhs > rhs, lhs, rhs)


# -- intermediate concentration results -----------------------------------------

class PropositionCheck(NamedTuple):
    """One empirical inequality.

    For ``kind == "upper"``: ``empirical <= bound``. For ``kind == "psd"``:
    `empirical` is ``lambda_min(gram - lower)`` and must be ``>= -tol``,
    `bound` is 0.
    """

    kind: str
    empirical: float
    bound: float
    holds: bool


def _psd_check(gram, lower):
    diff = symmetrize(gram - lower)
    margin = min_eig_sym(diff)
    tol = 1e-9 * max(1.0, spectral_norm(gram))
    return PropositionCheck("psd", margin, 0.0, margin >= -tol)


def _upper_check(value, bound):
    return PropositionCheck("upper", value, bound, value <= bound * (1 + 1e-12))


def proposition_terms(batch, inputs):
    """Empirical side and theoretical side of each concentration inequality.

    Keys: ``prop1_gram`` (weighted auxiliary Gram lower bound),
    ``prop1_delta`` (model-difference cross term), ``prop2_gram`` (true
    Gram lower bound), ``prop3_noise`` (auxiliary noise cross term) and
    ``prop4_noise`` (true noise cross term). The batch must carry its
    noise realizations and, for ``prop1_delta``, the Delta matrix.
    """
    q = inputs.weights
    nr, np_ = inputs.n_true, inputs.n_aux
    aux = batch.is_aux
    qcol = q[batch.step[aux]]
    z_true, z_aux = batch.z_mat[:, ~aux], batch.z_mat[:, aux]
    w_true, w_aux = batch.w_mat[:, ~aux], batch.w_mat[:, aux]
    log_term = math.log(9 * inputs.horizon / inputs.delta)
    dim = 2 * inputs.n + inputs.p

    out = {}
    out["prop1_gram"] = _psd_check(
        (z_aux * qcol) @ z_aux.T,
        np_ / 4 * sum(qk * s for qk, s in zip(q, inputs.aux_covs)))
    if batch.delta_mat is not None:
        delta_aux = batch.delta_mat[:, aux]
        bound = 9 * np_ / 4 * sum(
            qk * d * max_eig_sym(s)
            for qk, d, s in zip(q, inputs.delta_norms.delta_theta_norms, inputs.aux_covs))
        out["prop1_delta"] = _upper_check(spectral_norm((delta_aux * qcol) @ z_aux.T), bound)
    out["prop2_gram"] = _psd_check(z_true @ z_true.T, nr / 4 * sum(inputs.true_covs))
    out["prop3_noise"] = _upper_check(
        spectral_norm((w_aux * qcol) @ z_aux.T),
        4 * inputs.sigma_w_aux * math.sqrt(np_ * dim * log_term)
        * sum(qk * sqrt_norm_psd(s) for qk, s in zip(q, inputs.aux_covs)))
    out["prop4_noise"] = _upper_check(
        spectral_norm(w_true @ z_true.T),
        4 * inputs.sigma_w_true * math.sqrt(nr * dim * log_term)
        * sum(sqrt_norm_psd(s) for s in inputs.true_covs))
    return out


def wishart_sqrt_eig_bounds(count, dim, delta):
    """Two-sided bounds on ``sqrt(lambda)`` of a sum of `count` standard
    Gaussian outer products in dimension `dim`, valid w.p. ``1 - delta``."""
    slack = math.sqrt(dim) + math.sqrt(2 * math.log(2 / delta))
    return math.sqrt(count) - slack, math.sqrt(count) + slack


def cross_term_bound(norm_f, norm_g, count, dim_f, dim_g, delta):
    """Bound on ``||sum_i f_i g_i'||`` for independent Gaussian pairs with
    covariance norms `norm_f`, `norm_g`, valid w.p. ``1 - delta``."""
    return (4 * math.sqrt(norm_f) * math.sqrt(norm_g)
            * math.sqrt(count * (dim_f + dim_g) * math.log(9 / delta)))
