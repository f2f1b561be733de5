import numpy as np
import pytest

from auxsysid.estimator import (
    WeightSchedule, column_weights, error_decomposition, error_metrics, select_weight_cv, wls,
)
from auxsysid.exceptions import ConfigurationError, SingularGramError
from auxsysid.simulate import BatchData, RolloutSet, assemble_batch, simulate_rollouts
from auxsysid.systems import SystemModel

from conftest import power_iteration_norm


def synthetic_batch(x, z, source, step=None):
    x, z, source = np.atleast_2d(x), np.atleast_2d(z), np.asarray(source)
    step = np.zeros(len(source), int) if step is None else np.asarray(step)
    return BatchData(x, z, np.zeros_like(x), None, int((source == 0).sum()),
                     int((source == 1).sum()), 1, source, np.arange(len(source)), step)


def objective(theta, batch, qcol):
    r = (batch.x_mat - theta @ batch.z_mat) * np.sqrt(qcol)
    return float(np.sum(r ** 2))


@pytest.fixture
def sim_batch(models):
    true, aux = models
    tr = simulate_rollouts(true, 40, 1)
    ar = simulate_rollouts(aux, 90, 1, system="aux")
    return assemble_batch(tr, ar, true, aux), tr, ar


def test_exact_recovery_noiseless(models):
    true, _ = models
    quiet = true.with_(sigma_w2=0.0)
    batch = assemble_batch(simulate_rollouts(quiet, 10, 0),
                           simulate_rollouts(quiet, 10, 0, system="aux"), quiet, quiet)
    for q in (0, 1, 1e10):
        est = wls(batch, q)
        np.testing.assert_allclose(est.theta, true.theta(), atol=1e-10)


def test_identity_gram_example():
    batch = synthetic_batch([[0.5, 1.0]], np.eye(2), [0, 0])
    np.testing.assert_allclose(wls(batch, 1.0).theta, [[0.5, 1.0]], atol=1e-15)


@pytest.mark.parametrize("q", [0.0, 0.25, 1.0, 3.0])
def test_scalar_blend(q):
    batch = synthetic_batch([[0.6, 0.7]], [[1.0, 1.0]], [0, 1])
    assert wls(batch, q).theta[0, 0] == pytest.approx((0.6 + 0.7 * q) / (1 + q), rel=1e-14)
    if q == 1.0:
        assert wls(batch, q).theta[0, 0] == pytest.approx(0.65, rel=1e-14)


def test_partition_and_metadata(sim_batch):
    batch, _, _ = sim_batch
    est = wls(batch, WeightSchedule.constant(0.5))
    np.testing.assert_array_equal(est.theta, np.hstack([est.a_hat, est.b_hat]))
    assert est.a_hat.shape == (3, 3) and est.b_hat.shape == (3, 2)
    assert est.n_columns == (40 + 90) * 2
    assert est.gram_min_eig == pytest.approx(np.linalg.eigvalsh(est.gram)[0], rel=1e-10)
    qcol = column_weights(batch, 0.5)
    np.testing.assert_allclose(est.gram, (batch.z_mat * qcol) @ batch.z_mat.T, rtol=1e-12)


def test_gradient_vanishes(sim_batch):
    batch, _, _ = sim_batch
    for q in (0.0, 0.3, 1.0, [0.2, 2.0]):
        est = wls(batch, q)
        qcol = column_weights(batch, q)
        xqz = (batch.x_mat * qcol) @ batch.z_mat.T
        grad = 2 * (est.theta @ est.gram - xqz)
        assert np.linalg.norm(grad, 2) <= 1e-8 * np.linalg.norm(xqz, 2)


def test_objective_minimal(sim_batch, rng):
    batch, _, _ = sim_batch
    qcol = column_weights(batch, 0.7)
    est = wls(batch, 0.7)
    base = objective(est.theta, batch, qcol)
    for _ in range(20):
        e = rng.standard_normal(est.theta.shape)
        e /= np.linalg.norm(e)
        for sign in (1, -1):
            assert objective(est.theta + sign * 1e-4 * e, batch, qcol) >= base


def test_weight_scale_invariance(sim_batch):
    batch, _, _ = sim_batch
    base = wls(batch, 0.4).theta
    # c*Q for every column: true weight c, aux weight 0.4c -> ratio unchanged
    scaled = BatchData(batch.x_mat * 1, batch.z_mat, batch.w_mat, batch.delta_mat,
                       batch.n_true, batch.n_aux, batch.horizon, batch.source,
                       batch.rollout, batch.step)
    for c in (1e-3, 7.0, 1e6):
        qcol = column_weights(batch, 0.4) * c
        g = (batch.z_mat * qcol) @ batch.z_mat.T
        theta = np.linalg.solve(g, (batch.z_mat * qcol) @ batch.x_mat.T).T
        np.testing.assert_allclose(theta, base, atol=1e-9)
    assert not np.allclose(wls(scaled, 4.0).theta, base, atol=1e-6)


def test_reductions(sim_batch):
    batch, _, _ = sim_batch
    pooled = np.linalg.lstsq(batch.z_mat.T, batch.x_mat.T, rcond=None)[0].T
    np.testing.assert_allclose(wls(batch, 1.0).theta, pooled, atol=1e-10)
    t = ~batch.is_aux
    true_only = np.linalg.lstsq(batch.z_mat[:, t].T, batch.x_mat[:, t].T, rcond=None)[0].T
    np.testing.assert_allclose(wls(batch, 0.0).theta, true_only, atol=1e-10)


def test_extreme_weight_is_aux_only(sim_batch):
    batch, _, _ = sim_batch
    a = batch.is_aux
    aux_only = np.linalg.lstsq(batch.z_mat[:, a].T, batch.x_mat[:, a].T, rcond=None)[0].T
    np.testing.assert_allclose(wls(batch, 1e10).theta, aux_only, atol=1e-8)


def test_permutation_invariance(models, rng):
    true, aux = models
    tr = simulate_rollouts(true, 25, 2)
    ar = simulate_rollouts(aux, 35, 2, system="aux")
    base = wls(assemble_batch(tr, ar), 0.6).theta
    shuffled = wls(assemble_batch(tr[rng.permutation(25)], ar[rng.permutation(35)]), 0.6).theta
    np.testing.assert_allclose(shuffled, base, atol=1e-10)


def test_decomposition_identity(models):
    true, aux = models
    for seed in range(10):
        batch = assemble_batch(simulate_rollouts(true, 20, seed),
                               simulate_rollouts(aux, 20, seed, system="aux"), true, aux)
        for q in (0.0, 0.5, [1.0, 0.1]):
            d = error_decomposition(batch, q)
            err = wls(batch, q).theta - true.theta()
            np.testing.assert_allclose(d.noise_term + d.bias_term, err, rtol=0, atol=1e-9)


def test_decomposition_special_cases(models):
    true, aux = models
    same = assemble_batch(simulate_rollouts(true, 20, 0),
                          simulate_rollouts(true, 20, 0, system="aux"), true, true)
    assert np.all(error_decomposition(same, 1.0).bias_term == 0)
    qt, qa = true.with_(sigma_w2=0.0), aux.with_(sigma_w2=0.0)
    quiet = assemble_batch(simulate_rollouts(qt, 20, 0),
                           simulate_rollouts(qa, 20, 0, system="aux"), qt, qa)
    assert np.all(error_decomposition(quiet, 1.0).noise_term == 0)


def test_decomposition_needs_models(models):
    true, _ = models
    batch = assemble_batch(simulate_rollouts(true, 5, 0))
    with pytest.raises(ConfigurationError):
        error_decomposition(batch, 1.0)


def test_singular_gram_and_ridge():
    model = SystemModel.lti(np.eye(2), np.ones((2, 1)), horizon=1)
    batch = assemble_batch(simulate_rollouts(model, 2, 0))
    with pytest.raises(SingularGramError) as info:
        wls(batch, 1.0)
    assert info.value.n_columns == 2
    est = wls(batch, 1.0, ridge=True)
    assert est.ridge > 0 and np.all(np.isfinite(est.theta))


def test_zero_weight_everywhere_is_singular(models):
    true, aux = models
    batch = assemble_batch(RolloutSet.empty(2, 3, 2, system="true"),
                           simulate_rollouts(aux, 10, 0, system="aux"))
    with pytest.raises(SingularGramError):
        wls(batch, 0.0)


def test_error_metrics_examples(models):
    true, _ = models
    assert tuple(error_metrics(true.theta(), true.theta())) == (0.0, 0.0, 0.0)
    est = true.theta().copy()
    est[1, 2] += 0.3
    m = error_metrics(est, true.theta())
    assert m.err_theta == pytest.approx(0.3, rel=1e-12)
    assert m.err_a == pytest.approx(0.3, rel=1e-12)
    assert m.err_b == 0.0


def test_error_metrics_against_power_iteration(rng):
    truth = np.zeros((3, 5))
    for seed in range(10):
        err = rng.standard_normal((3, 5))
        m = error_metrics(err, truth)
        assert m.err_theta == pytest.approx(power_iteration_norm(err, seed=seed), rel=1e-8)
        assert m.err_a == pytest.approx(power_iteration_norm(err[:, :3], seed=seed), rel=1e-8)
        assert m.err_b == pytest.approx(power_iteration_norm(err[:, 3:], seed=seed), rel=1e-8)
        assert max(m.err_a, m.err_b) <= m.err_theta * (1 + 1e-12)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        WeightSchedule.constant(-1)
    with pytest.raises(ConfigurationError):
        WeightSchedule("nope", (1,))
    with pytest.raises(ConfigurationError):
        WeightSchedule.per_step([1.0, 2.0]).step_weights(3)
    np.testing.assert_allclose(WeightSchedule.decaying(2).step_weights(2, 16), [0.5, 0.5])
    assert WeightSchedule.constant(1e10).label == "q=1e+10"


# -- cross-validation ----------------------------------------------------------

def test_cv_single_candidate(models):
    true, aux = models
    tr = simulate_rollouts(true, 10, 0)
    ar = simulate_rollouts(aux, 10, 0, system="aux")
    assert select_weight_cv(tr, ar, [0.0], folds=2, seed=0) == 0.0


def test_cv_configuration_errors(models):
    true, aux = models
    tr = simulate_rollouts(true, 3, 0)
    with pytest.raises(ConfigurationError):
        select_weight_cv(tr, None, [0.0, 1.0], folds=5)
    with pytest.raises(ConfigurationError):
        select_weight_cv(tr, None, [0.0], folds=1)
    with pytest.raises(ConfigurationError):
        select_weight_cv(tr, None, [], folds=2)


def test_cv_ties_prefer_smaller(models):
    true, _ = models
    tr = simulate_rollouts(true, 20, 0)
    # no aux data: every candidate gives the same fit
    assert select_weight_cv(tr, None, [2.0, 0.5, 1.0], folds=4, seed=1) == 0.5


def test_cv_prefers_helpful_aux(models):
    true, _ = models
    quiet = true.with_(sigma_w2=0.0)
    wins = 0
    for rep in range(20):
        tr = simulate_rollouts(true, 30, 100 + rep)
        ar = simulate_rollouts(quiet, 30, 100 + rep, system="aux")
        wins += select_weight_cv(tr, ar, [0.0, 1.0], folds=5, seed=rep) == 1.0
    assert wins > 10


def test_cv_rejects_bad_aux(models):
    true, _ = models
    a = np.array(true.a(0))
    a[0, 0] += 10.0
    far = SystemModel.lti(a, true.b(0), horizon=2)
    wins = 0
    for rep in range(20):
        tr = simulate_rollouts(true, 200, 200 + rep)
        ar = simulate_rollouts(far, 200, 200 + rep, system="aux")
        wins += select_weight_cv(tr, ar, [0.0, 10.0], folds=5, seed=rep) == 0.0
    assert wins > 10
