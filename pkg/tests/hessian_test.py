import math

import numpy as np
import pytest

from qspectral.consts import READOUT_CONST
from qspectral.corpus import get_entry, hessian_quadratic_entry
from qspectral.exceptions import ParameterError, ResourceLimitError
from qspectral.findiff import FindiffParams
from qspectral.hessian import (HessianEstimator, HessianJob, HessianResult, check_findiff_condition, column_failure,
                               estimate_hessian, estimate_hessian_dense, hessian_spectral_params, plan_dense)
from qspectral.oracle import FunctionOracle, KnownTruth, QueryLedger
from qspectral.spectral import derivative_error_bound
from qspectral.sparse import SparseResult

# entries (2k + 1)/128 decode exactly at n_eps = 6, n_M = 2
GRID_H = np.array([[65, -33],
                   [-33, 13]]) / 128


def test_column_failure_union():
    for d in (1, 2, 5, 20):
        rho_col = column_failure(d, 0.1)
        assert (1 - rho_col) ** d >= 0.9
        assert np.isclose(rho_col, 0.1 / (d + 0.1))


def test_spectral_params():
    entry = get_entry('quartic_d3')
    params = hessian_spectral_params(entry.oracle, 0.1)
    assert params.N >= 3
    assert np.isclose(params.r_tilde, 2 / 3) and np.isclose(params.delta, 1 / 3)
    assert derivative_error_bound(params, 2) <= 0.1 / READOUT_CONST
    with pytest.raises(ParameterError):
        hessian_spectral_params(FunctionOracle(lambda Z: Z[..., 0], 1), 0.1)


def test_findiff_condition():
    check_findiff_condition(2, 100.0, 0.1, 8)
    check_findiff_condition(2, 0.0, 0.1, 1)
    with pytest.raises(ParameterError):
        check_findiff_condition(2, 100.0, 0.1, 1)


def test_job_validation():
    oracle = get_entry('quad_dense_d2').oracle
    with pytest.raises(ParameterError):
        HessianJob(oracle, 'spectral-diagonal')
    with pytest.raises(ParameterError):
        HessianJob(oracle, epsilon=1.0)
    with pytest.raises(ParameterError):
        HessianJob(oracle, probe_mode='loud')
    with pytest.raises(ParameterError):
        HessianJob(FunctionOracle(lambda Z: Z[..., 0], 1))
    assert HessianJob(oracle, 'spectral-sparse', epsilon=2.0, s=1).sparse


def test_dense_plan():
    entry = hessian_quadratic_entry('grid_quad', GRID_H, hess_bound=1.0)
    dplan = plan_dense(HessianJob(entry.oracle, epsilon=0.1, rho=0.1))
    assert (dplan.grid.n_eps, dplan.grid.n_M) == (6, 2)
    assert dplan.grid.T == math.ceil(3 * math.log(2 / column_failure(2, 0.1)))
    assert dplan.y_scale == 1.0 and dplan.N_or_m == dplan.spectral.N


def test_grid_exact_columns():
    entry = hessian_quadratic_entry('grid_quad', GRID_H, hess_bound=1.0)
    estimator = HessianEstimator(entry.oracle)
    for seed in range(10):
        res = estimator.estimate(0.1, 0.1, np.random.default_rng(seed), ledger=QueryLedger())
        np.testing.assert_array_equal(res.H, GRID_H)
        assert res.asymmetry == 0.0
    assert len(estimator.fields) == 1 and len(estimator.distributions) == 2


def test_one_dimensional():
    entry = get_entry('exp_d1')
    estimator = HessianEstimator(entry.oracle)
    hits = sum(abs(estimator.estimate(0.1, 0.1, seed, ledger=QueryLedger()).H[0, 0] - 1.0) <= 0.1
               for seed in range(10))
    assert hits >= 9


def test_findiff_dense_probe_path():
    entry = get_entry('quad_dense_d2')
    estimator = HessianEstimator(entry.oracle, 'findiff-dense')
    hits = 0
    for seed in range(10):
        res = estimator.estimate(0.1, 0.1, np.random.default_rng(seed), ledger=QueryLedger())
        hits += np.abs(res.H - entry.truth.hessian).max() <= 0.1
        assert np.allclose(res.H, res.H.T)
    assert res.plan.findiff.m == 1
    assert hits >= 9


def test_findiff_dense_gevrey_path():
    truth = KnownTruth(gradient=np.ones(1), hessian=np.ones((1, 1)), radius=1.0, kappa=math.e, hess_bound=2.0,
                       deriv_bound=lambda k: math.e, gevrey_c=1.0)
    oracle = FunctionOracle(lambda Z: np.exp(Z[..., 0]), 1, name='exp', truth=truth)
    estimator = HessianEstimator(oracle, 'findiff-dense', findiff_path='gevrey')
    hits = 0
    for seed in range(10):
        res = estimator.estimate(0.1, 0.1, np.random.default_rng(seed), ledger=QueryLedger())
        hits += abs(res.H[0, 0] - 1.0) <= 0.1
    assert np.isclose(res.plan.y_scale, res.plan.findiff.a / 2)
    assert hits >= 9


def test_gevrey_path_needs_constant():
    job = HessianJob(get_entry('exp_d1').oracle, 'findiff-dense', findiff_path='gevrey')
    with pytest.raises(ParameterError):
        plan_dense(job)


def test_dense_cap():
    job = HessianJob(get_entry('quartic_d3').oracle, epsilon=0.01)
    with pytest.raises(ResourceLimitError):
        plan_dense(job, cap=2 ** 16)


def test_ledger_grows_linearly_in_d():
    calls = {}
    for d in (2, 3):
        entry = hessian_quadratic_entry(f'quad_d{d}', 0.25 * np.eye(d))
        res = HessianEstimator(entry.oracle).estimate(0.1, 0.1, np.random.default_rng(0), ledger=QueryLedger())
        # two form queries per repetition and column
        assert res.ledger.simulated_oracle_calls == 2 * d * res.plan.grid.T
        calls[d] = res.ledger.simulated_oracle_calls
    assert (calls[2], calls[3]) == (48, 84)
    assert calls[3] / calls[2] == 1.75


def test_explicit_params():
    entry = get_entry('quad_dense_d2')
    res = HessianEstimator(entry.oracle, 'findiff-dense').estimate(
        0.1, 0.1, np.random.default_rng(0), params=FindiffParams(2, 0.3, 'probe'), ledger=QueryLedger())
    assert res.plan.grid.a == 0.3 and res.plan.N_or_m == 2


def test_dispatch():
    dense = estimate_hessian(HessianJob(get_entry('quad_dense_d2').oracle), np.random.default_rng(0))
    assert isinstance(dense, HessianResult)
    sparse = estimate_hessian(HessianJob(get_entry('quad_sparse_d8').oracle, 'spectral-sparse', epsilon=1 / 7,
                                         M=1.0, s=2, q=7), np.random.default_rng(0))
    assert isinstance(sparse, SparseResult)


@pytest.mark.slow
def test_dense_quartic_acceptance():
    entry = get_entry('quartic_d3')
    estimator = HessianEstimator(entry.oracle)
    hits = 0
    for seed in range(20):
        res = estimator.estimate(0.1, 0.1, np.random.default_rng(seed), ledger=QueryLedger())
        hits += np.abs(res.H - entry.truth.hessian).max() <= 0.1
    assert hits >= 18


def test_estimate_hessian_dense_job():
    entry = hessian_quadratic_entry('grid_quad', GRID_H, hess_bound=1.0)
    res = estimate_hessian_dense(HessianJob(entry.oracle.with_ledger()), np.random.default_rng(3))
    np.testing.assert_array_equal(res.H, GRID_H)
    with pytest.raises(ParameterError):
        estimate_hessian_dense(HessianJob(entry.oracle, 'spectral-sparse', s=1), 0)


def test_joint_success_rate_d3():
    # per-column failure rho/(d + rho) keeps all three columns within epsilon with probability >= 1 - rho
    H = np.array([[0.2, 0.05, -0.1],
                  [0.05, -0.15, 0.07],
                  [-0.1, 0.07, 0.12]])
    entry = hessian_quadratic_entry('joint_quad_d3', H, hess_bound=0.25)
    estimator = HessianEstimator(entry.oracle)
    hits = 0
    for seed in range(50):
        res = estimator.estimate(0.1, 0.1, np.random.default_rng(seed), ledger=QueryLedger())
        hits += np.abs(res.H - H).max() <= 0.1
    assert hits >= 45
    assert len(estimator.distributions) == 3
