import math

import numpy as np
import pytest

from qspectral.corpus import QUAD_SPARSE_D8_L, get_entry, hessian_quadratic_entry
from qspectral.exceptions import AmbiguousRecoveryError, InconsistentResiduesError, ParameterError, RecoveryError
from qspectral.hessian import HessianJob
from qspectral.sparse import (SparseRecoveryParams, ZqMatrix, collision_rate, dense_threshold, estimate_hessian_sparse,
                              leakage_bound, make_probes, predicted_calls, probe_count, probe_repeats,
                              recover_sparse_rows, select_q, sparse_probe_measure)


def lattice_oracle(L, q, M=1.0, E=None, name='lattice'):
    H = M * np.asarray(L) / q
    if E is not None:
        H = H + E
    return hessian_quadratic_entry(name, H, hess_bound=M).oracle


def sparse_job(oracle, method='spectral-sparse', **kwargs):
    kwargs.setdefault('q', 7)
    kwargs.setdefault('M', 1.0)
    return HessianJob(oracle.with_ledger(), method, epsilon=1 / kwargs['q'], rho=0.1, **kwargs)


def test_params_validation():
    with pytest.raises(ParameterError):
        SparseRecoveryParams(q=9, k=3)
    with pytest.raises(ParameterError):
        SparseRecoveryParams(q=7, k=0)
    with pytest.raises(ParameterError):
        SparseRecoveryParams(q=7, k=3, probe_kind='gaussian')
    with pytest.raises(ParameterError):
        SparseRecoveryParams(q=7, k=3, s=-1)


def test_probe_scales():
    assert SparseRecoveryParams(7, 3).calls_per_measurement(8) == 1
    signed = SparseRecoveryParams(7, 3, 'signed')
    assert np.isclose(signed.probe_scale(8), 1 / math.sqrt(8))
    assert signed.calls_per_measurement(8) == 3
    assert signed.calls_per_measurement(4) == 2
    scaled = SparseRecoveryParams(7, 3, 'scaled', s=2, alpha=4)
    assert scaled.probe_scale(8) == 1 / 8
    assert scaled.calls_per_measurement(8) == 8
    assert np.isclose(scaled.phase_scale(8), 7 * 8)


def test_sizes():
    assert select_q(1.0, 1.0) == 5
    assert select_q(1.0, 0.5) == 11
    assert probe_count(2, 7, 8) == 17
    assert probe_count(0, 7, 8) == 1
    assert probe_repeats(8) == 7
    assert probe_repeats(1) == 1
    assert dense_threshold(10, 7, 6) == 2
    with pytest.raises(ParameterError):
        select_q(0.0, 0.1)


def test_zq_matrix():
    L = ZqMatrix(np.array([[8, -4], [3, 0]]), 7)
    np.testing.assert_array_equal(L.entries, [[1, 3], [3, 0]])
    assert L.is_symmetric() and L.d == 2
    assert L == ZqMatrix(np.array([[1, 3], [-4, 7]]), 7)
    np.testing.assert_allclose(L.scaled(2.0), 2 * L.entries / 7)


def test_make_probes():
    rng = np.random.default_rng(0)
    assert set(np.unique(make_probes('binary', 50, 6, rng))) <= {0, 1}
    assert set(np.unique(make_probes('signed', 50, 6, rng))) == {-1, 1}
    assert make_probes('scaled', 4, 3, rng).shape == (4, 3)


@pytest.mark.parametrize('fast_path', [True, False])
def test_residue_of_single_probe(fast_path):
    q = 7
    L = np.zeros((4, 4), dtype=int)
    L[0] = [0, 3, 0, -2]
    L[:, 0] = [0, 3, 0, -2]
    oracle = lattice_oracle(L, q)
    params = SparseRecoveryParams(q, 1)
    residues = sparse_probe_measure(oracle, np.ones(4, dtype=int), params, np.random.default_rng(0),
                                    fast_path=fast_path)
    np.testing.assert_array_equal(residues, [1, 3, 0, -2])
    zero = sparse_probe_measure(oracle, np.zeros(4, dtype=int), params, np.random.default_rng(0),
                                fast_path=fast_path)
    np.testing.assert_array_equal(zero, 0)


def test_probe_measure_charges_ledger():
    oracle = get_entry('quad_sparse_d8').oracle.with_ledger()
    params = SparseRecoveryParams(7, 1, 'signed', s=2, repeats=4)
    sparse_probe_measure(oracle, np.ones(8, dtype=int), params, np.random.default_rng(0), ledger=oracle.ledger)
    assert oracle.ledger.simulated_oracle_calls == 4 * 3
    assert oracle.ledger.theoretical_cost > 0


def test_probe_length_checked():
    oracle = get_entry('quad_sparse_d8').oracle
    with pytest.raises(ParameterError):
        sparse_probe_measure(oracle, np.ones(3, dtype=int), SparseRecoveryParams(7, 1), 0)


def test_recover_from_exact_residues():
    rng = np.random.default_rng(3)
    params = SparseRecoveryParams(7, 17, s=2)
    Y = make_probes('binary', 17, 8, rng)
    B = (Y @ QUAD_SPARSE_D8_L.T) % 7
    L = recover_sparse_rows(Y, B, params)
    np.testing.assert_array_equal(L.entries, QUAD_SPARSE_D8_L)


def test_ambiguous_with_one_probe():
    params = SparseRecoveryParams(7, 1, s=1)
    with pytest.raises(AmbiguousRecoveryError) as info:
        recover_sparse_rows(np.array([[1, 1, 0]]), np.array([[1, 0, 0]]), params)
    assert info.value.row == 0


def test_underdetermined_support_is_ambiguous():
    params = SparseRecoveryParams(7, 1, s=1)
    with pytest.raises(AmbiguousRecoveryError):
        recover_sparse_rows(np.array([[1, 0]]), np.array([[0, 0]]), params)


def test_dense_row_needs_remeasure():
    Y = np.array([[1, 0], [0, 1], [1, 1]])
    L = np.array([[1, 1], [1, 0]])
    B = (Y @ L.T) % 7
    params = SparseRecoveryParams(7, 3, s=1)
    with pytest.raises(InconsistentResiduesError) as info:
        recover_sparse_rows(Y, B, params)
    assert info.value.row == 0
    recovered = recover_sparse_rows(Y, B, params, remeasure=lambda i: L[:, i])
    np.testing.assert_array_equal(recovered.entries, L)
    with pytest.raises(InconsistentResiduesError):
        recover_sparse_rows(Y, B, params, remeasure=lambda i: np.array([2, 1]))


def test_asymmetric_residues_rejected():
    params = SparseRecoveryParams(7, 2, s=1)
    with pytest.raises(InconsistentResiduesError):
        recover_sparse_rows(np.eye(2, dtype=int), np.array([[0, 0], [1, 0]]), params)


def test_zero_matrix():
    oracle = lattice_oracle(np.zeros((4, 4), dtype=int), 7)
    res = estimate_hessian_sparse(sparse_job(oracle, s=0), np.random.default_rng(0))
    assert res.params.k == 1
    np.testing.assert_array_equal(res.H, np.zeros((4, 4)))


def test_exact_recovery_d8():
    entry = get_entry('quad_sparse_d8')
    successes = 0
    for seed in range(20):
        job = sparse_job(entry.oracle, s=2)
        try:
            res = estimate_hessian_sparse(job, np.random.default_rng(seed))
        except RecoveryError:
            continue
        successes += np.array_equal(res.L.entries, QUAD_SPARSE_D8_L)
        assert (res.params.k, res.params.repeats) == (17, 7)
        calls = res.ledger.simulated_oracle_calls
        assert calls == 17 * 7
        assert calls <= 4 * 2 * math.log(7 * 8) * res.params.repeats * res.params.calls_per_measurement(8)
    assert successes >= 18


def test_noisy_recovery_d8():
    q, s = 7, 2
    eta = 1 / (20 * s * q)
    E = eta * np.sign(QUAD_SPARSE_D8_L)
    oracle = lattice_oracle(QUAD_SPARSE_D8_L, q, E=E, name='noisy_lattice')
    successes = 0
    for seed in range(20):
        try:
            res = estimate_hessian_sparse(sparse_job(oracle, s=s), np.random.default_rng(seed))
        except RecoveryError:
            continue
        successes += np.array_equal(res.L.entries, QUAD_SPARSE_D8_L)
    assert successes >= 18


def test_noisy_residue_rate():
    q, s = 7, 2
    eta = 1 / (20 * s * q)
    E = eta * np.sign(QUAD_SPARSE_D8_L)
    oracle = lattice_oracle(QUAD_SPARSE_D8_L, q, E=E)
    params = SparseRecoveryParams(q, 1, s=s)
    rng = np.random.default_rng(11)
    exact = 0
    trials = 1000
    for _ in range(trials):
        y = rng.integers(0, 2, size=8)
        residues = sparse_probe_measure(oracle, y, params, rng)
        exact += np.count_nonzero(residues == ((QUAD_SPARSE_D8_L @ y + 3) % q - 3))
    assert exact / (8 * trials) >= 0.99


def test_leakage_bound():
    assert np.isclose(leakage_bound(7, 2, 1 / 280), math.pi ** 2 * 49 * 4 / 280 ** 2 / 4)
    assert np.isclose(leakage_bound(7, 2, 1 / 280, d=8), leakage_bound(7, 2, 1 / 280) / 8)


def test_findiff_to_spectral_cost_ratio():
    entry = get_entry('quad_sparse_d8')
    calls = {}
    for method in ('spectral-sparse', 'findiff-sparse'):
        job = sparse_job(entry.oracle, method, s=2)
        try:
            estimate_hessian_sparse(job, np.random.default_rng(0))
        except RecoveryError:
            pass
        calls[method] = job.oracle.ledger.simulated_oracle_calls
    ratio = calls['findiff-sparse'] / calls['spectral-sparse']
    assert ratio == 3
    assert 0.5 * math.sqrt(8) <= ratio <= 2 * math.sqrt(8)


def test_findiff_sparse_recovers():
    entry = get_entry('quad_sparse_d8')
    successes = 0
    for seed in range(10):
        try:
            res = estimate_hessian_sparse(sparse_job(entry.oracle, 'findiff-sparse', s=2), np.random.default_rng(seed))
        except RecoveryError:
            continue
        assert res.params.probe_kind == 'signed'
        successes += np.array_equal(res.L.entries, QUAD_SPARSE_D8_L)
    assert successes >= 8


def test_scaled_probe_mode():
    entry = get_entry('quad_sparse_d8')
    successes = 0
    for seed in range(10):
        job = sparse_job(entry.oracle, s=2, probe_mode='scaled')
        try:
            res = estimate_hessian_sparse(job, np.random.default_rng(seed))
        except RecoveryError:
            continue
        assert res.params.probe_kind == 'scaled'
        assert res.ledger.simulated_oracle_calls == res.params.k * res.params.repeats * 8
        successes += np.array_equal(res.L.entries, QUAD_SPARSE_D8_L)
    assert successes >= 8


@pytest.mark.parametrize('k, minimum', [(8, 40), (12, 48)])
def test_probe_count_success_rate(k, minimum):
    q = 5
    L = np.diag([1, 2, -1, -2, 1, 2])
    oracle = lattice_oracle(L, q)
    successes = 0
    for seed in range(50):
        job = sparse_job(oracle, s=1, q=q, probe_count=k, probe_repeats=1)
        try:
            res = estimate_hessian_sparse(job, np.random.default_rng(seed))
        except RecoveryError:
            continue
        successes += np.array_equal(res.L.entries, L)
    assert successes >= minimum


def test_dense_row_fallback():
    d, q = 6, 7
    L = np.zeros((d, d), dtype=int)
    L[0, 1:] = 1
    L[1:, 0] = 1
    oracle = lattice_oracle(L, q)
    res = estimate_hessian_sparse(sparse_job(oracle, m_total=10), np.random.default_rng(4))
    assert res.params.s == 2
    assert res.dense_rows == (0,)
    np.testing.assert_array_equal(res.L.entries, L)
    assert res.ledger.simulated_oracle_calls == (res.params.k + 1) * res.params.repeats


def test_collision_rate():
    rng = np.random.default_rng(5)
    a = np.array([1, 2, 0, 0, -1])
    b = np.array([1, 2, 0, 3, -1])
    rate = collision_rate(a, b, 7, 10_000, rng)
    assert rate <= 0.5 + 4 * math.sqrt(0.25 / 10_000)
    assert collision_rate(a, a, 7, 100, rng) == 1.0


def test_predicted_calls():
    params = SparseRecoveryParams(7, 17, s=2)
    assert np.isclose(predicted_calls(params, 8, 1 / 7), 2 * math.log(56) * 7)
    signed = SparseRecoveryParams(7, 17, 'signed', s=2)
    assert np.isclose(predicted_calls(signed, 8, 1 / 7), 2 * math.log(56) * 7 * math.sqrt(8))


def test_requires_sparsity():
    with pytest.raises(ParameterError):
        estimate_hessian_sparse(sparse_job(get_entry('quad_sparse_d8').oracle), np.random.default_rng(0))
    with pytest.raises(ParameterError):
        estimate_hessian_sparse(HessianJob(get_entry('quad_dense_d2').oracle), np.random.default_rng(0))
