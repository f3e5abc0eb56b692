import math

import numpy as np
import pytest

from qspectral.consts import READOUT_CONST
from qspectral.exceptions import ResourceLimitError
from qspectral.grid import GridSpec, SqSpec, label_to_value, mesh
from qspectral.oracle import QueryLedger
from qspectral.sampler import (PhaseField, StateVector, axis_distribution, build_state, inverse_qft_axiswise,
                               jordan_sample, outcome_distribution, qft_axiswise, sample_labels, sample_many,
                               sample_outcome, zq_transform, zq_transform_axis)


def random_state(spec, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=spec.shape) + 1j * rng.normal(size=spec.shape)
    return StateVector(spec, amps / np.linalg.norm(amps))


@pytest.mark.parametrize('n, d', [(1, 1), (4, 1), (3, 2), (5, 4), (10, 2)])
def test_round_trip_and_norm(n, d):
    state = random_state(GridSpec(n, d), seed=n * 10 + d)
    forward = qft_axiswise(state)
    assert abs(forward.norm() - 1) <= 1e-9
    back = inverse_qft_axiswise(forward)
    np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-9)


def test_qft_matrix_entries():
    n = 3
    spec = GridSpec(n, 1)
    labels = spec.labels()
    for col, l in enumerate(labels):
        basis = np.zeros(spec.axis_size, dtype=complex)
        basis[col] = 1
        out = qft_axiswise(StateVector(spec, basis)).amplitudes
        expected = np.exp(2j * np.pi * (l + 0.5) * (labels + 0.5) / 2 ** n) / math.sqrt(2 ** n)
        np.testing.assert_allclose(out, expected, atol=1e-12)


def test_linear_phase_decodes_exactly():
    spec = GridSpec(4, 2)
    target = (3, -5)
    v = np.array([label_to_value(spec, k) for k in target])
    phase = (2 ** spec.n * mesh(spec) @ v).reshape(spec.shape)
    probs = outcome_distribution(PhaseField(spec, phase))
    index = tuple(k - spec.min_label for k in target)
    assert np.isclose(probs[index], 1.0)
    assert np.isclose(probs.sum(), 1.0)


def test_zq_axis_transform():
    q = 7
    spec = SqSpec(q, 1)
    for b in spec.labels():
        amps = np.exp(2j * np.pi * spec.labels() * b / q) / math.sqrt(q)
        probs = np.abs(zq_transform_axis(amps)) ** 2
        assert np.isclose(probs[b - spec.min_label], 1.0)


def test_zq_full_state_matches_axes():
    q = 5
    spec = SqSpec(q, 2)
    k = spec.labels() / q
    phase = np.add.outer(2 * k, -1 * k)
    probs = outcome_distribution(PhaseField(spec, phase))
    assert np.isclose(probs[2 - spec.min_label, -1 - spec.min_label], 1.0)
    state = build_state(PhaseField(spec, phase))
    assert abs(zq_transform(state).norm() - 1) <= 1e-9


def test_product_distribution():
    spec = GridSpec(3, 2)
    x = spec.values()
    phi1, phi2 = 1.7 * x ** 2, -0.6 * x
    probs = outcome_distribution(PhaseField(spec, np.add.outer(phi1, phi2)))
    expected = np.outer(axis_distribution(phi1, spec), axis_distribution(phi2, spec))
    np.testing.assert_allclose(probs, expected, atol=1e-12)


def test_born_rule_frequencies():
    spec = GridSpec(2, 1)
    amps = np.zeros(4, dtype=complex)
    amps[0], amps[3] = math.sqrt(0.3), 1j * math.sqrt(0.7)
    samples = sample_labels(StateVector(spec, amps).probabilities(), spec, 10_000, np.random.default_rng(7))
    freq = np.mean(samples[:, 0] == spec.min_label)
    assert abs(freq - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / 10_000)
    assert set(np.unique(samples[:, 0])) <= {spec.min_label, spec.max_label}


def test_outcomes_carry_values():
    spec = GridSpec(3, 2)
    state = random_state(spec, seed=3)
    outcome = sample_outcome(state, np.random.default_rng(0))
    assert outcome.values == tuple(label_to_value(spec, k) for k in outcome.labels)
    many = sample_many(state, 5, np.random.default_rng(0))
    assert len(many) == 5 and many[0] == outcome


def test_amplitude_cap():
    spec = GridSpec(4, 2)
    with pytest.raises(ResourceLimitError):
        build_state(PhaseField(spec, np.zeros(spec.shape)), cap=100)


def test_amplitude_cap_from_environment(monkeypatch):
    monkeypatch.setenv('QSPECTRAL_AMPLITUDE_CAP', '16')
    spec = GridSpec(3, 2)
    with pytest.raises(ResourceLimitError):
        build_state(PhaseField(spec, np.zeros(spec.shape)))


def test_phase_field_shape_checked():
    with pytest.raises(AssertionError):
        PhaseField(GridSpec(2, 2), np.zeros(4))


def test_jordan_sample_median_and_ledger():
    spec = GridSpec(3, 2)
    v = np.array([label_to_value(spec, 2), label_to_value(spec, -1)])
    ledger = QueryLedger()
    result = jordan_sample(lambda s: (2 ** s.n * mesh(s) @ v).reshape(s.shape), spec, 5, np.random.default_rng(0),
                           ledger=ledger, cost_per_call=1.5, calls_per_repetition=2)
    np.testing.assert_array_equal(result.labels, [2, -1])
    assert result.samples.shape == (5, 2)
    assert ledger.simulated_oracle_calls == 10
    assert np.isclose(ledger.theoretical_cost, 7.5)


def test_jordan_sample_near_linear_phase():
    # n_eps = 6, n_M = 2: phase 2^6 f(x) on the unit grid, labels decode to g / 4
    epsilon, n_eps, n_M = 0.1, 6, 2
    spec = GridSpec(n_eps + n_M, 2)
    g = np.array([0.37, -0.61])
    tol = epsilon / READOUT_CONST

    def f(X):
        return X @ g + tol * np.sin(5 * X[:, 0] - 3 * X[:, 1])

    phase = 2 ** n_eps * f(mesh(spec)).reshape(spec.shape)
    probs = outcome_distribution(PhaseField(spec, phase))
    hits = 0
    for seed in range(50):
        result = jordan_sample(None, spec, 9, np.random.default_rng(seed), distribution=probs)
        decoded = np.array([label_to_value(spec, lab) for lab in result.labels]) * 2 ** n_M
        hits += np.abs(decoded - g).max() <= epsilon
    assert hits >= 45
