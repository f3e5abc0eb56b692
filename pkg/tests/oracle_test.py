import math
import logging
import threading

import numpy as np
import pytest

from qspectral.corpus import get_entry
from qspectral.exceptions import ParameterError
from qspectral.oracle import (FunctionOracle, QueryLedger, cost_of_phase_oracle, evaluate, evaluate_batch, real_imag,
                              required_oracle_precision, translate)


def test_evaluate_counts_and_values():
    entry = get_entry('exp_mix_d2')
    oracle = entry.oracle.with_ledger()
    value = evaluate(oracle, [0.3, 0.2])
    assert np.isclose(value, math.exp(0.3) * math.cos(0.2))
    evaluate_batch(oracle, np.zeros((5, 4, 2)))
    snap = oracle.ledger.snapshot()
    assert snap.pointwise_evaluations == 21
    assert snap.simulated_oracle_calls == 0


def test_real_imag_split():
    oracle = get_entry('exp_d1').oracle
    re, im = real_imag(oracle, [1j * math.pi / 2])
    assert abs(re) < 1e-12
    assert np.isclose(im, 1.0)


def test_wrong_dimension():
    oracle = get_entry('poly_d2').oracle
    with pytest.raises(ParameterError):
        evaluate(oracle, [0.1, 0.2, 0.3])
    with pytest.raises(ParameterError):
        evaluate_batch(oracle, np.zeros((3, 3)))


def test_domain_warning_logged_once(caplog):
    oracle = get_entry('poly_d2').oracle.with_ledger()
    with caplog.at_level(logging.DEBUG):
        evaluate(oracle, [2.0, 0.0])
        evaluate(oracle, [0.0, 3.0])
        evaluate(oracle, [0.1, 0.1])
    assert oracle.ledger.domain_warnings == 2
    warnings = [r for r in caplog.records if r.levelno == logging.WARNING]
    assert len(warnings) == 1


def test_ledger_thread_safety():
    ledger = QueryLedger()

    def work():
        for _ in range(1000):
            ledger.record_oracle_calls(1, cost=0.5)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    snap = ledger.snapshot()
    assert snap.simulated_oracle_calls == 8000
    assert np.isclose(snap.theoretical_cost, 4000.0)


def test_ledger_is_monotone():
    with pytest.raises(AssertionError):
        QueryLedger().record_oracle_calls(-1)


def test_translate():
    entry = get_entry('exp_d2')
    x0 = np.array([0.2, -0.1])
    shifted = translate(entry.oracle, x0)
    assert shifted.truth is None
    z = np.array([0.05, 0.3])
    assert np.isclose(evaluate(shifted, z), evaluate(entry.oracle, x0 + z))
    assert shifted.ledger is entry.oracle.ledger


def test_spectral_cost():
    cost = cost_of_phase_oracle('spectral', epsilon=0.1, N=4, delta=1.0, eta=0.01, repetitions=3)
    per = math.pi / (2 * 0.1 * 1.0) + 4 * math.log(4 / 0.01)
    assert cost.evaluation_points == 4
    assert np.isclose(cost.per_application, per)
    assert np.isclose(cost.total, 3 * per)


def test_cost_scales_inversely_with_epsilon():
    coarse = cost_of_phase_oracle('spectral', epsilon=1e-3, N=4, delta=1.0, eta=0.01)
    fine = cost_of_phase_oracle('spectral', epsilon=5e-4, N=4, delta=1.0, eta=0.01)
    assert 1.8 < fine.per_application / coarse.per_application <= 2.0


def test_binary_access_cost():
    cost = cost_of_phase_oracle('spectral', epsilon=0.1, N=5, access='binary')
    assert cost.per_application == 20
    cost = cost_of_phase_oracle('findiff', epsilon=0.1, m=2, access='binary')
    assert cost.evaluation_points == 5
    assert cost.per_application == 10


def test_findiff_cost_uses_stencil_weight():
    cost = cost_of_phase_oracle('findiff', epsilon=0.1, m=1, a=0.5, eta=0.01)
    # first-order stencil of half-width 1: coefficients -1/2, 0, 1/2
    per = math.pi * 1.0 / (2 * 0.1 * 0.5) + 3 * math.log(3 / 0.01)
    assert np.isclose(cost.per_application, per)


@pytest.mark.parametrize('kwargs', [
    dict(method='spectral', epsilon=0.1, N=1, delta=1.0, eta=0.01),
    dict(method='spectral', epsilon=0.0, N=4, delta=1.0, eta=0.01),
    dict(method='spectral', epsilon=0.1, N=4, delta=1.0, eta=0.01, repetitions=0),
    dict(method='findiff', epsilon=0.1, m=0, a=1.0, eta=0.01),
    dict(method='taylor', epsilon=0.1),
])
def test_cost_rejects_bad_parameters(kwargs):
    method = kwargs.pop('method')
    with pytest.raises(ParameterError):
        cost_of_phase_oracle(method, **kwargs)


def test_required_precision():
    assert np.isclose(required_oracle_precision(0.1, 0.5, 1e-4), 8 * math.pi * 1e-4 / 0.05)


def test_oracle_without_truth_skips_domain_check():
    oracle = FunctionOracle(lambda Z: np.sum(Z, axis=-1), 2)
    evaluate_batch(oracle, np.full((3, 2), 10.0))
    assert oracle.ledger.domain_warnings == 0
