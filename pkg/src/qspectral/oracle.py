import math
import logging
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from qspectral.exceptions import ParameterError


@dataclass(frozen=True)
class LedgerSnapshot:
    simulated_oracle_calls: int
    pointwise_evaluations: int
    theoretical_cost: float
    domain_warnings: int


class QueryLedger:
    """
    Counts superposition phase-oracle applications (simulated_oracle_calls), individual
    evaluator invocations (pointwise_evaluations) and the accumulated theoretical query cost.
    All counters only grow. Safe for concurrent increments.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.simulated_oracle_calls = 0
        self.pointwise_evaluations = 0
        self.theoretical_cost = 0.0
        self.domain_warnings = 0

    def record_evaluations(self, count=1):
        assert count >= 0, 'ledger counters are monotone'
        with self._lock:
            self.pointwise_evaluations += int(count)

    def record_oracle_calls(self, count=1, cost=0.0):
        assert count >= 0 and cost >= 0, 'ledger counters are monotone'
        with self._lock:
            self.simulated_oracle_calls += int(count)
            self.theoretical_cost += float(cost)

    def record_domain_warning(self, count=1):
        with self._lock:
            self.domain_warnings += int(count)

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            return LedgerSnapshot(self.simulated_oracle_calls, self.pointwise_evaluations,
                                  self.theoretical_cost, self.domain_warnings)

    def __repr__(self):
        return f'QueryLedger({self.snapshot()})'


@dataclass(frozen=True, eq=False)
class KnownTruth:
    """
    Closed-form facts about a function at the origin.

    radius is the polydisc radius r on which the function is analytic and bounded by kappa.
    deriv_bound(k) bounds the k-th directional derivative along unit directions on the
    stencil's reach (used by the finite-difference parameter selection); gevrey_c is the
    constant c with |d^alpha f(0)| <= c^k k^(k/2).
    """
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None
    radius: Optional[float] = None
    kappa: Optional[float] = None
    real_on_real: bool = True
    polynomial: bool = False
    quadratic: bool = False
    grad_bound: Optional[float] = None
    hess_bound: Optional[float] = None
    deriv_bound: Optional[Callable[[int], float]] = None
    gevrey_c: Optional[float] = None


@dataclass(frozen=True, eq=False)
class FunctionOracle:
    """
    Analytic function f: C^d -> C. The evaluator maps an array of shape (..., d) to an
    array of shape (...); it must be deterministic.
    """
    evaluator: Callable[[np.ndarray], np.ndarray]
    d: int
    name: str = 'f'
    truth: Optional[KnownTruth] = None
    ledger: QueryLedger = field(default_factory=QueryLedger, compare=False)

    def with_ledger(self, ledger=None):
        """Copy of the oracle recording into a fresh (or the given) ledger."""
        return replace(self, ledger=ledger if ledger is not None else QueryLedger())

    def __call__(self, z):
        return evaluate(self, z)


def _check_domain(oracle, points):
    if oracle.truth is None or oracle.truth.radius is None:
        return
    excess = np.abs(points).max(axis=-1) > oracle.truth.radius * (1 + 1e-12)
    count = int(np.count_nonzero(excess))
    if count:
        first = oracle.ledger.domain_warnings == 0
        oracle.ledger.record_domain_warning(count)
        # later batches of the same run log at debug level
        log_fn = logging.warning if first else logging.debug
        log_fn(f'{oracle.name}: {count} evaluation(s) outside the polydisc of radius {oracle.truth.radius}')


def evaluate(oracle: FunctionOracle, z) -> complex:
    z = np.asarray(z, dtype=complex)
    if z.shape != (oracle.d,):
        raise ParameterError(f'expected a point of dimension {oracle.d}, got shape {z.shape}')
    _check_domain(oracle, z[None, :])
    oracle.ledger.record_evaluations(1)
    return complex(oracle.evaluator(z))


def evaluate_batch(oracle: FunctionOracle, Z) -> np.ndarray:
    """Evaluates f on an array of points of shape (..., d)."""
    Z = np.asarray(Z, dtype=complex)
    if Z.shape[-1] != oracle.d:
        raise ParameterError(f'expected points of dimension {oracle.d}, got shape {Z.shape}')
    count = int(np.prod(Z.shape[:-1]))
    _check_domain(oracle, Z.reshape(-1, oracle.d))
    oracle.ledger.record_evaluations(count)
    return np.asarray(oracle.evaluator(Z), dtype=complex)


def real_imag(oracle: FunctionOracle, z):
    """Returns (f_1(z), f_2(z)) with f = f_1 + i f_2."""
    value = evaluate(oracle, z)
    return value.real, value.imag


def translate(oracle: FunctionOracle, x0) -> FunctionOracle:
    """
    Oracle of z -> f(x0 + z), so that estimation at 0 estimates derivatives of f at x0.
    Known truth does not carry over and is dropped.
    """
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (oracle.d,):
        raise ParameterError(f'offset must have dimension {oracle.d}')
    base = oracle.evaluator

    def shifted(Z):
        return base(np.asarray(Z, dtype=complex) + x0)

    return FunctionOracle(shifted, oracle.d, name=f'{oracle.name}@{np.round(x0.real, 6).tolist()}',
                          ledger=oracle.ledger)


@dataclass(frozen=True)
class OracleCost:
    evaluation_points: int
    per_application: float
    repetitions: int
    total: float


def _positive(**kwargs):
    for key, val in kwargs.items():
        if val is None:
            raise ParameterError(f'{key} is required')
        if not val > 0:
            raise ParameterError(f'{key} must be positive, got {val}')


def cost_of_phase_oracle(method, *, epsilon, N=None, delta=None, eta=None, m=None, a=None,
                         coeffs=None, repetitions=1, access='phase') -> OracleCost:
    """
    Theoretical number of queries needed to implement one application of the phase oracle
    e^{2 pi i 2^{n_eps} F(x)} and the total over all repetitions.

    Args:
        method (str): 'spectral' or 'findiff'.
        epsilon (float): target accuracy.
        N (int): circle samples (spectral).
        delta (float): circle radius (spectral).
        eta (float): accuracy of the underlying oracle (phase access).
        m (int): stencil half-width (findiff).
        a (float): grid scale (findiff).
        coeffs (StencilCoeffs, optional): stencil used (findiff); first-order stencil by default.
        repetitions (int): number of phase-oracle applications.
        access (str): 'phase' for phase access to f, 'binary' for a binary oracle.

    Returns:
        OracleCost
    """
    if int(repetitions) != repetitions or repetitions < 1:
        raise ParameterError(f'repetitions must be a positive integer, got {repetitions}')
    if access not in ('phase', 'binary'):
        raise ParameterError(f'unknown access model {access}')
    _positive(epsilon=epsilon)
    if method == 'spectral':
        if N is None or int(N) != N or N < 2:
            raise ParameterError(f'N >= 2 required for the circle DFT, got {N}')
        points = int(N)
        if access == 'binary':
            # compute and uncompute, for the real and the imaginary part
            per = 4.0 * points
        else:
            _positive(delta=delta, eta=eta)
            per = math.pi / (2 * epsilon * delta) + points * math.log(points / eta)
    elif method == 'findiff':
        if m is None or int(m) != m or m < 1:
            raise ParameterError(f'm >= 1 required, got {m}')
        points = 2 * int(m) + 1
        if access == 'binary':
            per = 2.0 * points
        else:
            _positive(a=a, eta=eta)
            if coeffs is None:
                from qspectral.findiff import first_order_coeffs
                coeffs = first_order_coeffs(int(m))
            weight = coeffs.abs_sum()
            per = math.pi * weight / (2 * epsilon * a) + points * math.log(points / eta)
    else:
        raise ParameterError(f'unknown method {method}')
    return OracleCost(points, per, int(repetitions), per * repetitions)


def required_oracle_precision(epsilon, delta, eta):
    """Accuracy each fractional query has to reach: eta' = 8 pi eta / (eps delta)."""
    _positive(epsilon=epsilon, delta=delta, eta=eta)
    return 8 * math.pi * eta / (epsilon * delta)
