import math
import logging
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from qspectral.consts import C_T
from qspectral.exceptions import ParameterError, ResourceLimitError
from qspectral.findiff import FindiffParams, first_order_coeffs, select_findiff_params, stencil_field
from qspectral.grid import GridSpec, label_to_value, mesh
from qspectral.oracle import FunctionOracle, LedgerSnapshot, OracleCost, cost_of_phase_oracle
from qspectral.sampler import PhaseField, jordan_sample, outcome_distribution
from qspectral.spectral import SpectralParams, gradient_form, measured_kappa, select_N
from qspectral.utils import amplitude_cap, log

# grid points per chunk when evaluating a phase field
CHUNK = 2 ** 15


@dataclass
class GradientJob:
    """
    A gradient estimation request.

    Parameters:
        oracle (FunctionOracle): the function, estimated at 0.
        method (str): 'spectral' or 'findiff'.
        epsilon (float): target l_inf accuracy.
        rho (float): failure probability.
        M (float, optional): bound on ||grad f(0)||_inf. Defaults to the oracle's known bound.
        params (SpectralParams or FindiffParams, optional): fixes the method parameters.
    """
    oracle: FunctionOracle
    method: str = 'spectral'
    epsilon: float = 0.1
    rho: float = 0.1
    M: Optional[float] = None
    params: Union[SpectralParams, FindiffParams, None] = None
    c_T: float = C_T
    kappa_mode: str = 'global'
    log_base: Optional[float] = None
    eta: float = 0.01

    def __post_init__(self):
        if self.M is None:
            truth = self.oracle.truth
            if truth is None or truth.grad_bound is None:
                raise ParameterError('M is required when the oracle declares no gradient bound')
            self.M = truth.grad_bound
        if self.method not in ('spectral', 'findiff'):
            raise ParameterError(f'unknown gradient method {self.method}')
        if not 0 < self.epsilon < self.M:
            raise ParameterError(f'need 0 < epsilon < M, got epsilon={self.epsilon}, M={self.M}')
        if not 0 < self.rho < 1:
            raise ParameterError(f'rho must lie in (0, 1), got {self.rho}')
        if self.kappa_mode not in ('global', 'measured'):
            raise ParameterError(f'unknown kappa mode {self.kappa_mode}')


@dataclass(frozen=True)
class GridPlan:
    """Bit split of the sampling grid and repetition count."""
    d: int
    a: float
    n_eps: int
    n_M: int
    T: int
    clamped: bool = False

    @property
    def n(self):
        return self.n_eps + self.n_M

    @property
    def grid(self):
        return GridSpec(self.n, self.d, 1.0)

    @property
    def resolution(self):
        return 2.0 ** (-self.n_eps) / self.a

    @property
    def decode_max(self):
        return 2.0 ** self.n_M / (2 * self.a)


@dataclass(frozen=True)
class GradientPlan:
    grid: GridPlan
    method: str
    spectral: Optional[SpectralParams] = None
    findiff: Optional[FindiffParams] = None
    cost: Optional[OracleCost] = None

    @property
    def n_eps(self):
        return self.grid.n_eps

    @property
    def n_M(self):
        return self.grid.n_M

    @property
    def n(self):
        return self.grid.n

    @property
    def a(self):
        return self.grid.a

    @property
    def T(self):
        return self.grid.T

    @property
    def N_or_m(self):
        return self.spectral.N if self.spectral is not None else self.findiff.m


@dataclass(frozen=True, eq=False)
class GradientResult:
    g: np.ndarray
    labels: np.ndarray
    ledger: LedgerSnapshot
    plan: GradientPlan
    samples: np.ndarray = field(repr=False, default=None)


def repetitions(d, rho, c_T=C_T, log_base=None):
    """T = ceil(c_T log(d / rho))."""
    return max(1, math.ceil(c_T * log(d / rho, log_base)))


def grid_plan(d, epsilon, M, a=1.0, rho=0.1, c_T=C_T, log_base=None, T=None, cap=None) -> GridPlan:
    """
    n_eps = ceil(log2(4/(a eps))) (clamped to >= 1), n_M = ceil(log2(3 a M)), n = n_eps + n_M.
    """
    n_eps = math.ceil(math.log2(4 / (a * epsilon)))
    clamped = n_eps < 1
    if clamped:
        logging.warning(f'epsilon={epsilon} >= 4/a gives n_eps={n_eps}; clamped to 1')
        n_eps = 1
    n_M = math.ceil(math.log2(3 * a * M))
    if n_eps + n_M < 1:
        raise ParameterError(f'grid needs at least one bit, got n_eps={n_eps}, n_M={n_M}')
    if T is None:
        T = repetitions(d, rho, c_T, log_base)
    plan = GridPlan(d, a, n_eps, n_M, T, clamped)
    cap = amplitude_cap() if cap is None else cap
    if plan.grid.size > cap:
        raise ResourceLimitError(plan.grid.size, cap,
                                 f'n={plan.n}, d={d}: increase epsilon, lower M or d, or raise the cap')
    return plan


def decode_axis(label, n_M, a, n):
    """(unit grid value of label) * 2^{n_M} / a."""
    return label_to_value(GridSpec(n, 1, 1.0), int(label)) * 2.0 ** n_M / a


def plan(job: GradientJob, cap=None) -> GradientPlan:
    oracle = job.oracle
    d = oracle.d
    truth = oracle.truth
    if job.method == 'spectral':
        grid = grid_plan(d, job.epsilon, job.M, 1.0, job.rho, job.c_T, job.log_base, cap=cap)
        params = job.params
        if params is None:
            r = truth.radius if truth is not None and truth.radius is not None else 1.0
            if job.kappa_mode == 'measured' or truth is None or truth.kappa is None:
                corners = np.array(list(itertools.product([-0.5, 0.5], repeat=d)))
                kappa = measured_kappa(oracle, corners, SpectralParams.for_gradient(r, 1.0, N=16))
            else:
                kappa = truth.kappa
            base = SpectralParams.for_gradient(r, kappa)
            N = select_N(job.epsilon, base.delta, base.r_tilde, kappa, order=1)
            params = SpectralParams(N, base.delta, base.r_tilde, kappa)
        cost = cost_of_phase_oracle('spectral', epsilon=job.epsilon, N=params.N, delta=params.delta,
                                    eta=job.eta, repetitions=grid.T)
        result = GradientPlan(grid, 'spectral', spectral=params, cost=cost)
    else:
        params = job.params
        if params is None:
            if truth is None or truth.deriv_bound is None:
                raise ParameterError('findiff needs a derivative bound B or explicit (m, a)')
            R = truth.radius if truth.radius is not None else 1.0
            params = select_findiff_params(d, truth.deriv_bound, job.epsilon, R, log_base=job.log_base)
        grid = grid_plan(d, job.epsilon, job.M, params.a, job.rho, job.c_T, job.log_base, cap=cap)
        cost = cost_of_phase_oracle('findiff', epsilon=job.epsilon, m=params.m, a=params.a, eta=job.eta,
                                    coeffs=first_order_coeffs(params.m), repetitions=grid.T)
        result = GradientPlan(grid, 'findiff', findiff=params, cost=cost)
    logging.info(f'gradient plan for {oracle.name}: n_eps={result.n_eps} n_M={result.n_M} n={result.n} '
                 f'a={result.a:.4g} T={result.T} N_or_m={result.N_or_m}')
    return result


def phase_values(value_fn: Callable[[np.ndarray], np.ndarray], grid: GridPlan, chunk=CHUNK) -> np.ndarray:
    """
    2^{n_eps} value_fn(a x) for every x of the unit grid, shape grid.grid.shape. value_fn maps
    points of shape (count, d) to real values.
    """
    spec = grid.grid
    out = np.empty(spec.size)
    for start in range(0, spec.size, chunk):
        idx = np.arange(start, min(start + chunk, spec.size))
        out[idx] = value_fn(grid.a * mesh(spec, idx))
    return (2.0 ** grid.n_eps * out).reshape(spec.shape)


def run_pipeline(value_fn, grid: GridPlan, rng, ledger=None, cost_per_call=0.0, calls_per_repetition=1,
                 distribution=None, workers=None):
    """
    Fourier-samples the phase 2^{n_eps} value_fn(a x) and decodes the median labels.

    Returns:
        tuple: (decoded vector, JordanSample)
    """
    sample = jordan_sample(lambda spec: phase_values(value_fn, grid), grid.grid, grid.T, rng, ledger=ledger,
                           cost_per_call=cost_per_call, calls_per_repetition=calls_per_repetition,
                           workers=workers, distribution=distribution)
    values = np.array([decode_axis(lab, grid.n_M, grid.a, grid.n) for lab in sample.labels])
    assert np.abs(values).max() <= grid.decode_max, 'decoded vector outside the representable range'
    return values, sample


class GradientEstimator:
    """
    Estimates grad f(0) by Fourier sampling of the spectral form F(x) or the first-order
    stencil. Outcome distributions are cached per plan, so repeated runs (seeds) only resample.

    Parameters:
        oracle (FunctionOracle): the function.
        method (str): 'spectral' or 'findiff'. Defaults to 'spectral'.
        workers (int, optional): FFT worker threads.
    """

    def __init__(self, oracle, method='spectral', workers=None, cap=None, **job_kwargs) -> None:
        self.oracle = oracle
        self.method = method
        self.workers = workers
        self.cap = cap
        self.job_kwargs = job_kwargs
        self.distributions = {}

    def clear_cache(self):
        self.distributions.clear()

    def job(self, epsilon, rho, M=None, params=None):
        return GradientJob(self.oracle, self.method, epsilon, rho, M, params, **self.job_kwargs)

    def value_fn(self, gplan: GradientPlan):
        oracle = self.oracle
        if gplan.method == 'spectral':
            return lambda X: gradient_form(oracle, X, gplan.spectral)
        coeffs = first_order_coeffs(gplan.findiff.m)
        return lambda X: stencil_field(oracle, X, coeffs)

    def distribution(self, gplan: GradientPlan):
        key = (gplan.grid, gplan.method, gplan.spectral, gplan.findiff)
        if key not in self.distributions:
            logging.debug(f'building outcome distribution for {self.oracle.name}, n={gplan.n}, d={gplan.grid.d}')
            phase = phase_values(self.value_fn(gplan), gplan.grid)
            self.distributions[key] = outcome_distribution(PhaseField(gplan.grid.grid, phase), self.cap, self.workers)
        else:
            logging.debug(f'using cached distribution for {self.oracle.name}')
        return self.distributions[key]

    def estimate(self, epsilon, rho, rng, M=None, params=None, ledger=None) -> GradientResult:
        """
        Runs the estimation once.

        Args:
            epsilon (float): target accuracy.
            rho (float): failure probability.
            rng: numpy Generator or seed.
            M (float, optional): gradient bound.
            params (optional): SpectralParams or FindiffParams.
            ledger (QueryLedger, optional): where oracle calls are recorded; the oracle's own
                ledger by default.

        Returns:
            GradientResult
        """
        gplan = plan(self.job(epsilon, rho, M, params), cap=self.cap)
        ledger = self.oracle.ledger if ledger is None else ledger
        values, sample = run_pipeline(None, gplan.grid, rng, ledger=ledger,
                                      cost_per_call=gplan.cost.per_application,
                                      distribution=self.distribution(gplan), workers=self.workers)
        return GradientResult(values, sample.labels, ledger.snapshot(), gplan, sample.samples)


def estimate_gradient(job: GradientJob, rng, cap=None, workers=None) -> GradientResult:
    estimator = GradientEstimator(job.oracle, job.method, workers=workers, cap=cap, c_T=job.c_T,
                                  kappa_mode=job.kappa_mode, log_base=job.log_base, eta=job.eta)
    return estimator.estimate(job.epsilon, job.rho, rng, M=job.M, params=job.params)
