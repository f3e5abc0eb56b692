"""
Dense Hessian estimation. Column i of H_f(0) is the gradient of
h(x) = (Q(x + y) - Q(x)) / 2 with y = e_i (times a scale on the Gevrey path), where Q(z)
approximates z^T H_f(0) z by the spectral form or the second-order stencil.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import tqdm

from qspectral.consts import ALPHA, C_K, C_Q, C_T, METHODS_HESSIAN
from qspectral.exceptions import ParameterError
from qspectral.findiff import FindiffParams, second_order_coeffs, select_findiff_params, stencil_field
from qspectral.gradient import GridPlan, grid_plan, phase_values, repetitions, run_pipeline
from qspectral.oracle import FunctionOracle, LedgerSnapshot, cost_of_phase_oracle
from qspectral.sampler import PhaseField, outcome_distribution
from qspectral.spectral import SpectralParams, hessian_form, select_N
from qspectral.utils import log


@dataclass
class HessianJob:
    """
    A Hessian estimation request.

    Parameters:
        oracle (FunctionOracle): the function, estimated at 0.
        method (str): one of 'spectral-dense', 'findiff-dense', 'spectral-sparse', 'findiff-sparse'.
        epsilon (float): target max-norm accuracy (dense) or lattice resolution (sparse).
        rho (float): failure probability.
        M (float, optional): bound on ||H||_max. Defaults to the oracle's known bound.
        s (int, optional): nonzeros per row and column (sparse).
        m_total (int, optional): total nonzeros; enables the dense-row fallback (sparse).
        q (int, optional): fixes the prime of the S_q grid (sparse).
        params (SpectralParams or FindiffParams, optional): fixes the form parameters.
    """
    oracle: FunctionOracle
    method: str = 'spectral-dense'
    epsilon: float = 0.1
    rho: float = 0.1
    M: Optional[float] = None
    s: Optional[int] = None
    m_total: Optional[int] = None
    q: Optional[int] = None
    params: Union[SpectralParams, FindiffParams, None] = None
    findiff_path: str = 'probe'
    probe_mode: str = 'plain'
    alpha: float = ALPHA
    probe_count: Optional[int] = None
    probe_repeats: Optional[int] = None
    fast_path: Optional[bool] = None
    c_T: float = C_T
    c_q: float = C_Q
    c_k: float = C_K
    log_base: Optional[float] = None
    eta: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS_HESSIAN:
            raise ParameterError(f'unknown Hessian method {self.method}')
        if self.M is None:
            truth = self.oracle.truth
            if truth is None or truth.hess_bound is None:
                raise ParameterError('M is required when the oracle declares no Hessian bound')
            self.M = truth.hess_bound
        if not self.M > 0 or not self.epsilon > 0:
            raise ParameterError(f'epsilon and M must be positive, got epsilon={self.epsilon}, M={self.M}')
        if self.method.endswith('dense') and not self.epsilon < self.M:
            raise ParameterError(f'need epsilon < M, got epsilon={self.epsilon}, M={self.M}')
        if not 0 < self.rho < 1:
            raise ParameterError(f'rho must lie in (0, 1), got {self.rho}')
        if self.probe_mode not in ('plain', 'scaled'):
            raise ParameterError(f'unknown probe mode {self.probe_mode}')

    @property
    def sparse(self):
        return self.method.endswith('sparse')


@dataclass(frozen=True)
class DensePlan:
    grid: GridPlan
    method: str
    rho_column: float
    y_scale: float
    spectral: Optional[SpectralParams] = None
    findiff: Optional[FindiffParams] = None
    cost_per_call: float = 0.0

    @property
    def N_or_m(self):
        return self.spectral.N if self.spectral is not None else self.findiff.m


@dataclass(frozen=True, eq=False)
class HessianResult:
    H: np.ndarray
    asymmetry: float
    ledger: LedgerSnapshot
    plan: object
    labels: np.ndarray = field(repr=False, default=None)


def column_failure(d, rho):
    """Per-column failure rho'/d with rho' = d rho / (d + rho); (1 - rho'/d)^d >= 1 - rho."""
    rho_prime = d * rho / (d + rho)
    return rho_prime / d


def hessian_spectral_params(oracle: FunctionOracle, epsilon, kappa=None, r=None) -> SpectralParams:
    """r_tilde = 2r/3, delta = r_tilde/2 and N from the order-2 bound."""
    truth = oracle.truth
    if r is None:
        r = truth.radius if truth is not None and truth.radius is not None else 1.0
    if kappa is None:
        if truth is None or truth.kappa is None:
            raise ParameterError('kappa is required when the oracle declares none')
        kappa = truth.kappa
    base = SpectralParams.for_hessian(r, kappa)
    N = select_N(epsilon, base.delta, base.r_tilde, kappa, order=2)
    return SpectralParams(N, base.delta, base.r_tilde, kappa)


def check_findiff_condition(d, B, epsilon, m, log_base=None):
    """m >= log(d B / eps), the condition under which the stencil error stays below eps."""
    b = B(2 * m + 1) if callable(B) else B
    if b > 0 and m < log(d * b / epsilon, log_base):
        raise ParameterError(f'findiff precondition m >= log(dB/eps) violated: m={m}, d={d}, B={b:.4g}, eps={epsilon}')


def plan_dense(job: HessianJob, cap=None) -> DensePlan:
    oracle = job.oracle
    d = oracle.d
    rho_col = column_failure(d, job.rho)
    T = repetitions(d, rho_col, job.c_T, job.log_base)
    if job.method == 'spectral-dense':
        params = job.params if job.params is not None else hessian_spectral_params(oracle, job.epsilon)
        grid = grid_plan(d, job.epsilon, job.M, 1.0, T=T, cap=cap)
        cost = cost_of_phase_oracle('spectral', epsilon=job.epsilon, N=params.N, delta=params.delta, eta=job.eta)
        result = DensePlan(grid, job.method, rho_col, 1.0, spectral=params, cost_per_call=cost.per_application)
    else:
        truth = oracle.truth
        B = truth.deriv_bound if truth is not None else None
        params = job.params
        if params is None:
            if job.findiff_path == 'gevrey':
                if truth is None or truth.gevrey_c is None:
                    raise ParameterError('the gevrey path needs the Gevrey constant of the function')
                params = select_findiff_params(d, B, job.epsilon, 1.0, path='gevrey', c=truth.gevrey_c,
                                               log_base=job.log_base)
            else:
                if B is None:
                    raise ParameterError('findiff-dense needs a derivative bound B or explicit (m, a)')
                R = truth.radius if truth.radius is not None else 1.0
                params = select_findiff_params(d, B, job.epsilon, R, log_base=job.log_base)
        if params.path == 'probe' and B is not None:
            check_findiff_condition(d, B, job.epsilon, params.m, job.log_base)
        y_scale = params.a / 2 if params.path == 'gevrey' else 1.0
        # the decoded vector is y_scale H e_i, so accuracy and range scale with it
        grid = grid_plan(d, job.epsilon * y_scale, job.M * y_scale, params.a, T=T, cap=cap)
        coeffs = second_order_coeffs(params.m)
        cost = cost_of_phase_oracle('findiff', epsilon=job.epsilon, m=params.m, a=params.a, eta=job.eta, coeffs=coeffs)
        result = DensePlan(grid, job.method, rho_col, y_scale, findiff=params, cost_per_call=cost.per_application)
    logging.info(f'dense Hessian plan for {oracle.name}: n={result.grid.n} a={result.grid.a:.4g} T={T} '
                 f'rho_col={rho_col:.4g} N_or_m={result.N_or_m}')
    return result


class HessianEstimator:
    """
    Column-by-column dense Hessian estimation with caching of the quadratic-form field
    Q(a x) and of the per-column outcome distributions.

    Parameters:
        oracle (FunctionOracle): the function.
        method (str): 'spectral-dense' or 'findiff-dense'.
        progress (bool, optional): show a progress bar over columns. Defaults to False.
    """

    def __init__(self, oracle, method='spectral-dense', progress=False, workers=None, cap=None, **job_kwargs) -> None:
        self.oracle = oracle
        self.method = method
        self.progress = progress
        self.workers = workers
        self.cap = cap
        self.job_kwargs = job_kwargs
        self.fields = {}
        self.distributions = {}

    def clear_cache(self):
        self.fields.clear()
        self.distributions.clear()

    def job(self, epsilon, rho, M=None, params=None):
        return HessianJob(self.oracle, self.method, epsilon, rho, M, params=params, **self.job_kwargs)

    def form(self, dplan: DensePlan):
        """Q(z), approximately z^T H_f(0) z, for points of shape (count, d)."""
        oracle = self.oracle
        if dplan.spectral is not None:
            return lambda Z: hessian_form(oracle, Z, dplan.spectral)
        coeffs = second_order_coeffs(dplan.findiff.m)
        return lambda Z: stencil_field(oracle, Z, coeffs)

    def _key(self, dplan):
        return (dplan.grid.n, dplan.grid.n_eps, dplan.grid.a, dplan.spectral, dplan.findiff)

    def base_field(self, dplan: DensePlan):
        key = self._key(dplan)
        if key not in self.fields:
            self.fields[key] = phase_values(self.form(dplan), dplan.grid)
        return self.fields[key]

    def column_distribution(self, dplan: DensePlan, i: int):
        key = self._key(dplan) + (i, dplan.y_scale)
        if key not in self.distributions:
            logging.debug(f'building column {i} distribution for {self.oracle.name}')
            form = self.form(dplan)
            y = np.zeros(self.oracle.d)
            y[i] = dplan.y_scale
            shifted = phase_values(lambda Z: form(Z + y), dplan.grid)
            phase = (shifted - self.base_field(dplan)) / 2
            self.distributions[key] = outcome_distribution(PhaseField(dplan.grid.grid, phase), self.cap, self.workers)
        return self.distributions[key]

    def get_column(self, dplan: DensePlan, i: int, rng, ledger):
        values, sample = run_pipeline(None, dplan.grid, rng, ledger=ledger, cost_per_call=2 * dplan.cost_per_call,
                                      calls_per_repetition=2, distribution=self.column_distribution(dplan, i),
                                      workers=self.workers)
        return values / dplan.y_scale, sample.labels

    def estimate(self, epsilon, rho, rng, M=None, params=None, ledger=None) -> HessianResult:
        """
        Estimates every column and symmetrizes.

        Args:
            epsilon (float): max-norm accuracy.
            rho (float): joint failure probability.
            rng: numpy Generator or seed.
            M (float, optional): bound on ||H||_max.
            params (optional): SpectralParams or FindiffParams.
            ledger (QueryLedger, optional): defaults to the oracle's ledger.

        Returns:
            HessianResult
        """
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        dplan = plan_dense(self.job(epsilon, rho, M, params), cap=self.cap)
        ledger = self.oracle.ledger if ledger is None else ledger
        d = self.oracle.d
        H = np.zeros((d, d))
        labels = np.zeros((d, d), dtype=np.int64)
        for i in tqdm.tqdm(range(d), disable=not self.progress, desc='columns'):
            H[:, i], labels[:, i] = self.get_column(dplan, i, rng, ledger)
        asymmetry = float(np.abs(H - H.T).max())
        H = (H + H.T) / 2
        logging.info(f'dense Hessian of {self.oracle.name}: asymmetry before symmetrizing {asymmetry:.3g}')
        return HessianResult(H, asymmetry, ledger.snapshot(), dplan, labels)


def estimate_hessian_dense(job: HessianJob, rng, cap=None, workers=None, progress=False) -> HessianResult:
    if job.sparse:
        raise ParameterError(f'{job.method} is a sparse method; use estimate_hessian_sparse')
    estimator = HessianEstimator(job.oracle, job.method, progress=progress, workers=workers, cap=cap,
                                 findiff_path=job.findiff_path, c_T=job.c_T, log_base=job.log_base, eta=job.eta)
    return estimator.estimate(job.epsilon, job.rho, rng, M=job.M, params=job.params)


def estimate_hessian(job: HessianJob, rng, cap=None, workers=None, progress=False):
    """Dispatches to the dense or the sparse estimator."""
    if job.sparse:
        from qspectral.sparse import estimate_hessian_sparse
        return estimate_hessian_sparse(job, rng, cap=cap, progress=progress)
    return estimate_hessian_dense(job, rng, cap=cap, workers=workers, progress=progress)
