"""
Spectral differentiation: sample h(tau) = f(tau x) on the circle |tau| = delta and read
Taylor coefficients off a discrete Fourier transform of the samples.
"""
import math
import logging
from dataclasses import dataclass, replace

import numpy as np

from qspectral.consts import KAPPA_SAFETY, READOUT_CONST
from qspectral.exceptions import ParameterError
from qspectral.oracle import FunctionOracle, evaluate_batch
from qspectral.utils import real_part


@dataclass(frozen=True)
class SpectralParams:
    N: int
    delta: float
    r_tilde: float
    kappa: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f'N must be an integer >= 2, got {self.N}')
        if not 0 < self.delta < self.r_tilde:
            raise ParameterError(f'need 0 < delta < r_tilde, got delta={self.delta}, r_tilde={self.r_tilde}')
        if self.kappa < 0:
            raise ParameterError(f'kappa must be non-negative, got {self.kappa}')

    @property
    def ratio(self):
        return self.delta / self.r_tilde

    @classmethod
    def for_gradient(cls, r, kappa, N=2, delta=None):
        """r_tilde = 2r; delta defaults to r."""
        return cls(N, r if delta is None else delta, 2 * r, kappa)

    @classmethod
    def for_hessian(cls, r, kappa, N=3, delta=None):
        """r_tilde = 2r/3; delta defaults to r_tilde/2."""
        r_tilde = 2 * r / 3
        return cls(N, r_tilde / 2 if delta is None else delta, r_tilde, kappa)


def circle_points(x, params: SpectralParams) -> np.ndarray:
    """Points delta omega^k x, shape (..., N, d) for x of shape (..., d)."""
    x = np.asarray(x, dtype=float)
    nodes = params.delta * np.exp(-2j * np.pi * np.arange(params.N) / params.N)
    return nodes[:, None] * x[..., None, :]


def circle_coefficients(oracle: FunctionOracle, x, params: SpectralParams) -> np.ndarray:
    """
    All c_n = (1/N) sum_k omega^{-kn} h(delta omega^k), n = 0..N-1, along the last axis.
    With omega = e^{-2 pi i/N} this is exactly numpy's inverse FFT of the samples.
    """
    samples = evaluate_batch(oracle, circle_points(x, params))
    return np.fft.ifft(samples, axis=-1)


def spectral_coeff(oracle: FunctionOracle, x, params: SpectralParams, order: int) -> complex:
    """
    Estimate c_n / delta^n of the n-th Taylor coefficient of h(tau) = f(tau x).

    Args:
        oracle (FunctionOracle): the function.
        x: direction, a real d-vector.
        params (SpectralParams): circle parameters.
        order (int): n in [0, N-1].

    Returns:
        complex: the estimate; real-valued functions are not forced real here.
    """
    if int(order) != order or not 0 <= order < params.N:
        raise ParameterError(f'order must lie in [0, {params.N - 1}], got {order}')
    c = circle_coefficients(oracle, x, params)
    return complex(c[..., int(order)] / params.delta ** order)


def gradient_form(oracle, X, params: SpectralParams) -> np.ndarray:
    """F(x) = (1/(N delta)) sum_k omega^{-k} f(delta omega^k x) for x of shape (..., d)."""
    c = circle_coefficients(oracle, X, params)
    return real_part(c[..., 1] / params.delta, 'spectral gradient form')


def hessian_form(oracle, Z, params: SpectralParams) -> np.ndarray:
    """(2/(N delta^2)) sum_k omega^{-2k} f(delta omega^k z) for z of shape (..., d)."""
    if params.N < 3:
        raise ParameterError('the Hessian form needs N >= 3 to separate modes 0 and 2')
    c = circle_coefficients(oracle, Z, params)
    return real_part(2 * c[..., 2] / params.delta ** 2, 'spectral Hessian form')


def spectral_gradient_form(oracle: FunctionOracle, x, params: SpectralParams) -> float:
    """Approximation of grad f(0) . x with error at most derivative_error_bound(params, 1)."""
    return float(gradient_form(oracle, x, params))


def spectral_hessian_form(oracle: FunctionOracle, z, params: SpectralParams) -> float:
    """Approximation of z^T H_f(0) z with error at most derivative_error_bound(params, 2)."""
    return float(hessian_form(oracle, z, params))


def spectral_error_bound(params: SpectralParams, order: int) -> float:
    """kappa r_tilde^{-n} rho^N / (1 - rho^N) with rho = delta / r_tilde."""
    rho_n = params.ratio ** params.N
    return params.kappa * params.r_tilde ** (-order) * rho_n / (1 - rho_n)


def derivative_error_bound(params: SpectralParams, order: int) -> float:
    """Bound on the n-th derivative, i.e. n! times the coefficient bound."""
    return math.factorial(order) * spectral_error_bound(params, order)


def select_N(epsilon, delta, r_tilde, kappa, order=1, target=None) -> int:
    """
    Smallest N >= 2 (>= 3 for order 2) with derivative_error_bound <= target, where the
    target defaults to epsilon / (8 * 42 pi).
    """
    if not epsilon > 0:
        raise ParameterError(f'epsilon must be positive, got {epsilon}')
    if not 0 < delta < r_tilde:
        raise ParameterError(f'need 0 < delta < r_tilde, got delta={delta}, r_tilde={r_tilde}')
    if target is None:
        target = epsilon / READOUT_CONST
    n_min = max(2, order + 1)
    if kappa == 0:
        return n_min
    scale = math.factorial(order) * kappa * r_tilde ** (-order)
    # rho^N / (1 - rho^N) <= target / scale  <=>  N >= log(1 + scale / target) / log(1 / rho)
    N = max(n_min, math.ceil(math.log1p(scale / target) / math.log(r_tilde / delta)))

    def bound(n):
        return derivative_error_bound(SpectralParams(n, delta, r_tilde, kappa), order)

    while bound(N) > target:
        N += 1
    while N > n_min and bound(N - 1) <= target:
        N -= 1
    logging.debug(f'select_N: eps={epsilon} kappa={kappa} r_tilde={r_tilde} delta={delta} order={order} -> N={N}')
    return N


def measured_kappa(oracle: FunctionOracle, X, params: SpectralParams, safety=KAPPA_SAFETY) -> float:
    """
    Proxy for max_tau |f(tau x)| on |tau| = r_tilde: the largest sampled modulus over the
    N circle points of every x in X, times a safety factor.
    """
    on_circle = replace(params, delta=params.r_tilde * (1 - 1e-12))
    samples = evaluate_batch(oracle, circle_points(X, on_circle))
    return safety * float(np.abs(samples).max())
