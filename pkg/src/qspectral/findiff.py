"""
Degree-2m central-difference stencils and the inequalities that control their error.
"""
import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, NamedTuple

import numpy as np
import scipy.special

from qspectral.consts import MAX_STENCIL_HALF_WIDTH, READOUT_CONST
from qspectral.exceptions import DivergenceError, ParameterError, PreconditionError
from qspectral.oracle import FunctionOracle, evaluate_batch
from qspectral.utils import log, real_part


@dataclass(frozen=True)
class StencilCoeffs:
    m: int
    kind: str
    coeffs: Dict[int, Fraction]

    @property
    def offsets(self):
        return np.arange(-self.m, self.m + 1)

    def as_array(self):
        """Float coefficients for offsets -m..m."""
        return np.array([float(self.coeffs[t]) for t in range(-self.m, self.m + 1)])

    def abs_sum(self):
        return float(sum(abs(c) for c in self.coeffs.values()))

    def __getitem__(self, t):
        return self.coeffs[t]


def _check_m(m):
    if int(m) != m or m < 1:
        raise ParameterError(f'm must be a positive integer, got {m}')
    return int(m)


def _sign(p):
    return 1 if p % 2 == 0 else -1


def second_order_coeffs(m: int) -> StencilCoeffs:
    """a_t = (-1)^{t-1} 2/t^2 m!m!/((m+t)!(m-t)!) for t != 0, a_0 = -sum of the others."""
    m = _check_m(m)
    fm = math.factorial(m)
    coeffs = {}
    for t in range(-m, m + 1):
        if t == 0:
            continue
        coeffs[t] = Fraction(2 * _sign(t - 1), t * t) * Fraction(fm * fm, math.factorial(m + t) * math.factorial(m - t))
    coeffs[0] = -sum(coeffs.values())
    return StencilCoeffs(m, 'second', dict(sorted(coeffs.items())))


def first_order_coeffs(m: int) -> StencilCoeffs:
    """coeff(l) = (-1)^{l-1}/l C(m,|l|)/C(m+|l|,|l|) for l != 0, coeff(0) = 0."""
    m = _check_m(m)
    coeffs = {0: Fraction(0)}
    for ell in range(-m, m + 1):
        if ell == 0:
            continue
        k = abs(ell)
        coeffs[ell] = Fraction(_sign(ell - 1), ell) * Fraction(math.comb(m, k), math.comb(m + k, k))
    return StencilCoeffs(m, 'first', dict(sorted(coeffs.items())))


def stencil_field(oracle: FunctionOracle, X, coeffs: StencilCoeffs) -> np.ndarray:
    """sum_t coeff(t) f(t x) for every x in X (shape (..., d))."""
    X = np.asarray(X, dtype=float)
    offsets = coeffs.offsets
    weights = coeffs.as_array()
    keep = weights != 0
    points = offsets[keep][:, None] * X[..., None, :]
    values = evaluate_batch(oracle, points)
    return real_part(values @ weights[keep], 'stencil')


def apply_stencil(oracle: FunctionOracle, x, coeffs: StencilCoeffs) -> float:
    return float(stencil_field(oracle, x, coeffs))


class CoeffBoundCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def coeff_bound_check(m: int, k: int) -> CoeffBoundCheck:
    """sum_t |a_t t^{k+1}| <= 24 e^{-7m/6} m^{k+3/2} for k >= 2m."""
    m = _check_m(m)
    if k < 2 * m:
        raise PreconditionError(f'the coefficient bound needs k >= 2m, got m={m}, k={k}')
    coeffs = second_order_coeffs(m)
    lhs = float(sum(abs(c) * abs(t) ** (k + 1) for t, c in coeffs.coeffs.items()))
    rhs = 24 * math.exp(-7 * m / 6) * m ** (k + 1.5)
    return CoeffBoundCheck(lhs, rhs, lhs <= rhs)


class AbsSumCheck(NamedTuple):
    sum: float
    holds: bool
    partial_zeta: float
    holds_partial_zeta: bool
    holds_cap: bool


def abs_sum_check(m: int) -> AbsSumCheck:
    """
    Evaluates sum_{t=1}^m |a_t| against sum_{t<=m} 1/t^2 and pi^2/6.

    Since a_t = 2/t^2 times a ratio in (0, 1), the inequality that holds for every m is
    sum |a_t| < 2 sum 1/t^2 < pi^2/3; that is what `holds` reports. The tighter comparisons
    (holds_partial_zeta, holds_cap) are evaluated and returned as flags: the first fails
    from m=2 on, the second from m=3 on.
    """
    m = _check_m(m)
    coeffs = second_order_coeffs(m)
    total = sum(abs(coeffs[t]) for t in range(1, m + 1))
    zeta = sum(Fraction(1, t * t) for t in range(1, m + 1))
    holds = total < 2 * zeta and float(2 * zeta) < math.pi ** 2 / 3
    return AbsSumCheck(float(total), holds, float(zeta), total <= zeta, float(total) < scipy.special.zeta(2))


def stencil_offset_constant(coeffs: StencilCoeffs, f0: float) -> float:
    """
    The constant c = (a_0 + 2 sum_{j<=m} 1/j^2) f(0) separating f_(2m)(x) from its
    interpolation value. a_0 = -2 sum 1/j^2 exactly, so c vanishes.
    """
    assert coeffs.kind == 'second', 'the offset constant belongs to the second-order stencil'
    zeta = sum(Fraction(1, j * j) for j in range(1, coeffs.m + 1))
    return float(coeffs[0] + 2 * zeta) * f0


def error_bound_1d(m: int, x_step: float, f_deriv_bound: float) -> float:
    """4 e^{-m/2} ||f^{(2m+1)}|| x^{2m+1}, bound on |f''(0) x^2 - f_(2m)(x) - c|."""
    m = _check_m(m)
    if x_step < 0:
        raise ParameterError(f'x_step must be non-negative, got {x_step}')
    return 4 * math.exp(-m / 2) * f_deriv_bound * x_step ** (2 * m + 1)


def error_bound_directional(m: int, B: float, x_norm: float) -> float:
    """4 B e^{-m/2} ||x||^{2m+1} for the second-order stencil along direction x."""
    return error_bound_1d(m, x_norm, B)


def first_order_error_bound(m: int, B: float, x_norm: float) -> float:
    """e^{-m/2} B ||x||^{2m+1} for the first-order stencil."""
    m = _check_m(m)
    return math.exp(-m / 2) * B * x_norm ** (2 * m + 1)


def error_bound_multivariate(m: int, a: float, c: float, d: int) -> float:
    """sum_{k >= 2m+1} (13 a c m sqrt(d))^k in closed form."""
    m = _check_m(m)
    ratio = 13 * a * c * m * math.sqrt(d)
    if ratio >= 1:
        raise DivergenceError(f'13 a c m sqrt(d) = {ratio:.4g} >= 1, the series diverges')
    return ratio ** (2 * m + 1) / (1 - ratio)


def probe_condition(m, a, d, B, epsilon) -> bool:
    """12 B e^{-m/2} sqrt(d) (2m+1) <= eps / (8 * 42 pi) and a < 2/(sqrt(d)(2m+1))."""
    lhs = 12 * B * math.exp(-m / 2) * math.sqrt(d) * (2 * m + 1)
    return lhs <= epsilon / READOUT_CONST and a < 2 / (math.sqrt(d) * (2 * m + 1))


@dataclass(frozen=True)
class FindiffParams:
    m: int
    a: float
    path: str


def select_findiff_params(d, B, epsilon, R, path='probe', c=None, m=None, log_base=None) -> FindiffParams:
    """
    Stencil half-width and grid scale.

    Args:
        d (int): dimension.
        B: bound on the (2m+1)-th directional derivative; a number or a callable k -> bound
            (the latter lets m and B be chosen together).
        epsilon (float): target accuracy.
        R (float): radius of the region where f is controlled.
        path (str): 'probe' picks m = ceil(log(dB/eps)), a = min(2/(sqrt(d)(2m+1)), 2R/m);
            'gevrey' picks a^{-1} = 14 c m sqrt(d) (196 * 8 * 42 pi c m sqrt(d)/eps)^{1/(2m)}.
        c (float): Gevrey constant (gevrey path).
        m (int, optional): fixed half-width.
        log_base (float, optional): base of log, natural by default.

    Returns:
        FindiffParams
    """
    if not (d >= 1 and epsilon > 0 and R > 0):
        raise ParameterError(f'd, epsilon and R must be positive, got d={d}, epsilon={epsilon}, R={R}')
    if path == 'probe':
        bound = B if callable(B) else (lambda k: B)
        if m is None:
            m = 1
            while m <= MAX_STENCIL_HALF_WIDTH:
                b = bound(2 * m + 1)
                if b < 0:
                    raise ParameterError(f'B must be non-negative, got {b}')
                if b == 0 or m >= log(d * b / epsilon, log_base):
                    break
                m += 1
            else:
                raise ParameterError(f'no m <= {MAX_STENCIL_HALF_WIDTH} satisfies m >= log(dB/eps)')
        m = _check_m(m)
        a = min(2 / (math.sqrt(d) * (2 * m + 1)), 2 * R / m)
    elif path == 'gevrey':
        if c is None or not c > 0:
            raise ParameterError('the gevrey path needs a positive constant c')
        if m is None:
            m = max(1, math.ceil(log(c * math.sqrt(d) / epsilon, log_base)))
        m = _check_m(m)
        cm = c * m * math.sqrt(d)
        a = 1 / (14 * cm * (196 * READOUT_CONST * cm / epsilon) ** (1 / (2 * m)))
    else:
        raise ParameterError(f'unknown path {path}')
    logging.debug(f'select_findiff_params: d={d} eps={epsilon} path={path} -> m={m}, a={a:.4g}')
    return FindiffParams(m, a, path)


def violation_fraction(oracle: FunctionOracle, hessian, m, a, c, n, samples, rng) -> float:
    """
    Fraction of random points x of the scaled grid a G_n^d at which
    |f_(2m)(x) - x^T H x| exceeds error_bound_multivariate(m, a, c, d).
    """
    from qspectral.grid import GridSpec

    spec = GridSpec(n, oracle.d, a)
    bound = error_bound_multivariate(m, a, c, oracle.d)
    X = spec.values()[rng.integers(0, spec.axis_size, size=(samples, oracle.d))]
    coeffs = second_order_coeffs(m)
    approx = stencil_field(oracle, X, coeffs)
    exact = np.einsum('...i,ij,...j->...', X, np.asarray(hessian), X)
    # float64 round-off of the weighted sum is not part of the analytic error
    roundoff = 64 * np.finfo(float).eps * coeffs.abs_sum() * (1 + np.abs(approx))
    bad = np.abs(approx - exact) > bound + roundoff
    frac = float(np.count_nonzero(bad)) / samples
    logging.info(f'violation_fraction: {frac:.2e} of {samples} points above {bound:.3e}')
    return frac

