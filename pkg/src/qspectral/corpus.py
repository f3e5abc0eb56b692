"""
Test functions with closed-form gradient and Hessian at the origin.

Every evaluator is vectorized over leading axes: it maps complex points of shape (..., d)
to values of shape (...). Gradients and Hessians are hand-derived.
"""
import math
import logging
from dataclasses import dataclass

import numpy as np

from qspectral.exceptions import ParameterError
from qspectral.oracle import FunctionOracle, KnownTruth


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    name: str
    oracle: FunctionOracle
    truth: KnownTruth


def _entry(name, evaluator, d, **truth_kwargs):
    truth = KnownTruth(**truth_kwargs)
    return CorpusEntry(name, FunctionOracle(evaluator, d, name=name, truth=truth), truth)


def _poly_deriv_bound(l1, degree, d, reach=1.0):
    """Crude bound on k-th directional derivatives of a polynomial with coefficient l1-norm l1."""
    def bound(k):
        if k > degree:
            return 0.0
        return l1 * (degree * math.sqrt(d)) ** k * max(1.0, reach) ** degree
    return bound


def linear_entry(name, g, grad_bound=None, radius=1.0):
    """f(z) = g . z"""
    g = np.asarray(g, dtype=float)
    d = len(g)

    def f(Z):
        return np.asarray(Z) @ g

    l2 = float(np.linalg.norm(g))
    return _entry(name, f, d, gradient=g, hessian=np.zeros((d, d)), radius=radius,
                  kappa=float(np.abs(g).sum()) * radius, polynomial=True, quadratic=True,
                  grad_bound=grad_bound if grad_bound is not None else float(np.abs(g).max()),
                  hess_bound=0.0, deriv_bound=lambda k: l2 if k == 1 else 0.0)


def quadratic_entry(name, A, radius=1.0, hess_bound=None):
    """
    f(z) = z^T A z for a (not necessarily symmetric) A, so that the Hessian is A + A^T.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    H = A + A.T

    def f(Z):
        Z = np.asarray(Z)
        return np.einsum('...i,ij,...j->...', Z, A, Z)

    spectral_norm = float(np.linalg.norm(H, 2))
    return _entry(name, f, d, gradient=np.zeros(d), hessian=H, radius=radius,
                  kappa=float(np.abs(A).sum()) * radius ** 2, polynomial=True, quadratic=True,
                  grad_bound=float(np.abs(H).sum(axis=1).max()) * radius,
                  hess_bound=hess_bound if hess_bound is not None else float(np.abs(H).max()),
                  deriv_bound=lambda k: spectral_norm if k == 2 else 0.0)


def hessian_quadratic_entry(name, H, radius=1.0, hess_bound=None):
    """f(z) = z^T H z / 2 for symmetric H, whose Hessian is H itself."""
    H = np.asarray(H, dtype=float)
    assert np.allclose(H, H.T), 'H must be symmetric'
    return quadratic_entry(name, H / 2, radius=radius, hess_bound=hess_bound)


# grid-exact at n_eps=6, n_M=2, a=1 (epsilon in [1/16, 1/8), M=1): g_j = (2l+1)/128
LINEAR_D3_G = np.array([65, -33, 13]) / 128

QUAD_DENSE_D2_A = np.array([[0.5, 0.25],
                            [0.25, -0.25]])

QUAD_BOOLEAN_D4_B = np.array([[1, 0, 1, 0],
                              [0, 0, 1, 1],
                              [0, 1, 0, 0],
                              [1, 0, 0, 1]])

QUAD_SPARSE_D8_Q = 7
QUAD_SPARSE_D8_L = np.zeros((8, 8), dtype=np.int64)
for (i, j), v in {(0, 0): 1, (0, 1): 3, (1, 1): -1, (2, 2): 2, (2, 5): -1,
                  (3, 3): 1, (3, 4): -2, (5, 7): 1, (6, 6): -3}.items():
    QUAD_SPARSE_D8_L[i, j] = v
    QUAD_SPARSE_D8_L[j, i] = v


def _poly_d2():
    # 0.3 z1 - 0.2 z2 + 0.5 z1^2 + 0.25 z1 z2 - 0.25 z2^2 + 0.1 z2^3 + 0.05 z1^4
    def f(Z):
        z1, z2 = Z[..., 0], Z[..., 1]
        return (0.3 * z1 - 0.2 * z2 + 0.5 * z1 ** 2 + 0.25 * z1 * z2 - 0.25 * z2 ** 2
                + 0.1 * z2 ** 3 + 0.05 * z1 ** 4)
    return _entry('poly_d2', f, 2, gradient=np.array([0.3, -0.2]),
                  hessian=np.array([[1.0, 0.25], [0.25, -0.5]]), radius=1.0, kappa=1.65,
                  polynomial=True, grad_bound=0.5, hess_bound=1.0,
                  deriv_bound=_poly_deriv_bound(1.65, 4, 2))


def _quartic_d3():
    # 0.2 z1 - 0.1 z3 + 0.25 z1 z2 - 0.15 z2^2 + 0.2 z3^2 + 0.1 z1 z2 z3 + 0.05 z1^4 - 0.05 z2^2 z3^2
    def f(Z):
        z1, z2, z3 = Z[..., 0], Z[..., 1], Z[..., 2]
        return (0.2 * z1 - 0.1 * z3 + 0.25 * z1 * z2 - 0.15 * z2 ** 2 + 0.2 * z3 ** 2
                + 0.1 * z1 * z2 * z3 + 0.05 * z1 ** 4 - 0.05 * z2 ** 2 * z3 ** 2)
    H = np.array([[0.0, 0.25, 0.0],
                  [0.25, -0.3, 0.0],
                  [0.0, 0.0, 0.4]])
    return _entry('quartic_d3', f, 3, gradient=np.array([0.2, 0.0, -0.1]), hessian=H,
                  radius=1.0, kappa=1.1, polynomial=True, grad_bound=0.5, hess_bound=0.5,
                  deriv_bound=_poly_deriv_bound(1.1, 4, 3))


def _cubic_d1():
    def f(Z):
        return Z[..., 0] ** 3
    return _entry('cubic_d1', f, 1, gradient=np.zeros(1), hessian=np.zeros((1, 1)), radius=1.0,
                  kappa=1.0, polynomial=True, grad_bound=1.0, hess_bound=1.0,
                  deriv_bound=_poly_deriv_bound(1.0, 3, 1))


def _exp_d1():
    def f(Z):
        return np.exp(Z[..., 0])
    return _entry('exp_d1', f, 1, gradient=np.ones(1), hessian=np.ones((1, 1)), radius=1.0,
                  kappa=math.e, grad_bound=2.0, hess_bound=2.0, deriv_bound=lambda k: math.e)


EXP_D2_V = np.array([0.5, -0.3])


def _exp_d2():
    v = EXP_D2_V

    def f(Z):
        return np.exp(np.asarray(Z) @ v)
    norm2 = float(np.linalg.norm(v))
    norm1 = float(np.abs(v).sum())
    return _entry('exp_d2', f, 2, gradient=v.copy(), hessian=np.outer(v, v), radius=1.0,
                  kappa=math.exp(norm1), grad_bound=0.5, hess_bound=0.5,
                  deriv_bound=lambda k: norm2 ** k * math.exp(norm1))


def _exp_mix_d2():
    def f(Z):
        return np.exp(Z[..., 0]) * np.cos(Z[..., 1])
    return _entry('exp_mix_d2', f, 2, gradient=np.array([1.0, 0.0]),
                  hessian=np.array([[1.0, 0.0], [0.0, -1.0]]), radius=1.0,
                  kappa=math.e * math.cosh(1.0), grad_bound=1.5, hess_bound=1.5,
                  deriv_bound=lambda k: math.sqrt(2) ** k * math.e * math.cosh(1.0))


def _geometric_d1():
    # Taylor coefficients 2^-n: |a_n| <= kappa (2r)^-n holds with equality for kappa=1, r=1
    def f(Z):
        return 1 / (1 - Z[..., 0] / 2)
    return _entry('geometric_d1', f, 1, gradient=np.array([0.5]), hessian=np.array([[0.5]]),
                  radius=1.0, kappa=1.0, grad_bound=1.0, hess_bound=1.0)


def _gevrey_d4(c=1.0):
    d = 4
    u = np.ones(d) / math.sqrt(d)

    def f(Z):
        return np.exp(c * (np.asarray(Z) @ u))
    return _entry('gevrey_d4', f, d, gradient=c * u, hessian=c ** 2 * np.outer(u, u), radius=1.0,
                  kappa=math.exp(c * math.sqrt(d)), grad_bound=1.0, hess_bound=1.0,
                  deriv_bound=lambda k: c ** k * math.exp(c * math.sqrt(d)), gevrey_c=c)


def fjk_entry(j, k, eps, c, d=None):
    """
    f(x) = eps x_j x_k exp(-c ||x||^2 / 2) with 1-based j, k. The norm is continued
    analytically as sum_l z_l^2. Direct differentiation gives the Hessian eps (E_jk + E_kj),
    i.e. eps off the diagonal and 2 eps on it when j == k. Some statements of this family give
    c (E_jk + E_kj) or 2 eps (E_jk + E_kj) instead; the truth stored here is the directly
    differentiated value, which does not depend on c.
    """
    if d is None:
        d = max(j, k)
    if not (1 <= j <= d and 1 <= k <= d):
        raise ParameterError(f'fjk indices must lie in [1, {d}], got ({j}, {k})')
    if not eps > 0 or c < 0:
        raise ParameterError(f'fjk requires eps > 0 and c >= 0, got eps={eps}, c={c}')
    jj, kk = j - 1, k - 1

    def f(Z):
        Z = np.asarray(Z)
        return eps * Z[..., jj] * Z[..., kk] * np.exp(-c * np.sum(Z ** 2, axis=-1) / 2)
    H = np.zeros((d, d))
    H[jj, kk] += eps
    H[kk, jj] += eps
    name = f'fjk:{j},{k}:{eps:g}:{c:g}' + (f':{d}' if d != max(j, k) else '')
    return _entry(name, f, d, gradient=np.zeros(d), hessian=H, radius=1.0,
                  kappa=eps * math.exp(c * d / 2), grad_bound=1.0, hess_bound=1.0)


_BUILDERS = {
    'linear_d3': lambda: linear_entry('linear_d3', LINEAR_D3_G, grad_bound=1.0),
    'quad_dense_d2': lambda: quadratic_entry('quad_dense_d2', QUAD_DENSE_D2_A),
    'quad_sparse_d8': lambda: hessian_quadratic_entry('quad_sparse_d8', QUAD_SPARSE_D8_L / QUAD_SPARSE_D8_Q,
                                                      hess_bound=1.0),
    'quad_boolean_d4': lambda: quadratic_entry('quad_boolean_d4', QUAD_BOOLEAN_D4_B),
    'poly_d2': _poly_d2,
    'quartic_d3': _quartic_d3,
    'cubic_d1': _cubic_d1,
    'exp_d1': _exp_d1,
    'exp_d2': _exp_d2,
    'exp_mix_d2': _exp_mix_d2,
    'geometric_d1': _geometric_d1,
    'gevrey_d4': _gevrey_d4,
    'fjk:1,2:0.1:1': lambda: fjk_entry(1, 2, 0.1, 1.0),
}

NAMES = list(_BUILDERS)


def corpus():
    return [build() for build in _BUILDERS.values()]


def get_entry(name: str) -> CorpusEntry:
    """
    Looks up a corpus member by name. The lower-bound family is parametrized as
    fjk:j,k:eps:c[:d], e.g. fjk:1,2:0.1:1.
    """
    if name in _BUILDERS:
        return _BUILDERS[name]()
    if name.startswith('fjk:'):
        parts = name.split(':')
        if len(parts) not in (4, 5):
            raise ParameterError(f'expected fjk:j,k:eps:c[:d], got {name}')
        try:
            j, k = (int(v) for v in parts[1].split(','))
            eps, c = float(parts[2]), float(parts[3])
            d = int(parts[4]) if len(parts) == 5 else None
        except ValueError:
            raise ParameterError(f'cannot parse {name}')
        logging.debug(f'building fjk member j={j} k={k} eps={eps} c={c} d={d}')
        return fjk_entry(j, k, eps, c, d)
    raise ParameterError(f'unknown function {name}; known: {", ".join(NAMES)}')


def sparse_lattice_entry(d, q=QUAD_SPARSE_D8_Q, M=1.0):
    """
    f = z^T (H/2) z with H = M L / q, where L pairs coordinates (2i, 2i+1) into the block
    [[1, 2], [2, -1]]; every row and column has at most two nonzeros. An odd d ends with a
    single diagonal 1.
    """
    L = np.zeros((d, d), dtype=np.int64)
    for i in range(0, d - 1, 2):
        L[i:i + 2, i:i + 2] = [[1, 2], [2, -1]]
    if d % 2:
        L[d - 1, d - 1] = 1
    return hessian_quadratic_entry(f'lattice_d{d}_q{q}', M * L / q, hess_bound=M)
