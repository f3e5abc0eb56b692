import math
import os
import logging

import numpy as np

from qspectral.consts import AMPLITUDE_CAP, AMPLITUDE_CAP_ENV, IMAG_TOL, PRIME_SEARCH_WINDOW
from qspectral.exceptions import ParameterError, RealityViolationError


def log(x, base=None):
    """Logarithm under the configured convention (natural log when base is None)."""
    if base is None or base == math.e:
        return math.log(x)
    return math.log(x) / math.log(base)


def amplitude_cap():
    """Amplitude cap, honoring the environment override."""
    raw = os.environ.get(AMPLITUDE_CAP_ENV)
    if raw is None or raw == '':
        return AMPLITUDE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ParameterError(f'{AMPLITUDE_CAP_ENV} must be an integer, got {raw!r}')
    if cap < 1:
        raise ParameterError(f'{AMPLITUDE_CAP_ENV} must be positive, got {cap}')
    logging.debug(f'amplitude cap overridden from environment: {cap}')
    return cap


def real_part(values, what):
    """Real part of values whose imaginary residue must stay below IMAG_TOL (1 + |real|)."""
    values = np.asarray(values)
    residue = np.abs(values.imag)
    limit = IMAG_TOL * (1 + np.abs(values.real))
    if np.any(residue > limit):
        worst = float(residue.max())
        raise RealityViolationError(f'{what} has imaginary residue {worst:.3e}; f does not map reals to reals')
    return values.real

def is_prime(q):
    if q < 2:
        return False
    if q < 4:
        return True
    if q % 2 == 0:
        return False
    for p in range(3, math.isqrt(q) + 1, 2):
        if q % p == 0:
            return False
    return True


def next_prime(lower, window=PRIME_SEARCH_WINDOW):
    """Smallest odd prime >= lower, searched upward within the window."""
    start = max(int(lower), 3)
    for q in range(start, start + window + 1):
        if is_prime(q):
            return q
    raise ParameterError(f'no prime found in [{start}, {start + window}]')


def lower_median(values, axis=0):
    """Median that takes the lower middle element for even counts."""
    values = np.sort(np.asarray(values), axis=axis)
    count = values.shape[axis]
    return np.take(values, (count - 1) // 2, axis=axis)


def symmetric_mod(x, q):
    """Representative of x mod q in [-(q-1)/2, (q-1)/2]."""
    h = (q - 1) // 2
    return (np.asarray(x, dtype=np.int64) + h) % q - h


def solve_mod(A, b, q):
    """
    Solves A v = b over Z_q by Gaussian elimination.

    Args:
        A (np.ndarray): integer matrix of shape (k, r).
        b (np.ndarray): integer vector of length k.
        q (int): prime modulus.

    Returns:
        tuple: (solution or None, rank). The solution is a particular solution in
        symmetric representation; it is None when the system is inconsistent.
    """
    A = np.asarray(A, dtype=np.int64) % q
    b = np.asarray(b, dtype=np.int64) % q
    k, r = A.shape
    aug = np.concatenate([A, b.reshape(-1, 1)], axis=1)
    pivots = []
    row = 0
    for col in range(r):
        if row == k:
            break
        nz = np.nonzero(aug[row:, col])[0]
        if len(nz) == 0:
            continue
        piv = row + nz[0]
        if piv != row:
            aug[[row, piv]] = aug[[piv, row]]
        inv = pow(int(aug[row, col]), -1, q)
        aug[row] = (aug[row] * inv) % q
        for other in range(k):
            if other != row and aug[other, col] != 0:
                aug[other] = (aug[other] - aug[other, col] * aug[row]) % q
        pivots.append(col)
        row += 1
    rank = len(pivots)
    if np.any(aug[rank:, r] != 0):
        return None, rank
    sol = np.zeros(r, dtype=np.int64)
    for i, col in enumerate(pivots):
        sol[col] = aug[i, r]
    return symmetric_mod(sol, q), rank
