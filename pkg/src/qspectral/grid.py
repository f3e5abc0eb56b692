"""
Sampling lattices. G_n^d has 2^n dyadic points per axis in (-a/2, a/2), S_q^d has q points k/q
per axis (q an odd prime). Labels are signed integers; axis index = label - min_label.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from qspectral.exceptions import GridRangeError, NotAGridPointError, ParameterError
from qspectral.utils import is_prime


@dataclass(frozen=True)
class GridSpec:
    n: int
    d: int
    a: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f'n must be a positive integer, got {self.n}')
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f'd must be a positive integer, got {self.d}')
        if not self.a > 0:
            raise ParameterError(f'a must be positive, got {self.a}')

    @property
    def axis_size(self):
        return 2 ** self.n

    @property
    def size(self):
        return 2 ** (self.n * self.d)

    @property
    def shape(self):
        return (self.axis_size,) * self.d

    @property
    def min_label(self):
        return -2 ** (self.n - 1)

    @property
    def max_label(self):
        return 2 ** (self.n - 1) - 1

    @property
    def spacing(self):
        return self.a / 2 ** self.n

    def labels(self):
        return np.arange(self.min_label, self.max_label + 1)

    def values(self):
        """Axis values in label order."""
        return self.a * (self.labels() / 2 ** self.n + 1 / 2 ** (self.n + 1))


@dataclass(frozen=True)
class SqSpec:
    q: int
    d: int
    a: float = 1.0

    def __post_init__(self):
        if int(self.q) != self.q or self.q <= 2 or not is_prime(int(self.q)):
            raise ParameterError(f'q must be an odd prime, got {self.q}')
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f'd must be a positive integer, got {self.d}')
        if not self.a > 0:
            raise ParameterError(f'a must be positive, got {self.a}')

    @property
    def axis_size(self):
        return self.q

    @property
    def size(self):
        return self.q ** self.d

    @property
    def shape(self):
        return (self.q,) * self.d

    @property
    def min_label(self):
        return -(self.q - 1) // 2

    @property
    def max_label(self):
        return (self.q - 1) // 2

    @property
    def spacing(self):
        return self.a / self.q

    def labels(self):
        return np.arange(self.min_label, self.max_label + 1)

    def values(self):
        return self.a * self.labels() / self.q


@dataclass(frozen=True)
class GridPoint:
    labels: Tuple[int, ...]
    values: Tuple[float, ...]


def _check_label(spec, label):
    if int(label) != label or not spec.min_label <= label <= spec.max_label:
        raise GridRangeError(f'label {label} outside [{spec.min_label}, {spec.max_label}]')


def label_to_value(spec: GridSpec, label: int) -> float:
    _check_label(spec, label)
    return spec.a * (int(label) / 2 ** spec.n + 1 / 2 ** (spec.n + 1))


def value_to_label(spec: GridSpec, value: float) -> int:
    k = value / spec.a * 2 ** spec.n - 0.5
    if not math.isfinite(k):
        raise NotAGridPointError(f'{value} is not a value of {spec}')
    label = int(round(k))
    if not spec.min_label <= label <= spec.max_label:
        raise NotAGridPointError(f'{value} is not a value of {spec}')
    # a few ulps of slack for non-dyadic scales a
    if not math.isclose(label_to_value(spec, label), value, rel_tol=0, abs_tol=4 * np.finfo(float).eps * spec.a):
        raise NotAGridPointError(f'{value} is not a value of {spec}')
    return label


def nearest_label(spec: GridSpec, value: float) -> int:
    """Closest label; exact midpoints go to the smaller label, out-of-range values clamp."""
    k = value / spec.a * 2 ** spec.n - 0.5
    if math.isnan(k):
        raise NotAGridPointError(f'{value} is not a value of {spec}')
    # clamp before rounding so huge values never reach ceil
    k = min(max(k, spec.min_label - 1), spec.max_label + 1)
    label = math.ceil(k - 0.5)
    return int(min(max(label, spec.min_label), spec.max_label))


def grid_point(spec: GridSpec, labels) -> GridPoint:
    labels = tuple(int(lab) for lab in labels)
    if len(labels) != spec.d:
        raise GridRangeError(f'expected {spec.d} labels, got {len(labels)}')
    return GridPoint(labels, tuple(label_to_value(spec, lab) for lab in labels))


def sq_value(spec: SqSpec, k: int) -> float:
    _check_label(spec, k)
    return spec.a * int(k) / spec.q


def mesh(spec, indices=None) -> np.ndarray:
    """
    Coordinates of grid points as an array of shape (count, d), in C order of the
    axis indices. When indices is given it is a flat index array into that order.
    """
    axis = spec.values()
    if indices is None:
        indices = np.arange(spec.size)
    multi = np.unravel_index(np.asarray(indices), spec.shape)
    return np.stack([axis[m] for m in multi], axis=-1)
