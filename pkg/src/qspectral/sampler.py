"""
Classical simulation of Fourier sampling: prepare sum_x e^{2 pi i phase(x)} |x> over a grid,
apply the inverse Fourier transform per axis and measure.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
import scipy.fft

from qspectral.consts import NORM_TOL
from qspectral.exceptions import ResourceLimitError
from qspectral.grid import GridSpec, SqSpec, label_to_value, sq_value
from qspectral.utils import amplitude_cap, lower_median


@dataclass(frozen=True, eq=False)
class PhaseField:
    """Phase per grid point in units of 2 pi, array of shape spec.shape in label order."""
    spec: Union[GridSpec, SqSpec]
    phase: np.ndarray

    def __post_init__(self):
        phase = np.asarray(self.phase, dtype=float)
        assert phase.shape == self.spec.shape, f'phase shape {phase.shape} does not match grid {self.spec.shape}'
        assert np.all(np.isfinite(phase)), 'phase field has non-finite values'
        object.__setattr__(self, 'phase', phase)


@dataclass(frozen=True, eq=False)
class StateVector:
    spec: Union[GridSpec, SqSpec]
    amplitudes: np.ndarray

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class MeasurementOutcome:
    labels: Tuple[int, ...]
    values: Tuple[float, ...]


def check_cap(size, cap=None, suggestion=''):
    cap = amplitude_cap() if cap is None else cap
    if size > cap:
        raise ResourceLimitError(size, cap, suggestion)


def build_state(field: PhaseField, cap=None) -> StateVector:
    spec = field.spec
    check_cap(spec.size, cap, 'reduce n or d')
    amps = np.exp(2j * np.pi * field.phase) / np.sqrt(spec.size)
    return StateVector(spec, amps)


def _gn_factors(n):
    """
    QFT_{G_n}[j, l] = e^{2 pi i (l+1/2)(j+1/2)/2^n} / sqrt(2^n) on labels. With axis index
    p = l + 2^{n-1} and alpha = 1/2 - 2^{n-1} this is c D F D, where F is the unitary
    inverse DFT, D = diag(e^{2 pi i alpha p / 2^n}) and c = e^{2 pi i alpha^2 / 2^n}.
    """
    size = 2 ** n
    alpha = 0.5 - size / 2
    p = np.arange(size)
    D = np.exp(2j * np.pi * alpha * p / size)
    c = np.exp(2j * np.pi * alpha * alpha / size)
    return D, c


def _diag_all_axes(amps, D):
    out = amps
    for axis in range(amps.ndim):
        shape = [1] * amps.ndim
        shape[axis] = -1
        out = out * D.reshape(shape)
    return out


def qft_axiswise(state: StateVector, workers=None) -> StateVector:
    """Forward QFT_{G_n} on every axis."""
    if not isinstance(state.spec, GridSpec):
        raise TypeError('qft_axiswise needs a G_n grid')
    D, c = _gn_factors(state.spec.n)
    amps = _diag_all_axes(state.amplitudes, D)
    amps = scipy.fft.ifftn(amps, norm='ortho', workers=workers)
    amps = _diag_all_axes(amps, D) * c ** state.spec.d
    return StateVector(state.spec, amps)


def inverse_qft_axiswise(state: StateVector, workers=None) -> StateVector:
    """Inverse of QFT_{G_n} on every axis."""
    if not isinstance(state.spec, GridSpec):
        raise TypeError('inverse_qft_axiswise needs a G_n grid; use zq_transform for S_q')
    D, c = _gn_factors(state.spec.n)
    Dc = np.conj(D)
    amps = _diag_all_axes(state.amplitudes, Dc)
    amps = scipy.fft.fftn(amps, norm='ortho', workers=workers)
    amps = _diag_all_axes(amps, Dc) * np.conj(c) ** state.spec.d
    out = StateVector(state.spec, amps)
    assert abs(out.norm() - state.norm()) <= NORM_TOL, 'inverse QFT lost norm'
    return out


def zq_transform_axis(phases) -> np.ndarray:
    """
    Inverse length-q DFT matching the kernel e^{2 pi i k b / q}: the input indexed by the
    symmetric labels -(q-1)/2..(q-1)/2 is mapped to amplitudes on the same labels, and
    e^{2 pi i k b / q}/sqrt(q) goes to the basis state b.
    """
    phases = np.asarray(phases, dtype=complex)
    return scipy.fft.fftshift(scipy.fft.fft(scipy.fft.ifftshift(phases), norm='ortho'))


def zq_transform(state: StateVector, workers=None) -> StateVector:
    """zq_transform_axis applied to every axis of a full S_q^d state."""
    if not isinstance(state.spec, SqSpec):
        raise TypeError('zq_transform needs an S_q grid')
    amps = scipy.fft.fftshift(scipy.fft.fftn(scipy.fft.ifftshift(state.amplitudes), norm='ortho', workers=workers))
    return StateVector(state.spec, amps)


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_labels(probabilities, spec, size, rng) -> np.ndarray:
    """Draws `size` joint labels, shape (size, d), from a probability array of shape spec.shape."""
    p = np.asarray(probabilities, dtype=float).ravel()
    p = p / p.sum()
    flat = _rng(rng).choice(p.size, size=size, p=p)
    multi = np.stack(np.unravel_index(flat, spec.shape), axis=-1)
    return multi + spec.min_label


def decode_values(spec, labels):
    if isinstance(spec, GridSpec):
        return tuple(label_to_value(spec, int(lab)) for lab in labels)
    return tuple(sq_value(spec, int(lab)) for lab in labels)


def sample_outcome(state: StateVector, rng) -> MeasurementOutcome:
    labels = sample_labels(state.probabilities(), state.spec, 1, rng)[0]
    labels = tuple(int(lab) for lab in labels)
    return MeasurementOutcome(labels, decode_values(state.spec, labels))


def sample_many(state: StateVector, count: int, rng) -> List[MeasurementOutcome]:
    """`count` independent measurements of copies of the same prepared state."""
    labels = sample_labels(state.probabilities(), state.spec, count, rng)
    return [MeasurementOutcome(tuple(int(v) for v in row), decode_values(state.spec, row)) for row in labels]


def axis_distribution(phase_1d, spec) -> np.ndarray:
    """Outcome distribution of one axis of a product state with the given per-axis phases."""
    phase_1d = np.asarray(phase_1d, dtype=float)
    amps = np.exp(2j * np.pi * phase_1d) / np.sqrt(len(phase_1d))
    if isinstance(spec, GridSpec):
        one = StateVector(GridSpec(spec.n, 1, spec.a), amps)
        out = inverse_qft_axiswise(one).amplitudes
    else:
        out = zq_transform_axis(amps)
    return np.abs(out) ** 2


def sample_product(axis_probabilities, spec, size, rng) -> np.ndarray:
    """Samples (size, d) labels from independent per-axis distributions."""
    rng = _rng(rng)
    cols = []
    for p in axis_probabilities:
        p = np.asarray(p, dtype=float)
        cols.append(rng.choice(p.size, size=size, p=p / p.sum()))
    return np.stack(cols, axis=-1) + spec.min_label


def outcome_distribution(field: PhaseField, cap=None, workers=None) -> np.ndarray:
    """Probabilities of every joint label after the inverse transform, shape spec.shape."""
    state = build_state(field, cap)
    if isinstance(field.spec, GridSpec):
        state = inverse_qft_axiswise(state, workers)
    else:
        state = zq_transform(state, workers)
    return state.probabilities()


@dataclass(frozen=True, eq=False)
class JordanSample:
    labels: np.ndarray
    samples: np.ndarray


def jordan_sample(phase_builder: Callable[[GridSpec], np.ndarray], spec: GridSpec, repetitions: int, rng,
                  ledger=None, cost_per_call=0.0, calls_per_repetition=1, cap=None, workers=None,
                  distribution: Optional[np.ndarray] = None) -> JordanSample:
    """
    Prepares the phase state, applies the inverse QFT and measures `repetitions` times; the
    coordinate-wise (lower) median of the measured labels is returned.

    The prepared state is the same in every repetition, so it is built once and sampled
    repeatedly; `distribution` lets callers pass an already computed outcome distribution.
    Each repetition is charged `calls_per_repetition` superposition oracle calls.
    """
    assert repetitions >= 1, 'need at least one repetition'
    if distribution is None:
        field = PhaseField(spec, phase_builder(spec))
        distribution = outcome_distribution(field, cap, workers)
    samples = sample_labels(distribution, spec, repetitions, rng)
    if ledger is not None:
        ledger.record_oracle_calls(repetitions * calls_per_repetition, cost=cost_per_call * repetitions)
    labels = lower_median(samples, axis=0)
    logging.debug(f'jordan_sample: T={repetitions}, median labels {labels.tolist()}')
    return JordanSample(labels, samples)
