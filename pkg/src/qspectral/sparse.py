"""
Sparse Hessian recovery over Z_q. With H = M L / q for an integer matrix L, Fourier sampling of
x -> q/M h_y(x) on S_q^d returns L y mod q; k random probes y and a support search per row
reconstruct L.
"""
import math
import logging
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import tqdm

from qspectral.consts import ALPHA, C_K, C_Q, C_T
from qspectral.exceptions import AmbiguousRecoveryError, InconsistentResiduesError, ParameterError
from qspectral.findiff import FindiffParams, second_order_coeffs, select_findiff_params, stencil_field
from qspectral.grid import SqSpec, mesh
from qspectral.hessian import hessian_spectral_params
from qspectral.oracle import FunctionOracle, LedgerSnapshot, cost_of_phase_oracle
from qspectral.sampler import PhaseField, axis_distribution, outcome_distribution, sample_labels, sample_product
from qspectral.spectral import SpectralParams, hessian_form
from qspectral.utils import is_prime, log, next_prime, solve_mod, symmetric_mod

PROBE_KINDS = ('binary', 'signed', 'scaled')


@dataclass(frozen=True)
class SparseRecoveryParams:
    """
    Parameters of one sparse recovery run.

    Parameters:
        q (int): odd prime, size of the S_q axis.
        k (int): number of random probes.
        probe_kind (str): 'binary' (y in {0,1}^d), 'signed' (y in {+-1}^d / sqrt(d)) or
            'scaled' (y in {0,1}^d / (alpha s)).
        s (int): nonzeros per row and column.
        M (float): normalization, H = M L / q.
        a (float): scale of the sampling grid (finite differences use a < 1).
        repeats (int): measurements per probe, combined by a per-coordinate majority.
        form (SpectralParams or FindiffParams, optional): how the quadratic form is evaluated.
    """
    q: int
    k: int
    probe_kind: str = 'binary'
    s: int = 1
    M: float = 1.0
    a: float = 1.0
    alpha: float = ALPHA
    repeats: int = 1
    form: Union[SpectralParams, FindiffParams, None] = None

    def __post_init__(self):
        if int(self.q) != self.q or self.q <= 2 or not is_prime(int(self.q)):
            raise ParameterError(f'q must be an odd prime, got {self.q}')
        if int(self.k) != self.k or self.k < 1:
            raise ParameterError(f'probe count must be at least 1, got {self.k}')
        if self.probe_kind not in PROBE_KINDS:
            raise ParameterError(f'unknown probe kind {self.probe_kind}')
        if self.s < 0 or int(self.s) != self.s:
            raise ParameterError(f's must be a non-negative integer, got {self.s}')
        if not (self.M > 0 and self.a > 0 and self.repeats >= 1):
            raise ParameterError('M, a and repeats must be positive')

    def probe_scale(self, d):
        """Real probe = probe_scale * integer probe."""
        if self.probe_kind == 'signed':
            return 1 / math.sqrt(d)
        if self.probe_kind == 'scaled':
            return 1 / (self.alpha * max(self.s, 1))
        return 1.0

    def phase_scale(self, d):
        return self.q / (self.a * self.M * self.probe_scale(d))

    def calls_per_measurement(self, d):
        """Applications of the unit phase oracle needed for the scaled oracle of one measurement."""
        return max(1, math.ceil(1 / self.probe_scale(d) - 1e-9))


@dataclass(frozen=True, eq=False)
class ZqMatrix:
    """Integer matrix in the symmetric range [-(q-1)/2, (q-1)/2]."""
    entries: np.ndarray
    q: int

    def __post_init__(self):
        object.__setattr__(self, 'entries', symmetric_mod(self.entries, self.q))

    @property
    def d(self):
        return self.entries.shape[0]

    def is_symmetric(self):
        return bool(np.array_equal(self.entries, self.entries.T))

    def scaled(self, M):
        """M L / q."""
        return M * self.entries / self.q

    def __eq__(self, other):
        if not isinstance(other, ZqMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.entries, other.entries)


@dataclass(frozen=True, eq=False)
class SparseResult:
    H: np.ndarray
    L: ZqMatrix
    ledger: LedgerSnapshot
    params: SparseRecoveryParams
    probes: np.ndarray = field(repr=False)
    residues: np.ndarray = field(repr=False)
    dense_rows: tuple = ()
    predicted_cost: float = 0.0


def select_q(M, epsilon, c_q=C_Q):
    """Smallest prime >= ceil(c_q M / eps) (at least 3)."""
    if not (M > 0 and epsilon > 0):
        raise ParameterError(f'M and epsilon must be positive, got M={M}, epsilon={epsilon}')
    return next_prime(math.ceil(c_q * M / epsilon))


def probe_count(s, q, d, c_k=C_K, log_base=None):
    """k = ceil(c_k s log(q d)), at least 1."""
    return max(1, math.ceil(c_k * s * log(q * d, log_base)))


def probe_repeats(d, c_T=C_T, log_base=None):
    """Measurements per probe: ceil(c_T log d), at least 1."""
    return max(1, math.ceil(c_T * log(d, log_base))) if d > 1 else 1


def dense_threshold(m_total, q, d, log_base=None):
    """Rows with more than ceil(sqrt(m / log(q d))) nonzeros are learned with basis probes."""
    return max(1, math.ceil(math.sqrt(m_total / log(q * d, log_base))))


def make_probes(kind, k, d, rng) -> np.ndarray:
    """Integer probe matrix of shape (k, d): entries in {0, 1} or, for signed probes, {-1, 1}."""
    if kind == 'signed':
        return rng.choice(np.array([-1, 1]), size=(k, d))
    if kind in ('binary', 'scaled'):
        return rng.integers(0, 2, size=(k, d))
    raise ParameterError(f'unknown probe kind {kind}')


def leakage_bound(q, s, eta, d=None):
    """
    Per-coordinate probability of not measuring the exact residue when the entries carry an
    error of at most eta: pi^2 q^2 s^2 eta^2 / 4, divided by d for signed probes.
    """
    bound = math.pi ** 2 * q ** 2 * s ** 2 * eta ** 2 / 4
    return bound / d if d else bound


def collision_rate(row_a, row_b, q, trials, rng, kind='binary') -> float:
    """Fraction of random probes y with row_a . y = row_b . y mod q."""
    diff = np.asarray(row_a, dtype=np.int64) - np.asarray(row_b, dtype=np.int64)
    Y = make_probes(kind, trials, len(diff), rng)
    hits = (Y @ diff) % q == 0
    return float(np.count_nonzero(hits)) / trials


def _default_form(oracle: FunctionOracle):
    # three circle points give the exact z^T H z for polynomials of degree below five
    truth = oracle.truth
    r = truth.radius if truth is not None and truth.radius is not None else 1.0
    kappa = truth.kappa if truth is not None and truth.kappa is not None else 1.0
    return SpectralParams.for_hessian(r, kappa)


def quadratic_form(oracle: FunctionOracle, form) -> Callable[[np.ndarray], np.ndarray]:
    """Q(z), approximately z^T H_f(0) z, on points of shape (..., d)."""
    form = _default_form(oracle) if form is None else form
    if isinstance(form, SpectralParams):
        return lambda Z: hessian_form(oracle, Z, form)
    coeffs = second_order_coeffs(form.m)
    return lambda Z: stencil_field(oracle, Z, coeffs)


def probe_phase(oracle, y, params: SparseRecoveryParams):
    """x -> phase_scale (Q(a x + y) - Q(a x)) / 2 for the real probe y (points of shape (..., d))."""
    Q = quadratic_form(oracle, params.form)
    y = params.probe_scale(oracle.d) * np.asarray(y, dtype=float)
    scale = params.phase_scale(oracle.d)

    def phase(X):
        Z = params.a * np.asarray(X, dtype=float)
        return scale * (Q(Z + y) - Q(Z)) / 2
    return phase


def _majority(labels):
    """Per-column most frequent value; ties go to the smallest."""
    out = np.empty(labels.shape[1], dtype=np.int64)
    for j in range(labels.shape[1]):
        values, counts = np.unique(labels[:, j], return_counts=True)
        out[j] = values[np.argmax(counts)]
    return out


def sparse_probe_measure(oracle: FunctionOracle, y, params: SparseRecoveryParams, rng, ledger=None,
                         fast_path=None, cap=None) -> np.ndarray:
    """
    Measures L y mod q for one integer probe y.

    On the fast path (quadratic f, where the phase is linear in x) the state is a product over
    axes and each axis is a length-q transform of the phases at x = k/q e_j. Otherwise the
    full S_q^d state is built. Each of params.repeats measurements is charged
    calls_per_measurement oracle calls.

    Returns:
        np.ndarray: residues in the symmetric range, length d.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    d = oracle.d
    q = params.q
    y = np.asarray(y)
    if y.shape != (d,):
        raise ParameterError(f'probe must have length {d}, got shape {y.shape}')
    if fast_path is None:
        fast_path = oracle.truth is not None and oracle.truth.quadratic
    spec = SqSpec(q, d)
    phase = probe_phase(oracle, y, params)
    if fast_path:
        ks = spec.labels() / q
        X = np.zeros((d, q, d))
        X[np.arange(d), :, np.arange(d)] = ks
        phases = phase(X) - phase(np.zeros(d))
        probs = [axis_distribution(phases[j], SqSpec(q, 1)) for j in range(d)]
        labels = sample_product(probs, spec, params.repeats, rng)
    else:
        field = PhaseField(spec, phase(mesh(spec)).reshape(spec.shape))
        labels = sample_labels(outcome_distribution(field, cap), spec, params.repeats, rng)
    if ledger is not None:
        calls = params.repeats * params.calls_per_measurement(d)
        form = params.form if params.form is not None else _default_form(oracle)
        if isinstance(form, SpectralParams):
            per = cost_of_phase_oracle('spectral', epsilon=params.M / q, N=form.N, delta=form.delta, eta=0.01)
        else:
            per = cost_of_phase_oracle('findiff', epsilon=params.M / q, m=form.m, a=params.a, eta=0.01,
                                       coeffs=second_order_coeffs(form.m))
        ledger.record_oracle_calls(calls, cost=calls * per.per_application)
    residues = symmetric_mod(_majority(labels), q)
    logging.debug(f'probe {y.tolist()}: residues {residues.tolist()}')
    return residues


def _row_candidates(Y, b, q, s, row):
    """Supports of size <= s whose restricted system has a solution with all entries nonzero."""
    d = Y.shape[1]
    found = []
    for size in range(0, s + 1):
        for support in itertools.combinations(range(d), size):
            if size == 0:
                if np.all(b % q == 0):
                    found.append(np.zeros(d, dtype=np.int64))
                continue
            sol, rank = solve_mod(Y[:, support], b, q)
            if sol is None:
                continue
            if rank < size:
                raise AmbiguousRecoveryError(row, f'support {support} is underdetermined by {len(b)} probes')
            if np.all(sol != 0):
                full = np.zeros(d, dtype=np.int64)
                full[list(support)] = sol
                found.append(full)
            if len(found) > 1:
                raise AmbiguousRecoveryError(row, f'{len(found)} sparse candidates agree with every probe')
    return found


def recover_sparse_rows(Y, B, params: SparseRecoveryParams, remeasure: Optional[Callable[[int], np.ndarray]] = None
                        ) -> ZqMatrix:
    """
    Recovers L row by row from B = Y L^T mod q.

    Args:
        Y (np.ndarray): integer probes, shape (k, d).
        B (np.ndarray): residues, shape (k, d); B[p, i] = (L y_p)_i.
        params (SparseRecoveryParams): q and s.
        remeasure (callable, optional): i -> residues of the basis probe e_i. Rows without a
            sparse candidate are learned from it (column i of the symmetric L is row i);
            without it such rows raise InconsistentResiduesError.

    Returns:
        ZqMatrix
    """
    Y = np.asarray(Y, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    q = params.q
    k, d = Y.shape
    assert B.shape == (k, d), f'residues must have shape {(k, d)}, got {B.shape}'
    L = np.zeros((d, d), dtype=np.int64)
    dense_rows = []
    for i in range(d):
        found = _row_candidates(Y, B[:, i], q, params.s, i)
        if found:
            L[i] = found[0]
            continue
        if remeasure is None:
            raise InconsistentResiduesError(i, f'no support of size <= {params.s} matches the residues')
        logging.info(f'row {i} has no sparse candidate; learning it with the basis probe')
        row = np.asarray(remeasure(i), dtype=np.int64)
        if np.any((Y @ row - B[:, i]) % q != 0):
            raise InconsistentResiduesError(i, 'basis-probe row disagrees with the random probes')
        L[i] = row
        dense_rows.append(i)
    result = ZqMatrix(L, q)
    if not result.is_symmetric():
        bad = int(np.nonzero(np.any(result.entries != result.entries.T, axis=1))[0][0])
        raise InconsistentResiduesError(bad, 'recovered matrix is not symmetric')
    logging.debug(f'recovered L with {int(np.count_nonzero(result.entries))} nonzeros, dense rows {dense_rows}')
    return result


def sparse_params(job) -> SparseRecoveryParams:
    """Resolves q, s, k, the probe kind and the form parameters of a sparse Hessian job."""
    oracle = job.oracle
    d = oracle.d
    q = job.q if job.q is not None else select_q(job.M, job.epsilon, job.c_q)
    if job.s is not None:
        s = job.s
    elif job.m_total is not None:
        s = dense_threshold(job.m_total, q, d, job.log_base)
    else:
        raise ParameterError('sparse Hessian estimation needs s or the total nonzero budget m')
    k = job.probe_count if job.probe_count is not None else probe_count(s, q, d, job.c_k, job.log_base)
    repeats = job.probe_repeats if job.probe_repeats is not None else probe_repeats(d, job.c_T, job.log_base)
    if job.method == 'spectral-sparse':
        kind = 'scaled' if job.probe_mode == 'scaled' else 'binary'
        form = job.params
        if form is None:
            truth = oracle.truth
            has_kappa = truth is not None and truth.kappa is not None
            form = hessian_spectral_params(oracle, job.epsilon) if has_kappa else _default_form(oracle)
        a = 1.0
    else:
        kind = 'signed'
        form = job.params
        if form is None:
            truth = oracle.truth
            B = truth.deriv_bound if truth is not None else None
            if B is None:
                raise ParameterError('findiff-sparse needs a derivative bound B or explicit (m, a)')
            R = truth.radius if truth.radius is not None else 1.0
            form = select_findiff_params(d, B, job.epsilon, R, log_base=job.log_base)
        a = form.a
    return SparseRecoveryParams(q, k, kind, s, job.M, a, job.alpha, repeats, form)


def predicted_calls(params: SparseRecoveryParams, d, epsilon):
    """Leading term of the query cost: s log(q d)/eps, times sqrt(d) for signed probes."""
    base = params.s * math.log(params.q * d) / epsilon
    return base * math.sqrt(d) if params.probe_kind == 'signed' else base


def estimate_hessian_sparse(job, rng, cap=None, progress=False) -> SparseResult:
    """
    Random probes, one Z_q measurement per probe, then row recovery. Returns M L / q.

    Args:
        job (HessianJob): a 'spectral-sparse' or 'findiff-sparse' job declaring s or m_total.
        rng: numpy Generator or seed.
        cap (int, optional): amplitude cap for the full-state path.
        progress (bool, optional): progress bar over probes.

    Returns:
        SparseResult
    """
    if not job.sparse:
        raise ParameterError(f'{job.method} is a dense method; use estimate_hessian_dense')
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    oracle = job.oracle
    d = oracle.d
    params = sparse_params(job)
    ledger = oracle.ledger
    logging.info(f'sparse Hessian of {oracle.name}: q={params.q} s={params.s} k={params.k} '
                 f'kind={params.probe_kind} repeats={params.repeats}')
    Y = make_probes(params.probe_kind, params.k, d, rng)
    B = np.empty((params.k, d), dtype=np.int64)
    for p in tqdm.tqdm(range(params.k), disable=not progress, desc='probes'):
        B[p] = sparse_probe_measure(oracle, Y[p], params, rng, ledger=ledger, fast_path=job.fast_path, cap=cap)

    remeasure = None
    dense_rows = []
    if job.m_total is not None:
        def remeasure(i):
            dense_rows.append(i)
            e = np.zeros(d, dtype=np.int64)
            e[i] = 1
            return sparse_probe_measure(oracle, e, params, rng, ledger=ledger, fast_path=job.fast_path, cap=cap)

    L = recover_sparse_rows(Y, B, params, remeasure)
    return SparseResult(L.scaled(params.M), L, ledger.snapshot(), params, Y, B, tuple(dense_rows),
                        predicted_calls(params, d, job.epsilon))
