import math

# phase-oracle tolerance constant of the gradient readout: |F - g.x - c| <= eps * a / READOUT_CONST
READOUT_CONST = 8 * 42 * math.pi

AMPLITUDE_CAP = 2 ** 24
AMPLITUDE_CAP_ENV = 'QSPECTRAL_AMPLITUDE_CAP'

# repetition constant: T = ceil(C_T * log(d / rho))
C_T = 3
# q = smallest prime >= ceil(C_Q * M / eps)
C_Q = 4
# probe count k = ceil(C_K * s * log(q * d))
C_K = 2
# scaled probe mode y in {0,1}^d / (ALPHA * s)
ALPHA = 4
# noisy-regime constant for the o(1/(s q)) thresholds
NOISE_FRACTION = 1 / 20

IMAG_TOL = 1e-8
REALITY_TOL = 1e-12
KAPPA_SAFETY = 2.0
NORM_TOL = 1e-9

PRIME_SEARCH_WINDOW = 10_000
MAX_STENCIL_HALF_WIDTH = 64

METHODS_GRADIENT = ['spectral', 'findiff']
METHODS_HESSIAN = ['spectral-dense', 'findiff-dense', 'spectral-sparse', 'findiff-sparse']

SCHEMA_VERSION = 1
RESULT_COLUMNS = ['run_id', 'seed', 'function', 'method', 'd', 'n', 'N_or_m', 'a', 'q',
                  'epsilon', 'rho', 'error_linf', 'error_maxnorm', 'success', 'sim_calls',
                  'theory_cost', 'wall_ms']
BOUND_COLUMNS = ['check', 'm', 'k', 'N', 'delta', 'x', 'lhs', 'rhs', 'holds', 'asserted']
SWEEP_COLUMNS = ['function', 'N', 'delta', 'r_tilde', 'x', 'measured', 'bound', 'holds',
                 'above_roundoff']
LEDGER_COLUMNS = ['config', 'd', 'epsilon', 's', 'q', 'sim_calls', 'theory_cost']

# below this magnitude measured errors are dominated by float64 round-off
ROUNDOFF_FLOOR = 1e-13
