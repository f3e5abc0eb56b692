from qspectral.oracle import FunctionOracle, QueryLedger, KnownTruth
from qspectral.corpus import get_entry
from qspectral.gradient import GradientEstimator, GradientJob, estimate_gradient
from qspectral.hessian import HessianEstimator, HessianJob, estimate_hessian
from qspectral.sparse import estimate_hessian_sparse
from qspectral.consts import RESULT_COLUMNS
