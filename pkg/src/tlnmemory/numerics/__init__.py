"""Small dense numerical kernels: eigensolvers, SVD, LP, SDP and Riccati."""

from .linalg import compact_svd, max_eig, min_eig, sym_eig
from .riccati import care_residual, care_solve
from .sdp import LmiBlock, SdpProblem, SdpResult, SdpStatus, sdp_solve
from .simplex import LpProblem, LpResult, LpStatus, check_farkas, lp_solve

__all__ = [
    "compact_svd", "max_eig", "min_eig", "sym_eig",
    "care_residual", "care_solve",
    "LmiBlock", "SdpProblem", "SdpResult", "SdpStatus", "sdp_solve",
    "LpProblem", "LpResult", "LpStatus", "check_farkas", "lp_solve",
]
