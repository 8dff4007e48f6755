"""Region-of-attraction certificates: sector-bound SDP and invariant-polytope LP."""

from .lp_cert import (FiRegion, FiSet, LpCertificate, RoaPolyhedron, Side, alpha_max, build_fi_set,
                      certify_lp, fi_parameters, fi_rows, roa_polyhedra, separating_normal,
                      side_polyhedra, side_radius)
from .sdp_cert import SdpCertificate, SdpSearchConfig, certify_sdp, encoder_factor, solve_at_alpha
from .shifted import (SectorBounds, ShiftedSystem, build_qc, local_slopes, preactivation_interval,
                      qc_value, sector_bounds, shift_about)
from .validate import ValidationReport, failure_onset, sphere_noise, validate_certificate

__all__ = [
    "FiRegion", "FiSet", "LpCertificate", "RoaPolyhedron", "Side", "alpha_max", "build_fi_set",
    "certify_lp", "fi_parameters", "fi_rows", "roa_polyhedra", "separating_normal",
    "side_polyhedra", "side_radius",
    "SdpCertificate", "SdpSearchConfig", "certify_sdp", "encoder_factor", "solve_at_alpha",
    "SectorBounds", "ShiftedSystem", "build_qc", "local_slopes", "preactivation_interval",
    "qc_value", "sector_bounds", "shift_about",
    "ValidationReport", "failure_onset", "sphere_noise", "validate_certificate",
]
