"""Hausdorff dimension and cusp-winding spectra of generalized Schottky groups."""
from .coding import (
    Hyp,
    Par,
    TruncatedAlphabet,
    admissible,
    admissible_geometric,
    branch_map,
    build_alphabet,
    cusp_vector,
    cylinder_arc,
    log_deriv_range,
    rep_point,
    tau,
)
from .moebius import (
    BoundaryArc,
    DiscIsometry,
    Kind,
    apply_boundary,
    boundary_derivative,
    classify,
    compose,
    fixed_boundary_points,
    inverse,
    isometric_arc,
)
from .pressure import (
    Finiteness,
    GibbsStats,
    PotentialParams,
    PressureResult,
    build_weight_matrix,
    finiteness_check,
    gibbs_stats,
    pressure,
    pressure_subsystem,
    spectral_radius,
)
from .schottky import GroupPresentation, load, preset, serialize, validate
from .spectrum import (
    DimResult,
    SpectrumPoint,
    brute_force_oracle,
    distortion_exponent,
    hausdorff_dim,
    periodic_orbit_stats,
    solve_spectrum_point,
    spectrum_grid,
)

__version__ = "0.1.0"
