"""Tetrahedral finite-element EEG forward and inverse laboratory.

Multi-shell sphere meshing, source-space peeling away from conductivity
jumps, transfer-matrix lead fields with mixed-element dipole interpolation,
a closed-form 3-shell reference model, and sLORETA / dipole-scan
localisation studies.
"""

from ._core import (
    ConfigError,
    Mesh,
    NumericalError,
    PeelResult,
    SourceSpace,
    __version__,
    analytic_leadfield,
    analytic_potential,
    compare_forward,
    compute_leadfield,
    dipole_scan,
    effective_depth,
    fibonacci_montage,
    generate_sphere_mesh,
    load_leadfield,
    load_mesh,
    peel,
    place_sources,
    rdm_mag,
    refine_compartments,
    run_study,
    save_leadfield,
    save_mesh,
    sloreta,
)

__all__ = [
    "ConfigError",
    "Mesh",
    "NumericalError",
    "PeelResult",
    "SourceSpace",
    "__version__",
    "analytic_leadfield",
    "analytic_potential",
    "compare_forward",
    "compute_leadfield",
    "dipole_scan",
    "effective_depth",
    "fibonacci_montage",
    "generate_sphere_mesh",
    "load_leadfield",
    "load_mesh",
    "peel",
    "place_sources",
    "rdm_mag",
    "refine_compartments",
    "run_study",
    "save_leadfield",
    "save_mesh",
    "sloreta",
]
