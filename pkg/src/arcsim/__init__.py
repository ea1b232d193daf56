"""Radially symmetric finite-volume simulator for attraction-repulsion
chemotaxis on a ball, with blow-up detection and verification functionals."""

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _dist_version

try:
    __version__ = _dist_version("arcsim")
except PackageNotFoundError:  # source tree without an installed dist
    __version__ = "0+unknown"

from .dynamics import (
    ConfigError,
    PositivityLoss,
    RunOutcome,
    RunStatus,
    SimConfig,
    SolverFailure,
    SolverStalled,
    run,
    step_original,
    step_transformed,
)
from .functionals import (
    CSV_COLUMNS,
    AdmissibilityReport,
    AdmissibleSet,
    ConcentrationTerms,
    DiagnosticsRecord,
    MonitorValues,
    admissibility_report,
    concentration_inequality_terms,
    concentration_ratio,
    dissipation,
    dissipation_parts,
    energy,
    energy_residual,
    energy_source,
    fill_residuals,
    make_density_record,
    make_record,
    monitors,
    monotone_energy,
    signal_defect,
    superlinear_exponent,
)
from .geometry import (
    ADVECTION_SCHEMES,
    RadialGrid,
    advective_divergence,
    ball_volume,
    grad_faces,
    h1_norm,
    integrate,
    laplacian,
    lp_norm,
    unit_sphere_area,
)
from .initdata import (
    FamilySpec,
    GridTooCoarse,
    concentration_family,
    helmholtz_solve,
    original_family_data,
    profile,
    sample_admissible,
)
from .model import (
    NegativeComponent,
    NotAttractionDominated,
    OriginalParams,
    OriginalState,
    Regime,
    TransformedParams,
    TransformedState,
    classify,
    inverse_transform_state,
    transform_params,
    transform_state,
)
from .oderef import (
    BlowupOdeSpec,
    OdeOutcome,
    OdeVerdict,
    certified_threshold,
    closed_form_blowup_time,
    ode_blowup,
    stationary_value,
)

__all__ = [
    "__version__",
    # geometry
    "ADVECTION_SCHEMES", "RadialGrid", "advective_divergence", "ball_volume",
    "grad_faces", "h1_norm", "integrate", "laplacian", "lp_norm",
    "unit_sphere_area",
    # model
    "NegativeComponent", "NotAttractionDominated", "OriginalParams",
    "OriginalState", "Regime", "TransformedParams", "TransformedState",
    "classify", "inverse_transform_state", "transform_params",
    "transform_state",
    # dynamics
    "ConfigError", "PositivityLoss", "RunOutcome", "RunStatus", "SimConfig",
    "SolverFailure", "SolverStalled", "run", "step_original",
    "step_transformed",
    # functionals
    "CSV_COLUMNS", "AdmissibilityReport", "AdmissibleSet",
    "ConcentrationTerms", "DiagnosticsRecord", "MonitorValues",
    "admissibility_report", "concentration_inequality_terms",
    "concentration_ratio", "dissipation", "dissipation_parts", "energy",
    "energy_residual", "energy_source", "fill_residuals",
    "make_density_record", "make_record", "monitors", "monotone_energy",
    "signal_defect", "superlinear_exponent",
    # initdata
    "FamilySpec", "GridTooCoarse", "concentration_family", "helmholtz_solve",
    "original_family_data", "profile", "sample_admissible",
    # oderef
    "BlowupOdeSpec", "OdeOutcome", "OdeVerdict", "certified_threshold",
    "closed_form_blowup_time", "ode_blowup", "stationary_value",
]
