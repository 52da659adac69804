"""Numerical laboratory for mixing-driven loss of fractional Sobolev regularity.

The package provides, at desk scale:

- periodic grids and compactly supported data (``fields``);
- fractional Sobolev norms with two independent evaluation routes and the
  rescaling/interpolation/almost-orthogonality toolbox (``sobolev``);
- exact shear-mixing protocols, exact transport along them, a generic
  semi-Lagrangian solver, and measured rate constants (``mixing``);
- exact convergence certification for exp-polynomial series (``series``);
- the rescale-and-patch construction with its schedules, certificates and
  truncated patched solutions (``patchwork``);
- batch experiments with byte-stable reports and a CLI (``experiments``).
"""

from .fields import (
    Box,
    Cube,
    GeometryError,
    Grid,
    ScalarField,
    VectorField,
    cube_distance_to_complement,
    demean,
    extend_to_dimension,
    field_to_csv,
    load_field,
    make_bump,
    save_field,
)
from .mixing import (
    CFLError,
    FlowMap,
    InsufficientDataError,
    MixerConstants,
    RateEstimate,
    ShearStep,
    advect_semi_lagrangian,
    build_mixing_protocol,
    estimate_mixer_constants,
    exact_solution_at,
    fit_exponential_rate,
    gronwall_lower_bound,
    norm_history,
    velocity_norm_series,
)
from .patchwork import (
    Condition,
    ConditionCertificate,
    ConstructionParams,
    InfeasiblePlacementError,
    LipschitzEmbeddingError,
    PieceSpec,
    ResolutionError,
    Schedule,
    UnsupportedScheduleError,
    blowup_time,
    evaluate_condition,
    evaluate_truncated_solution,
    hs_lower_bound_partial_sums,
    hs_lower_bound_series,
    make_piece,
    partial_loss_schedule,
    place_cubes,
    total_loss_schedule,
)
from .series import (
    AlignmentError,
    Classification,
    ExpPolySeries,
    classify,
    classify_bounded,
    exp_factor,
    partial_sum,
    partial_sums,
    product_and_power,
)
from .sobolev import (
    NormValue,
    SobolevIndex,
    UnsupportedIndexError,
    gagliardo_seminorm,
    hs_norm,
    interpolation_bound,
    orthogonality_lower_bound,
    rescaled_norm,
    sphere_surface_area,
    wsp_norm,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ReportBundle,
    emit_report,
    revalidate_certificate,
    run_experiment,
)

__version__ = "0.1.0"
