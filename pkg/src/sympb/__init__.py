"""Dissipative symplectic billiards in strictly convex planar domains.

Evaluate the conservative and dissipative billiard maps, find and classify
4-periodic orbits, approximate global and Birkhoff attractors (orbit clouds
and the strong-dissipation graph-transform fixed point), and reproduce the
phase-portrait experiments from the command line (``sympb``).
"""

from .attractor import (
    AttractorCloud,
    AttractorGraph,
    ConeFieldResult,
    RotationInterval,
    band_bound,
    cone_check,
    graph_transform_fixed_point,
    invariance_residual,
    iterate_cloud,
    largest_cone_lambda,
    non_graph_witness,
    rotation_interval,
    suggest_cone_alpha,
    zero_section_hits,
)
from .dynamics import (
    Jacobian2,
    LPartials,
    PhasePoint,
    differential,
    from_plot,
    from_twist,
    generating_partials,
    phase_bounds,
    step_backward_conservative,
    step_conservative,
    step_dissipative,
    step_twist,
    to_plot,
    to_twist,
)
from .errors import (
    AnalysisRefused,
    BilliardError,
    ChartError,
    ConfigError,
    ConsistencyError,
    DomainError,
    GeometryError,
    KindMismatch,
    NotContracted,
    SearchError,
    SolveError,
)
from .periodic import (
    ManifoldSample,
    PeriodicOrbit4,
    RadonFamily,
    StabilityReport,
    birkhoff_orbit,
    classify,
    classify_orbit,
    find_four_periodic,
    four_periodic_residual,
    four_step_differential,
    four_step_map,
    orbit_theta_set,
    partner_angle,
    stability_index,
    unstable_manifold_sample,
)
from .table import (
    AffineImage,
    BilliardTable,
    ConvexityReport,
    TableSpec,
    compatible_origin,
    convexity_report,
    eval_support,
    load_table,
    polar_table,
    spec_from_json,
    spec_to_json,
    support_table,
    unit_circle,
)

__version__ = "0.1.0"
