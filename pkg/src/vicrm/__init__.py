"""Solvers for variational inequalities over intersections of convex sets.

The feasible set is an intersection of ellipsoids.  Two direct methods
accelerate the classical projected-operator iteration with a circumcenter
step built from separating halfspaces; their non-accelerated counterparts
and two exact-projection methods (extragradient and an adaptive reflected
variant) are included for comparison, together with a benchmark runner
that emits result tables and performance profiles.
"""

from .geometry import (
    FEASIBLE,
    CircumcenterStep,
    DegenerateSeparatorError,
    Halfspace,
    InvalidHalfspaceError,
    circumcenter_oracle,
    circumcenter_step,
    project_halfspace,
    reflect_halfspace,
    separating_halfspace,
)
from .sets import (
    Ellipsoid,
    FeasibleSet,
    ProjectionFailure,
    bounding_radius,
    eval_constraint,
    generate_feasible_set,
    max_violation,
    project_ellipsoid,
    project_intersection,
)
from .operators import (
    Family,
    Monotonicity,
    OperatorSpec,
    classify_monotonicity,
    eval_operator,
    generate_operator,
    lipschitz_estimate,
)
from .solvers import (
    Algorithm,
    SolveResult,
    SolverConfig,
    Status,
    StepsizeSchedule,
    check_solution,
    crm_vip1_solve,
    ecm_solve,
    egm_solve,
    mal_adap_solve,
    solve,
)
from .bench import (
    ProfileTable,
    ResultRow,
    Scenario,
    median_table,
    performance_profile,
    run_scenario,
    scenario,
    speedup_table,
)

__version__ = "0.1.0"
