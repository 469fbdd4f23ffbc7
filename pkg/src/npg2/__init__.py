"""Cohomogeneity-one nearly parallel G2-structures with SU(2)^3 symmetry.

Pointwise algebra of the invariant 3-form, the nearly parallel ODE system,
its singular initial value problem, integration and analysis tools.
"""
from .algebra import (
    FCoeffs,
    FourForm,
    GramBlocks,
    MetricBlocks,
    exterior_derivative,
    gram_blocks,
    hodge_dual,
    is_admissible,
    metric_blocks,
    singular_point_form,
)
from .analysis import (
    ClosingReport,
    MetricNorms,
    SweepRow,
    classify_homogeneous,
    closing_diagnostics,
    g2_quadratic_coefficient,
    metric_norms,
    sweep,
)
from .integrate import SolveConfig, Trajectory, integrate_f, solve
from .series import HState, initial_state, linearization, taylor_startup
from .system import (
    apply_tau,
    constraints,
    normalized_oracle,
    np_residual,
    oracle,
    rescale,
    rhs_f,
    seed_on_constraint,
    tau_path,
)

__version__ = "0.1.0"
