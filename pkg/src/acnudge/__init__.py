"""acnudge: a 1D Allen-Cahn laboratory for feedback-nudging data assimilation.

Reference solutions use a semi-implicit convex-splitting scheme with an
O(N) tridiagonal solve; the assimilated twin is relaxed toward piecewise
linear interpolants of the reference at static or moving measurement
points.  Experiment drivers reproduce minimum-node searches, sweeping
probe velocity studies, and the power-law length-scale estimate.
"""

from .analysis import LengthScaleEstimate, PowerLawFit, count_structures, estimate_length_scale, fit_power_law
from .assimilation import NudgeConfig, RunRecord, detect_stairsteps, run_pair, step_assimilated
from .experiments import (
    MinNodesResult,
    TrialSpec,
    VelocityResult,
    binary_search_min_nodes,
    conjectured_locked_speeds,
    probe_size_study,
    run_trial_batch,
    spin_up_reference,
    velocity_sweep,
)
from .observation import (
    LAYER_BASED,
    SWEEPING_PROBE,
    UNIFORM_STATIC,
    Interpolant,
    ObservationSet,
    advance_probe,
    build_interpolant,
    full_mesh,
    interpolate,
    layer_based_placement,
    remove_index_range,
    remove_layer_coverage,
    sweeping_probe,
    uniform_static,
)
from .solver import (
    DivergenceError,
    Field,
    SolverConfig,
    TridiagonalSystem,
    discrete_l2,
    discrete_linf,
    make_initial_data,
    solve_tridiagonal,
    step_reference,
)

__version__ = "0.1.0"
