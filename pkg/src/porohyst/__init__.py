"""Degenerate porous-medium diffusion with Preisach hysteresis.

Scalar hysteresis operators (play updates, memory curves, energies),
Neumann finite differences, the implicit time-discrete scheme and a
scenario-driven simulator with energy / budget / stabilization
diagnostics.
"""

from .density import ConvexifiableMap, PreisachDensity, identity_map
from .hysteresis import (
    HypothesisReport,
    MemoryCurve,
    ThresholdGrid,
    Violation,
    active_level,
    admissible_memory,
    branch_slope,
    branch_value,
    curve_update,
    dissipation_increment,
    memory_distance,
    play_update,
    preisach_output,
    stored_energy,
    validate_hypothesis,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .orlicz import OrliczFunctions, orlicz_functions
from .runner import (
    RunResult,
    decay_fit,
    interpolate_output,
    orlicz_budget,
    run,
    steady_detect,
    tau_refinement,
)
from .scenario import Scenario, load_config, scenario_from_dict
from .spatial import (
    EigenPair,
    Grid,
    gradient_energy,
    integrate,
    laplacian,
    neumann_eigen,
    spd_solve,
)
from .stepper import (
    Problem,
    SimState,
    SolverOptions,
    StepReport,
    backward_step,
    init_state,
    residual_eval,
    step,
)

__version__ = "0.1.0"
