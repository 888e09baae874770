"""Monotone-tracking output-feedback synthesis for discrete-time LTI plants.

Gains act on the behavioral state (a window of past inputs and outputs), and
are computed by LMI feasibility from a model or from one recorded trajectory.
"""
from .behavioral import (
    BehavioralSystem,
    equivalence_check,
    evaluate_controller,
    lift,
    lift_steady_state,
    pack_window,
    unpack_window,
)
from .errors import (
    AssumptionViolation,
    DimensionError,
    ExtPosError,
    LmiError,
    NoRelativeDegree,
    NotObservable,
    RankConditionError,
    SpecError,
    SynthesisInfeasible,
)
from .init_feasibility import (
    EnsembleData,
    feasible_input_data,
    feasible_input_model,
    generate_ensemble,
    load_ensemble,
    save_ensemble,
    verify_theorem1,
)
from .kernels import BACKEND
from .lmi import LmiProblem, LmiSolution, SolverOptions, solve, verify_solution
from .lti import (
    AssumptionReport,
    LtiSystem,
    Trajectory,
    check_assumption1,
    check_assumptions,
    load_system,
    relative_degree,
    save_system,
    simulate,
    steady_state,
)
from .simkit import (
    ClosedLoopRun,
    closed_loop_run,
    external_positivity_check,
    monotonicity_check,
    spectral_radius,
)
from .synth_data import (
    DataMatrices,
    build_data_matrices,
    generate_pe_data,
    hankel,
    is_persistently_exciting,
    rank_condition,
    synthesize_data,
)
from .synth_model import GainResult, SynthesisSpec, assemble_theorem2, synthesize_model, verify_gain

__version__ = "0.1.0"
