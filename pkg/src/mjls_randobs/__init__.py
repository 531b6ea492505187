"""Stabilizing gain schedules for Markov jump linear systems with randomly timed mode observations."""

from .embedding import (
    ExtendedChain,
    ExtendedState,
    build_extended_chain,
    flat_index,
    initial_extended_state,
    reachable_states,
)
from .errors import (
    ConfigError,
    DegenerateDistribution,
    DimensionMismatch,
    LambdaNotRecurrent,
    NonStochastic,
    SingularG,
)
from .lmi import LmiProblem, LmiVariableLayout, assemble, d_operator
from .model import GainSchedule, MjlsModel, closed_loop_matrix
from .modes import StochasticMatrix, floor_mod_T, validate_stochastic
from .obsproc import (
    ObservationModel,
    build_custom,
    build_periodic_with_failures,
    build_renewal,
    check_recurrent,
    restrict_to_observation_set,
    sample_observation_times,
)
from .sdpsolve import SdpSolution, SdpStatus, SolverOptions, solve_feasibility
from .sim import SimConfig, SimResult, second_moment_iterate, simulate_closed_loop, simulate_extended_tuple
from .synth import StabilityCertificate, certify_mss, extract_gains, synthesize

__version__ = "0.1.0"
