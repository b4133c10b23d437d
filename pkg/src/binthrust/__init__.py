"""Desk-scale laboratory for binary-thruster spacecraft control.

Implements and compares three receding-horizon controllers for a
free-floating platform actuated by eight on/off cold-gas thrusters and a
reaction wheel:

  * mixed-integer MPC (branch-and-bound over thruster firings),
  * continuous MPC whose outputs pass through per-thruster Delta-Sigma
    modulators,
  * binary-informed MPC, a continuous MPC whose prediction model includes
    the forward-simulated modulator firings.

The closed-loop harness reproduces an efficiency-analysis protocol:
common initial state, randomly weighted cost functions shared across
controllers, success adjudication in a target ball, and thrust-usage
Pareto fronts.
"""

from .platform_model import PlatformParams, LinearizedDynamics, system_matrices, step_euler, step_plant
from .lp_solver import LpProblem, LpSolution, LpStatus, solve
from .ocp_builder import OcpWeights, OcpSpec, build, extract_first_input
from .mip_solver import DwellLimits, MipProblem, MipSolution, MipStatus, add_dwell_constraints, dwell_feasible, solve_mip
from .ds_modulator import ModulatorBank
from .controllers import ControllerConfig, SolverAbort, make_controller
from .sim_harness import ExperimentConfig, ExperimentRecord, Metrics, run_experiment, run_batch
from .analysis import pareto_front, summarize

__version__ = "0.1.0"
