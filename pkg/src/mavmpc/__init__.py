"""Matrix-free nonlinear MPC for MAV obstacle avoidance.

Building blocks: quadrotor dynamics with first-order attitude lags, obstacle
sets with smooth soft-constraint penalties, a single-shooting horizon cost
with adjoint gradients, a PANOC solver (projected gradient + L-BFGS with an
envelope line search), a thrust-constant estimator, and a closed-loop
simulation harness with CSV/figure reporting.
"""

from .dynamics import (ControlInput, MavState, ModelParams, derivative,
                       hover_input, rotation_matrix, step, step_jacobians)
from .estimator import (DirectEstimate, EstimatorConfig, EstimatorState,
                        ThrustEstimator, direct_estimate, ekf_update,
                        thrust_to_signal)
from .harness import (ClosedLoopError, TrajectoryLog, export_csv,
                      read_csv_columns, reference_scheduler, run_closed_loop)
from .obstacles import (AxisSlab, CornerPointSet, Ellipsoid, Halfspace,
                        ObstacleSpec, VerticalCylinder, enlarge, grad_psi, psi)
from .ocp import (CostWeights, DivergedTrajectoryError, OcpConfig,
                  ShootingProblem, grad_total_cost, reference_state, shoot,
                  stage_cost, terminal_cost, total_cost)
from .panoc import (BoxSet, ExitStatus, FunctionOracle, LbfgsBuffer,
                    SolverConfig, SolverDiagnostics, fbe, project,
                    prox_grad_step, solve)
from .scenario import (PlantOptions, ReferenceSchedule, ScenarioConfig,
                       ScenarioError, ThrustProfile, load_scenario,
                       parse_scenario)

__version__ = "0.1.0"

__all__ = [
    "AxisSlab", "BoxSet", "ClosedLoopError", "ControlInput", "CornerPointSet",
    "CostWeights", "DirectEstimate", "DivergedTrajectoryError", "Ellipsoid",
    "EstimatorConfig", "EstimatorState", "ExitStatus", "FunctionOracle",
    "Halfspace", "LbfgsBuffer", "MavState", "ModelParams", "ObstacleSpec",
    "OcpConfig", "PlantOptions", "ReferenceSchedule", "ScenarioConfig",
    "ScenarioError", "ShootingProblem", "SolverConfig", "SolverDiagnostics",
    "ThrustEstimator", "ThrustProfile", "TrajectoryLog", "VerticalCylinder",
    "derivative", "direct_estimate", "ekf_update", "enlarge", "export_csv",
    "fbe", "grad_psi", "grad_total_cost", "hover_input", "load_scenario",
    "parse_scenario", "project", "prox_grad_step", "psi", "read_csv_columns",
    "reference_scheduler", "reference_state", "rotation_matrix",
    "run_closed_loop", "shoot", "solve", "stage_cost", "step",
    "step_jacobians", "terminal_cost", "thrust_to_signal", "total_cost",
]
