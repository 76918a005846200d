"""Policy iteration for a discretized mountain car with QUBO-based policy evaluation."""

from .annealer import AnnealParams, SolverResult, brute_force, simulated_anneal
from .dp import SoftParams, greedy_policy, soft_value_iteration, value_iteration
from .env import ContState, EnvParams, rollout, step
from .grid import GridSpec, TransitionModel, build_transition_model
from .iteration import QepiConfig, accuracy_experiment, reference_policy, run_qepi
from .qubo import BinaryEncoding, QuboProblem, build_qubo, decode, encode
from .sle import LinearSystem, build_sle, classical_solve

__version__ = "0.1.0"

__all__ = [
    "AnnealParams", "BinaryEncoding", "ContState", "EnvParams", "GridSpec", "LinearSystem",
    "QepiConfig", "QuboProblem", "SoftParams", "SolverResult", "TransitionModel",
    "accuracy_experiment", "brute_force", "build_qubo", "build_sle", "build_transition_model",
    "classical_solve", "decode", "encode", "greedy_policy", "reference_policy", "rollout",
    "run_qepi", "simulated_anneal", "soft_value_iteration", "step", "value_iteration",
]
