"""Semi-supervised learning of graph signals by smoothed TV minimization."""

__version__ = "0.1.0"

from .graph import (EmpiricalGraph, GenerationError, GraphFormatError, LabelSet,
                    TwoClusterConfig, as_signal, diameter, generate_two_cluster,
                    is_connected, load_edge_list, load_label_set, max_degree,
                    save_edge_list, weighted_degree)
from .calculus import (EdgeField, divergence, graph_gradient, laplacian_quadratic_check,
                       local_variation, operator_norm_estimate, total_variation)
from .solver import (DivergenceError, SolverConfig, SolverTrace, TraceRecord,
                     dual_field, empirical_error, iteration_bound, lipschitz_constant,
                     nmse, project_feasible, smoothed_gradient, smoothed_objective,
                     solve)
from .baseline import label_propagation
from .mpsim import (MessagePassingSimulator, MessageStats, NodeState, SimConfig,
                    consensus_average, init_sim, metropolis_hastings_weights,
                    node_partition, residual_from_consensus)
from .experiments import (CompareResult, ExperimentConfig, GenerateResult, RunSummary,
                          SolveResult, run_compare, run_generate, run_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
