"""Predict-and-fix solving of temporal binary MILPs.

Core flow: encode instances as bipartite variable/constraint graphs,
train a graph-convolution + LSTM model that outputs a Beta distribution
per binary variable, fix the most confident variables at their rounded
means, and solve the reduced problem exactly.
"""

from .errors import PredfixError
from .features import NodeTriplets, build_triplets, dataset_maxima
from .generators import GeneratorSpec, generate, label_dataset
from .losses import (
    LossWeights,
    Schedule,
    beta_bernoulli_nll,
    class_rates,
    closed_form_marginal,
    regularizer,
)
from .milp import (
    BipartiteGraph,
    MilpInstance,
    build_bipartite_graph,
    check_feasibility,
    normalize,
    normalize_rescaled,
    objective,
    to_standard_form,
)
from .model import Model, ModelConfig, ModelOutput, make_batch
from .mps import export_mps, read_mps
from .oracle import Label, enumerate_solve
from .quadrature import QuadratureTable, cc_table
from .selection import SelectionResult, beta_moments, reduce_and_solve, score_and_select
from .seriesio import InstanceSeries, load_series, save_series
from .simplex import SolveReport, solve_lp

__version__ = "0.1.0"

__all__ = [
    "BipartiteGraph",
    "GeneratorSpec",
    "InstanceSeries",
    "Label",
    "LossWeights",
    "MilpInstance",
    "Model",
    "ModelConfig",
    "ModelOutput",
    "NodeTriplets",
    "PredfixError",
    "QuadratureTable",
    "Schedule",
    "SelectionResult",
    "SolveReport",
    "beta_bernoulli_nll",
    "beta_moments",
    "build_bipartite_graph",
    "build_triplets",
    "cc_table",
    "check_feasibility",
    "class_rates",
    "closed_form_marginal",
    "dataset_maxima",
    "enumerate_solve",
    "export_mps",
    "generate",
    "label_dataset",
    "load_series",
    "make_batch",
    "normalize",
    "normalize_rescaled",
    "objective",
    "read_mps",
    "reduce_and_solve",
    "regularizer",
    "save_series",
    "score_and_select",
    "solve_lp",
    "to_standard_form",
]
