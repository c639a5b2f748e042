"""Sparse linear network inference from time series.

Infers the topology and impulse-response dynamics of partially observed
linear dynamical networks by variational Bayes over a nonparametric
one-step predictor with stable-impulse-response kernel priors, plus an
empirical-Bayes baseline and a Monte Carlo benchmark harness.
"""

from .errors import (
    GenerationError,
    InsufficientDataError,
    NumericalError,
    ParameterError,
)
from .kernel import (
    TcDecomposition,
    TcKernelParam,
    expected_inverse_kernel,
    tc_inverse_decomposition,
    tc_kernel_entry,
    tc_kernel_matrix,
    tc_log_determinant,
)
from .netsim import (
    DsfStructure,
    Experiment,
    StateSpaceModel,
    derive_dsf_structure,
    generate_random_network,
    generate_ring_network,
    simulate,
)
from .problem import ModelStructure, RegressionProblem, assemble, full_structure, predict_one_step
from .vi import ViConfig, ViResult, ViState, lower_bound, run_vi
from .keb import KebConfig, KebResult, KebState, run_keb
from .topology import InferredNetwork, SelectionTrace, backward_select, exhaustive_select, infer_network
from .evaluate import BenchmarkConfig, Condition, TrialResult, fitness, run_benchmark, score_topology

__version__ = "0.1.0"
