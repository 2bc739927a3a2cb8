"""Learn STRIPS action models from noisy, incomplete action traces."""

from .encoding import FluentIndex, build_fluent_index, encode_trace
from .evaluation import error_rate, kernel_comparison, prediction_fscore
from .learn import LearnConfig, learn_domain
from .pddl import Domain, load_domain, load_problem, parse_domain, parse_problem, emit_domain
from .perceptron import KernelSpec
from .simulator import ObservationModel, generate_trace, read_trace, write_trace

__all__ = [
    "Domain", "FluentIndex", "KernelSpec", "LearnConfig", "ObservationModel",
    "build_fluent_index", "emit_domain", "encode_trace", "error_rate", "generate_trace",
    "kernel_comparison", "learn_domain", "load_domain", "load_problem", "parse_domain",
    "parse_problem", "prediction_fscore", "read_trace", "write_trace",
]

__version__ = "0.1.0"
