"""Bayesian optimization with transfer learning across heterogeneous search spaces."""

from .spaces import (
    Parameter,
    SubsetPartition,
    TaskSpec,
    build_partition,
    common_parameters,
    project,
    universal_set,
)
from .kernels import BlockKernelParams, TaskCovariance, se_kernel, gram
from .gp import ModelParams, ParamStructure, Posterior, fit_map, log_marginal_likelihood, log_prior, posterior
from .models import FittedModel, ModelKind, ObservationSet, build_model, predict
from .acquisition import Incumbent, log_ei, suggest
from .benchmarks import Problem, hartmann6, hartmann_heterogeneous, load_tabular
from .harness import ExperimentConfig, RunRecord, run_ablation, run_experiment, summarize

__all__ = [
    "Parameter", "SubsetPartition", "TaskSpec", "build_partition",
    "common_parameters", "project", "universal_set",
    "BlockKernelParams", "TaskCovariance", "se_kernel", "gram",
    "ModelParams", "ParamStructure", "Posterior", "fit_map",
    "log_marginal_likelihood", "log_prior", "posterior",
    "FittedModel", "ModelKind", "ObservationSet", "build_model", "predict",
    "Incumbent", "log_ei", "suggest",
    "Problem", "hartmann6", "hartmann_heterogeneous", "load_tabular",
    "ExperimentConfig", "RunRecord", "run_ablation", "run_experiment", "summarize",
]
