"""Federated-learning simulator for unbiased client-sampling strategies.

The simulator compares uniform sampling, data-ratio (MD) sampling,
gradient-norm importance sampling, diversity-based sampling, their
stale-information practical variants, cluster-based importance sampling,
and the biased power-of-choice baseline on synthetic regression and
classification tasks.
"""

from fedsampler.models import ModelSpec, loss, grad, sgd_step
from fedsampler.datasets import (
    ClientDataset,
    PartitionSpec,
    gen_regression_clients,
    gen_classification_clients,
)
from fedsampler.sampling import (
    SelectionResult,
    DeltaSamplerConfig,
    probs_uniform,
    probs_data_ratio,
    probs_fedis,
    probs_delta,
    probs_practical_update,
    probs_cluster_is,
    select_power_of_choice,
    sample_with_replacement,
    sample_without_replacement,
    cap_inclusion,
)
from fedsampler.federation import RoundConfig, ServerState, run_round
from fedsampler.metrics import RoundMetrics, update_gap, phi_ratio, emit_csv

__version__ = "0.1.0"
