"""Python bindings for the fedat federated adversarial training simulator."""

import json

from . import _core
from ._core import (
    FedatError,
    curv_penalty,
    default_interpolation_grid,
    epochs_for_round,
    fedavg_fuse,
    fisher_diag,
    forward,
    init_params,
    interpolate_models,
    layer_activations,
    loss_and_grads,
    loss_sweep,
    make_synthetic,
    param_count,
    partition_iid,
    partition_non_iid,
    pgd_attack,
    read_checkpoint,
    svcca_score,
    write_checkpoint,
)

__all__ = [
    "FedatError",
    "Simulation",
    "curv_penalty",
    "default_interpolation_grid",
    "epochs_for_round",
    "fedavg_fuse",
    "fisher_diag",
    "forward",
    "init_params",
    "interpolate_models",
    "layer_activations",
    "loss_and_grads",
    "loss_sweep",
    "make_synthetic",
    "normalize_config",
    "param_count",
    "partition_iid",
    "partition_non_iid",
    "pgd_attack",
    "read_checkpoint",
    "run_experiment",
    "svcca_score",
    "write_checkpoint",
]


def normalize_config(config):
    """Validate a config dict and return it with every default filled in."""
    return json.loads(_core.normalize_config(json.dumps(config)))


def run_experiment(config, workers=1, on_round=None):
    """Run a full experiment. Returns (list of round report dicts, final params)."""
    callback = None
    if on_round is not None:
        callback = lambda text: on_round(json.loads(text))  # noqa: E731
    reports, params = _core.run_experiment(json.dumps(config), workers, callback)
    return [json.loads(r) for r in reports], params


class Simulation:
    """Round-by-round access to one experiment."""

    def __init__(self, config, workers=1):
        self._sim = _core.Simulation(json.dumps(config), workers)

    def run_round(self):
        return json.loads(self._sim.run_round())

    @property
    def next_round(self):
        return self._sim.next_round

    @property
    def global_params(self):
        return self._sim.global_params

    @property
    def local_models(self):
        return self._sim.local_models

    @property
    def train_set(self):
        return self._sim.train_set

    @property
    def test_set(self):
        return self._sim.test_set
