"""Flat run configuration: one key per knob, shared by config files and flags."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields

import yaml

from .diffcore import OptimizerConfig
from .model import ModelConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    # data
    holdout_days: float = 1.0
    valid_fraction: float = 0.1
    min_item_count: int = 5
    # model
    dim: int = 100
    l_max: int = 6
    l_pos: int = 50
    eta: float = 0.0
    gnn_iters: int = 1
    sim_source: str = "current"
    mlp_depth: int = 2
    mlp_act: str = "relu"
    dropout: float = 0.25
    init_std: float = 0.1
    dtype: str = "float32"
    no_iirl: bool = False
    seq_graph: bool = False
    no_gbp_r: bool = False
    no_gbp_d: bool = False
    no_gbp: bool = False
    repeat_dedup: bool = False
    # training
    batch_size: int = 100
    epochs: int = 10
    patience: int = 3
    lr: float = 1e-3
    lr_decay: float = 0.1
    decay_every: int = 3
    l2: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    HELP = {
        "holdout_days": "days at the end of the log used as test",
        "valid_fraction": "random share of training pairs held out for validation",
        "min_item_count": "items seen fewer times are filtered",
        "dim": "embedding dimension",
        "l_max": "max pattern length (last l_max items)",
        "l_pos": "rows of the reversed-position table",
        "eta": "cosine threshold for graph edges",
        "gnn_iters": "graph encoder rounds",
        "sim_source": "'current' recomputes similarity per round, 'input' uses the raw embeddings",
        "mlp_depth": "layers of the mode MLP",
        "mlp_act": "mode MLP activation",
        "dropout": "dropout on item embeddings",
        "init_std": "std of the Gaussian initialiser",
        "dtype": "float32 or float64",
        "no_iirl": "ablation: skip the graph encoder",
        "seq_graph": "ablation: consecutive-transition graph",
        "no_gbp_r": "ablation: no pattern in the repeat head",
        "no_gbp_d": "ablation: no pattern in the mode head",
        "no_gbp": "ablation: no pattern anywhere",
        "repeat_dedup": "repeat softmax over distinct items (latest occurrence) rather than summing positions",
        "batch_size": "mini-batch size",
        "epochs": "max epochs",
        "patience": "early-stop after this many epochs without validation gain (0 = off)",
        "lr": "initial Adam learning rate",
        "lr_decay": "lr multiplier per decay interval",
        "decay_every": "epochs per decay interval (0 = constant lr)",
        "l2": "L2 penalty added to gradients",
        "beta1": "Adam beta1",
        "beta2": "Adam beta2",
        "adam_eps": "Adam epsilon",
        "seed": "random seed (falls back to $RNMSR_SEED)",
    }

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        unknown = set(values) - set(cls.keys())
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        for f in fields(cls):
            if f.name in values:
                setattr(cfg, f.name, _coerce(f.name, values[f.name], type(getattr(cfg, f.name))))
        return cfg

    @classmethod
    def read_mapping(cls, path) -> dict:
        """The validated key/value pairs a YAML file sets, without defaults."""
        with open(path, encoding="utf-8") as fh:
            values = yaml.safe_load(fh) or {}
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: expected a key: value mapping")
        cls.from_mapping(values)
        return values

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_mapping(cls.read_mapping(path))

    def to_dict(self) -> dict:
        return asdict(self)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            dim=self.dim, l_max=self.l_max, l_pos=self.l_pos, mlp_depth=self.mlp_depth, mlp_act=self.mlp_act,
            dropout=self.dropout, init_std=self.init_std, eta=self.eta, gnn_iters=self.gnn_iters,
            sim_source=self.sim_source, no_iirl=self.no_iirl, seq_graph=self.seq_graph, no_gbp_r=self.no_gbp_r,
            no_gbp_d=self.no_gbp_d, no_gbp=self.no_gbp, repeat_dedup=self.repeat_dedup, dtype=self.dtype,
        )

    def train_config(self) -> TrainConfig:
        optim = OptimizerConfig(
            lr=self.lr, decay=self.lr_decay, decay_every=self.decay_every, l2=self.l2,
            beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps,
        )
        return TrainConfig(
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed, patience=self.patience,
            model=self.model_config(), optim=optim,
        )


def _coerce(name, value, kind):
    if kind is bool:
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected {kind.__name__}, got {value!r}") from None


def env_seed(default: int = 0) -> int:
    raw = os.environ.get("RNMSR_SEED")
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"RNMSR_SEED must be an integer, got {raw!r}") from None
