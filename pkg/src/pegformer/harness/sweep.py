"""Size-generalization sweeps and the graph-Transformer ablation."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from ..channels import Dataset, gen_rayleigh, gen_saleh_valenzuela
from ..models import ConfigError, Model, ModelSpec, load_checkpoint
from .train import ResultRow, TrainConfig, evaluate, train

AXES = ("users", "antennas", "rf_chains")
ABLATION_VARIANTS = ("gformer_2d", "f_2d_gformer", "gformer_2d_no_uk", "gformer_2d_no_uv")


def make_data(channel: str, n: int, k: int, count: int, snr_db: float, seed: int,
              nrf: int | None = None) -> Dataset:
    if channel == "rayleigh":
        ds = gen_rayleigh(n, k, count, snr_db, seed)
    elif channel == "sv":
        ds = gen_saleh_valenzuela(n, k, 4, 5, count, snr_db, seed)
    else:
        raise ConfigError(f"unknown channel model {channel!r}")
    if nrf is not None:
        ds.meta["nrf"] = int(nrf)
    return ds


def truncated_exponential(mean: float, cap: int, size: int, rng: np.random.Generator,
                          min_dim: int = 1) -> np.ndarray:
    """Integer dimensions max(min_dim, round(x)), x ~ Exp(mean); draws above ``cap`` are redrawn."""
    if cap < min_dim or min_dim < 1:
        raise ConfigError(f"need cap >= min_dim >= 1, got cap={cap}, min_dim={min_dim}")
    out = np.empty(size, dtype=np.int64)
    filled = 0
    while filled < size:
        d = np.maximum(min_dim, np.rint(rng.exponential(mean, size))).astype(np.int64)
        d = d[d <= cap][: size - filled]
        out[filled:filled + d.size] = d
        filled += d.size
    return out


def supported_axes(arch_spec: ModelSpec) -> tuple[str, ...]:
    return AXES if arch_spec.hybrid else AXES[:2]


@dataclass
class SweepConfig:
    axis: str
    spec: ModelSpec  # fixed dimensions come from spec.n / spec.k / spec.nrf
    train_mean: float = 4.0
    train_cap: int = 12
    min_dim: int = 1
    test_dims: list = field(default_factory=lambda: list(range(2, 16)))
    n_train: int = 2000
    n_test: int = 500
    n_val: int = 200
    snr_db: float = 10.0
    channel: str = "rayleigh"
    epochs: int = 1000
    batch_size: int = 64
    lr: float = 0.002
    seed: int = 0
    max_seconds: float | None = None
    patience: int = 20
    checkpoint: str | None = None  # trained model to sweep instead of training

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}")
        if self.axis not in supported_axes(self.spec):
            raise ConfigError(f"{self.spec.arch} does not support axis {self.axis!r}; "
                              f"supported axes: {supported_axes(self.spec)}")
        if self.train_cap < self.min_dim or self.min_dim < 1:
            raise ConfigError("truncation must be >= minimum dimension >= 1")

    def dims(self, d: int) -> tuple[int, int, int | None]:
        n, k, r = self.spec.n, self.spec.k, (self.spec.nrf if self.spec.hybrid else None)
        if self.axis == "users":
            k = d
        elif self.axis == "antennas":
            n = d
        else:
            r = d
        return n, k, r


def _sized_spec(cfg: SweepConfig) -> ModelSpec:
    top = max([cfg.train_cap] + list(cfg.test_dims))
    spec = dataclasses.replace(cfg.spec)
    if spec.max_n is not None and cfg.axis == "antennas":
        spec.max_n = top
    if spec.max_k is not None and cfg.axis == "users":
        spec.max_k = top
    if spec.hybrid and cfg.axis == "rf_chains":
        spec.nrf = min(spec.nrf, top)
    return ModelSpec.from_dict(spec.to_dict())


def mixed_training_sets(cfg: SweepConfig, count: int | None = None, stream: int = 11) -> list[Dataset]:
    """One dataset per sampled dimension; ``stream`` separates training from validation draws."""
    rng = np.random.default_rng([cfg.seed, stream])
    draws = truncated_exponential(cfg.train_mean, cfg.train_cap, count or cfg.n_train, rng, cfg.min_dim)
    sets = []
    for d in np.unique(draws):
        n, k, r = cfg.dims(int(d))
        sets.append(make_data(cfg.channel, n, k, int((draws == d).sum()), cfg.snr_db,
                              seed=cfg.seed * 100003 + stream * 1009 + int(d) * 101 + 1, nrf=r))
    return sets


def sweep_generalize(cfg: SweepConfig, model: Model | None = None) -> list[ResultRow]:
    """Train once on the mixed-size distribution (unless a model is given), then
    evaluate at each test dimension without retraining."""
    t0 = time.perf_counter()
    n_train = 0
    if model is None and cfg.checkpoint:
        model, extra = load_checkpoint(cfg.checkpoint)
        n_train = int(extra.get("n_train", 0))
    if model is None:
        sets = mixed_training_sets(cfg)
        n_train = sum(s.count for s in sets)
        # validation follows the training size distribution
        val = mixed_training_sets(cfg, cfg.n_val, stream=12)
        tc = TrainConfig(_sized_spec(cfg), sets, val, cfg.epochs, cfg.batch_size, cfg.lr, cfg.seed,
                         patience=cfg.patience, max_seconds=cfg.max_seconds)
        model = train(tc).model
    rows = []
    for d in cfg.test_dims:
        n, k, r = cfg.dims(int(d))
        test = make_data(cfg.channel, n, k, cfg.n_test, cfg.snr_db, seed=cfg.seed * 100003 + 50000 + int(d), nrf=r)
        row = evaluate(model, test, n_train=n_train, nrf=r)
        row.extra["axis"] = cfg.axis
        row.extra["dim"] = int(d)
        rows.append(row)
    for row in rows:
        row.extra["total_seconds"] = time.perf_counter() - t0
    return rows


def ablate_gformer(snrs=(5.0, 10.0, 20.0), n: int = 8, k: int = 4, n_train: int = 5000,
                   n_test: int = 500, n_val: int = 200, widths=(32, 32, 32), heads: int = 4,
                   lr: float = 0.002, batch_size: int = 64, epochs: int = 1000,
                   max_seconds: float | None = None, patience: int = 20, seed: int = 0,
                   variants=ABLATION_VARIANTS) -> tuple[list[ResultRow], dict]:
    """Train each variant at each SNR; returns rows and {variant: {snr: ratio}}."""
    rows, table = [], {v: {} for v in variants}
    for snr in snrs:
        tr = gen_rayleigh(n, k, n_train, snr, seed=seed * 7919 + 1)
        va = gen_rayleigh(n, k, n_val, snr, seed=seed * 7919 + 2)
        te = gen_rayleigh(n, k, n_test, snr, seed=seed * 7919 + 3)
        for v in variants:
            t0 = time.perf_counter()
            spec = ModelSpec(v, tuple(widths), heads, n, k)
            res = train(TrainConfig(spec, [tr], va, epochs, batch_size, lr, seed,
                                    patience=patience, max_seconds=max_seconds))
            row = evaluate(res.model, te, n_train=n_train)
            row.extra["train_seconds"] = time.perf_counter() - t0
            row.extra["epochs"] = len(res.history)
            rows.append(row)
            table[v][float(snr)] = row.se_ratio_mean
    return rows, table
