"""Unsupervised training (negative sum rate + Adam) and evaluation against WMMSE."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..channels import Dataset, load_dataset
from ..models import ConfigError, Model, ModelSpec, build_model, load_checkpoint, save_checkpoint
from ..numkit import AdamState, NumericError, adam_step
from ..numkit import tensor as T
from ..precoding import DegenerateInputError, effective_precoder, random_phase_zf, sum_se, wmmse

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    spec: ModelSpec
    train_data: list = field(default_factory=list)  # Dataset objects or file paths
    val_data: object = None  # one dataset or a list (mixed sizes); ratios are pooled per sample
    epochs: int = 100
    batch_size: int = 256
    lr: float = 0.002
    seed: int = 0
    checkpoint: str | None = None
    patience: int = 20  # epochs without validation improvement before stopping
    max_seconds: float | None = None
    restore_best: bool = True

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        for d in list(self.train_data) + _as_list(self.val_data):
            if isinstance(d, (str, Path)) and not Path(d).exists():
                raise ConfigError(f"dataset file not found: {d}")


@dataclass
class TrainResult:
    model: Model
    history: list[dict]
    checkpoint: str | None
    aborted: bool = False
    message: str = ""

    @property
    def losses(self) -> list[float]:
        return [h["train_loss"] for h in self.history]


@dataclass
class ResultRow:
    arch: str
    N: int
    K: int
    NRF: int
    snr_db: float
    n_train: int
    se_ratio_mean: float
    se_ratio_std: float
    seconds: float
    extra: dict = field(default_factory=dict)

    FIELDS = ("arch", "N", "K", "NRF", "snr_db", "n_train", "se_ratio_mean", "se_ratio_std", "seconds")

    def __post_init__(self):
        if not self.se_ratio_mean > 0:
            raise ValueError(f"SE ratio must be positive, got {self.se_ratio_mean}")
        if self.se_ratio_std < 0:
            raise ValueError("std must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _as_list(d) -> list:
    if d is None:
        return []
    return list(d) if isinstance(d, (list, tuple)) else [d]


def _as_dataset(d) -> Dataset:
    return d if isinstance(d, Dataset) else load_dataset(d)


def _nrf_for(model: Model, ds: Dataset) -> int:
    return int(ds.meta.get("nrf", model.spec.nrf))


def _virtual(model: Model, ds: Dataset):
    return model.virtual_vector(_nrf_for(model, ds)) if model.spec.hybrid else None


def _batches(datasets: list[Dataset], batch_size: int, rng: np.random.Generator):
    """Equal-dimension batches: each dataset is chunked on its own, then batch order is shuffled."""
    out = []
    for di, ds in enumerate(datasets):
        idx = rng.permutation(ds.count)
        for s in range(0, ds.count, batch_size):
            out.append((di, idx[s:s + batch_size]))
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def _epoch_se(model: Model, datasets: list[Dataset], batches) -> float:
    """Mean per-sample sum rate over the given batches with the current weights."""
    total, count = 0.0, 0
    for di, idx in batches:
        ds = datasets[di]
        se = model.se_tensor(ds.H[idx], ds.sigma2, ds.pt, _virtual(model, ds)).data
        total += float(se.sum())
        count += idx.size
    return total / count


def train(cfg: TrainConfig, model: Model | None = None) -> TrainResult:
    """Minimize -mean SE with Adam.

    Each history entry reports the epoch's train loss re-evaluated with the
    weights at the end of that epoch (the ones that would be checkpointed),
    so -train_loss equals the mean SE of the saved model on the same batches.
    """
    datasets = [_as_dataset(d) for d in cfg.train_data]
    if not datasets:
        raise ConfigError("no training data")
    val = [_as_dataset(d) for d in _as_list(cfg.val_data)] or None
    if model is None:
        model = build_model(cfg.spec, seed=cfg.seed)
    for ds in datasets:
        model._check_dims(ds.H[:1])
    params = model.param_list()
    names = model.param_names()
    state = AdamState.for_params(params, cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    val_ref = [reference_se(v, model.spec.hybrid) for v in val] if val else None

    history: list[dict] = []
    good = model.get_flat()
    best, best_ratio, since_best = good.copy(), -np.inf, 0
    aborted, message = False, ""
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        batches = _batches(datasets, cfg.batch_size, rng)
        try:
            for di, idx in batches:
                ds = datasets[di]
                loss = model.loss(ds.H[idx], ds.sigma2, ds.pt, _virtual(model, ds))
                if not np.isfinite(loss.data):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                grads = T.grad(loss, params)
                adam_step(params, grads, state, names)
            mean_se = _epoch_se(model, datasets, batches)
            if not np.isfinite(mean_se):
                raise NumericError(f"non-finite loss at epoch {epoch}")
        except (NumericError, DegenerateInputError) as e:  # NaN loss or collapsed analog output
            model.set_flat(good)
            aborted, message = True, str(e)
            log.warning("training aborted: %s; restored last good weights", e)
            break
        good = model.get_flat()
        entry = {"epoch": epoch, "train_loss": -mean_se, "seconds": time.perf_counter() - t0}
        if val is not None:
            ratio = float(np.mean(np.concatenate([model_se(model, v) / r for v, r in zip(val, val_ref)])))
            entry["val_ratio"] = ratio
            if ratio > best_ratio + 1e-6:
                best, best_ratio, since_best = good.copy(), ratio, 0
            else:
                since_best += 1
        history.append(entry)
        log.info("epoch %d loss %.5f%s", epoch, entry["train_loss"],
                 f" val {entry['val_ratio']:.4f}" if "val_ratio" in entry else "")
        if val is not None and since_best >= cfg.patience:
            break
        if cfg.max_seconds is not None and time.perf_counter() - t0 > cfg.max_seconds:
            break
    if val is not None and cfg.restore_best and np.isfinite(best_ratio) and not aborted:
        model.set_flat(best)
    path = None
    if cfg.checkpoint:
        path = str(save_checkpoint(model, cfg.checkpoint, {"history": history, "lr": cfg.lr,
                                                           "n_train": sum(d.count for d in datasets)}))
    return TrainResult(model, history, path, aborted, message)


# ------------------------------------------------------------------ evaluation

def model_se(model: Model, ds: Dataset, nrf: int | None = None, batch: int = 500) -> np.ndarray:
    """Per-sample sum rate of the normalized model output."""
    out = []
    for s in range(0, ds.count, batch):
        H = ds.H[s:s + batch]
        a = model.virtual_vector(nrf or _nrf_for(model, ds)) if model.spec.hybrid else None
        V = model.precode(H, ds.pt, a)
        out.append(sum_se(H, V, ds.sigma2))
    return np.concatenate(out)


def reference_se(ds: Dataset, hybrid: bool = False) -> np.ndarray:
    """Per-sample WMMSE sum rate (fully digital, also the hybrid denominator)."""
    cache = ds.extras.get("wmmse_se")
    if cache is None:
        V = wmmse(ds.H, ds.pt, ds.sigma2)
        cache = sum_se(ds.H, V, ds.sigma2)
        ds.extras["wmmse_se"] = cache
    return cache


def hybrid_floor_se(ds: Dataset, nrf: int, seed: int = 0) -> np.ndarray:
    """Per-sample SE of random-phase analog + zero-forcing baseband."""
    rf, bb = random_phase_zf(ds.H, nrf, ds.pt, seed)
    return sum_se(ds.H, effective_precoder(rf, bb), ds.sigma2)


def evaluate(model: Model | str, ds: Dataset | str, n_train: int = 0, nrf: int | None = None) -> ResultRow:
    """SE ratio vs WMMSE. Hybrid rows also report the random-phase + ZF floor."""
    if not isinstance(model, Model):
        model, extra = load_checkpoint(model)
        n_train = n_train or int(extra.get("n_train", 0))
    ds = _as_dataset(ds)
    model._check_dims(ds.H[:1])
    t0 = time.perf_counter()
    se = model_se(model, ds, nrf)
    seconds = time.perf_counter() - t0
    ref = reference_se(ds, model.spec.hybrid)
    ratio = se / ref
    extra = {"reference": "wmmse_digital", "se_mean": float(se.mean()), "ref_se_mean": float(ref.mean())}
    r = 0
    if model.spec.hybrid:
        r = nrf or _nrf_for(model, ds)
        floor = hybrid_floor_se(ds, r, seed=0)
        extra.update(floor="random_phase_zf", floor_se_mean=float(floor.mean()),
                     se_over_floor=float(se.mean() / floor.mean()))
    return ResultRow(model.spec.arch, ds.n, ds.k, r, round(ds.snr_db, 6), n_train,
                     float(ratio.mean()), float(ratio.std()), seconds, extra)


def evaluate_wmmse(ds: Dataset) -> ResultRow:
    """WMMSE measured against itself: the ratio is exactly one."""
    t0 = time.perf_counter()
    V = wmmse(ds.H, ds.pt, ds.sigma2)
    se = sum_se(ds.H, V, ds.sigma2)
    ref = reference_se(ds)
    ratio = se / ref
    return ResultRow("wmmse", ds.n, ds.k, 0, round(ds.snr_db, 6), 0, float(ratio.mean()),
                     float(ratio.std()), time.perf_counter() - t0)
