"""Channel datasets: i.i.d. Rayleigh and Saleh-Valenzuela, plus a binary file format.

Every sample draws from its own Philox stream keyed by ``seed`` with the sample
index in the counter, so any sample can be regenerated on its own and
generation can be split across workers without changing the output.

File layout (little endian)::

    b"PEPC" | u32 version=1 | u32 N | u32 K | u32 count | f64 Pt | f64 sigma2
    | count*N*K interleaved (re, im) f64 pairs, sample-major, row-major (n, k)

A ``<path>.json`` sidecar carries the generator metadata.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numkit import ComplexMatrix, DimensionError

MAGIC = b"PEPC"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")

SV_ANGLE_STD_DEG = 7.5


class DatasetFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class UnsupportedVersionError(DatasetFormatError):
    pass


@dataclass(frozen=True)
class ChannelSample:
    H: ComplexMatrix
    pt: float = 1.0
    sigma2: float = 0.1

    def __post_init__(self):
        n, k = self.H.shape[-2:]
        if n < 1 or k < 1:
            raise DimensionError(f"channel needs N>=1 and K>=1, got {n}x{k}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not (np.all(np.isfinite(self.H.re)) and np.all(np.isfinite(self.H.im))):
            raise ValueError("channel has non-finite entries")

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.pt / self.sigma2)


@dataclass
class Dataset:
    H: np.ndarray  # complex128, (count, N, K)
    pt: float = 1.0
    sigma2: float = 0.1
    meta: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def count(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def k(self) -> int:
        return self.H.shape[2]

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.pt / self.sigma2)

    def __len__(self) -> int:
        return self.count

    def sample(self, i: int) -> ChannelSample:
        return ChannelSample(ComplexMatrix.from_complex(self.H[i]), self.pt, self.sigma2)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.H[idx], self.pt, self.sigma2, dict(self.meta))

    def equals(self, other: "Dataset") -> bool:
        return (
            self.H.shape == other.H.shape
            and np.array_equal(self.H.view(np.float64), other.H.view(np.float64))
            and self.pt == other.pt
            and self.sigma2 == other.sigma2
        )


def sigma2_from_snr(snr_db: float, pt: float = 1.0) -> float:
    return pt / 10.0 ** (snr_db / 10.0)


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(index), 0]))


def _check_dims(n: int, k: int, count: int) -> None:
    if n < 1 or k < 1:
        raise DimensionError(f"N and K must be >= 1, got N={n}, K={k}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")


def rayleigh_sample(n: int, k: int, seed: int, index: int) -> np.ndarray:
    z = _stream(seed, index).standard_normal((n, k, 2))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def gen_rayleigh(n: int, k: int, count: int, snr_db: float = 10.0, seed: int = 0,
                 pt: float = 1.0) -> Dataset:
    """i.i.d. CN(0, 1) channel entries."""
    _check_dims(n, k, count)
    H = np.empty((count, n, k), dtype=np.complex128)
    for i in range(count):
        H[i] = rayleigh_sample(n, k, seed, i)
    meta = {"generator": "rayleigh", "seed": int(seed), "n": n, "k": k, "count": count,
            "snr_db": float(snr_db), "pt": pt}
    return Dataset(H, pt, sigma2_from_snr(snr_db, pt), meta)


def steering_vector(n: int, theta) -> np.ndarray:
    """Half-wavelength ULA response, unit norm. ``theta`` may be an array."""
    theta = np.asarray(theta, dtype=np.float64)
    idx = np.arange(n)
    return np.exp(1j * math.pi * np.multiply.outer(np.sin(theta), idx)) / math.sqrt(n)


def sv_components(n: int, k: int, n_clusters: int, n_rays: int, seed: int, index: int,
                  angle_std_deg: float = SV_ANGLE_STD_DEG):
    """Ray angles (k, clusters, rays) and complex gains of one SV sample."""
    rng = _stream(seed, index)
    centers = rng.uniform(0.0, 2.0 * math.pi, size=(k, n_clusters, 1))
    # Laplace std = sqrt(2) * scale
    scale = math.radians(angle_std_deg) / math.sqrt(2.0)
    angles = centers + rng.laplace(0.0, scale, size=(k, n_clusters, n_rays))
    g = rng.standard_normal((k, n_clusters, n_rays, 2))
    gains = (g[..., 0] + 1j * g[..., 1]) * math.sqrt(0.5)
    return angles, gains


def sv_channel_from_components(n: int, angles: np.ndarray, gains: np.ndarray) -> np.ndarray:
    k, ncl, nray = angles.shape
    a = steering_vector(n, angles)  # (k, ncl, nray, n)
    h = math.sqrt(n / (ncl * nray)) * np.einsum("kcr,kcrn->nk", gains, a)
    return h


def gen_saleh_valenzuela(n: int, k: int, n_clusters: int = 4, n_rays: int = 5,
                         count: int = 1, snr_db: float = 10.0, seed: int = 0,
                         pt: float = 1.0, keep_components: bool = False) -> Dataset:
    """Clustered mmWave channel: h_k = sqrt(N/(C*R)) sum_{c,r} alpha_cr a(theta_cr)."""
    _check_dims(n, k, count)
    if n_clusters < 1 or n_rays < 1:
        raise DimensionError(f"need >=1 cluster and ray, got {n_clusters}, {n_rays}")
    H = np.empty((count, n, k), dtype=np.complex128)
    angles_all, gains_all = [], []
    for i in range(count):
        angles, gains = sv_components(n, k, n_clusters, n_rays, seed, i)
        H[i] = sv_channel_from_components(n, angles, gains)
        if keep_components:
            angles_all.append(angles)
            gains_all.append(gains)
    meta = {"generator": "sv", "seed": int(seed), "n": n, "k": k, "count": count,
            "snr_db": float(snr_db), "pt": pt, "clusters": n_clusters, "rays": n_rays,
            "angle_std_deg": SV_ANGLE_STD_DEG, "array": "ula_half_wavelength"}
    ds = Dataset(H, pt, sigma2_from_snr(snr_db, pt), meta)
    if keep_components:
        ds.extras = {"angles": np.stack(angles_all), "gains": np.stack(gains_all)}
    return ds


def regenerate(meta: dict) -> Dataset:
    """Rebuild a dataset from its metadata."""
    if meta["generator"] == "rayleigh":
        return gen_rayleigh(meta["n"], meta["k"], meta["count"], meta["snr_db"], meta["seed"],
                            meta.get("pt", 1.0))
    if meta["generator"] == "sv":
        return gen_saleh_valenzuela(meta["n"], meta["k"], meta["clusters"], meta["rays"],
                                    meta["count"], meta["snr_db"], meta["seed"], meta.get("pt", 1.0))
    raise ValueError(f"unknown generator {meta['generator']!r}")


def save_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, ds.n, ds.k, ds.count, float(ds.pt), float(ds.sigma2))
    body = np.ascontiguousarray(ds.H, dtype=np.complex128).view("<f8").tobytes()
    path.write_bytes(header + body)
    Path(str(path) + ".json").write_text(json.dumps(ds.meta, indent=2, sort_keys=True))


def load_dataset(path) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8:
        raise DatasetFormatError("file too short for magic and version", len(raw))
    if raw[:4] != MAGIC:
        raise DatasetFormatError(f"bad magic {raw[:4]!r}", 0)
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported dataset version {version}", 4)
    if len(raw) < _HEADER.size:
        raise DatasetFormatError("truncated header", len(raw))
    _, _, n, k, count, pt, sigma2 = _HEADER.unpack_from(raw, 0)
    if n < 1 or k < 1 or count < 1:
        raise DatasetFormatError(f"invalid dims N={n} K={k} count={count}", 8)
    expected = _HEADER.size + count * n * k * 16
    if len(raw) != expected:
        raise DatasetFormatError(
            f"payload size mismatch: expected {expected} bytes for {count}x{n}x{k}, got {len(raw)}",
            min(len(raw), expected),
        )
    if not sigma2 > 0:
        raise DatasetFormatError(f"non-positive noise power {sigma2}", 28)
    H = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    H = H.view(np.complex128).reshape(count, n, k).copy()
    side = Path(str(path) + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return Dataset(H, pt, sigma2, meta)
