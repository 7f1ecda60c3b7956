"""Permutations, block-shared weights, and executable equivariance checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import DimensionError, Tensor
from .numkit import tensor as T


@dataclass(frozen=True)
class Permutation:
    mapping: np.ndarray  # output position i takes input element mapping[i]

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.int64)
        if sorted(m.tolist()) != list(range(m.size)):
            raise ValueError(f"not a permutation: {m.tolist()}")
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    @property
    def size(self) -> int:
        return self.mapping.size

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.mapping))

    def compose(self, other: "Permutation") -> "Permutation":
        """``self`` after ``other``."""
        return Permutation(other.mapping[self.mapping])

    def matrix(self) -> np.ndarray:
        """0/1 matrix P with (P @ x) == x[mapping]."""
        P = np.zeros((self.size, self.size))
        P[np.arange(self.size), self.mapping] = 1.0
        return P


def permute_rows(M, perm: Permutation, axis: int = -2):
    M = np.asarray(M)
    if M.shape[axis] != perm.size:
        raise DimensionError(f"permutation of size {perm.size} applied to extent {M.shape[axis]}")
    return np.take(M, perm.mapping, axis=axis)


def permute_cols(M, perm: Permutation):
    return permute_rows(M, perm, axis=-1)


def permute_blocks(x, perm: Permutation, block: int):
    """Reorder the contiguous length-``block`` blocks of a stacked vector."""
    x = np.asarray(x)
    if x.shape[-1] != perm.size * block:
        raise DimensionError(f"stacked length {x.shape[-1]} != {perm.size} blocks of {block}")
    y = x.reshape(x.shape[:-1] + (perm.size, block))
    return np.take(y, perm.mapping, axis=-2).reshape(x.shape)


@dataclass
class StructuredWeight:
    """N x N block matrix with every diagonal block W1 and off-diagonal block W2.

    Blocks are (J_out, J_in) and may be arrays or trainable Tensors. The
    block count is not stored: the same weight applies to any N.
    """

    W1: object
    W2: object

    @property
    def j_out(self) -> int:
        return self.W1.shape[0]

    @property
    def j_in(self) -> int:
        return self.W1.shape[1]

    def materialize(self, n: int) -> np.ndarray:
        W1 = self.W1.data if isinstance(self.W1, Tensor) else np.asarray(self.W1)
        W2 = self.W2.data if isinstance(self.W2, Tensor) else np.asarray(self.W2)
        out = np.kron(np.ones((n, n)), W2)
        for i in range(n):
            out[i * self.j_out:(i + 1) * self.j_out, i * self.j_in:(i + 1) * self.j_in] = W1
        return out

    def apply(self, x):
        return structured_apply(self, x)


def structured_apply(w: StructuredWeight, x):
    """y_n = (W1 - W2) x_n + W2 sum_i x_i without materializing the matrix.

    ``x`` is either a stacked vector of length N*J_in (returns a stacked
    vector), an array (..., N, J_in), or a Tensor (..., N, J_in). The pooled
    sum uses a canonical order so antenna reordering commutes exactly.
    """
    if isinstance(x, Tensor) or isinstance(w.W1, Tensor):
        return _structured_tensor(w.W1, w.W2, T.as_tensor(x))
    x = np.asarray(x, dtype=np.float64)
    stacked = x.ndim == 1
    if stacked:
        if x.size % w.j_in:
            raise DimensionError(f"stacked length {x.size} is not a multiple of J_in={w.j_in}")
        x = x.reshape(-1, w.j_in)
    if x.shape[-1] != w.j_in:
        raise DimensionError(f"block width {x.shape[-1]} != J_in={w.j_in}")
    W1, W2 = np.asarray(w.W1), np.asarray(w.W2)
    pooled = np.sort(x, axis=-2).sum(axis=-2, keepdims=True)
    y = x @ (W1 - W2).T + pooled @ W2.T
    return y.reshape(-1) if stacked else y


def _structured_tensor(W1, W2, x: Tensor) -> Tensor:
    if x.shape[-1] != W1.shape[1]:
        raise DimensionError(f"block width {x.shape[-1]} != J_in={W1.shape[1]}")
    W1, W2 = T.as_tensor(W1), T.as_tensor(W2)
    pooled = T.set_sum(x, axis=-2, keepdims=True)
    return T.matmul(x, T.swapaxes(W1 - W2, 0, 1)) + T.matmul(pooled, T.swapaxes(W2, 0, 1))


# --------------------------------------------------------------------- PE checks

PERM_KINDS = ("user", "antenna", "rf", "joint")


def _rel_dev(a: np.ndarray, b: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a - b)))


def check_pe(model, H: np.ndarray, perm_spec: str = "joint", trials: int = 100, tol: float = 1e-6,
             seed: int = 0, a: np.ndarray | None = None) -> dict:
    """Measure max_t ||f(P x) - P f(x)||_inf / ||f(x)||_inf over random permutations.

    ``model.raw_outputs(H, a)`` must return a dict of complex arrays: either
    {"V": (B, N, K)} or {"V_RF": (B, R, N), "V_BB": (B, K, R)}. ``perm_spec``
    picks which index sets are shuffled; "joint" shuffles every index set the
    output carries. Never raises on violation.
    """
    if perm_spec not in PERM_KINDS:
        raise ValueError(f"perm_spec must be one of {PERM_KINDS}")
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim == 2:
        H = H[None]
    _, N, K = H.shape
    rng = np.random.default_rng(seed)
    base = model.raw_outputs(H, a)
    hybrid = "V_RF" in base
    R = base["V_RF"].shape[-2] if hybrid else 0
    if hybrid and a is None:
        a = model.virtual_vector(R)
    scale = max(float(np.max(np.abs(v))) for v in base.values())
    devs = []
    for _ in range(trials):
        pu = Permutation.random(K, rng) if perm_spec in ("user", "joint") else Permutation.identity(K)
        pa = Permutation.random(N, rng) if perm_spec in ("antenna", "joint") else Permutation.identity(N)
        pr = (Permutation.random(R, rng) if hybrid and perm_spec in ("rf", "joint")
              else Permutation.identity(max(R, 1)))
        Hp = permute_cols(permute_rows(H, pa), pu)
        ap = a[pr.mapping] if hybrid else a
        out = model.raw_outputs(Hp, ap)
        if hybrid:
            exp_rf = permute_cols(permute_rows(base["V_RF"], pr), pa)
            exp_bb = permute_cols(permute_rows(base["V_BB"], pu), pr)
            d = max(_rel_dev(out["V_RF"], exp_rf, scale), _rel_dev(out["V_BB"], exp_bb, scale))
        else:
            exp_v = permute_cols(permute_rows(base["V"], pa), pu)
            d = _rel_dev(out["V"], exp_v, scale)
        devs.append(d)
    devs = np.asarray(devs)
    return {
        "perm": perm_spec,
        "trials": trials,
        "tol": tol,
        "max_deviation": float(devs.max()) if devs.size else 0.0,
        "min_deviation": float(devs.min()) if devs.size else 0.0,
        "deviations": devs.tolist(),
        "pass": bool(devs.max() <= tol) if devs.size else True,
    }
