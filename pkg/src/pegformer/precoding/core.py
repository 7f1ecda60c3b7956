"""Sum-rate metric, output normalizers, and classical precoders."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit import ComplexMatrix, Tensor
from ..numkit import tensor as T
from .kernels import sum_se_batch, wmmse_batch


class DomainError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


def _as_complex(M) -> np.ndarray:
    if isinstance(M, ComplexMatrix):
        return M.to_complex()
    return np.asarray(M, dtype=np.complex128)


@dataclass(frozen=True)
class Precoder:
    V: ComplexMatrix

    def power(self) -> float:
        return float(np.sum(np.abs(self.V.to_complex()) ** 2))


@dataclass(frozen=True)
class HybridPrecoder:
    V_RF: ComplexMatrix  # (N_RF, N)
    V_BB: ComplexMatrix  # (K, N_RF)

    def effective(self) -> ComplexMatrix:
        return effective_precoder(self.V_RF, self.V_BB)


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray
    lam: np.ndarray

    def check(self, pt: float, tol: float = 1e-9) -> None:
        p, lam = np.asarray(self.p), np.asarray(self.lam)
        if p.shape != lam.shape or p.ndim != 1:
            raise ValueError("p and lambda must be 1-d of equal length")
        if np.any(p <= 0) or np.any(lam <= 0):
            raise ValueError("powers and dual variables must be positive")
        if abs(p.sum() - pt) > tol or abs(lam.sum() - pt) > tol:
            raise ValueError(f"sum(p)={p.sum()} and sum(lambda)={lam.sum()} must both equal Pt={pt}")


# ------------------------------------------------------------------ metric

def sum_se(H, V, sigma2: float):
    """Sum over users of log2(1 + SINR_k) in bits/s/Hz.

    ``H`` and ``V`` may be complex arrays (N, K) or (B, N, K), or
    ``ComplexMatrix`` values; batched input returns one value per sample.
    """
    if not sigma2 > 0:
        raise DomainError(f"noise power must be positive, got {sigma2}")
    Hc, Vc = _as_complex(H), _as_complex(V)
    if Hc.shape != Vc.shape:
        raise ValueError(f"H and V shapes differ: {Hc.shape} vs {Vc.shape}")
    out = sum_se_batch(Hc, Vc, sigma2)
    return float(out) if Hc.ndim == 2 else out


def sum_se_tensor(H: np.ndarray, Vr: Tensor, Vi: Tensor, sigma2: float) -> Tensor:
    """Differentiable per-sample sum rate for a batch. ``H`` is constant (B, N, K)."""
    if not sigma2 > 0:
        raise DomainError(f"noise power must be positive, got {sigma2}")
    Hh = ComplexMatrix.from_complex(H).H  # (B, K, N)
    G = Hh @ ComplexMatrix(Vr, Vi)  # G[k, i] = h_k^H v_i
    P = G.abs2()
    K = P.shape[-1]
    eye = np.eye(K)
    sig = T.tsum(P * eye, axis=-1)
    total = T.tsum(P, axis=-1)
    interf = total - sig
    rate = T.log(1.0 + sig / (interf + sigma2)) * (1.0 / np.log(2.0))
    return T.tsum(rate, axis=-1)


def se_ratio(H, V_dnn, V_ref, sigma2: float):
    num = sum_se(H, V_dnn, sigma2)
    den = sum_se(H, V_ref, sigma2)
    if np.any(np.asarray(den) == 0):
        raise DomainError("reference SE is zero")
    return num / den


# ------------------------------------------------------------------ normalizers

def normalize_power(V_raw, pt: float = 1.0):
    """Scale so that Tr(V^H V) = pt. Accepts complex arrays, ComplexMatrix, or
    a (re, im) Tensor pair; batched arrays are scaled per sample."""
    if isinstance(V_raw, tuple):
        Vr, Vi = V_raw
        p = T.tsum(Vr * Vr + Vi * Vi, axis=(-2, -1), keepdims=True)
        if np.any(p.data == 0):
            raise DegenerateInputError("cannot normalize an all-zero precoder")
        s = T.sqrt(pt / p)
        return Vr * s, Vi * s
    is_cm = isinstance(V_raw, ComplexMatrix)
    V = _as_complex(V_raw)
    p = np.sum(np.abs(V) ** 2, axis=(-2, -1), keepdims=True)
    if np.any(p == 0):
        raise DegenerateInputError("cannot normalize an all-zero precoder")
    out = V * np.sqrt(pt / p)
    if is_cm:
        return Precoder(ComplexMatrix.from_complex(out))
    return out


def effective_precoder(V_RF, V_BB):
    """Compose analog (N_RF, N) and baseband (K, N_RF) into the N x K precoder
    (V_BB V_RF)^T. Works on ComplexMatrix of arrays or Tensors."""
    if isinstance(V_RF, ComplexMatrix):
        return (V_BB @ V_RF).T
    return np.swapaxes(np.asarray(V_BB) @ np.asarray(V_RF), -1, -2)


def normalize_hybrid(V_RF_raw, V_BB_raw, pt: float = 1.0):
    """Unit-modulus analog entries and baseband scaled to total power ``pt``.

    Accepts complex arrays (returns arrays), ComplexMatrix (returns
    HybridPrecoder), or ComplexMatrix with Tensor parts (differentiable,
    returns (V_RF, V_BB) ComplexMatrix pair).
    """
    if isinstance(V_RF_raw, ComplexMatrix) and isinstance(V_RF_raw.re, Tensor):
        mag = T.sqrt(V_RF_raw.abs2())
        if np.any(mag.data == 0):
            raise DegenerateInputError("analog precoder has a zero-modulus entry")
        rf = ComplexMatrix(V_RF_raw.re / mag, V_RF_raw.im / mag)
        eff = effective_precoder(rf, V_BB_raw)
        p = T.tsum(eff.abs2(), axis=(-2, -1), keepdims=True)
        bb = V_BB_raw.scale(T.sqrt(pt / p))
        return rf, bb
    is_cm = isinstance(V_RF_raw, ComplexMatrix)
    rf = _as_complex(V_RF_raw)
    bb = _as_complex(V_BB_raw)
    mag = np.abs(rf)
    if np.any(mag == 0):
        raise DegenerateInputError("analog precoder has a zero-modulus entry")
    rf = rf / mag
    eff = effective_precoder(rf, bb)
    p = np.sum(np.abs(eff) ** 2, axis=(-2, -1), keepdims=True)
    bb = bb * np.sqrt(pt / p)
    if is_cm:
        return HybridPrecoder(ComplexMatrix.from_complex(rf), ComplexMatrix.from_complex(bb))
    return rf, bb


# ------------------------------------------------------------------ classical precoders

def mrt(H, pt: float = 1.0) -> np.ndarray:
    return normalize_power(_as_complex(H), pt)


def zero_forcing(H, pt: float = 1.0, reg: float = 0.0) -> np.ndarray:
    """ZF directions with equal per-user power pt/K."""
    Hc = _as_complex(H)
    K = Hc.shape[-1]
    gram = np.swapaxes(Hc.conj(), -1, -2) @ Hc
    if reg:
        gram = gram + reg * np.eye(K)
    W = Hc @ np.linalg.pinv(gram)
    norms = np.sqrt(np.sum(np.abs(W) ** 2, axis=-2, keepdims=True))
    norms = np.where(norms == 0, 1.0, norms)
    return W / norms * np.sqrt(pt / K)


def wmmse(H, pt: float = 1.0, sigma2: float = 0.1, max_iters: int = 200, tol: float = 1e-6,
          return_history: bool = False):
    """Weighted-MMSE sum-rate precoder (returned at full power ``pt``).

    ``H`` is (N, K) or a batch (B, N, K). With ``return_history`` also returns
    the per-iteration sum rate (NaN-padded after convergence) and iteration counts.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not sigma2 > 0:
        raise DomainError(f"noise power must be positive, got {sigma2}")
    Hc = _as_complex(H)
    single = Hc.ndim == 2
    Hb = Hc[None] if single else Hc
    V, iters, hist = wmmse_batch(Hb, pt, sigma2, max_iters, tol)
    V = normalize_power(V, pt)
    if single:
        V, iters, hist = V[0], iters[0], hist[0]
    if return_history:
        return V, hist, iters
    return V


def random_phase_zf(H, n_rf: int, pt: float = 1.0, seed: int = 0):
    """Hybrid floor: random unit-modulus analog stage, ZF on the effective channel.

    Returns (V_RF, V_BB) with shapes (..., N_RF, N) and (..., K, N_RF).
    """
    Hc = _as_complex(H)
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * np.pi, size=Hc.shape[:-2] + (n_rf, Hc.shape[-2]))
    rf = np.exp(1j * phases)
    # h_k^H V_RF^T b = (conj(V_RF) h_k)^H b, so the baseband sees conj(V_RF) H
    Heff = np.conj(rf) @ Hc
    W = zero_forcing(Heff, 1.0)  # (N_RF, K), columns are V_BB rows
    return normalize_hybrid(rf, np.swapaxes(W, -1, -2), pt)
