"""Hot per-sample loops: WMMSE iterations and batched sum rate.

Each kernel has a compiled per-sample implementation (used when numba is
enabled) and a vectorized numpy implementation over the batch. Both compute
the same iteration; they differ only in floating-point evaluation order.
"""
from __future__ import annotations

import numpy as np

from .. import _accel
from .._accel import njit

BISECT_ITERS = 200
_NULL_EIG = 1e-12


# ---------------------------------------------------------------- sum rate

@njit
def _sum_se_loop(H, V, sigma2):
    B, N, K = H.shape
    out = np.zeros(B)
    for b in range(B):
        total = 0.0
        for k in range(K):
            sig = 0.0
            interf = 0.0
            for i in range(K):
                acc = 0j
                for n in range(N):
                    acc += np.conj(H[b, n, k]) * V[b, n, i]
                p = acc.real * acc.real + acc.imag * acc.imag
                if i == k:
                    sig = p
                else:
                    interf += p
            total += np.log2(1.0 + sig / (interf + sigma2))
        out[b] = total
    return out


def _sum_se_numpy(H, V, sigma2):
    G = np.einsum("bnk,bni->bki", H.conj(), V)
    P = G.real ** 2 + G.imag ** 2
    sig = np.einsum("bkk->bk", P)
    interf = P.sum(axis=2) - sig
    return np.log2(1.0 + sig / (interf + sigma2)).sum(axis=1)


def sum_se_batch(H: np.ndarray, V: np.ndarray, sigma2: float, use_numba: bool | None = None) -> np.ndarray:
    H = np.ascontiguousarray(H, dtype=np.complex128)
    V = np.ascontiguousarray(V, dtype=np.complex128)
    if H.ndim == 2:
        return sum_se_batch(H[None], V[None], sigma2, use_numba)[0]
    if _pick(use_numba):
        return _sum_se_loop(H, V, float(sigma2))
    return _sum_se_numpy(H, V, float(sigma2))


def _pick(use_numba):
    if use_numba is None:
        return _accel.USE_NUMBA
    return bool(use_numba) and _accel.USE_NUMBA


# ---------------------------------------------------------------- WMMSE

@njit
def _power_at(lam, c2, mu, pinv):
    s = 0.0
    lmax = lam.max()
    for j in range(lam.shape[0]):
        d = lam[j] + mu
        if pinv and lam[j] <= _NULL_EIG * max(lmax, 1e-300):
            continue
        s += c2[j] / (d * d)
    return s


@njit
def _se_one(H, V, sigma2):
    N, K = H.shape
    total = 0.0
    for k in range(K):
        sig = 0.0
        interf = 0.0
        for i in range(K):
            acc = 0j
            for n in range(N):
                acc += np.conj(H[n, k]) * V[n, i]
            p = acc.real * acc.real + acc.imag * acc.imag
            if i == k:
                sig = p
            else:
                interf += p
        total += np.log2(1.0 + sig / (interf + sigma2))
    return total


@njit
def _wmmse_one(H, pt, sigma2, max_iters, tol, hist):
    N, K = H.shape
    fro = 0.0
    for n in range(N):
        for k in range(K):
            fro += H[n, k].real ** 2 + H[n, k].imag ** 2
    V = H * np.sqrt(pt / fro)
    best = V.copy()
    se_prev = _se_one(H, V, sigma2)
    best_se = se_prev
    hist[0] = se_prev
    iters = 0
    for t in range(max_iters):
        G = np.conj(H.T) @ V
        u = np.zeros(K, dtype=np.complex128)
        w = np.zeros(K)
        for k in range(K):
            denom = sigma2
            for i in range(K):
                denom += G[k, i].real ** 2 + G[k, i].imag ** 2
            u[k] = G[k, k] / denom
            e = 1.0 - (G[k, k].real ** 2 + G[k, k].imag ** 2) / denom
            if e < 1e-300:
                e = 1e-300
            w[k] = 1.0 / e
        A = np.zeros((N, N), dtype=np.complex128)
        Bm = np.zeros((N, K), dtype=np.complex128)
        for k in range(K):
            c = w[k] * (u[k].real ** 2 + u[k].imag ** 2)
            for a in range(N):
                Bm[a, k] = w[k] * u[k] * H[a, k]
                for b in range(N):
                    A[a, b] += c * H[a, k] * np.conj(H[b, k])
        lam, Q = np.linalg.eigh(A)
        C = np.conj(Q.T) @ Bm
        c2 = np.zeros(N)
        for j in range(N):
            for k in range(K):
                c2[j] += C[j, k].real ** 2 + C[j, k].imag ** 2
        mu = 0.0
        if _power_at(lam, c2, 0.0, True) > pt:
            lo = 0.0
            hi = np.sqrt(c2.sum() / pt) + 1e-300
            for _ in range(BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if _power_at(lam, c2, mid, False) > pt:
                    lo = mid
                else:
                    hi = mid
            mu = hi
        lmax = lam.max()
        scale = np.zeros(N)
        for j in range(N):
            if mu == 0.0 and lam[j] <= _NULL_EIG * max(lmax, 1e-300):
                scale[j] = 0.0
            else:
                scale[j] = 1.0 / (lam[j] + mu)
        for j in range(N):
            for k in range(K):
                C[j, k] *= scale[j]
        V = Q @ C
        se = _se_one(H, V, sigma2)
        iters = t + 1
        hist[iters] = se
        if se > best_se:
            best_se = se
            best[:, :] = V
        if abs(se - se_prev) < tol:
            break
        se_prev = se
    return best, iters


@njit
def _wmmse_batch_loop(H, pt, sigma2, max_iters, tol):
    B, N, K = H.shape
    out = np.zeros((B, N, K), dtype=np.complex128)
    iters = np.zeros(B, dtype=np.int64)
    hist = np.full((B, max_iters + 1), np.nan)
    for b in range(B):
        V, it = _wmmse_one(np.ascontiguousarray(H[b]), pt, sigma2, max_iters, tol, hist[b])
        out[b] = V
        iters[b] = it
    return out, iters, hist


def _wmmse_batch_numpy(H, pt, sigma2, max_iters, tol):
    B, N, K = H.shape
    fro = (np.abs(H) ** 2).sum(axis=(1, 2))
    V = H * np.sqrt(pt / fro)[:, None, None]
    se_prev = _sum_se_numpy(H, V, sigma2)
    best = V.copy()
    best_se = se_prev.copy()
    hist = np.full((B, max_iters + 1), np.nan)
    hist[:, 0] = se_prev
    iters = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=bool)
    for t in range(max_iters):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        Hs, Vs = H[idx], V[idx]
        G = np.einsum("bnk,bni->bki", Hs.conj(), Vs)
        P = G.real ** 2 + G.imag ** 2
        denom = P.sum(axis=2) + sigma2
        gkk = np.einsum("bkk->bk", G)
        u = gkk / denom
        e = np.maximum(1.0 - np.abs(gkk) ** 2 / denom, 1e-300)
        w = 1.0 / e
        c = w * np.abs(u) ** 2
        A = np.einsum("bk,bak,bck->bac", c, Hs, Hs.conj())
        Bm = Hs * (w * u)[:, None, :]
        lam, Q = np.linalg.eigh(A)
        C = np.einsum("baj,bak->bjk", Q.conj(), Bm)
        c2 = (np.abs(C) ** 2).sum(axis=2)
        lmax = np.maximum(lam.max(axis=1, keepdims=True), 1e-300)
        null = lam <= _NULL_EIG * lmax

        def power(mu, pinv):
            d = lam + mu[:, None]
            if pinv:
                d = np.where(null, 1.0, d)
                return np.where(null, 0.0, c2 / (d * d)).sum(axis=1)
            return (c2 / (d * d)).sum(axis=1)

        mu = np.zeros(idx.size)
        need = power(mu, True) > pt
        if need.any():
            lo = np.zeros(idx.size)
            hi = np.sqrt(c2.sum(axis=1) / pt) + 1e-300
            for _ in range(BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                over = power(mid, False) > pt
                moving = (mid > lo) & (mid < hi)
                if not moving.any():
                    break
                lo = np.where(moving & over, mid, lo)
                hi = np.where(moving & ~over, mid, hi)
            mu = np.where(need, hi, 0.0)
        drop = null & (mu[:, None] == 0.0)
        scale = np.where(drop, 0.0, 1.0 / np.where(drop, 1.0, lam + mu[:, None]))
        Vn = np.einsum("baj,bjk->bak", Q, C * scale[:, :, None])
        se = _sum_se_numpy(Hs, Vn, sigma2)
        V[idx] = Vn
        iters[idx] = t + 1
        hist[idx, t + 1] = se
        better = se > best_se[idx]
        best[idx[better]] = Vn[better]
        best_se[idx[better]] = se[better]
        done = np.abs(se - se_prev[idx]) < tol
        se_prev[idx] = se
        active[idx[done]] = False
    return best, iters, hist


def wmmse_batch(H: np.ndarray, pt: float, sigma2: float, max_iters: int = 200,
                tol: float = 1e-6, use_numba: bool | None = None):
    """Run WMMSE on a batch ``H`` (B, N, K). Returns (V, iters, se_history)."""
    H = np.ascontiguousarray(H, dtype=np.complex128)
    if _pick(use_numba):
        return _wmmse_batch_loop(H, float(pt), float(sigma2), int(max_iters), float(tol))
    return _wmmse_batch_numpy(H, float(pt), float(sigma2), int(max_iters), float(tol))
