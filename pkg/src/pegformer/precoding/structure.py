"""Precoder recovery from a power allocation via the optimal solution structure."""
from __future__ import annotations

import numpy as np

from ..numkit import ComplexMatrix
from .core import PowerAllocation, Precoder, _as_complex


def structure_recover(H, alloc: PowerAllocation, sigma2: float, pt: float | None = None) -> np.ndarray:
    """V = (I + H diag(lambda) H^H / sigma2)^{-1} H P^{1/2}.

    P is diagonal with p_k / ||(I + H Lambda H^H / sigma2)^{-1} h_k||^2, so
    column k carries exactly power p_k.
    """
    Hc = _as_complex(H)
    p = np.asarray(alloc.p, dtype=np.float64)
    lam = np.asarray(alloc.lam, dtype=np.float64)
    if pt is not None:
        alloc.check(pt)
    N, K = Hc.shape
    if p.shape != (K,) or lam.shape != (K,):
        raise ValueError(f"allocation length must be K={K}")
    M = np.eye(N) + (Hc * lam) @ Hc.conj().T / sigma2
    D = np.linalg.solve(M, Hc)
    col = np.sum(np.abs(D) ** 2, axis=0)
    return D * np.sqrt(p / col)


def structure_recover_precoder(H: ComplexMatrix, alloc: PowerAllocation, sigma2: float) -> Precoder:
    return Precoder(ComplexMatrix.from_complex(structure_recover(H, alloc, sigma2)))
