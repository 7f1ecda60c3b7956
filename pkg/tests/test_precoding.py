import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pegformer import _accel
from pegformer.channels import gen_rayleigh, gen_saleh_valenzuela
from pegformer.equivariance import Permutation
from pegformer.numkit import ComplexMatrix, Tensor
from pegformer.numkit import tensor as T
from pegformer.precoding import (
    DegenerateInputError,
    DomainError,
    HybridPrecoder,
    PowerAllocation,
    Precoder,
    effective_precoder,
    mrt,
    normalize_hybrid,
    normalize_power,
    random_phase_zf,
    se_ratio,
    structure_recover,
    sum_se,
    sum_se_tensor,
    wmmse,
    zero_forcing,
)
from pegformer.precoding.kernels import sum_se_batch, wmmse_batch

from helpers import central_jvp, rel_err


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def brute_se(H, V, sigma2):
    """Per-user SINR with plain Python complex arithmetic."""
    N, K = H.shape
    total = 0.0
    for k in range(K):
        gains = []
        for i in range(K):
            acc = 0j
            for n in range(N):
                acc += complex(H[n, k]).conjugate() * complex(V[n, i])
            gains.append(abs(acc) ** 2)
        interf = sum(g for i, g in enumerate(gains) if i != k)
        total += np.log2(1 + gains[k] / (interf + sigma2))
    return total


# ---------------------------------------------------------------- sum_se

def test_single_user_mrt_closed_form():
    rng = np.random.default_rng(0)
    h = crandn(rng, 5, 1)
    v = h / np.linalg.norm(h) * np.sqrt(2.0)
    assert sum_se(h, v, 0.3) == pytest.approx(np.log2(1 + 2.0 * np.linalg.norm(h) ** 2 / 0.3), rel=1e-13)


def test_zero_precoder_zero_rate():
    assert sum_se(np.ones((3, 2)), np.zeros((3, 2)), 0.1) == 0.0


def test_sum_se_brute_force_oracle():
    rng = np.random.default_rng(1)
    H, V = crandn(rng, 3, 2), crandn(rng, 3, 2)
    assert abs(sum_se(H, V, 0.1) - brute_se(H, V, 0.1)) < 1e-10


def test_sum_se_domain_error():
    with pytest.raises(DomainError):
        sum_se(np.ones((2, 2)), np.ones((2, 2)), 0.0)


def test_sum_se_accepts_complexmatrix_and_batches():
    rng = np.random.default_rng(2)
    H, V = crandn(rng, 4, 4, 3), crandn(rng, 4, 4, 3)
    batch = sum_se(H, V, 0.2)
    assert batch.shape == (4,)
    assert sum_se(ComplexMatrix.from_complex(H[1]), ComplexMatrix.from_complex(V[1]), 0.2) == pytest.approx(batch[1])


def test_sum_se_tensor_matches_and_differentiates():
    rng = np.random.default_rng(3)
    H, V = crandn(rng, 3, 4, 2), crandn(rng, 3, 4, 2)
    Vr, Vi = Tensor(V.real, requires_grad=True), Tensor(V.imag, requires_grad=True)
    se = sum_se_tensor(H, Vr, Vi, 0.1)
    assert np.max(np.abs(se.data - sum_se(H, V, 0.1))) < 1e-12
    gr, gi = T.grad(T.tsum(se), [Vr, Vi])
    d = rng.standard_normal(V.shape)
    fd = central_jvp(lambda x: float(sum_se(H, x + 1j * V.imag, 0.1).sum()), V.real, d)
    assert rel_err(float((gr * d).sum()), fd) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 10_000))
def test_sum_se_invariant_under_joint_permutations(n, k, seed):
    rng = np.random.default_rng(seed)
    H, V = crandn(rng, n, k), crandn(rng, n, k)
    pa, pu = Permutation.random(n, rng), Permutation.random(k, rng)
    Hp = H[pa.mapping][:, pu.mapping]
    Vp = V[pa.mapping][:, pu.mapping]
    assert sum_se(Hp, Vp, 0.1) == pytest.approx(sum_se(H, V, 0.1), rel=1e-12, abs=1e-12)


def test_se_ratio_examples():
    rng = np.random.default_rng(4)
    H = crandn(rng, 4, 2)
    V = wmmse(H, 1.0, 0.1)
    assert se_ratio(H, V, V, 0.1) == 1.0
    scaled = V * np.sqrt(0.9)
    r = se_ratio(H, scaled, V, 0.1)
    assert r < 1 and r == pytest.approx(sum_se(H, scaled, 0.1) / sum_se(H, V, 0.1))
    with pytest.raises(DomainError):
        se_ratio(H, V, np.zeros_like(V), 0.1)


# ---------------------------------------------------------------- normalizers

def test_normalize_power_examples():
    rng = np.random.default_rng(5)
    V = crandn(rng, 4, 3)
    out = normalize_power(V, 2.0)
    assert abs(np.sum(np.abs(out) ** 2) - 2.0) < 1e-12
    assert np.allclose(normalize_power(2 * V, 2.0), out, atol=1e-15)
    assert np.allclose(normalize_power(out, 2.0), out, rtol=0, atol=1e-15)
    pre = normalize_power(ComplexMatrix.from_complex(V), 1.0)
    assert isinstance(pre, Precoder) and abs(pre.power() - 1.0) < 1e-9
    with pytest.raises(DegenerateInputError):
        normalize_power(np.zeros((2, 2)), 1.0)
    with pytest.raises(DegenerateInputError):
        normalize_power((Tensor(np.zeros((1, 2, 2))), Tensor(np.zeros((1, 2, 2)))), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_normalize_power_idempotent(seed, pt):
    V = crandn(np.random.default_rng(seed), 3, 2)
    once = normalize_power(V, pt)
    assert np.allclose(normalize_power(once, pt), once, rtol=1e-14, atol=1e-15)


def test_normalize_hybrid_constraints_and_phases():
    rng = np.random.default_rng(6)
    rf, bb = crandn(rng, 3, 6), crandn(rng, 2, 3)
    hp = normalize_hybrid(ComplexMatrix.from_complex(rf), ComplexMatrix.from_complex(bb), 1.5)
    assert isinstance(hp, HybridPrecoder)
    R = hp.V_RF.to_complex()
    assert np.max(np.abs(np.abs(R) - 1)) < 1e-9
    V = hp.effective().to_complex()
    assert V.shape == (6, 2)
    assert abs(np.trace(V.conj().T @ V).real - 1.5) < 1e-9
    unit = np.exp(1j * rng.uniform(0, 6.28, (3, 6)))
    r2, _ = normalize_hybrid(unit, bb, 1.0)
    # phases agree to rounding of the division by |x| = 1 +- ulp
    assert np.max(np.abs(np.angle(r2) - np.angle(unit))) <= 4 * np.finfo(float).eps
    bad = rf.copy()
    bad[0, 0] = 0
    with pytest.raises(DegenerateInputError):
        normalize_hybrid(bad, bb, 1.0)


def test_hybrid_effective_se_matches_composed_matrix():
    rng = np.random.default_rng(7)
    H = crandn(rng, 6, 2)
    rf, bb = normalize_hybrid(crandn(rng, 3, 6), crandn(rng, 2, 3), 1.0)
    composed = (bb @ rf).T  # N x K, column k = sum_r V_BB[k, r] V_RF[r, :]
    manual = np.zeros((6, 2), complex)
    for k in range(2):
        for r in range(3):
            manual[:, k] += bb[k, r] * rf[r, :]
    assert np.allclose(composed, manual)
    assert sum_se(H, effective_precoder(rf, bb), 0.1) == pytest.approx(brute_se(H, manual, 0.1), abs=1e-10)


def test_normalize_hybrid_tensor_path_matches_arrays():
    rng = np.random.default_rng(8)
    rf, bb = crandn(rng, 2, 3, 5), crandn(rng, 2, 4, 3)
    r1, b1 = normalize_hybrid(rf, bb, 1.0)
    r2, b2 = normalize_hybrid(
        ComplexMatrix(Tensor(rf.real), Tensor(rf.imag)), ComplexMatrix(Tensor(bb.real), Tensor(bb.imag)), 1.0)
    assert np.allclose(r2.to_complex(), r1, atol=1e-14) and np.allclose(b2.to_complex(), b1, atol=1e-14)


# ---------------------------------------------------------------- baselines

def test_zero_forcing_nulls_interference():
    H = crandn(np.random.default_rng(9), 6, 3)
    V = zero_forcing(H, 1.0)
    G = H.conj().T @ V
    assert np.max(np.abs(G - np.diag(np.diag(G)))) < 1e-12
    assert abs(np.sum(np.abs(V) ** 2) - 1.0) < 1e-12


def test_wmmse_single_user_is_mrt():
    rng = np.random.default_rng(10)
    for _ in range(20):
        h = crandn(rng, 5, 1)
        v = wmmse(h, 1.0, 0.1)
        cos = abs(np.vdot(v[:, 0], h[:, 0])) / (np.linalg.norm(v) * np.linalg.norm(h))
        assert cos >= 1 - 1e-6
        assert np.sum(np.abs(v) ** 2) == pytest.approx(1.0)


def test_wmmse_monotone_and_beats_zf():
    ds = gen_rayleigh(4, 2, 200, 10, seed=11)
    V, hist, iters = wmmse(ds.H, ds.pt, ds.sigma2, return_history=True)
    d = np.diff(hist, axis=1)
    assert np.all(d[~np.isnan(d)] >= -1e-9)
    assert np.all(iters >= 1) and np.all(iters <= 200)
    se_w = sum_se(ds.H, V, ds.sigma2)
    se_z = sum_se(ds.H, zero_forcing(ds.H, ds.pt), ds.sigma2)
    assert np.mean(se_w >= se_z) >= 0.99


def test_wmmse_identical_users_no_nan():
    h = crandn(np.random.default_rng(12), 4, 1)
    H = np.hstack([h, h])
    V, hist, iters = wmmse(H, 1.0, 0.1, max_iters=50, return_history=True)
    assert np.all(np.isfinite(V)) and iters <= 50
    assert np.isfinite(sum_se(H, V, 0.1))


def test_wmmse_argument_errors():
    with pytest.raises(ValueError):
        wmmse(np.ones((2, 2)), max_iters=0)
    with pytest.raises(DomainError):
        wmmse(np.ones((2, 2)), sigma2=-1.0)


def test_random_phase_zf_properties():
    ds = gen_saleh_valenzuela(8, 2, count=20, seed=3)
    rf, bb = random_phase_zf(ds.H, 4, 1.0, seed=0)
    assert rf.shape == (20, 4, 8) and bb.shape == (20, 2, 4)
    assert np.max(np.abs(np.abs(rf) - 1)) < 1e-12
    V = effective_precoder(rf, bb)
    G = np.swapaxes(ds.H.conj(), 1, 2) @ V
    off = G - np.einsum("bkk->bk", G)[:, :, None] * np.eye(2)
    assert np.max(np.abs(off)) < 1e-9  # zero-forcing on the effective channel
    assert np.allclose(np.sum(np.abs(V) ** 2, axis=(1, 2)), 1.0)


# ---------------------------------------------------------------- kernels: numba vs numpy

@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")
def test_kernel_backends_agree():
    ds = gen_rayleigh(6, 3, 40, 10, seed=13)
    V = crandn(np.random.default_rng(0), 40, 6, 3)
    a = sum_se_batch(ds.H, V, 0.1, use_numba=True)
    b = sum_se_batch(ds.H, V, 0.1, use_numba=False)
    assert np.max(np.abs(a - b)) < 1e-12
    Va, ia, ha = wmmse_batch(ds.H, 1.0, 0.1, use_numba=True)
    Vb, ib, hb = wmmse_batch(ds.H, 1.0, 0.1, use_numba=False)
    assert np.array_equal(ia, ib)
    assert np.max(np.abs(Va - Vb)) < 1e-9
    assert np.allclose(ha, hb, equal_nan=True, atol=1e-10)


# ---------------------------------------------------------------- structure oracle

def test_structure_single_user_is_scaled_mrt():
    rng = np.random.default_rng(14)
    h = crandn(rng, 4, 1)
    v = structure_recover(h, PowerAllocation(np.array([1.0]), np.array([1.0])), 0.1, pt=1.0)
    ref = h / np.linalg.norm(h)
    assert np.max(np.abs(v - ref)) < 1e-9


def test_structure_column_powers_and_permutation():
    rng = np.random.default_rng(15)
    H = crandn(rng, 5, 3)
    p = np.array([0.2, 0.5, 0.3])
    lam = np.array([0.6, 0.1, 0.3])
    V = structure_recover(H, PowerAllocation(p, lam), 0.1, pt=1.0)
    assert np.allclose(np.sum(np.abs(V) ** 2, axis=0), p, atol=1e-12)
    perm = rng.permutation(3)
    Vp = structure_recover(H[:, perm], PowerAllocation(p[perm], lam[perm]), 0.1)
    assert np.max(np.abs(Vp - V[:, perm])) < 1e-12


def test_structure_large_noise_limit_is_mrt():
    rng = np.random.default_rng(16)
    H = crandn(rng, 4, 2)
    alloc = PowerAllocation(np.array([0.5, 0.5]), np.array([0.3, 0.7]))
    V = structure_recover(H, alloc, 1e9)
    cos = np.abs(np.sum(V.conj() * H, axis=0)) / (np.linalg.norm(V, axis=0) * np.linalg.norm(H, axis=0))
    assert np.all(cos > 1 - 1e-9)


def test_power_allocation_invariants():
    with pytest.raises(ValueError):
        PowerAllocation(np.array([0.5, 0.6]), np.array([0.5, 0.5])).check(1.0)
    with pytest.raises(ValueError):
        PowerAllocation(np.array([1.0, 0.0]), np.array([0.5, 0.5])).check(1.0)
    PowerAllocation(np.array([0.5, 0.5]), np.array([0.25, 0.75])).check(1.0)
