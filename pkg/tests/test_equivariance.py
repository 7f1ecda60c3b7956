import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pegformer.equivariance import (
    Permutation,
    StructuredWeight,
    check_pe,
    permute_blocks,
    permute_cols,
    permute_rows,
    structured_apply,
)
from pegformer.numkit import DimensionError, Tensor


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10_000))
def test_inverse_compose_identity(n, seed):
    p = Permutation.random(n, np.random.default_rng(seed))
    assert np.array_equal(p.compose(p.inverse()).mapping, np.arange(n))
    assert np.array_equal(p.inverse().compose(p).mapping, np.arange(n))
    P = p.matrix()
    assert np.array_equal(P @ P.T, np.eye(n))


def test_invalid_permutation():
    with pytest.raises(ValueError):
        Permutation([0, 0, 1])


def test_permute_rows_examples():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((4, 3))
    assert np.array_equal(permute_rows(M, Permutation.identity(4)), M)
    swap = Permutation([1, 0, 2, 3])
    assert np.array_equal(permute_rows(permute_rows(M, swap), swap), M)
    p = Permutation.random(4, rng)
    assert np.array_equal(permute_rows(M, p), p.matrix() @ M)
    q = Permutation.random(3, rng)
    assert np.array_equal(permute_cols(M, q), M @ q.matrix().T)
    with pytest.raises(DimensionError):
        permute_rows(M, Permutation.identity(3))


def _weight(rng, j_out, j_in):
    return StructuredWeight(rng.standard_normal((j_out, j_in)), rng.standard_normal((j_out, j_in)))


def test_materialized_block_structure():
    w = _weight(np.random.default_rng(1), 2, 3)
    M = w.materialize(4)
    assert M.shape == (8, 12)
    for i in range(4):
        for j in range(4):
            blk = M[2 * i:2 * i + 2, 3 * j:3 * j + 3]
            assert np.array_equal(blk, w.W1 if i == j else w.W2)


def test_structured_apply_matches_dense():
    rng = np.random.default_rng(2)
    w = _weight(rng, 3, 2)
    x = rng.standard_normal(5 * 2)
    assert np.max(np.abs(structured_apply(w, x) - w.materialize(5) @ x)) < 1e-12


def test_structured_apply_w2_zero_is_blockwise():
    rng = np.random.default_rng(3)
    w = StructuredWeight(rng.standard_normal((2, 3)), np.zeros((2, 3)))
    x = rng.standard_normal((4, 3))
    assert np.allclose(structured_apply(w, x), x @ w.W1.T, rtol=0, atol=1e-15)


def test_structured_commutes_exactly_with_block_permutations():
    rng = np.random.default_rng(4)
    w = _weight(rng, 4, 3)
    x = rng.standard_normal(6 * 3)
    base = structured_apply(w, x)
    for _ in range(100):
        p = Permutation.random(6, rng)
        lhs = structured_apply(w, permute_blocks(x, p, 3))
        rhs = permute_blocks(base, p, 4)
        assert np.array_equal(lhs, rhs)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 7), st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_commutation_property(n, j_in, j_out, seed):
    rng = np.random.default_rng(seed)
    w = _weight(rng, j_out, j_in)
    x = rng.standard_normal((3, n, j_in))
    p = Permutation.random(n, rng)
    assert np.array_equal(structured_apply(w, x[:, p.mapping]), structured_apply(w, x)[:, p.mapping])
    P = np.kron(p.matrix(), np.eye(j_out))
    Q = np.kron(p.matrix(), np.eye(j_in))
    assert np.allclose(P @ w.materialize(n), w.materialize(n) @ Q, rtol=0, atol=0)


def test_structured_tensor_path_matches_array():
    rng = np.random.default_rng(5)
    w = _weight(rng, 3, 2)
    x = rng.standard_normal((2, 4, 2))
    assert np.array_equal(structured_apply(w, Tensor(x)).data, structured_apply(w, x))


def test_structured_length_mismatch():
    w = _weight(np.random.default_rng(6), 2, 3)
    with pytest.raises(DimensionError):
        structured_apply(w, np.zeros(7))
    with pytest.raises(DimensionError):
        structured_apply(w, np.zeros((2, 4)))


class _Identity:
    """Trivially equivariant stand-in model: V = H."""

    def raw_outputs(self, H, a=None):
        return {"V": np.asarray(H, complex)}


class _FirstRowBroadcast:
    """Breaks antenna equivariance: every antenna copies antenna 0."""

    def raw_outputs(self, H, a=None):
        H = np.asarray(H, complex)
        return {"V": np.repeat(H[:, :1], H.shape[1], axis=1)}


def test_check_pe_report_shape_and_verdicts():
    H = np.random.default_rng(7).standard_normal((1, 5, 3)) + 0j
    rep = check_pe(_Identity(), H, "joint", trials=10)
    assert rep["pass"] and rep["max_deviation"] == 0.0 and len(rep["deviations"]) == 10
    assert set(rep) >= {"perm", "trials", "tol", "max_deviation", "pass"}
    bad = check_pe(_FirstRowBroadcast(), H, "antenna", trials=10)
    assert not bad["pass"] and bad["max_deviation"] > 1e-2
    assert check_pe(_FirstRowBroadcast(), H, "user", trials=10)["pass"]
    with pytest.raises(ValueError):
        check_pe(_Identity(), H, "rows")
