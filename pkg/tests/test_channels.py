import math
import struct

import numpy as np
import pytest

from pegformer.channels import (
    ChannelSample,
    DatasetFormatError,
    UnsupportedVersionError,
    gen_rayleigh,
    gen_saleh_valenzuela,
    load_dataset,
    rayleigh_sample,
    regenerate,
    save_dataset,
    sigma2_from_snr,
    steering_vector,
    sv_channel_from_components,
)
from pegformer.numkit import ComplexMatrix, DimensionError


def test_baseband_setup_shape():
    ds = gen_rayleigh(16, 8, 50, 10, seed=3)
    assert ds.H.shape == (50, 16, 8) and ds.n == 16 and ds.k == 8
    assert ds.snr_db == pytest.approx(10.0)
    assert ds.sigma2 == pytest.approx(0.1)


def test_rayleigh_second_moment():
    ds = gen_rayleigh(10, 10, 1000, seed=5)  # 1e5 entries
    m2 = np.mean(np.abs(ds.H) ** 2)
    assert abs(m2 - 1.0) <= 0.02
    assert abs(np.mean(ds.H.real ** 2) - 0.5) < 0.01
    assert abs(np.mean(ds.H.imag ** 2) - 0.5) < 0.01


@pytest.mark.parametrize("count", [100, 400, 1600])
def test_rayleigh_moment_tolerance_scales(count):
    ds = gen_rayleigh(1, 1, count, seed=count)
    assert abs(np.mean(np.abs(ds.H) ** 2) - 1.0) <= 3 / math.sqrt(count)


def test_rayleigh_deterministic_and_per_sample():
    a = gen_rayleigh(4, 3, 20, seed=9)
    b = gen_rayleigh(4, 3, 20, seed=9)
    assert a.equals(b)
    # sample i does not depend on how many samples are generated
    assert np.array_equal(gen_rayleigh(4, 3, 5, seed=9).H, a.H[:5])
    assert np.array_equal(rayleigh_sample(4, 3, 9, 17), a.H[17])
    assert not gen_rayleigh(4, 3, 20, seed=10).equals(a)


@pytest.mark.parametrize("n,k", [(0, 2), (2, 0)])
def test_zero_dims_rejected(n, k):
    with pytest.raises(DimensionError):
        gen_rayleigh(n, k, 3)
    with pytest.raises(DimensionError):
        gen_saleh_valenzuela(n, k, count=3)


def test_sv_hybrid_setup():
    ds = gen_saleh_valenzuela(16, 3, 4, 5, count=10, seed=1)
    assert ds.H.shape == (10, 16, 3) and ds.meta["clusters"] == 4 and ds.meta["rays"] == 5


def test_sv_rank_bound():
    # paths are drawn per user, so the joint bound is min(N, K, K*C*R); the
    # per-user statement is that h_k lies in the span of its C*R steering vectors
    ds = gen_saleh_valenzuela(16, 6, 1, 2, count=20, seed=2, keep_components=True)
    for i, H in enumerate(ds.H):
        assert np.linalg.matrix_rank(H, tol=1e-9) <= min(16, 6, 6 * 2)
        for k in range(6):
            A = steering_vector(16, ds.extras["angles"][i, k].ravel()).T  # (N, C*R)
            assert np.linalg.matrix_rank(A, tol=1e-9) <= 2
            coef, *_ = np.linalg.lstsq(A, H[:, k], rcond=None)
            assert np.linalg.norm(A @ coef - H[:, k]) < 1e-10 * np.linalg.norm(H[:, k])
    # single cluster, single ray, K users on one shared angle: rank 1
    h = steering_vector(16, 0.4)
    shared = np.outer(h, np.random.default_rng(0).standard_normal(6))
    assert np.linalg.matrix_rank(shared, tol=1e-9) == 1


def test_sv_average_power():
    ds = gen_saleh_valenzuela(8, 1, 4, 5, count=10000, seed=4)
    mean = np.mean(np.sum(np.abs(ds.H) ** 2, axis=1))
    assert abs(mean - 8) <= 0.03 * 8


def test_sv_reproducible_from_components():
    ds = gen_saleh_valenzuela(8, 3, 4, 5, count=6, seed=11, keep_components=True)
    for i in range(6):
        h = sv_channel_from_components(8, ds.extras["angles"][i], ds.extras["gains"][i])
        assert np.array_equal(h, ds.H[i])


def test_sv_angle_spread_declared():
    ds = gen_saleh_valenzuela(8, 2, 4, 5, count=400, seed=1, keep_components=True)
    ang = ds.extras["angles"]
    dev = ang - ang.mean(axis=-1, keepdims=True)
    # sample std of Laplace offsets, corrected for the subtracted mean (5 rays)
    std = np.sqrt(np.sum(dev ** 2) / (dev.size * 4 / 5))
    assert abs(math.degrees(std) - 7.5) < 0.5


def test_steering_vector_unit_norm_and_phase():
    a = steering_vector(6, 0.3)
    assert abs(np.linalg.norm(a) - 1) < 1e-14
    assert np.allclose(a[1] / a[0], np.exp(1j * math.pi * math.sin(0.3)))


def test_regenerate_bit_identical():
    for ds in (gen_rayleigh(3, 2, 7, 5, seed=2), gen_saleh_valenzuela(4, 2, 2, 3, count=5, seed=8)):
        assert regenerate(ds.meta).equals(ds)


def test_channel_sample_invariants():
    H = ComplexMatrix.from_complex(np.ones((2, 2)))
    s = ChannelSample(H, 1.0, 0.1)
    assert s.snr_db == pytest.approx(10.0)
    with pytest.raises(ValueError):
        ChannelSample(H, 1.0, 0.0)
    with pytest.raises(ValueError):
        ChannelSample(ComplexMatrix.from_complex(np.array([[np.nan]])), 1.0, 0.1)
    assert sigma2_from_snr(20.0) == pytest.approx(0.01)


# ---------------------------------------------------------------- file format

def test_round_trip(tmp_path):
    ds = gen_rayleigh(5, 3, 11, 20, seed=4)
    p = tmp_path / "d.pepc"
    save_dataset(ds, p)
    back = load_dataset(p)
    assert back.equals(ds) and back.meta == ds.meta
    assert p.read_bytes()[:4] == b"PEPC"


def test_truncated_file(tmp_path):
    p = tmp_path / "d.pepc"
    save_dataset(gen_rayleigh(2, 2, 3), p)
    raw = p.read_bytes()
    p.write_bytes(raw[:-5])
    with pytest.raises(DatasetFormatError) as e:
        load_dataset(p)
    assert e.value.offset > 0
    p.write_bytes(raw[:20])
    with pytest.raises(DatasetFormatError, match="truncated header"):
        load_dataset(p)


def test_bad_version(tmp_path):
    p = tmp_path / "d.pepc"
    save_dataset(gen_rayleigh(2, 2, 3), p)
    raw = bytearray(p.read_bytes())
    raw[4:8] = struct.pack("<I", 2)
    p.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersionError) as e:
        load_dataset(p)
    assert e.value.offset == 4


def test_bad_magic_and_dims(tmp_path):
    p = tmp_path / "d.pepc"
    save_dataset(gen_rayleigh(2, 2, 3), p)
    raw = bytearray(p.read_bytes())
    bad = bytes(b"XXXX" + raw[4:])
    p.write_bytes(bad)
    with pytest.raises(DatasetFormatError) as e:
        load_dataset(p)
    assert e.value.offset == 0
    # header claims 4 samples, payload holds 3
    raw[16:20] = struct.pack("<I", 4)
    p.write_bytes(bytes(raw))
    with pytest.raises(DatasetFormatError, match="payload size"):
        load_dataset(p)
