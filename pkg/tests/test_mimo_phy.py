import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bicmb.mimo_phy import (
    bit_metrics, get_constellation, hard_demap, modulate, sample_channel, stream_gains, svd_decompose,
)
from oracles import eig2_hermitian

NAMES = ["bpsk", "qpsk", "qam16"]


def test_channel_deterministic():
    a = sample_channel(2, 2, np.random.default_rng(11))
    b = sample_channel(2, 2, np.random.default_rng(11))
    assert a.tobytes() == b.tobytes() and a.shape == (2, 2)
    assert sample_channel(1, 1, np.random.default_rng(0)).shape == (1, 1)


def test_channel_statistics():
    rng = np.random.default_rng(5)
    x = np.array([sample_channel(2, 2, rng)[0, 1] for _ in range(100_000)])
    assert abs(x.mean()) < 0.02
    assert abs(np.mean(np.abs(x - x.mean()) ** 2) - 1) < 0.05


def test_svd_examples():
    assert np.allclose(svd_decompose(np.eye(2)).sigma, [1, 1])
    assert np.allclose(svd_decompose(np.array([[0, 3], [4, 0]])).sigma, [4, 3])
    with pytest.raises(ValueError):
        svd_decompose(np.array([[np.nan, 0], [0, 1]]))


@pytest.mark.parametrize("n", [2, 4])
def test_svd_invariants(n):
    rng = np.random.default_rng(n)
    for _ in range(2000):
        H = sample_channel(n, n, rng)
        U, s, V = svd_decompose(H)
        scale = np.linalg.norm(H)
        assert np.linalg.norm(U @ np.diag(s) @ V.conj().T - H) <= 1e-10 * scale
        assert np.linalg.norm(U.conj().T @ U - np.eye(n)) <= 1e-10
        assert np.linalg.norm(V.conj().T @ V - np.eye(n)) <= 1e-10
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)


def test_svd_rectangular():
    H = sample_channel(4, 2, np.random.default_rng(1))
    U, s, V = svd_decompose(H)
    assert U.shape == (2, 2) and V.shape == (4, 4) and s.shape == (2,)


def test_stream_gains_match_svd():
    rng = np.random.default_rng(9)
    H = np.stack([sample_channel(2, 2, rng) for _ in range(10)])
    g = stream_gains(H, 2)
    for h, row in zip(H, g):
        l1, l2 = eig2_hermitian(h.conj().T @ h)
        assert row ** 2 == pytest.approx([l1, l2], abs=1e-9)


@pytest.mark.parametrize("name", NAMES)
def test_unit_energy(name):
    c = get_constellation(name)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
    assert c.order == 2 ** c.bits_per_symbol


@pytest.mark.parametrize("name", NAMES)
def test_gray_neighbours(name):
    c = get_constellation(name)
    pts, lab = c.points, c.labels
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = d[d > 0].min()
    for i in range(c.order):
        for j in range(c.order):
            if 0 < d[i, j] < dmin + 1e-9:
                assert np.sum(lab[i] != lab[j]) == 1


def test_modulate_conventions():
    assert modulate([0, 1], get_constellation("bpsk")).tolist() == [1, -1]
    assert modulate([0, 0], get_constellation("qpsk"))[0] == pytest.approx((1 + 1j) / np.sqrt(2))
    with pytest.raises(ValueError):
        modulate([0, 1, 1], get_constellation("qpsk"))


@pytest.mark.parametrize("name", NAMES)
def test_hard_demap_roundtrip(name):
    c = get_constellation(name)
    bits = np.random.default_rng(3).integers(0, 2, 64 * c.bits_per_symbol)
    assert np.array_equal(hard_demap(modulate(bits, c), 1.0, c), bits)


def test_bit_metric_examples():
    m = bit_metrics(np.array([0.9]), 1.0, get_constellation("bpsk"))[0]
    assert m[0, 0] == pytest.approx(0.01) and m[0, 1] == pytest.approx(3.61)
    q = get_constellation("qpsk")
    for label in range(4):
        m = bit_metrics(np.array([2 * q.points[label]]), 2.0, q)[0]
        assert all(m[b, q.labels[label, b]] == pytest.approx(0, abs=1e-12) for b in range(2))
    c16 = get_constellation("qam16")
    m = bit_metrics(c16.points[5:6], 1.0, c16)[0]
    assert all(m[b, c16.labels[5, b]] == 0 for b in range(4))


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 3), st.sampled_from(NAMES))
def test_metric_sanity(re, im, sigma, name):
    c = get_constellation(name)
    y = complex(re, im)
    m = bit_metrics(np.array([y]), sigma, c)[0]
    best = np.min(np.abs(y - sigma * c.points) ** 2)
    assert np.allclose(m.min(axis=1), best)
