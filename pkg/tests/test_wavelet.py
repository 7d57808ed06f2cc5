import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icfusion.wavelet import (
    SubbandSet,
    analyze_pair,
    decompose,
    haar_dwt2,
    haar_idwt2,
    pad_to_even,
    subband_energy,
)


def oracle_energies(img):
    """Band energies by explicit per-block loops."""
    e = [0.0, 0.0, 0.0, 0.0]
    h, w = img.shape
    for i in range(0, h, 2):
        for j in range(0, w, 2):
            a, b = img[i, j], img[i, j + 1]
            c, d = img[i + 1, j], img[i + 1, j + 1]
            for k, v in enumerate(((a + b + c + d) / 2, (a + b - c - d) / 2,
                                   (a + c - b - d) / 2, (a - b - c + d) / 2)):
                e[k] += v * v
    return e


def oracle_hf(img):
    e = oracle_energies(img)
    return sum(e[1:]) / sum(e)


def step_edge(size=64, col=33):
    img = np.zeros((size, size))
    img[:, col:] = 1.0
    return img


def smooth_ramp(size=64):
    return np.tile(np.arange(size) / (size - 1), (size, 1))


def test_constant_image():
    s = haar_dwt2(np.full((6, 8), 0.3))
    assert np.allclose(s.ll, 0.6) and not s.lh.any() and not s.hl.any() and not s.hh.any()
    assert subband_energy(s).hf_ratio == 0.0


def test_single_block():
    s = haar_dwt2(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert [s.ll.item(), s.lh.item(), s.hl.item(), s.hh.item()] == [0.5] * 4
    assert subband_energy(s).total == 1.0


def test_checkerboard_block():
    e = subband_energy(haar_dwt2(np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert (e.e_ll, e.e_lh, e.e_hl, e.e_hh) == (1.0, 0.0, 0.0, 1.0)
    assert e.hf_ratio == 0.5


def test_odd_dims_rejected():
    with pytest.raises(ValueError):
        haar_dwt2(np.zeros((3, 4)))


def test_orientation():
    rows_vary = np.repeat(np.arange(8.0)[:, None] ** 2, 6, axis=1)
    e = subband_energy(haar_dwt2(rows_vary))
    assert e.e_hl == 0.0 and e.e_lh > 0
    e = subband_energy(haar_dwt2(rows_vary.T.copy()))
    assert e.e_lh == 0.0 and e.e_hl > 0


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32))
def test_roundtrip_and_parseval(hh, ww, seed):
    img = np.random.default_rng(seed).random((2 * hh, 2 * ww))
    s = haar_dwt2(img)
    assert np.max(np.abs(haar_idwt2(s) - img)) <= 1e-12
    total = float(np.sum(img ** 2))
    assert abs(subband_energy(s).total - total) <= 1e-9 * total


def test_random_64_exactness():
    img = np.random.default_rng(0).random((64, 64))
    s = haar_dwt2(img)
    assert np.max(np.abs(haar_idwt2(s) - img)) <= 1e-12
    e = subband_energy(s)
    assert np.allclose([e.e_ll, e.e_lh, e.e_hl, e.e_hh], oracle_energies(img), rtol=1e-12)


def test_linearity():
    rng = np.random.default_rng(1)
    x, y = rng.random((8, 10)), rng.random((8, 10))
    a = haar_dwt2(2.5 * x - y)
    bx, by = haar_dwt2(x), haar_dwt2(y)
    for band in ("ll", "lh", "hl", "hh"):
        assert np.allclose(getattr(a, band), 2.5 * getattr(bx, band) - getattr(by, band), atol=1e-14)


def test_idwt_special_cases():
    z = np.zeros((3, 4))
    assert not haar_idwt2(SubbandSet(z, z, z, z)).any()
    img = np.random.default_rng(2).random((6, 8))
    s = haar_dwt2(img)
    ll_only = haar_idwt2(SubbandSet(s.ll, z, z, z))
    block_mean = img.reshape(3, 2, 4, 2).mean(axis=(1, 3))
    assert np.allclose(ll_only, np.kron(block_mean, np.ones((2, 2))), atol=1e-15)
    with pytest.raises(ValueError):
        haar_idwt2(SubbandSet(z, z, z, np.zeros((2, 2))))


def test_step_edge_beats_smooth_ramp():
    edge, ramp = step_edge(), smooth_ramp()
    # hand values: edge 32 / 1984, ramp 16 / 85344
    assert oracle_hf(edge) == pytest.approx(1 / 62, rel=1e-12)
    assert oracle_hf(ramp) == pytest.approx(1 / 5334, rel=1e-12)
    hf_edge = subband_energy(haar_dwt2(edge)).hf_ratio
    hf_ramp = subband_energy(haar_dwt2(ramp)).hf_ratio
    assert hf_edge == pytest.approx(1 / 62, rel=1e-12)
    assert hf_ramp == pytest.approx(1 / 5334, rel=1e-12)
    assert hf_edge > hf_ramp


def test_block_aligned_edge_is_invisible_at_level_one():
    assert subband_energy(haar_dwt2(step_edge(col=32))).hf_ratio == 0.0


def test_pad_to_even():
    img = np.arange(15.0).reshape(3, 5)
    out = pad_to_even(img)
    assert out.shape == (4, 6)
    assert np.array_equal(out[3, :5], img[1])
    assert np.array_equal(out[:3, 5], img[:, 3])
    assert pad_to_even(np.ones((1, 1))).shape == (2, 2)


def test_analyze_pair():
    rng = np.random.default_rng(3)
    a = rng.random((16, 16))
    rep = analyze_pair(a, a.copy(), levels=2)
    assert len(rep["per_level"]) == 2
    for lvl in rep["per_level"]:
        assert lvl["rgb"] == lvl["ir"]
        assert lvl["lh_hl_ratio_ir_minus_rgb"] == 0.0
    second = subband_energy(haar_dwt2(haar_dwt2(a).ll))
    assert rep["per_level"][1]["rgb"]["e_ll"] == second.e_ll
    with pytest.raises(ValueError):
        analyze_pair(a, rng.random((16, 18)))


def test_decompose_pads_odd_ll():
    sets = decompose(np.random.default_rng(4).random((6, 6)), levels=2)
    assert sets[0].ll.shape == (3, 3) and sets[1].ll.shape == (2, 2)
