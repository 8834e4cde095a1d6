import numpy as np
import pytest

from thzgen.channel import BEAMSPACE, SPATIAL, ChannelMatrix
from thzgen.evaluation import (
    SsimParams,
    angular_power,
    compare_power,
    nmse,
    ssim,
    ssim_cdf,
    ssim_complex,
)


def random_image(seed, shape=(8, 16)):
    return np.random.default_rng(seed).normal(size=shape)


# -- SSIM -------------------------------------------------------------------

def test_ssim_self_similarity():
    a = random_image(0)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_zero_images():
    assert ssim(np.zeros((8, 8)), np.zeros((8, 8))) == 1.0


def test_ssim_constant_images_closed_form():
    # Constant 1 vs constant 2: variance terms vanish, leaving the luminance
    # ratio (2*mu_a*mu_b + c1) / (mu_a^2 + mu_b^2 + c1) with range 2.
    c1 = (0.01 * 2.0) ** 2
    val = ssim(np.ones((8, 8)), np.full((8, 8), 2.0))
    assert val == pytest.approx((4.0 + c1) / (5.0 + c1), rel=1e-12)


def test_ssim_symmetry():
    a, b = random_image(1), random_image(2)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_joint_scale_invariance():
    # c1/c2 scale with the dynamic range, so scaling both inputs together
    # leaves the index unchanged; scaling only one does not.
    a, b = random_image(3), random_image(4)
    assert ssim(3.0 * a, 3.0 * b) == pytest.approx(ssim(a, b), rel=1e-10)
    assert ssim(a, 5.0 * a) < 0.999


def test_ssim_decreases_with_noise():
    rng = np.random.default_rng(5)
    base = random_image(6, (16, 16))
    levels = [0.05, 0.1, 0.2, 0.5, 1.0]
    means = []
    for level in levels:
        vals = [
            ssim(base, base + level * rng.normal(size=base.shape)) for _ in range(20)
        ]
        means.append(np.mean(vals))
    assert all(hi > lo for hi, lo in zip(means, means[1:]))
    assert means[0] > 0.9 > means[-1]


def test_ssim_window_clamped_to_small_inputs():
    a = random_image(7, (4, 4))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_input_validation():
    with pytest.raises(ValueError, match="mismatch"):
        ssim(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError, match="3x3"):
        ssim(np.zeros((2, 8)), np.zeros((2, 8)))


def test_ssim_complex_modes():
    rng = np.random.default_rng(8)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert ssim_complex(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim_complex(a, a, mode="realimag") == pytest.approx(1.0, abs=1e-12)
    # Magnitude mode ignores a global phase; realimag does not.
    rotated = a * np.exp(1j * 0.8)
    assert ssim_complex(a, rotated) == pytest.approx(1.0, abs=1e-12)
    assert ssim_complex(a, rotated, mode="realimag") < 0.999
    with pytest.raises(ValueError, match="mode"):
        ssim_complex(a, a, mode="phase")


def test_ssim_cdf():
    rng = np.random.default_rng(9)
    ref = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    pairs = [(ref + s * rng.normal(size=(8, 8)), ref) for s in (0.0, 0.3, 1.0)]
    out = ssim_cdf(pairs)
    assert np.all(np.diff(out.values) >= 0)
    np.testing.assert_allclose(out.cdf, [1 / 3, 2 / 3, 1.0])
    assert out.mean == pytest.approx(out.values.mean())
    assert out.values[-1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        ssim_cdf([])


# -- angular power ----------------------------------------------------------

def test_angular_power_marginals():
    m = np.zeros((4, 8), dtype=complex)
    m[1, 2] = 3.0
    m[3, 5] = 4.0j
    out = angular_power(m)
    assert out.sample_count == 1
    expected_tx = np.zeros(8)
    expected_tx[2], expected_tx[5] = 9.0, 16.0
    expected_rx = np.zeros(4)
    expected_rx[1], expected_rx[3] = 9.0, 16.0
    np.testing.assert_allclose(out.tx_profile, expected_tx)
    np.testing.assert_allclose(out.rx_profile, expected_rx)
    assert out.tx_profile.sum() == pytest.approx(out.rx_profile.sum())


def test_angular_power_averages_over_samples():
    a = np.zeros((2, 2), dtype=complex)
    a[0, 0] = 2.0
    b = np.zeros((2, 2), dtype=complex)
    b[1, 1] = 2.0
    out = angular_power(np.stack([a, b]))
    assert out.sample_count == 2
    np.testing.assert_allclose(out.tx_profile, [2.0, 2.0])


def test_angular_power_requires_beamspace_channels():
    from thzgen.geometry import ArrayGeometry

    g = ArrayGeometry.uniform_linear(0.3e12, n_tx=2, n_rx=2)
    entries = np.ones((2, 2), dtype=complex)
    spatial = ChannelMatrix(entries=entries, domain_tag=SPATIAL, geometry=g)
    beam = ChannelMatrix(entries=entries, domain_tag=BEAMSPACE, geometry=g)
    with pytest.raises(ValueError, match="beamspace"):
        angular_power([spatial])
    assert angular_power([beam]).sample_count == 1


# -- profile comparison -----------------------------------------------------

def test_compare_power_identical():
    out = angular_power(random_image(10, (4, 8)) + 0j)
    cmp = compare_power(out, out)
    for side in (cmp.tx, cmp.rx):
        assert side.tv_distance == pytest.approx(0.0, abs=1e-12)
        assert side.cosine_similarity == pytest.approx(1.0, abs=1e-12)
        assert side.argmax_match


def test_compare_power_disjoint():
    a = np.zeros((2, 4), dtype=complex)
    a[0, 0] = 1.0
    b = np.zeros((2, 4), dtype=complex)
    b[1, 3] = 1.0
    cmp = compare_power(angular_power(a), angular_power(b))
    assert cmp.tx.tv_distance == pytest.approx(1.0)
    assert cmp.tx.cosine_similarity == pytest.approx(0.0)
    assert not cmp.tx.argmax_match and not cmp.rx.argmax_match


def test_compare_power_scale_free_tv():
    # Total-variation compares normalized profiles, so a global power scale
    # does not register.
    m = random_image(11, (4, 8)) + 0j
    cmp = compare_power(angular_power(3.0 * m), angular_power(m))
    assert cmp.tx.tv_distance == pytest.approx(0.0, abs=1e-12)


def test_compare_power_rejects_zero_profile():
    good = angular_power(np.ones((2, 2), dtype=complex))
    bad = angular_power(np.zeros((2, 2), dtype=complex))
    with pytest.raises(ValueError, match="zero-energy"):
        compare_power(good, bad)


# -- NMSE -------------------------------------------------------------------

def test_nmse_values():
    b = random_image(12) + 1j * random_image(13)
    assert nmse(b, b) == 0.0
    assert nmse(np.zeros_like(b), b) == pytest.approx(1.0)
    assert nmse(2.0 * b, b) == pytest.approx(1.0)


def test_nmse_validation():
    with pytest.raises(ValueError, match="mismatch"):
        nmse(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError, match="zero norm"):
        nmse(np.ones((2, 2)), np.zeros((2, 2)))
