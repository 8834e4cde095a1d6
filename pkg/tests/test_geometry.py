import numpy as np
import pytest

from thzgen.errors import DegenerateGeometryError
from thzgen.geometry import (
    ArrayGeometry,
    condition_vector,
    direction_angles,
    rayleigh_distance,
    unit_direction,
)


def test_rayleigh_distance_reference_value():
    # 2 * 0.1275^2 / 0.001
    assert rayleigh_distance(0.1275, 0.001) == pytest.approx(32.51, abs=0.01)


def test_rayleigh_distance_scaling():
    base = rayleigh_distance(0.1, 0.001)
    assert rayleigh_distance(0.2, 0.001) == pytest.approx(4 * base)
    assert rayleigh_distance(0.1, 0.002) == pytest.approx(base / 2)


@pytest.mark.parametrize("aperture,wavelength", [(0.0, 1e-3), (0.1, 0.0), (-1.0, 1e-3)])
def test_rayleigh_distance_rejects_nonpositive(aperture, wavelength):
    with pytest.raises(ValueError):
        rayleigh_distance(aperture, wavelength)


def test_condition_vector_3_4_0():
    p = condition_vector((0, 0, 0), (3, 4, 0)).p
    np.testing.assert_allclose(p, [5, 3, 4, 0, 0.8, 0.6, 0, 1], atol=1e-12)


def test_condition_vector_axis_aligned():
    d = 7.25
    p = condition_vector((1, 2, 3), (1 + d, 2, 3)).p
    np.testing.assert_allclose(p, [d, d, 0, 0, 0, 1, 0, 1], atol=1e-12)


def test_condition_vector_trig_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = condition_vector(rng.normal(size=3), rng.normal(size=3)).p
        assert p[4] ** 2 + p[5] ** 2 == pytest.approx(1.0, abs=1e-12)
        assert p[6] ** 2 + p[7] ** 2 == pytest.approx(1.0, abs=1e-12)
        assert p[0] == pytest.approx(np.linalg.norm(p[1:4]))


def test_condition_vector_coincident_positions():
    with pytest.raises(DegenerateGeometryError):
        condition_vector((1.0, 2.0, 3.0), (1.0, 2.0, 3.0))


def test_uniform_linear_layout():
    g = ArrayGeometry.uniform_linear(0.3e12, n_tx=16, n_rx=8, k_tx=2, k_rx=2)
    assert g.element_positions_tx.shape == (16, 3)
    assert g.subarray_centers_tx.shape == (2, 3)
    # Elements of each subarray are centered on its subarray center.
    for k in range(2):
        block = g.element_positions_tx[k * 8 : (k + 1) * 8]
        np.testing.assert_allclose(block.mean(axis=0), g.subarray_centers_tx[k], atol=1e-12)
    lam = g.wavelength
    assert g.intra_spacing == pytest.approx(lam / 2)
    assert g.inter_spacing == pytest.approx(16 * lam)


def test_uniform_linear_rejects_indivisible_counts():
    with pytest.raises(ValueError, match="n_tx"):
        ArrayGeometry.uniform_linear(0.3e12, n_tx=10, n_rx=8, k_tx=3, k_rx=2)


def test_with_rx_origin_translates_everything():
    g = ArrayGeometry.uniform_linear(0.3e12, n_tx=8, n_rx=8)
    moved = g.with_rx_origin([3.0, -1.0, 0.5])
    delta = moved.rx_origin - g.rx_origin
    np.testing.assert_allclose(
        moved.element_positions_rx, g.element_positions_rx + delta
    )
    np.testing.assert_allclose(moved.element_positions_tx, g.element_positions_tx)


def test_aperture_is_largest_pairwise_span():
    g = ArrayGeometry.uniform_linear(0.3e12, n_tx=8, n_rx=8, k_tx=2, k_rx=1)
    lam = g.wavelength
    # Tx: two 4-element subarrays 16 lambda apart, each spanning 1.5 lambda.
    assert g.aperture("tx") == pytest.approx(16 * lam + 3 * lam / 2)
    assert g.subarray_aperture("tx") == pytest.approx(3 * lam / 2)


def test_direction_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(10):
        src, dst = rng.normal(size=3), rng.normal(size=3)
        az, el = direction_angles(src, dst)
        u = unit_direction(az, el)
        expected = (dst - src) / np.linalg.norm(dst - src)
        np.testing.assert_allclose(u, expected, atol=1e-12)
