"""Channel synthesis: planar, spherical, and hybrid planar-spherical models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._core import swm_accumulate
from .errors import DegenerateGeometryError
from .geometry import ArrayGeometry, direction_angles, unit_direction
from .paths import Path, PathSet

SPATIAL = "spatial"
BEAMSPACE = "beamspace"

# Minimum scatterer-to-element distance before the free-space amplitude blows up.
_MIN_SEGMENT = 1e-9


@dataclass
class ChannelMatrix:
    entries: np.ndarray
    domain_tag: str
    geometry: ArrayGeometry

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        expected = (self.geometry.n_rx, self.geometry.n_tx)
        if self.entries.shape != expected:
            raise ValueError(
                f"channel shape {self.entries.shape} does not match geometry {expected}"
            )
        if self.domain_tag not in (SPATIAL, BEAMSPACE):
            raise ValueError(f"unknown domain tag {self.domain_tag!r}")
        if not np.all(np.isfinite(self.entries.view(float))):
            raise ValueError("channel matrix contains non-finite entries")

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def steering_vector(
    geometry: ArrayGeometry,
    side: str,
    subarray_index,
    azimuth: float,
    elevation: float,
) -> np.ndarray:
    """Unit-norm array response vector of a full array or one subarray.

    Element k has value (1/sqrt(n)) * exp(-j * 2*pi/lambda * <r_k, u>)
    where r_k is the element offset from the (sub)array reference point.
    """
    positions = geometry._positions(side)
    if subarray_index == "full":
        reference = geometry.tx_origin if side == "tx" else geometry.rx_origin
        offsets = positions - reference
    else:
        k = geometry.k_tx if side == "tx" else geometry.k_rx
        if not 0 <= subarray_index < k:
            raise IndexError(f"subarray index {subarray_index} out of range [0, {k})")
        n_sub = geometry.n_tx_sub if side == "tx" else geometry.n_rx_sub
        sl = slice(subarray_index * n_sub, (subarray_index + 1) * n_sub)
        offsets = positions[sl] - geometry._centers(side)[subarray_index]
    u = unit_direction(azimuth, elevation)
    phase = -2.0 * np.pi / geometry.wavelength * (offsets @ u)
    n = offsets.shape[0]
    return np.exp(1j * phase) / np.sqrt(n)


def pwm_channel(paths: PathSet, geometry: ArrayGeometry) -> ChannelMatrix:
    """Far-field planar-wave channel: sum of rank-one outer products."""
    if len(paths) == 0:
        raise ValueError("PathSet is empty")
    h = np.zeros((geometry.n_rx, geometry.n_tx), dtype=np.complex128)
    for path in paths:
        alpha = path.gain_magnitude * np.exp(-1j * path.global_phase)
        a_r = steering_vector(geometry, "rx", "full", *path.aoa)
        a_t = steering_vector(geometry, "tx", "full", *path.aod)
        # Element phases advance toward the path on both sides (matching the
        # exact spherical model's exp(-jk*distance) under linearization), so
        # both response vectors enter conjugated.
        h += alpha * np.outer(a_r.conj(), a_t.conj())
    return ChannelMatrix(entries=h, domain_tag=SPATIAL, geometry=geometry)


def _path_arrays(paths: PathSet):
    """Stack PathSet fields into the flat arrays the SWM kernel consumes."""
    n = len(paths)
    scat = np.zeros((n, 3))
    has_scat = np.zeros(n, dtype=np.uint8)
    refl = np.empty(n)
    for i, path in enumerate(paths):
        if path.scatterer_position is not None:
            scat[i] = path.scatterer_position
            has_scat[i] = 1
        elif not path.is_los:
            raise ValueError(
                f"path {i} is not line-of-sight and carries no scatterer position"
            )
        refl[i] = 1.0 if path.reflection_gain is None else path.reflection_gain
    return scat, has_scat, refl


def swm_channel(paths: PathSet, geometry: ArrayGeometry) -> ChannelMatrix:
    """Exact spherical-wave channel with per-antenna-pair distances."""
    scat, has_scat, refl = _path_arrays(paths)
    tx_pos = np.ascontiguousarray(geometry.element_positions_tx)
    rx_pos = np.ascontiguousarray(geometry.element_positions_rx)
    _check_segments(tx_pos, rx_pos, scat, has_scat)
    h = swm_accumulate(tx_pos, rx_pos, scat, has_scat, refl, geometry.wavelength)
    return ChannelMatrix(entries=h, domain_tag=SPATIAL, geometry=geometry)


def _check_segments(tx_pos, rx_pos, scat, has_scat):
    for i in range(scat.shape[0]):
        if has_scat[i]:
            d_tx = np.linalg.norm(tx_pos - scat[i], axis=1).min()
            d_rx = np.linalg.norm(rx_pos - scat[i], axis=1).min()
            if min(d_tx, d_rx) < _MIN_SEGMENT:
                raise DegenerateGeometryError(
                    f"scatterer {i} coincides with an antenna element"
                )
        else:
            d = np.linalg.norm(
                rx_pos[:, None, :] - tx_pos[None, :, :], axis=2
            ).min()
            if d < _MIN_SEGMENT:
                raise DegenerateGeometryError("tx and rx elements coincide")


def hpsm_channel(paths: PathSet, geometry: ArrayGeometry) -> ChannelMatrix:
    """Hybrid model: planar wavefronts per subarray, spherical across subarrays.

    Per-subarray-pair gains, phases, and angles are re-derived from
    subarray-center geometry for paths that carry a scatterer position (or
    are line-of-sight); synthetic planar paths fall back to their stored
    full-array parameters with a center-offset phase correction.
    """
    if len(paths) == 0:
        raise ValueError("PathSet is empty")
    lam = geometry.wavelength
    k_wave = 2.0 * np.pi / lam
    n_sub_r, n_sub_t = geometry.n_rx_sub, geometry.n_tx_sub
    sub_scale = np.sqrt(n_sub_r * n_sub_t)
    full_scale = np.sqrt(geometry.n_rx * geometry.n_tx)
    coef = lam / (4.0 * np.pi)

    h = np.zeros((geometry.n_rx, geometry.n_tx), dtype=np.complex128)
    for kr in range(geometry.k_rx):
        c_kr = geometry.subarray_centers_rx[kr]
        for kt in range(geometry.k_tx):
            c_kt = geometry.subarray_centers_tx[kt]
            block = np.zeros((n_sub_r, n_sub_t), dtype=np.complex128)
            for path in paths:
                refl = 1.0 if path.reflection_gain is None else path.reflection_gain
                if path.scatterer_position is not None:
                    s = path.scatterer_position
                    d1 = float(np.linalg.norm(s - c_kt))
                    d2 = float(np.linalg.norm(c_kr - s))
                    if min(d1, d2) < _MIN_SEGMENT:
                        raise DegenerateGeometryError(
                            "scatterer coincides with a subarray center"
                        )
                    gain = sub_scale * refl * (coef / d1) * (coef / d2)
                    phase = k_wave * (d1 + d2)
                    aod = direction_angles(c_kt, s)
                    aoa = direction_angles(c_kr, s)
                elif path.is_los:
                    d = float(np.linalg.norm(c_kr - c_kt))
                    if d < _MIN_SEGMENT:
                        raise DegenerateGeometryError("subarray centers coincide")
                    gain = sub_scale * refl * coef / d
                    phase = k_wave * d
                    aod = direction_angles(c_kt, c_kr)
                    aoa = direction_angles(c_kr, c_kt)
                else:
                    # Planar path: stored angles everywhere, phase advanced to
                    # the subarray centers.
                    u_t = unit_direction(*path.aod)
                    u_r = unit_direction(*path.aoa)
                    gain = path.gain_magnitude * sub_scale / full_scale
                    phase = (
                        path.global_phase
                        - k_wave * float((c_kr - geometry.rx_origin) @ u_r)
                        - k_wave * float((c_kt - geometry.tx_origin) @ u_t)
                    )
                    aod = path.aod
                    aoa = path.aoa
                a_r = steering_vector(geometry, "rx", kr, *aoa)
                a_t = steering_vector(geometry, "tx", kt, *aod)
                block += gain * np.exp(-1j * phase) * np.outer(a_r.conj(), a_t.conj())
            h[
                kr * n_sub_r : (kr + 1) * n_sub_r,
                kt * n_sub_t : (kt + 1) * n_sub_t,
            ] = block
    return ChannelMatrix(entries=h, domain_tag=SPATIAL, geometry=geometry)
