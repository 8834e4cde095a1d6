"""Pure-numpy implementations of the hot channel-synthesis kernels.

Used when the compiled extension is unavailable or explicitly disabled via
THZGEN_PURE_PYTHON=1.  Semantically identical to the Cython kernels.
"""
import numpy as np


def swm_accumulate(tx_pos, rx_pos, scat_pos, has_scat, refl_gain, wavelength):
    """Spherical-wave channel: exact per-antenna-pair distances and phases.

    Returns a complex (n_rx, n_tx) matrix summed over paths.  Scattered
    paths use the two-segment free-space amplitude product, line-of-sight
    paths a single segment; ``refl_gain`` multiplies each path.
    """
    k = 2.0 * np.pi / wavelength
    coef = wavelength / (4.0 * np.pi)
    h = np.zeros((rx_pos.shape[0], tx_pos.shape[0]), dtype=np.complex128)
    for l in range(scat_pos.shape[0]):
        if has_scat[l]:
            s = scat_pos[l]
            d1 = np.linalg.norm(tx_pos - s, axis=1)  # (n_tx,)
            d2 = np.linalg.norm(rx_pos - s, axis=1)  # (n_rx,)
            amp = refl_gain[l] * (coef / d1)[None, :] * (coef / d2)[:, None]
            dist = d1[None, :] + d2[:, None]
        else:
            diff = rx_pos[:, None, :] - tx_pos[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
            amp = refl_gain[l] * coef / dist
        h += amp * np.exp(-1j * k * dist)
    return h
