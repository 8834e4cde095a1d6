# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled spherical-wave channel kernel.

Mirrors thzgen._core.fallback exactly; avoids the (L, n_rx, n_tx)
temporaries the vectorized numpy version allocates.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, M_PI

cnp.import_array()


def swm_accumulate(
    cnp.ndarray[cnp.float64_t, ndim=2] tx_pos,
    cnp.ndarray[cnp.float64_t, ndim=2] rx_pos,
    cnp.ndarray[cnp.float64_t, ndim=2] scat_pos,
    cnp.ndarray[cnp.uint8_t, ndim=1] has_scat,
    cnp.ndarray[cnp.float64_t, ndim=1] refl_gain,
    double wavelength,
):
    cdef Py_ssize_t n_tx = tx_pos.shape[0]
    cdef Py_ssize_t n_rx = rx_pos.shape[0]
    cdef Py_ssize_t n_paths = scat_pos.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] h = np.zeros(
        (n_rx, n_tx), dtype=np.complex128
    )
    cdef double k = 2.0 * M_PI / wavelength
    cdef double coef = wavelength / (4.0 * M_PI)
    cdef Py_ssize_t l, i, n
    cdef double sx, sy, sz, dx, dy, dz, d1, d2, dist, amp, phase, g
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d_tx = np.empty(n_tx)

    for l in range(n_paths):
        g = refl_gain[l]
        if has_scat[l]:
            sx = scat_pos[l, 0]
            sy = scat_pos[l, 1]
            sz = scat_pos[l, 2]
            for i in range(n_tx):
                dx = tx_pos[i, 0] - sx
                dy = tx_pos[i, 1] - sy
                dz = tx_pos[i, 2] - sz
                d_tx[i] = sqrt(dx * dx + dy * dy + dz * dz)
            for n in range(n_rx):
                dx = rx_pos[n, 0] - sx
                dy = rx_pos[n, 1] - sy
                dz = rx_pos[n, 2] - sz
                d2 = sqrt(dx * dx + dy * dy + dz * dz)
                for i in range(n_tx):
                    d1 = d_tx[i]
                    dist = d1 + d2
                    amp = g * (coef / d1) * (coef / d2)
                    phase = -k * dist
                    h[n, i] = h[n, i] + amp * (cos(phase) + 1j * sin(phase))
        else:
            for n in range(n_rx):
                for i in range(n_tx):
                    dx = rx_pos[n, 0] - tx_pos[i, 0]
                    dy = rx_pos[n, 1] - tx_pos[i, 1]
                    dz = rx_pos[n, 2] - tx_pos[i, 2]
                    dist = sqrt(dx * dx + dy * dy + dz * dz)
                    amp = g * coef / dist
                    phase = -k * dist
                    h[n, i] = h[n, i] + amp * (cos(phase) + 1j * sin(phase))
    return h
