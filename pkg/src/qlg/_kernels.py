"""Compiled stencil kernels for the collide/stream sweep and phase rotation.

Each kernel reads one buffer and writes a distinct one; every output site is
computed independently, so results do not depend on the thread count.

The square-root-of-swap acts as

    C (a, b) = ((s - i d) / 2, (s + i d) / 2),   s = a + b,  d = a - b

which is what the real arithmetic below spells out.
"""

import os

import numba
import numpy as np

# the bundled TBB is too old for numba; pick OpenMP unless the user chose a layer
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"


@numba.njit(inline="always")
def _mix(a, b):
    # returns (C00 a + C01 b) as a complex number
    sr = a.real + b.real
    si = a.imag + b.imag
    dr = a.real - b.real
    di = a.imag - b.imag
    return complex(0.5 * (sr + di), 0.5 * (si - dr))


@numba.njit(parallel=True, cache=True)
def sweep(src, dst, ax, comp):
    """One J = S(-e) C S(+e) C pass on component ``comp`` along axis ``ax``."""
    nx, ny, nz = src.shape[1], src.shape[2], src.shape[3]
    ex = 1 if ax == 0 else 0
    ey = 1 if ax == 1 else 0
    ez = 1 if ax == 2 else 0
    # streamed component: alpha takes b1 from x-e and beta takes a1 from x+e
    # when comp == 0; mirrored when comp == 1
    s = 1 if comp == 0 else -1
    for i in numba.prange(nx):
        ib = (i - s * ex) % nx
        ia = (i + s * ex) % nx
        for j in range(ny):
            jb = (j - s * ey) % ny
            ja = (j + s * ey) % ny
            for k in range(nz):
                kb = (k - s * ez) % nz
                ka = (k + s * ez) % nz
                a = src[0, i, j, k]
                b = src[1, i, j, k]
                a1 = _mix(a, b)
                b1 = _mix(b, a)
                b_nb = _mix(src[1, ib, jb, kb], src[0, ib, jb, kb])
                a_nb = _mix(src[0, ia, ja, ka], src[1, ia, ja, ka])
                dst[0, i, j, k] = _mix(a1, b_nb)
                dst[1, i, j, k] = _mix(b1, a_nb)


@numba.njit(parallel=True, cache=True)
def phase(src, dst, scale, g):
    """dst = src * exp(-i scale (g|phi|^2 - 1)); returns the max |angle|.

    Safe in place (``dst is src``).
    """
    nx, ny, nz = src.shape[1], src.shape[2], src.shape[3]
    peaks = np.zeros(nx)
    for i in numba.prange(nx):
        peak = 0.0
        for j in range(ny):
            for k in range(nz):
                a = src[0, i, j, k]
                b = src[1, i, j, k]
                pr = a.real + b.real
                pi = a.imag + b.imag
                theta = scale * (g * (pr * pr + pi * pi) - 1.0)
                c = np.cos(theta)
                sn = np.sin(theta)
                dst[0, i, j, k] = complex(a.real * c + a.imag * sn, a.imag * c - a.real * sn)
                dst[1, i, j, k] = complex(b.real * c + b.imag * sn, b.imag * c - b.real * sn)
                if abs(theta) > peak:
                    peak = abs(theta)
        peaks[i] = peak
    return peaks.max()
