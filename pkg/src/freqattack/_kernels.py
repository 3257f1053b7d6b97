"""Hot inner-loop kernels for the wavelet filter bank.

Two interchangeable backends implement the same row-batched analysis /
synthesis steps:

* a numba ``@njit`` backend (default when numba imports cleanly), and
* a pure-numpy fallback.

Selection happens once at import time via the ``FREQATTACK_NUMBA`` env var:
``"1"`` forces numba (ImportError if unavailable), ``"0"`` forces numpy,
anything else (or unset) means "numba if available".  Both raw
implementations stay importable for the benchmark in ``benchmarks/``.

All kernels assume periodic (circular) boundary extension and an even
signal length; callers validate.
"""

import os

import numpy as np

_FLAG = os.environ.get("FREQATTACK_NUMBA", "auto").strip().lower()


def _wpd_step_rows_numpy(x, low, high):
    # x: (rows, n) -> (approx (rows, n/2), detail (rows, n/2))
    rows, n = x.shape
    half = n // 2
    approx = np.zeros((rows, half), dtype=np.float64)
    detail = np.zeros((rows, half), dtype=np.float64)
    base = np.arange(0, n, 2)
    for l in range(low.shape[0]):
        col = x[:, (base + l) % n]
        approx += low[l] * col
        detail += high[l] * col
    return approx, detail


def _iwpd_step_rows_numpy(approx, detail, low, high):
    # adjoint of the analysis step; exact inverse for orthonormal filters
    rows, half = approx.shape
    n = 2 * half
    out = np.zeros((rows, n), dtype=np.float64)
    base = np.arange(0, n, 2)
    for l in range(low.shape[0]):
        # for fixed l the scatter targets (2k+l) % n are all distinct
        out[:, (base + l) % n] += low[l] * approx + high[l] * detail
    return out


_HAVE_NUMBA = False
_wpd_step_rows_numba = None
_iwpd_step_rows_numba = None

if _FLAG != "0":
    try:
        from numba import njit

        @njit(cache=True)
        def _wpd_step_rows_numba(x, low, high):  # noqa: F811
            rows, n = x.shape
            half = n // 2
            taps = low.shape[0]
            approx = np.empty((rows, half), dtype=np.float64)
            detail = np.empty((rows, half), dtype=np.float64)
            for r in range(rows):
                for k in range(half):
                    sa = 0.0
                    sd = 0.0
                    for l in range(taps):
                        v = x[r, (2 * k + l) % n]
                        sa += low[l] * v
                        sd += high[l] * v
                    approx[r, k] = sa
                    detail[r, k] = sd
            return approx, detail

        @njit(cache=True)
        def _iwpd_step_rows_numba(approx, detail, low, high):  # noqa: F811
            rows, half = approx.shape
            n = 2 * half
            taps = low.shape[0]
            out = np.zeros((rows, n), dtype=np.float64)
            for r in range(rows):
                for k in range(half):
                    a = approx[r, k]
                    d = detail[r, k]
                    for l in range(taps):
                        out[r, (2 * k + l) % n] += low[l] * a + high[l] * d
            return out

        _HAVE_NUMBA = True
    except ImportError:
        if _FLAG == "1":
            raise


if _HAVE_NUMBA:
    BACKEND = "numba"
    wpd_step_rows = _wpd_step_rows_numba
    iwpd_step_rows = _iwpd_step_rows_numba
else:
    BACKEND = "numpy"
    wpd_step_rows = _wpd_step_rows_numpy
    iwpd_step_rows = _iwpd_step_rows_numpy


def backend_name():
    """Name of the active kernel backend ("numba" or "numpy")."""
    return BACKEND
