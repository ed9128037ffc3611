"""Hot numerical kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time: set WSPECTRA_BACKEND=numpy to force
the fallback (useful on machines where numba is broken or for benchmarking),
anything else selects numba when it imports cleanly.  Both paths produce
bit-identical results for the operations used in tests; the benchmark under
bench/ compares their speed.
"""

import os

import numpy as np

BACKEND = "numpy"

_want_numba = os.environ.get("WSPECTRA_BACKEND", "numba").lower() != "numpy"

if _want_numba:
    try:
        import numba

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - exercised only on broken installs
        _want_numba = False


def _banded_sym_matvec_py(diags, x, out):
    # diags[j, i] = A[i + j, i]; lower storage, bandwidth = diags.shape[0] - 1
    nb_, n = diags.shape
    for i in range(n):
        acc = diags[0, i] * x[i]
        for j in range(1, nb_):
            if i + j < n:
                acc += diags[j, i] * x[i + j]
            if i - j >= 0:
                acc += diags[j, i - j] * x[i - j]
        out[i] = acc
    return out


def _laurent_gradient_py(d, ks, coeffs, z, out):
    # |grad u| at sample points for u = d log|z| + Re(sum a_k z^k),
    # read from 2 dz u = d/z + sum k a_k z^{k-1}
    m = ks.shape[0]
    for i in range(z.shape[0]):
        zi = z[i]
        g = d / zi if d != 0.0 else 0.0 + 0.0j
        for j in range(m):
            k = ks[j]
            g += k * coeffs[j] * zi ** (k - 1)
        out[i] = abs(g)
    return out


def _weighted_form_py(w, u, v):
    acc = 0.0
    for i in range(w.shape[0]):
        acc += w[i] * u[i] * v[i]
    return acc


if BACKEND == "numba":
    _banded_sym_matvec = numba.njit(cache=True)(_banded_sym_matvec_py)
    _laurent_gradient = numba.njit(cache=True)(_laurent_gradient_py)
    _weighted_form = numba.njit(cache=True)(_weighted_form_py)
else:
    _banded_sym_matvec = _banded_sym_matvec_py
    _laurent_gradient = _laurent_gradient_py
    _weighted_form = _weighted_form_py


def banded_sym_matvec(diags, x):
    """y = A x for a symmetric banded A given in lower-diagonal storage."""
    diags = np.ascontiguousarray(diags, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    _banded_sym_matvec(diags, x, out)
    return out


def laurent_gradient_samples(d, ks, coeffs, z):
    """|grad u|(z_i) for a log-plus-Laurent harmonic, vectorized over samples.

    d is the log coefficient, ks the integer mode list, coeffs the matching
    complex coefficients.  The k = 0 constant never contributes.
    """
    ks = np.ascontiguousarray(ks, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    z = np.ascontiguousarray(z, dtype=np.complex128)
    out = np.empty(z.shape[0], dtype=np.float64)
    _laurent_gradient(float(d), ks, coeffs, z, out)
    return out


def weighted_form(w, u, v):
    """sum_i w_i u_i v_i (weighted inner product used in quadratures)."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    if not (w.shape == u.shape == v.shape):
        raise ValueError("weighted_form: shape mismatch")
    return _weighted_form(w, u, v)
