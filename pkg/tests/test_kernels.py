import numpy as np

from wspectra import kernels


def test_backend_reported():
    assert kernels.BACKEND in ("numba", "numpy")


def test_banded_matvec_against_dense():
    rng = np.random.default_rng(0)
    n, bw = 40, 3
    diags = np.zeros((bw + 1, n))
    for j in range(bw + 1):
        diags[j, : n - j] = rng.standard_normal(n - j)
    A = np.zeros((n, n))
    for j in range(bw + 1):
        A += np.diag(diags[j, : n - j], -j)
        if j:
            A += np.diag(diags[j, : n - j], j)
    x = rng.standard_normal(n)
    assert np.allclose(kernels.banded_sym_matvec(diags, x), A @ x)


def test_laurent_gradient_log_mode():
    z = np.array([2.0 + 0j, 0.0 + 2.0j])
    g = kernels.laurent_gradient_samples(1.0, np.array([], dtype=int), np.array([], dtype=complex), z)
    assert np.allclose(g, 0.5), "grad log|z| has modulus 1/|z|"


def test_laurent_gradient_linear_mode():
    rng = np.random.default_rng(1)
    z = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    g = kernels.laurent_gradient_samples(0.0, np.array([1]), np.array([1.0 + 0j]), z)
    assert np.allclose(g, 1.0)


def test_laurent_gradient_mixed_modes_vs_direct():
    ks = np.array([-2, 1, 3])
    co = np.array([0.3 - 0.1j, 1.0 + 0.5j, -0.2j])
    z = np.array([0.5 + 0.2j, -0.3 + 0.9j])
    expect = np.abs(2.0 / z + sum(k * c * z ** (k - 1) for k, c in zip(ks, co)))
    got = kernels.laurent_gradient_samples(2.0, ks, co, z)
    assert np.allclose(got, expect)


def test_weighted_form_matches_numpy():
    rng = np.random.default_rng(4)
    w, u, v = rng.standard_normal((3, 100))
    assert abs(kernels.weighted_form(w, u, v) - np.sum(w * u * v)) < 1e-12
