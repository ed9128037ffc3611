"""Shared numerical backend: quadrature weights, difference stencils, and
symmetric generalized eigenvalue solves.

All assembled operators downstream are Galerkin compositions G^T W G of
stencil matrices with quadrature diagonals, so exact symmetry is structural
and never restored after the fact.  The eigen solver runs dense LAPACK up to
DENSE_CUTOFF unknowns and ARPACK shift-invert beyond.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BadGrid, NoConvergence, NotPositiveDefinite
from .kernels import banded_sym_matvec

DENSE_CUTOFF = 5000
SYMMETRY_RTOL = 1e-12
DEFAULT_EIG_TOL = 1e-9


@dataclass
class BandedSym:
    """Symmetric banded matrix in lower-diagonal storage.

    diags[j, i] = A[i + j, i] for 0 <= j <= bandwidth; entries beyond the
    matrix edge are zero-padded.
    """

    order: int
    bandwidth: int
    diags: np.ndarray

    def __post_init__(self):
        self.diags = np.asarray(self.diags, dtype=np.float64)
        if self.diags.shape != (self.bandwidth + 1, self.order):
            raise ValueError("diags must have shape (bandwidth+1, order)")
        if not (0 <= self.bandwidth <= self.order - 1):
            raise ValueError("need 0 <= bandwidth <= order-1")

    @classmethod
    def from_dense(cls, A, rtol=SYMMETRY_RTOL):
        A = np.asarray(A, dtype=np.float64)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("square matrix required")
        scale = np.abs(A).max() or 1.0
        if np.abs(A - A.T).max() > rtol * scale:
            raise ValueError("matrix is not symmetric within tolerance")
        A = 0.5 * (A + A.T)
        bw = 0
        for j in range(n - 1, 0, -1):
            if np.abs(np.diagonal(A, -j)).max() > 0.0:
                bw = j
                break
        diags = np.zeros((bw + 1, n))
        for j in range(bw + 1):
            diags[j, : n - j] = np.diagonal(A, -j)
        return cls(order=n, bandwidth=bw, diags=diags)

    def to_dense(self):
        A = np.zeros((self.order, self.order))
        for j in range(self.bandwidth + 1):
            d = self.diags[j, : self.order - j]
            A += np.diag(d, -j)
            if j:
                A += np.diag(d, j)
        return A

    def matvec(self, x):
        return banded_sym_matvec(self.diags, x)


@dataclass
class EigReport:
    eigenvalues: np.ndarray
    residual_norms: np.ndarray
    converged: np.ndarray
    tol: float = DEFAULT_EIG_TOL
    vectors: np.ndarray | None = field(default=None, repr=False)


def _as_operator(M):
    """Normalize input to (dense ndarray | csr_matrix, order)."""
    if isinstance(M, BandedSym):
        M = M.to_dense()
    if sp.issparse(M):
        M = M.tocsr()
        return M, M.shape[0]
    M = np.asarray(M, dtype=np.float64)
    return M, M.shape[0]


def _onenorm(M):
    if sp.issparse(M):
        return spla.norm(M, 1)
    return np.linalg.norm(M, 1)


def solve_geneig_sym(A, B, k, tol=DEFAULT_EIG_TOL, sigma=None, want_vectors=True):
    """Smallest k eigenvalues of A v = lambda B v, A symmetric, B SPD.

    Dense up to DENSE_CUTOFF unknowns, ARPACK shift-invert beyond.  Residual
    norms ||Av - lambda Bv|| / ||v|| are reported per pair; the convergence
    flag compares them against tol * (||A||_1 + |lambda| ||B||_1) so the
    report is invariant under simultaneous scaling of the pencil.
    """
    A, n = _as_operator(A)
    B, nb = _as_operator(B)
    if n != nb:
        raise ValueError("A and B orders differ")
    if not (1 <= k <= n):
        raise ValueError("need 1 <= k <= order")

    if n <= DENSE_CUTOFF:
        Ad = A.toarray() if sp.issparse(A) else A
        Bd = B.toarray() if sp.issparse(B) else B
        try:
            sla.cholesky(Bd, lower=True)
        except sla.LinAlgError as exc:
            raise NotPositiveDefinite(f"B factorization failed: {exc}") from exc
        vals, vecs = sla.eigh(Ad, Bd, subset_by_index=[0, k - 1], driver="gvx")
    else:
        As = sp.csc_matrix(A)
        Bs = sp.csc_matrix(B)
        dB = Bs.diagonal()
        if Bs.nnz == np.count_nonzero(dB) and np.all(dB > 0):
            pass  # diagonal SPD mass, nothing to factor
        else:
            try:
                spla.splu(Bs)
            except RuntimeError as exc:
                raise NotPositiveDefinite(f"B factorization failed: {exc}") from exc
        sig = 0.0 if sigma is None else float(sigma)
        try:
            vals, vecs = spla.eigsh(As, k=k, M=Bs, sigma=sig, which="LM")
        except RuntimeError:
            # singular A - sigma B, nudge the shift off the kernel
            sig -= 1e-8 * (_onenorm(As) / max(_onenorm(Bs), 1e-300))
            try:
                vals, vecs = spla.eigsh(As, k=k, M=Bs, sigma=sig, which="LM")
            except spla.ArpackNoConvergence as exc:
                raise NoConvergence(str(exc)) from exc
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(str(exc)) from exc
        order = np.argsort(vals)
        vals = vals[order]
        vecs = vecs[:, order]

    scaleA = _onenorm(A)
    scaleB = _onenorm(B)
    resid = np.empty(k)
    for i in range(k):
        v = vecs[:, i]
        r = A @ v - vals[i] * (B @ v)
        resid[i] = np.linalg.norm(r) / np.linalg.norm(v)
    conv = resid <= tol * (scaleA + np.abs(vals) * scaleB)
    if n > DENSE_CUTOFF and not conv.all():
        raise NoConvergence(
            f"residuals {resid.max():.3e} exceed tol on the iterative path"
        )
    return EigReport(
        eigenvalues=vals,
        residual_norms=resid,
        converged=conv,
        tol=tol,
        vectors=vecs if want_vectors else None,
    )


def _check_uniform(grid):
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 3:
        raise BadGrid("need a 1-D grid with at least 3 nodes")
    h = np.diff(grid)
    if h.min() <= 0 or np.abs(h - h[0]).max() > 1e-12 * max(abs(grid[-1] - grid[0]), 1.0):
        raise BadGrid("grid must be uniform and increasing")
    return grid, h[0]


def quadrature_weights(grid, rule="trapezoid"):
    """Quadrature weights on a uniform grid; trapezoid or simpson."""
    grid, h = _check_uniform(grid)
    n = grid.size
    if rule == "trapezoid":
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return w
    if rule == "simpson":
        if n % 2 == 0:
            raise BadGrid("simpson needs an odd node count")
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    raise BadGrid(f"unknown rule {rule!r}")


def difference_matrix(n, h, op_kind):
    """Dense n x n matrix of the second-order FD stencil for d/ds or d2/ds2.

    Interior rows are central; the first and last rows use one-sided
    second-order stencils so the matrix applies to full grid vectors.
    """
    if n < 5:
        raise BadGrid("need at least 5 nodes")
    D = np.zeros((n, n))
    if op_kind == "first_derivative":
        for i in range(1, n - 1):
            D[i, i - 1] = -0.5
            D[i, i + 1] = 0.5
        D[0, 0:3] = [-1.5, 2.0, -0.5]
        D[-1, -3:] = [0.5, -2.0, 1.5]
        return D / h
    if op_kind == "second_derivative":
        for i in range(1, n - 1):
            D[i, i - 1] = 1.0
            D[i, i] = -2.0
            D[i, i + 1] = 1.0
        D[0, 0:4] = [2.0, -5.0, 4.0, -1.0]
        D[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
        return D / h**2
    raise BadGrid(f"unknown op_kind {op_kind!r}")


def stencil_apply(op_kind, grid, values):
    """Apply the O(h^2) derivative stencil along a uniform grid."""
    grid, h = _check_uniform(grid)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != grid.size:
        raise BadGrid("values length must match grid")
    if grid.size < 5:
        raise BadGrid("need at least 5 nodes")
    return difference_matrix(grid.size, h, op_kind) @ values
