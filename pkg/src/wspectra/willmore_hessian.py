"""Second-variation quadratic form of the bending energy for scalar normal
perturbations u of a conformal immersion, with Morse index and nullity
counted against uniform and radially weighted mass matrices.

In the chart (area element e^{2 lambda} dx, all fields per node) the form is

  Q(u) = 1/2 int e^{-2l} (Lap u + e^{2l} |A|^2 u)^2
       + int [ |grad u|^2 + (2 e^{-2l}|h0|^2 - 2 e^{2l} H^2) u^2 ] H^2
       - 2 int e^{-2l} H [ p (u_x^2 - u_y^2) - 2 q u_x u_y ]
       - 4 int e^{-2l} u [ p (u_x H_x - u_y H_y) - q (u_x H_y + u_y H_x) ]

with h0 = p + i q.  Every group is a Galerkin composition of difference
stencils with trapezoid quadrature; the last group is assembled one-sided
and then symmetrized through its bilinear polarization.  Constant u is null
on the round sphere (scale invariance), which fixes the zeroth-order
coefficient above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BadParam,
    NoConvergence,
    OpenSurfaceWithoutClamp,
    ShapeMismatch,
)
from .immersion_geometry import (
    cell_weights,
    chart_radius,
    derive_geometry,
    _diff_field,
)
from .numlin import difference_matrix
from .singular_spectra import WeightSpec, clamp_matrix

MAX_EIGS = 200


# ------------------------------------------------------------- stencils

def _d1(n, h, periodic):
    if periodic:
        D = np.zeros((n, n))
        for i in range(n):
            D[i, (i + 1) % n] = 0.5 / h
            D[i, (i - 1) % n] = -0.5 / h
        return D
    return difference_matrix(n, h, "first_derivative")


def _d2(n, h, periodic, mirror_ends=False):
    if periodic:
        D = np.zeros((n, n))
        for i in range(n):
            D[i, i] = -2.0 / h**2
            D[i, (i + 1) % n] = 1.0 / h**2
            D[i, (i - 1) % n] = 1.0 / h**2
        return D
    D = difference_matrix(n, h, "second_derivative").copy()
    if mirror_ends:
        # clamped ends: reflected stencil, consistent with the 1-D radial
        # assembly so the flat-annulus factorization is exact
        D[0, :] = 0.0
        D[0, 0], D[0, 1] = -2.0 / h**2, 2.0 / h**2
        D[-1, :] = 0.0
        D[-1, -1], D[-1, -2] = -2.0 / h**2, 2.0 / h**2
    return D


# ------------------------------------------------------------- assembly

@dataclass
class HessianAssembly:
    Q: sp.csr_matrix            # reduced unknowns (= full grid when closed)
    M: sp.dia_matrix
    boundary: str               # closed | clamped_annulus
    shape: tuple
    Q_full: sp.csr_matrix
    clamp: np.ndarray | None    # full <- reduced constraint matrix, or None
    cell: np.ndarray = field(repr=False)
    e2l: np.ndarray = field(repr=False)
    radius: np.ndarray = field(repr=False)
    groups: tuple = field(repr=False, default=())

    @property
    def n_reduced(self):
        return self.Q.shape[0]

    def weighted_mass(self, weight):
        """Mass diag(omega(r) e^{2 lambda} cell), reduced like Q."""
        w = np.asarray(weight(self.radius), dtype=np.float64)
        if not np.all(w > 0):
            raise BadParam("weight must be positive on the chart")
        Mw = sp.diags(self.cell * self.e2l * w)
        if self.clamp is not None:
            C = self._clamp2d()
            Mw = sp.csr_matrix(C.T @ Mw @ C)
        return Mw

    def _clamp2d(self):
        n1, n2 = self.shape
        return sp.csr_matrix(sp.kron(sp.csr_matrix(self.clamp), sp.eye(n2)))


def assemble_Q(patch, fields=None, boundary=None):
    """Assemble the quadratic form and the mass matrix over the chart.

    boundary defaults to "closed" for doubly periodic charts and to
    "clamped_annulus" for every open one.  The sphere chart is open (it
    misses two polar caps), and natural end conditions genuinely change
    its low spectrum, so it is clamped like any other annulus; its
    Moebius null directions are checked through q_value on the raw form.
    """
    f = fields if fields is not None else derive_geometry(patch)
    if boundary is None:
        boundary = (
            "closed" if patch.periodic1 and patch.periodic2
            else "clamped_annulus"
        )
    if boundary not in ("closed", "clamped_annulus"):
        raise BadParam(f"unknown boundary {boundary!r}")
    if not patch.periodic2:
        raise OpenSurfaceWithoutClamp("chart must be periodic in x2")
    if boundary == "closed" and not patch.periodic1:
        raise OpenSurfaceWithoutClamp(
            "open chart needs boundary='clamped_annulus'"
        )
    if boundary == "clamped_annulus" and patch.periodic1:
        raise BadParam("clamped boundary needs an open first direction")

    n1, n2 = patch.shape
    clamped = boundary == "clamped_annulus"
    D1x = sp.csr_matrix(_d1(n1, patch.h1, patch.periodic1))
    D2x = sp.csr_matrix(_d2(n1, patch.h1, patch.periodic1))
    D1y = sp.csr_matrix(_d1(n2, patch.h2, True))
    D2y = sp.csr_matrix(_d2(n2, patch.h2, True))
    I1, I2 = sp.eye(n1), sp.eye(n2)
    Dx = sp.csr_matrix(sp.kron(D1x, I2))
    Dy = sp.csr_matrix(sp.kron(I1, D1y))
    Lap = sp.csr_matrix(sp.kron(D2x, I2) + sp.kron(I1, D2y))

    cell = cell_weights(patch).ravel()
    e2l = f.e2l.ravel()
    H = f.H.ravel()
    p = np.real(f.h0).ravel()
    q = np.imag(f.h0).ravel()
    A2 = f.A2.ravel()
    Hx = _diff_field(f.H, patch.h1, axis=0, periodic=patch.periodic1).ravel()
    Hy = _diff_field(f.H, patch.h2, axis=1, periodic=patch.periodic2).ravel()

    def dg(v):
        return sp.diags(v)

    P = Lap + dg(e2l * A2)
    G1 = 0.5 * (P.T @ dg(cell / e2l) @ P)

    w2 = cell * H**2
    G2 = (
        Dx.T @ dg(w2) @ Dx
        + Dy.T @ dg(w2) @ Dy
        + dg(w2 * (2 * (p**2 + q**2) / e2l - 2 * e2l * H**2))
    )

    c3 = cell * H / e2l
    G3 = -2.0 * (
        Dx.T @ dg(c3 * p) @ Dx
        - Dy.T @ dg(c3 * p) @ Dy
        - Dx.T @ dg(c3 * q) @ Dy
        - Dy.T @ dg(c3 * q) @ Dx
    )

    c4 = cell / e2l
    T4 = -4.0 * (
        Dx.T @ dg(c4 * p * Hx)
        - Dy.T @ dg(c4 * p * Hy)
        - Dx.T @ dg(c4 * q * Hy)
        - Dy.T @ dg(c4 * q * Hx)
    )
    G4 = 0.5 * (T4 + T4.T)

    Qf = sp.csr_matrix(G1 + G2 + G3 + G4)
    Qf = sp.csr_matrix(0.5 * (Qf + Qf.T))
    Mf = sp.diags(cell * e2l)

    if clamped:
        # The reduced operator swaps in mirror-ghost second-derivative end
        # rows, consistent with u' = 0 there; the raw Q_full above keeps the
        # one-sided rows so it stays valid on arbitrary (unclamped) fields.
        D2m = sp.csr_matrix(_d2(n1, patch.h1, False, mirror_ends=True))
        Lap_m = sp.csr_matrix(sp.kron(D2m, I2) + sp.kron(I1, D2y))
        Pm = Lap_m + dg(e2l * A2)
        G1m = 0.5 * (Pm.T @ dg(cell / e2l) @ Pm)
        Qm = sp.csr_matrix(G1m + G2 + G3 + G4)
        C1 = clamp_matrix(n1)
        C = sp.csr_matrix(sp.kron(sp.csr_matrix(C1), I2))
        Q = sp.csr_matrix(C.T @ Qm @ C)
        Q = sp.csr_matrix(0.5 * (Q + Q.T))
        M = sp.csr_matrix(C.T @ Mf @ C)
        clamp = C1
    else:
        Q, M, clamp = Qf, Mf, None

    return HessianAssembly(
        Q=Q,
        M=M,
        boundary=boundary,
        shape=(n1, n2),
        Q_full=Qf,
        clamp=clamp,
        cell=cell,
        e2l=e2l,
        radius=chart_radius(patch).ravel(),
        groups=(sp.csr_matrix(G1), sp.csr_matrix(G2),
                sp.csr_matrix(G3), sp.csr_matrix(G4)),
    )


def _as_vector(assembly, u, matrix):
    u = np.asarray(u, dtype=np.float64)
    n_full = assembly.shape[0] * assembly.shape[1]
    if u.shape == assembly.shape or u.size == n_full and u.ndim == 1:
        if matrix.shape[0] != n_full:
            raise ShapeMismatch("full-grid field against reduced matrix")
        return u.ravel()
    if u.ndim == 1 and u.size == matrix.shape[0]:
        return u
    raise ShapeMismatch(
        f"field of size {u.size} fits neither grid {assembly.shape} "
        f"nor reduced order {assembly.Q.shape[0]}"
    )


def q_value(assembly, u):
    """Q(u).  Full-grid fields are paired with the unreduced form, reduced
    vectors with the clamped one."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == assembly.shape[0] * assembly.shape[1]:
        v = _as_vector(assembly, u, assembly.Q_full)
        return float(v @ (assembly.Q_full @ v))
    v = _as_vector(assembly, u, assembly.Q)
    return float(v @ (assembly.Q @ v))


def mass_value(assembly, u):
    """||u||^2 against the uniform mass."""
    u = np.asarray(u, dtype=np.float64)
    if u.size == assembly.shape[0] * assembly.shape[1]:
        v = u.ravel()
        return float(v @ (assembly.cell * assembly.e2l * v))
    v = _as_vector(assembly, u, assembly.M)
    return float(v @ (assembly.M @ v))


# ------------------------------------------------------------- null fields

def mobius_null_fields(patch, fields=None):
    """The ten scalar fields <w, n> for w ranging over the conformal
    generators: translations e_i, rotations e_i x phi, dilation phi, and
    the special conformal fields |phi|^2 e_i - 2 <phi, e_i> phi."""
    f = fields if fields is not None else derive_geometry(patch)
    n = f.normal
    phi = patch.phi
    out = []
    for i in range(3):
        out.append(n[..., i].copy())
    for i in range(3):
        e = np.zeros(3)
        e[i] = 1.0
        w = np.cross(np.broadcast_to(e, phi.shape), phi)
        out.append(np.sum(w * n, axis=-1))
    out.append(np.sum(phi * n, axis=-1))
    phi2 = np.sum(phi * phi, axis=-1)
    for i in range(3):
        w = phi2[..., None] * np.eye(3)[i] - 2 * phi[..., i, None] * phi
        out.append(np.sum(w * n, axis=-1))
    return out


# ------------------------------------------------------------- spectrum

@dataclass(frozen=True)
class SpectralCounts:
    eigenvalues: np.ndarray
    index: int
    nullity: int
    tol_null: float

    @property
    def index0(self):
        """Extended index: strict negatives plus the null cluster."""
        return self.index + self.nullity


def index_nullity(counts):
    return counts.index, counts.nullity


def classify_eigenvalues(vals, tol_null):
    """(index, nullity): strict negatives below -tol_null, null band within
    +-tol_null."""
    vals = np.asarray(vals, dtype=np.float64)
    if tol_null < 0:
        raise BadParam("tol_null must be nonnegative")
    index = int(np.sum(vals < -tol_null))
    nullity = int(np.sum(np.abs(vals) <= tol_null))
    return index, nullity


def _reference_scale(assembly, B):
    """Rayleigh quotient of a few smooth low-frequency probes; sets the
    shift for the eigensolver.  Matrix norms are useless here because the
    conformal factor can degenerate by many orders across the chart."""
    n = assembly.Q.shape[0]
    n1, n2 = assembly.shape
    probes = [np.ones(n)]
    if assembly.clamp is None:
        i = np.repeat(np.arange(n1), n2)
        j = np.tile(np.arange(n2), n1)
        probes.append(np.sin(2 * np.pi * i / n1) * np.cos(2 * np.pi * j / n2))
        probes.append(np.cos(2 * np.pi * i / n1))
    else:
        k = np.arange(n)
        probes.append(np.sin(np.pi * (k + 1) / (n + 1)))
    best = 0.0
    for v in probes:
        m = float(v @ (B @ v))
        if m > 0:
            best = max(best, abs(float(v @ (assembly.Q @ v))) / m)
    return best if best > 0 else 1.0


def _solve_pencil(assembly, B, k):
    Qc = sp.csc_matrix(assembly.Q)
    Bc = sp.csc_matrix(B)
    sigma = -0.05 * _reference_scale(assembly, B)
    last = None
    for attempt in range(3):
        try:
            vals = spla.eigsh(
                Qc, k=k, M=Bc, sigma=sigma, which="LM",
                return_eigenvectors=False,
            )
            return np.sort(vals)
        except (RuntimeError, spla.ArpackNoConvergence) as exc:
            last = exc
            sigma *= 4.0
    raise NoConvergence(f"eigensolver failed at k={k}: {last}")


def spectrum(assembly, weight="uniform", k=24, tol_null=None):
    """Smallest k eigenvalues of Q v = lambda M_w v with inertia counts.

    weight is "uniform" or any positive callable of the chart radius (a
    WeightSpec).  tol_null should come from a refinement calibration
    (calibrate_tol_null); the fallback 1e-6 of the spectral window is only
    a smoke default.  k is doubled automatically until the returned window
    clears the null band, so the counts are complete.
    """
    if not 1 <= k <= MAX_EIGS:
        raise BadParam(f"need 1 <= k <= {MAX_EIGS}")
    B = assembly.M if weight == "uniform" else assembly.weighted_mass(weight)
    kmax = min(MAX_EIGS, assembly.Q.shape[0] - 2)
    k = min(k, kmax)
    while True:
        vals = _solve_pencil(assembly, B, k)
        tol = tol_null
        if tol is None:
            tol = 1e-6 * float(np.max(np.abs(vals)))
        if vals[-1] > tol or k >= kmax:
            break
        k = min(2 * k, kmax)
    if vals[-1] <= tol:
        raise NoConvergence(
            f"window [..., {vals[-1]:.3e}] never cleared the null band "
            f"{tol:.3e} at k={k}"
        )
    index, nullity = classify_eigenvalues(vals, tol)
    return SpectralCounts(
        eigenvalues=vals, index=index, nullity=nullity, tol_null=float(tol)
    )


def calibrate_tol_null(builder, resolution, k=12, weight="uniform",
                       boundary=None):
    """Two-resolution null-band calibration; builder maps resolution to
    patch.

    Solves the pencil at the working resolution and at half resolution
    and tracks the eigenvalues that fail to separate from their own
    drift, |lambda_i| <= 2 |lambda_i(h) - lambda_i(h/2)|: a genuine zero
    converges to 0 so its drift is of the size of the value itself,
    while a resolved nonzero mode drifts by a small fraction of its
    value.  tol_null = 10x the worst smeared drift covers the whole
    smeared band.  When every eigenvalue separates the null band is
    empty and the tolerance falls back to half the smallest magnitude,
    strictly inside the first spectral gap.  Tracking the whole window
    instead would let the top eigenvalues, whose absolute drift grows
    with their size, inflate the band past genuine nonzero modes."""
    n1, n2 = resolution
    coarse = (max(n1 // 2, 32), max(n2 // 2, 32))
    windows = []
    for res in (coarse, (n1, n2)):
        patch = builder(res)
        asm = assemble_Q(patch, boundary=boundary)
        B = asm.M if weight == "uniform" else asm.weighted_mass(weight)
        windows.append(_solve_pencil(asm, B, k))
    drift = np.abs(windows[0] - windows[1])
    fine = windows[1]
    smeared = np.abs(fine) <= 2.0 * drift
    if np.any(smeared):
        tol = 10.0 * float(np.max(drift[smeared]))
    else:
        tol = 0.5 * float(np.min(np.abs(fine)))
    return tol, fine


def index_weight_spec(radius=0.5, beta=0.75):
    """Three-piece annulus weight pinned to the window (r e^-4, r).

    This is the nonuniform mass used in the index-invariance comparisons;
    outside the window it continues by its constant boundary values, so it
    stays positive on any chart.
    """
    return WeightSpec("three_piece", radius * np.exp(-4.0), radius,
                      beta=beta, m=1)


def spectral_report(counts, surface, weight_name, resolution):
    """JSON-ready spectral record."""
    return {
        "surface": surface,
        "weight": weight_name,
        "k": int(counts.eigenvalues.size),
        "eigenvalues": [float(v) for v in counts.eigenvalues],
        "index": counts.index,
        "nullity": counts.nullity,
        "tol_null": counts.tol_null,
        "resolution": list(resolution),
    }
