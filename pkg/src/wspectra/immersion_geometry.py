"""Discrete conformal immersions into R^3 on tensor-product parameter grids.

Each built-in surface carries closed-form first and second parameter
derivatives (the "analytic jet"), so curvature fields are exact up to the
few finite differences that are unavoidable (Liouville Gauss curvature and
the Willmore-equation residual).  Conventions, fixed once and tested:

  * the normal is unit(d1 x d2) in chart order, which makes the Mercator
    sphere chart carry the outward normal and H = -1;
  * z = x1 + i x2, so dz-contour integrals along an x1 = const loop are
    i * (integral in x2);
  * the Weingarten coefficient is h0 = 2 <d^2_z phi, n>, a complex scalar
    per node (codimension 1 throughout).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParam,
    CenterOnSurface,
    ContourOutOfChart,
    NotConformal,
)

ANALYTIC_CONFORMAL_TOL = 1e-6
SAMPLED_CONFORMAL_TOL = 1e-3


@dataclass
class SurfaceId:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ConformalPatch:
    kind: str
    params: dict
    x1: np.ndarray
    x2: np.ndarray
    periodic1: bool
    periodic2: bool
    phi: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    d11: np.ndarray | None = None
    d12: np.ndarray | None = None
    d22: np.ndarray | None = None

    @property
    def h1(self):
        return float(self.x1[1] - self.x1[0])

    @property
    def h2(self):
        return float(self.x2[1] - self.x2[0])

    @property
    def shape(self):
        return (self.x1.size, self.x2.size)

    @property
    def has_jet(self):
        return self.d1 is not None

    def conformality_residual(self):
        d1, d2 = self.jet1()
        e11 = np.sum(d1 * d1, axis=-1)
        e22 = np.sum(d2 * d2, axis=-1)
        e12 = np.sum(d1 * d2, axis=-1)
        return float(np.max(np.maximum(np.abs(e11 - e22), np.abs(e12)) / e11))

    def jet1(self):
        if self.has_jet:
            return self.d1, self.d2
        return (
            _diff_field(self.phi, self.h1, 0, self.periodic1, order=4),
            _diff_field(self.phi, self.h2, 1, self.periodic2, order=4),
        )

    def jet2(self):
        if self.has_jet:
            return self.d11, self.d12, self.d22
        d1, d2 = self.jet1()
        return (
            _diff_field(d1, self.h1, 0, self.periodic1, order=4),
            _diff_field(d1, self.h2, 1, self.periodic2, order=4),
            _diff_field(d2, self.h2, 1, self.periodic2, order=4),
        )


@dataclass
class GeometryFields:
    lambda_: np.ndarray
    H: np.ndarray
    h0: np.ndarray
    K: np.ndarray
    A2: np.ndarray
    normal: np.ndarray

    @property
    def e2l(self):
        return np.exp(2 * self.lambda_)


def _diff_field(f, h, axis, periodic, order=2):
    """Finite difference along one axis of a (n1, n2[, 3]) field."""
    f = np.asarray(f, dtype=np.float64)
    if periodic:
        if order == 4:
            return (
                -np.roll(f, -2, axis) + 8 * np.roll(f, -1, axis)
                - 8 * np.roll(f, 1, axis) + np.roll(f, 2, axis)
            ) / (12 * h)
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
    out = np.empty_like(f)
    fm = np.moveaxis(f, axis, 0)
    om = np.moveaxis(out, axis, 0)
    n = fm.shape[0]
    if order == 4:
        om[2:-2] = (-fm[4:] + 8 * fm[3:-1] - 8 * fm[1:-3] + fm[:-4]) / (12 * h)
        for i in (0, 1):
            om[i] = (
                -25 * fm[i] + 48 * fm[i + 1] - 36 * fm[i + 2]
                + 16 * fm[i + 3] - 3 * fm[i + 4]
            ) / (12 * h)
            om[n - 1 - i] = -(
                -25 * fm[n - 1 - i] + 48 * fm[n - 2 - i] - 36 * fm[n - 3 - i]
                + 16 * fm[n - 4 - i] - 3 * fm[n - 5 - i]
            ) / (12 * h)
    else:
        om[1:-1] = (fm[2:] - fm[:-2]) / (2 * h)
        om[0] = (-3 * fm[0] + 4 * fm[1] - fm[2]) / (2 * h)
        om[-1] = (3 * fm[-1] - 4 * fm[-2] + fm[-3]) / (2 * h)
    return out


def _diff2_field(f, h, axis, periodic):
    f = np.asarray(f, dtype=np.float64)
    if periodic:
        return (np.roll(f, -1, axis) - 2 * f + np.roll(f, 1, axis)) / h**2
    out = np.empty_like(f)
    fm = np.moveaxis(f, axis, 0)
    om = np.moveaxis(out, axis, 0)
    om[1:-1] = (fm[2:] - 2 * fm[1:-1] + fm[:-2]) / h**2
    om[0] = (2 * fm[0] - 5 * fm[1] + 4 * fm[2] - fm[3]) / h**2
    om[-1] = (2 * fm[-1] - 5 * fm[-2] + 4 * fm[-3] - fm[-4]) / h**2
    return out


def cell_weights(patch):
    """Quadrature weights per node: plain h in periodic directions,
    trapezoid in bounded ones."""
    def line(x, periodic):
        h = x[1] - x[0]
        w = np.full(x.size, h)
        if not periodic:
            w[0] = w[-1] = h / 2
        return w

    w1 = line(patch.x1, patch.periodic1)
    w2 = line(patch.x2, patch.periodic2)
    return np.outer(w1, w2)


def integrate(patch, field):
    return float(np.sum(field * cell_weights(patch)))


# ----------------------------------------------------------------- builders

def _grid(lo1, hi1, n1, periodic1, lo2, hi2, n2, periodic2):
    x1 = (
        lo1 + (hi1 - lo1) * np.arange(n1) / n1
        if periodic1
        else np.linspace(lo1, hi1, n1)
    )
    x2 = (
        lo2 + (hi2 - lo2) * np.arange(n2) / n2
        if periodic2
        else np.linspace(lo2, hi2, n2)
    )
    return x1, x2


def _resolution_pair(resolution):
    if np.isscalar(resolution):
        resolution = (int(resolution), int(resolution))
    n1, n2 = int(resolution[0]), int(resolution[1])
    if n1 < 32 or n2 < 32:
        raise BadParam("need at least 32 nodes per direction")
    return n1, n2


def build_surface(surface, resolution=64, **params):
    """Construct a built-in chart with its analytic jet.

    surface: SurfaceId or kind string; extra keyword params merge over the
    id's params.  Kinds: round_sphere (T: cylinder half-length),
    clifford_torus, torus_of_revolution (R, r), catenoid (t, S: half-length),
    flat_plane (a, b: annulus radii), inverted (base: SurfaceId,
    center: 3-vector).
    """
    if isinstance(surface, str):
        surface = SurfaceId(surface, {})
    p = dict(surface.params)
    p.update(params)
    kind = surface.kind
    n1, n2 = _resolution_pair(resolution)

    if kind == "round_sphere":
        T = float(p.get("T", 6.0))
        x1, x2 = _grid(-T, T, n1, False, 0.0, 2 * np.pi, n2, True)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        sech = 1 / np.cosh(X1)
        th = np.tanh(X1)
        c, s = np.cos(X2), np.sin(X2)
        phi = np.stack([sech * c, sech * s, -th], axis=-1)
        d1 = np.stack([-sech * th * c, -sech * th * s, -sech**2], axis=-1)
        d2 = np.stack([-sech * s, sech * c, np.zeros_like(sech)], axis=-1)
        dsech = -sech * th
        dd_sech_th = dsech * th + sech * sech**2  # d/dx1 (sech * tanh)
        d11 = np.stack(
            [-dd_sech_th * c, -dd_sech_th * s, -2 * sech * dsech], axis=-1
        )
        d12 = np.stack([sech * th * s, -sech * th * c, np.zeros_like(sech)], axis=-1)
        d22 = np.stack([-sech * c, -sech * s, np.zeros_like(sech)], axis=-1)
        return ConformalPatch("round_sphere", {"T": T}, x1, x2, False, True,
                              phi, d1, d2, d11, d12, d22)

    if kind == "clifford_torus":
        x1, x2 = _grid(0.0, 2 * np.pi, n1, True, 0.0, 2 * np.pi, n2, True)
        A, B = np.meshgrid(x1, x2, indexing="ij")
        r2 = np.sqrt(2.0)
        w = r2 - np.sin(B)
        ca, sa, cb, sb = np.cos(A), np.sin(A), np.cos(B), np.sin(B)
        phi = np.stack([ca / w, sa / w, cb / w], axis=-1)
        d1 = np.stack([-sa / w, ca / w, np.zeros_like(w)], axis=-1)
        # dw/dB = -cb
        d2 = np.stack(
            [ca * cb / w**2, sa * cb / w**2, (-sb * w + cb**2) / w**2], axis=-1
        )
        d11 = np.stack([-ca / w, -sa / w, np.zeros_like(w)], axis=-1)
        d12 = np.stack([-sa * cb / w**2, ca * cb / w**2, np.zeros_like(w)], axis=-1)
        # the third component's B-derivative telescopes to -sqrt(2) sb cb / w^3
        d22 = np.stack(
            [
                ca * (-sb * w + 2 * cb**2) / w**3,
                sa * (-sb * w + 2 * cb**2) / w**3,
                -r2 * sb * cb / w**3,
            ],
            axis=-1,
        )
        return ConformalPatch("clifford_torus", {}, x1, x2, True, True,
                              phi, d1, d2, d11, d12, d22)

    if kind == "torus_of_revolution":
        R = float(p.get("R", 2.0))
        r = float(p.get("r", 1.0))
        if r >= R or r <= 0:
            raise BadParam("need 0 < r < R")
        kk = np.sqrt((R + r) / (R - r))
        q = np.sqrt(R**2 - r**2)
        Wp = 2 * np.pi * r / q  # isothermal period of the profile angle
        x1, x2 = _grid(0.0, 2 * np.pi, n1, True, 0.0, Wp, n2, True)
        PSI, Wc = np.meshgrid(x1, x2, indexing="ij")
        ws = q * Wc / (2 * r)
        theta = 2 * np.arctan2(kk * np.sin(ws), np.cos(ws))
        ct, st = np.cos(theta), np.sin(theta)
        cp, sp = np.cos(PSI), np.sin(PSI)
        rho = R + r * ct
        phi = np.stack([rho * cp, rho * sp, r * st], axis=-1)
        tp = rho / r  # d theta / d w
        d1 = np.stack([-rho * sp, rho * cp, np.zeros_like(rho)], axis=-1)
        d2 = np.stack([-rho * st * cp, -rho * st * sp, rho * ct], axis=-1)
        d11 = np.stack([-rho * cp, -rho * sp, np.zeros_like(rho)], axis=-1)
        d12 = np.stack([rho * st * sp, -rho * st * cp, np.zeros_like(rho)], axis=-1)
        # d/dw of d2 with theta' = rho/r
        dd2_dtheta = np.stack(
            [
                -r * st * (-st * cp) + rho * (-ct * cp),
                -r * st * (-st * sp) + rho * (-ct * sp),
                -r * st * ct - rho * st,
            ],
            axis=-1,
        )
        d22 = dd2_dtheta * tp[..., None]
        return ConformalPatch("torus_of_revolution", {"R": R, "r": r},
                              x1, x2, True, True, phi, d1, d2, d11, d12, d22)

    if kind == "catenoid":
        t = float(p.get("t", 1.0))
        if t <= 0:
            raise BadParam("need t > 0")
        S = float(p.get("S", 2.0))
        x1, x2 = _grid(-S, S, n1, False, 0.0, 2 * np.pi, n2, True)
        SG, TH = np.meshgrid(x1, x2, indexing="ij")
        ch, sh = np.cosh(SG), np.sinh(SG)
        c, s = np.cos(TH), np.sin(TH)
        phi = t * np.stack([ch * c, ch * s, SG], axis=-1)
        d1 = t * np.stack([sh * c, sh * s, np.ones_like(SG)], axis=-1)
        d2 = t * np.stack([-ch * s, ch * c, np.zeros_like(SG)], axis=-1)
        d11 = t * np.stack([ch * c, ch * s, np.zeros_like(SG)], axis=-1)
        d12 = t * np.stack([-sh * s, sh * c, np.zeros_like(SG)], axis=-1)
        d22 = t * np.stack([-ch * c, -ch * s, np.zeros_like(SG)], axis=-1)
        return ConformalPatch("catenoid", {"t": t, "S": S}, x1, x2, False, True,
                              phi, d1, d2, d11, d12, d22)

    if kind == "flat_plane":
        a = float(p.get("a", 0.1))
        b = float(p.get("b", 1.0))
        if not 0 < a < b:
            raise BadParam("need 0 < a < b")
        x1, x2 = _grid(np.log(a), np.log(b), n1, False, 0.0, 2 * np.pi, n2, True)
        S, TH = np.meshgrid(x1, x2, indexing="ij")
        es = np.exp(S)
        c, s = np.cos(TH), np.sin(TH)
        z = np.zeros_like(S)
        phi = np.stack([es * c, es * s, z], axis=-1)
        d1 = np.stack([es * c, es * s, z], axis=-1)
        d2 = np.stack([-es * s, es * c, z], axis=-1)
        d11 = np.stack([es * c, es * s, z], axis=-1)
        d12 = np.stack([-es * s, es * c, z], axis=-1)
        d22 = np.stack([-es * c, -es * s, z], axis=-1)
        return ConformalPatch("flat_plane", {"a": a, "b": b}, x1, x2, False, True,
                              phi, d1, d2, d11, d12, d22)

    if kind == "inverted":
        base = p.get("base")
        if base is None:
            raise BadParam("inverted needs a base surface id")
        center = np.asarray(p.get("center", (0.0, 0.0, 3.0)), dtype=np.float64)
        patch = build_surface(base, resolution=(n1, n2))
        return apply_mobius(patch, "inversion", center=center)

    raise BadParam(f"unknown surface kind {kind!r}")


# ------------------------------------------------------------- geometry

def derive_geometry(patch):
    tol = ANALYTIC_CONFORMAL_TOL if patch.has_jet else SAMPLED_CONFORMAL_TOL
    res = patch.conformality_residual()
    if res > tol:
        raise NotConformal(f"conformality residual {res:.3e} exceeds {tol:.1e}")
    d1, d2 = patch.jet1()
    d11, d12, d22 = patch.jet2()
    e2l = np.sum(d1 * d1, axis=-1)
    lam = 0.5 * np.log(e2l)
    nvec = np.cross(d1, d2)
    nvec /= np.linalg.norm(nvec, axis=-1, keepdims=True)
    lap_phi = d11 + d22
    H = 0.5 * np.sum(lap_phi * nvec, axis=-1) / e2l
    L = np.sum(d11 * nvec, axis=-1)
    M = np.sum(d12 * nvec, axis=-1)
    Nc = np.sum(d22 * nvec, axis=-1)
    h0 = 0.5 * (L - Nc) - 1j * M
    # Determinant K keeps the pointwise identity |h0|^2 = e^{4 lambda}(H^2 - K)
    # exact; the Liouville route needs differentiated lambda and is kept as a
    # cross-check (gauss_curvature_liouville), where it is only O(h^2) and
    # degrades at non-periodic chart ends.
    K = (L * Nc - M**2) / e2l**2
    A2 = 4 * H**2 - 2 * K
    return GeometryFields(lambda_=lam, H=H, h0=h0, K=K, A2=A2, normal=nvec)


def gauss_curvature_liouville(patch):
    """K = -e^{-2 lambda} Lap(lambda), the conformal-factor route; finite
    differences on lambda, so accurate only away from non-periodic ends."""
    d1, _ = patch.jet1()
    e2l = np.sum(d1 * d1, axis=-1)
    lam = 0.5 * np.log(e2l)
    lap_lam = _diff2_field(lam, patch.h1, 0, patch.periodic1) + _diff2_field(
        lam, patch.h2, 1, patch.periodic2
    )
    return -lap_lam / e2l


def willmore_energy(patch, fields=None):
    f = fields or derive_geometry(patch)
    return integrate(patch, f.H**2 * f.e2l)


def conformal_energy(patch, fields=None):
    f = fields or derive_geometry(patch)
    return integrate(patch, (f.H**2 - f.K) * f.e2l)


def normal_energy(patch, fields=None, cross_check=False):
    f = fields or derive_geometry(patch)
    val = integrate(patch, (4 * f.H**2 - 2 * f.K) * f.e2l)
    if not cross_check:
        return val
    dn1 = _diff_field(f.normal, patch.h1, 0, patch.periodic1)
    dn2 = _diff_field(f.normal, patch.h2, 1, patch.periodic2)
    direct = integrate(patch, np.sum(dn1**2 + dn2**2, axis=-1))
    return val, direct


def willmore_residual(patch, fields=None):
    """Residual field of the Willmore equation and its RMS in the surface
    measure; second-order differences so the RMS shrinks at O(h^2) on
    Willmore surfaces."""
    f = fields or derive_geometry(patch)
    lapH = _diff2_field(f.H, patch.h1, 0, patch.periodic1) + _diff2_field(
        f.H, patch.h2, 1, patch.periodic2
    )
    res = lapH / f.e2l + 2 * f.H * (f.H**2 - f.K)
    area = integrate(patch, f.e2l)
    rms = float(np.sqrt(integrate(patch, res**2 * f.e2l) / area))
    return res, rms


def surface_diameter(patch):
    pts = patch.phi.reshape(-1, 3)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def apply_mobius(patch, transform, vector=None, factor=None, center=None):
    """Return a new patch moved by a translation, dilation, or sphere
    inversion; analytic jets are pushed through the chain rule."""
    d1, d2 = patch.jet1()
    d11, d12, d22 = patch.jet2()
    phi = patch.phi
    if transform == "translation":
        v = np.asarray(vector, dtype=np.float64)
        return ConformalPatch(patch.kind, dict(patch.params), patch.x1, patch.x2,
                              patch.periodic1, patch.periodic2,
                              phi + v, d1, d2, d11, d12, d22)
    if transform == "dilation":
        c = float(factor)
        if c <= 0:
            raise BadParam("dilation factor must be positive")
        return ConformalPatch(patch.kind, dict(patch.params), patch.x1, patch.x2,
                              patch.periodic1, patch.periodic2,
                              c * phi, c * d1, c * d2, c * d11, c * d12, c * d22)
    if transform != "inversion":
        raise BadParam(f"unknown transform {transform!r}")

    pc = np.asarray(center, dtype=np.float64)
    w = phi - pc
    rho2 = np.sum(w * w, axis=-1)
    if np.sqrt(rho2.min()) <= 1e-3 * surface_diameter(patch):
        raise CenterOnSurface("inversion center too close to the surface")
    r2 = rho2[..., None]

    def dot(a, b):
        return np.sum(a * b, axis=-1)[..., None]

    def d_first(dw):
        return dw / r2 - 2 * w * dot(w, dw) / r2**2

    def d_second(dwi, dwj, dwij):
        return (
            dwij / r2
            - 2 * (dwi * dot(w, dwj) + dwj * dot(w, dwi)) / r2**2
            - 2 * w * (dot(dwi, dwj) + dot(w, dwij)) / r2**2
            + 8 * w * dot(w, dwi) * dot(w, dwj) / r2**3
        )

    return ConformalPatch(
        "inverted", {"base": patch.kind, **patch.params},
        patch.x1, patch.x2, patch.periodic1, patch.periodic2,
        w / r2,
        d_first(d1), d_first(d2),
        d_second(d1, d1, d11), d_second(d1, d2, d12), d_second(d2, d2, d22),
    )


# ------------------------------------------------------------- residues

def _theta_derivative_spectral(field, axis=1):
    """Exact derivative of a smooth periodic sampled field via FFT."""
    n = field.shape[axis]
    k = np.fft.fftfreq(n, d=1.0 / n) * 1j
    fhat = np.fft.fft(field, axis=axis)
    shape = [1] * field.ndim
    shape[axis] = n
    return np.real(np.fft.ifft(fhat * k.reshape(shape), axis=axis))


def _row_fields(patch, fields, i):
    """Everything the contour integrands need, on the x1 = const row i,
    with x1-derivatives from 4th-order central differences and exact
    spectral x2-derivatives (the row direction is periodic)."""
    if not patch.periodic2:
        raise ContourOutOfChart("contours require a periodic second direction")
    n1 = patch.x1.size
    if i < 2 or i > n1 - 3:
        raise ContourOutOfChart("contour row too close to the chart edge")
    f = fields
    Hn = f.H[..., None] * f.normal

    def dx1(g):
        st = np.stack([g[j] for j in range(i - 2, i + 3)], axis=0)
        return (st[0] - 8 * st[1] + 8 * st[3] - st[4]) / (12 * patch.h1)

    # x2 is uniform over a full period P, so d/dx2 = (2 pi / P) times the
    # spectral derivative in the index angle
    period = patch.x2.size * patch.h2

    def dx2(g):
        return _theta_derivative_spectral(g, axis=0) * (2 * np.pi / period)

    d1, d2 = patch.jet1()
    row = {
        "phi": patch.phi[i],
        "n": f.normal[i],
        "H": f.H[i],
        "h0": f.h0[i],
        "e2l": f.e2l[i],
        "d1": d1[i],
        "d2": d2[i],
        "Hn_1": dx1(Hn),
        "Hn_2": dx2(Hn[i]),
        "H_1": dx1(f.H),
        "H_2": dx2(f.H[i]),
        "n_1": dx1(f.normal),
        "n_2": dx2(f.normal[i]),
    }
    return row


def second_residue(patch, fields=None, row=None, radius=None):
    """Residue-type contour integrals on an x1 = const loop.

    Returns a dict with gamma1 (3-vector), the flux-form companion gamma0
    (3-vector), and gamma2 (3-vector from the Weingarten term alone).  The
    loop is selected by grid row index, or by nearest e^{x1} chart radius.
    """
    f = fields or derive_geometry(patch)
    if row is None:
        if radius is None:
            row = patch.x1.size // 2
        else:
            row = int(np.argmin(np.abs(patch.x1 - np.log(radius))))
    r = _row_fields(patch, f, row)
    h2 = patch.h2

    dz_phi = 0.5 * (r["d1"] - 1j * r["d2"])
    dzbar_phi = 0.5 * (r["d1"] + 1j * r["d2"])
    dz_Hn = 0.5 * (r["Hn_1"] - 1j * r["Hn_2"])
    ginv = 2.0 / r["e2l"]

    F = (
        dz_Hn
        + (r["H"] ** 2)[..., None] * dz_phi
        + (ginv * r["H"])[..., None] * r["h0"][..., None] * dzbar_phi
    )
    wein = (ginv * r["h0"])[..., None] * np.cross(r["n"], dzbar_phi)
    integrand = np.cross(r["phi"], F) + wein
    # x1 = const loop: dz = i dx2, so Im(integral X dz) = Re(sum X) * h2
    gamma1 = np.real(np.sum(integrand, axis=0)) * h2 / (4 * np.pi)
    gamma2 = np.real(np.sum(wein, axis=0)) * h2 / (4 * np.pi)

    # conservation flux: the loop integral of the rotated flux 1-form, whose
    # x2-component is -T1 with T = dH - 3 pi_n(dH) + *(H x dn); computed from
    # the geometric fields, independently of F
    def proj_n(X):
        return np.sum(X * r["n"], axis=-1)[..., None] * r["n"]

    T1 = (
        r["Hn_1"] - 3 * proj_n(r["Hn_1"])
        + np.cross(r["H"][..., None] * r["n"], r["n_2"])
    )
    gamma0 = -np.sum(T1, axis=0) * h2 / (4 * np.pi)
    return {
        "gamma1": gamma1,
        "gamma0": gamma0,
        "gamma2": gamma2,
        "row": int(row),
        "x1": float(patch.x1[row]),
    }


def flux_identity_residual(patch, fields=None, row=None):
    """Max norm over the loop of the pointwise identity equating the flux
    1-form's x2-component with 4 Im(F); a convention self-check (both
    sides are computed from independent derivative routes)."""
    f = fields or derive_geometry(patch)
    if row is None:
        row = patch.x1.size // 2
    r = _row_fields(patch, f, row)
    dz_phi = 0.5 * (r["d1"] - 1j * r["d2"])
    dzbar_phi = 0.5 * (r["d1"] + 1j * r["d2"])
    dz_Hn = 0.5 * (r["Hn_1"] - 1j * r["Hn_2"])
    ginv = 2.0 / r["e2l"]
    F = (
        dz_Hn
        + (r["H"] ** 2)[..., None] * dz_phi
        + (ginv * r["H"])[..., None] * r["h0"][..., None] * dzbar_phi
    )

    def proj_n(X):
        return np.sum(X * r["n"], axis=-1)[..., None] * r["n"]

    Hn = r["H"][..., None] * r["n"]
    lhs = r["Hn_2"] - 3 * proj_n(r["Hn_2"]) - np.cross(Hn, r["n_1"])
    rhs = 4 * np.imag(F)
    scale = (
        np.max(np.linalg.norm(r["Hn_2"], axis=-1))
        + np.max(np.linalg.norm(np.cross(Hn, r["n_1"]), axis=-1))
        + 4 * np.max(np.abs(F))
        + 1e-30
    )
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)) / scale)


# ------------------------------------------------------------- export

def chart_radius(patch):
    """Positive radial surrogate on the chart: e^{x1} for charts whose
    first coordinate is log-radial or axial, euclidean distance from the
    domain center for doubly periodic charts."""
    X1, X2 = np.meshgrid(patch.x1, patch.x2, indexing="ij")
    if patch.periodic1 and patch.periodic2:
        c1 = 0.5 * (patch.x1[0] + patch.x1[-1] + patch.h1)
        c2 = 0.5 * (patch.x2[0] + patch.x2[-1] + patch.h2)
        return np.sqrt((X1 - c1) ** 2 + (X2 - c2) ** 2)
    return np.exp(X1)


def save_patch(patch, path_prefix):
    header = {
        "kind": patch.kind,
        "params": {k: v for k, v in patch.params.items()
                   if isinstance(v, (int, float, str))},
        "resolution": [int(patch.x1.size), int(patch.x2.size)],
        "periodic": [bool(patch.periodic1), bool(patch.periodic2)],
        "x1_range": [float(patch.x1[0]), float(patch.x1[-1])],
        "x2_range": [float(patch.x2[0]), float(patch.x2[-1])],
        "has_jet": bool(patch.has_jet),
    }
    with open(f"{path_prefix}.json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")
    n1, n2 = patch.shape
    I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    cols = [I.ravel(), J.ravel()] + [patch.phi[..., k].ravel() for k in range(3)]
    with open(f"{path_prefix}.csv", "w", newline="") as fh:
        fh.write("i,j,phi_x,phi_y,phi_z\n")
        for row in zip(*cols):
            fh.write("%d,%d,%.17g,%.17g,%.17g\n" % row)


def load_patch(path_prefix):
    with open(f"{path_prefix}.json") as fh:
        header = json.load(fh)
    n1, n2 = header["resolution"]
    per1, per2 = header["periodic"]
    lo1, hi1 = header["x1_range"]
    lo2, hi2 = header["x2_range"]
    x1 = np.linspace(lo1, hi1, n1)
    x2 = np.linspace(lo2, hi2, n2)
    data = np.loadtxt(f"{path_prefix}.csv", delimiter=",", skiprows=1)
    phi = np.zeros((n1, n2, 3))
    for row in data:
        i, j = int(row[0]), int(row[1])
        phi[i, j] = row[2:5]
    return ConformalPatch(header["kind"], header.get("params", {}), x1, x2,
                          per1, per2, phi)
