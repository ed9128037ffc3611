import numpy as np
import pytest

from wspectra.errors import (
    BadParam,
    CenterOnSurface,
    ContourOutOfChart,
    NotConformal,
)
from wspectra.immersion_geometry import (
    ConformalPatch,
    SurfaceId,
    apply_mobius,
    build_surface,
    chart_radius,
    conformal_energy,
    derive_geometry,
    flux_identity_residual,
    gauss_curvature_liouville,
    integrate,
    load_patch,
    normal_energy,
    save_patch,
    second_residue,
    surface_diameter,
    willmore_energy,
    willmore_residual,
)

SPHERE = build_surface("round_sphere", resolution=96)
SPHERE_F = derive_geometry(SPHERE)
CLIFFORD = build_surface("clifford_torus", resolution=96)
CLIFFORD_F = derive_geometry(CLIFFORD)
CATENOID = build_surface("catenoid", resolution=96, t=1.0, S=2.0)
CATENOID_F = derive_geometry(CATENOID)


class TestBuildSurface:
    def test_sphere_chart_is_exactly_conformal(self):
        assert build_surface("round_sphere", 64).conformality_residual() < 1e-12

    def test_clifford_chart_is_exactly_conformal(self):
        assert build_surface("clifford_torus", 64).conformality_residual() < 1e-10

    def test_revolution_torus_isothermal_chart(self):
        p = build_surface("torus_of_revolution", 64, R=2.0, r=1.0)
        assert p.conformality_residual() < 1e-6

    def test_all_builtins_carry_jets(self):
        for kind in ("round_sphere", "clifford_torus", "torus_of_revolution",
                     "catenoid", "flat_plane"):
            assert build_surface(kind, 48).has_jet

    def test_surface_id_params_merge(self):
        sid = SurfaceId("torus_of_revolution", {"R": 3.0, "r": 1.0})
        p = build_surface(sid, 48)
        assert p.params["R"] == 3.0

    def test_bad_torus_radii(self):
        with pytest.raises(BadParam):
            build_surface("torus_of_revolution", 48, R=1.0, r=1.0)

    def test_bad_resolution(self):
        with pytest.raises(BadParam):
            build_surface("round_sphere", 16)

    def test_unknown_kind(self):
        with pytest.raises(BadParam):
            build_surface("klein_bottle", 48)

    def test_inverted_surface_builds_and_is_conformal(self):
        p = build_surface("inverted", 64, base=SurfaceId("clifford_torus", {}),
                         center=(0.0, 0.0, 3.0))
        assert p.conformality_residual() < 1e-9


class TestDeriveGeometry:
    def test_sphere_curvatures(self):
        """Unit sphere with the chart-ordered normal: H = -1, K = 1, |A|^2 = 2."""
        f = SPHERE_F
        assert np.max(np.abs(f.H + 1)) < 1e-9
        assert np.max(np.abs(f.K - 1)) < 1e-9
        assert np.max(np.abs(f.A2 - 2)) < 1e-9
        assert np.max(np.abs(f.h0)) < 1e-9

    def test_flat_plane_geometry(self):
        f = derive_geometry(build_surface("flat_plane", 48))
        assert np.max(np.abs(f.H)) < 1e-12
        assert np.max(np.abs(f.K)) < 1e-12
        assert np.max(np.abs(f.h0)) < 1e-12

    def test_catenoid_is_minimal_with_nonzero_h0(self):
        f = CATENOID_F
        assert np.max(np.abs(f.H)) < 1e-8
        # h0 = -t for the builtin catenoid chart
        assert np.max(np.abs(f.h0 + 1.0)) < 1e-9

    def test_normals_are_unit(self):
        for f in (SPHERE_F, CLIFFORD_F, CATENOID_F):
            assert np.max(np.abs(np.linalg.norm(f.normal, axis=-1) - 1)) < 1e-9

    def test_a2_nonnegative(self):
        for f in (SPHERE_F, CLIFFORD_F, CATENOID_F):
            assert f.A2.min() > -1e-9

    def test_weingarten_identity(self):
        """|h0|^2 = e^{4 lambda} (H^2 - K), equivalently 2|h0|^2_WP + 2H^2 = |A|^2."""
        for f in (SPHERE_F, CLIFFORD_F, CATENOID_F):
            lhs = 2 * np.abs(f.h0) ** 2 / f.e2l**2 + 2 * f.H**2
            scale = np.max(np.abs(f.A2)) + 1e-30
            assert np.max(np.abs(lhs - f.A2)) / scale < 1e-6

    def test_liouville_curvature_agrees_in_interior(self):
        K_l = gauss_curvature_liouville(SPHERE)
        err = np.abs(K_l[10:-10] - SPHERE_F.K[10:-10])
        assert np.max(err) < 2e-2

    def test_liouville_curvature_periodic_chart(self):
        K_l = gauss_curvature_liouville(CLIFFORD)
        assert np.max(np.abs(K_l - CLIFFORD_F.K)) < 2e-2

    def test_rejects_nonconformal(self):
        p = build_surface("round_sphere", 48)
        bad = ConformalPatch(p.kind, p.params, p.x1, p.x2, p.periodic1,
                             p.periodic2, p.phi * np.array([1.0, 1.0, 2.0]))
        with pytest.raises(NotConformal):
            derive_geometry(bad)


class TestEnergies:
    def test_sphere_willmore(self):
        # Mercator chart truncated at |x1| <= 6 misses 4 pi (1 - tanh 6) ~ 6e-5
        assert willmore_energy(SPHERE, SPHERE_F) == pytest.approx(4 * np.pi, rel=1e-3)

    def test_clifford_willmore(self):
        assert willmore_energy(CLIFFORD, CLIFFORD_F) == pytest.approx(
            2 * np.pi**2, rel=5e-3
        )

    def test_revolution_torus_willmore_closed_form(self):
        # W(R, r) = pi^2 R^2 / (r sqrt(R^2 - r^2)) for the standard torus
        p = build_surface("torus_of_revolution", 96, R=2.0, r=1.0)
        assert willmore_energy(p) == pytest.approx(4 * np.pi**2 / np.sqrt(3), rel=1e-6)

    def test_flat_plane_energies_vanish(self):
        p = build_surface("flat_plane", 48)
        f = derive_geometry(p)
        assert abs(willmore_energy(p, f)) < 1e-12
        assert abs(normal_energy(p, f)) < 1e-12

    def test_rigidity_gap(self):
        """Closed non-spherical surfaces sit strictly above 4 pi."""
        for kind, kw in [("clifford_torus", {}),
                         ("torus_of_revolution", dict(R=2.0, r=1.0)),
                         ("torus_of_revolution", dict(R=3.0, r=1.0))]:
            p = build_surface(kind, 64, **kw)
            assert willmore_energy(p) > 4 * np.pi + 1.0

    def test_sphere_conformal_energy_vanishes(self):
        assert abs(conformal_energy(SPHERE, SPHERE_F)) < 1e-6

    def test_clifford_conformal_energy(self):
        assert conformal_energy(CLIFFORD, CLIFFORD_F) == pytest.approx(
            2 * np.pi**2, rel=5e-3
        )

    def test_gauss_bonnet(self):
        s = integrate(SPHERE, SPHERE_F.K * SPHERE_F.e2l)
        assert s == pytest.approx(4 * np.pi, rel=5e-3)
        t = integrate(CLIFFORD, CLIFFORD_F.K * CLIFFORD_F.e2l)
        assert abs(t) < 0.05

    def test_sphere_normal_energy(self):
        assert normal_energy(SPHERE, SPHERE_F) == pytest.approx(8 * np.pi, rel=5e-3)

    def test_catenoid_normal_energy_closed_form(self):
        # int |dn|^2 dvol = -2 int K dvol = 8 pi tanh(S) on |sigma| <= S;
        # trapezoid in the open sigma direction leaves O(h^2) ~ 2e-5
        val = normal_energy(CATENOID, CATENOID_F)
        assert val == pytest.approx(8 * np.pi * np.tanh(2.0), rel=1e-4)

    def test_normal_energy_direct_cross_check(self):
        val, direct = normal_energy(CATENOID, CATENOID_F, cross_check=True)
        assert direct == pytest.approx(val, rel=1e-2)


class TestWillmoreResidual:
    def test_sphere_residual_tiny(self):
        _, rms = willmore_residual(SPHERE, SPHERE_F)
        assert rms < 1e-6

    def test_catenoid_residual_tiny(self):
        _, rms = willmore_residual(CATENOID, CATENOID_F)
        assert rms < 1e-7

    def test_clifford_residual_second_order(self):
        rms = {}
        for res in (64, 128):
            p = build_surface("clifford_torus", res)
            _, rms[res] = willmore_residual(p)
        ratio = rms[64] / rms[128]
        assert 2.8 < ratio < 5.2, f"refinement ratio {ratio:.2f}"

    def test_non_willmore_torus_residual_does_not_vanish(self):
        rms = {}
        for res in (64, 128):
            p = build_surface("torus_of_revolution", res, R=3.0, r=1.0)
            _, rms[res] = willmore_residual(p)
        assert rms[128] > 0.1
        assert rms[128] > 0.5 * rms[64]


class TestChartRefinement:
    def test_derived_scalars_second_order_without_jets(self):
        """Strip the jets so geometry falls back to finite differences; the
        H error against the exact value -1 must then shrink ~4x per
        doubling (the jet path is exact and would show nothing)."""
        errs = {}
        for res in (64, 128):
            # T = 3 keeps the one-sided edge stencils away from the sech tails
            p = build_surface("round_sphere", res, T=3.0)
            bare = ConformalPatch(p.kind, p.params, p.x1, p.x2, p.periodic1,
                                  p.periodic2, p.phi)
            f = derive_geometry(bare)
            sl = np.s_[4:-4]
            errs[res] = np.max(np.abs(f.H[sl] + 1))
        ratio = errs[64] / errs[128]
        assert ratio > 2.5, f"H refinement ratio {ratio:.2f}"


class TestMobius:
    def test_dilation_preserves_willmore(self):
        q = apply_mobius(SPHERE, "dilation", factor=2.0)
        assert willmore_energy(q) == pytest.approx(
            willmore_energy(SPHERE, SPHERE_F), rel=1e-6
        )

    def test_translation_leaves_fields_unchanged(self):
        q = apply_mobius(CLIFFORD, "translation", vector=(0.3, -1.2, 0.5))
        g = derive_geometry(q)
        assert np.max(np.abs(g.H - CLIFFORD_F.H)) < 1e-9
        assert np.max(np.abs(g.K - CLIFFORD_F.K)) < 1e-9
        assert np.max(np.abs(g.lambda_ - CLIFFORD_F.lambda_)) < 1e-9

    def test_inversion_preserves_conformal_energy_clifford(self):
        q = apply_mobius(CLIFFORD, "inversion", center=(0.0, 0.0, 3.0))
        assert conformal_energy(q) == pytest.approx(
            conformal_energy(CLIFFORD, CLIFFORD_F), rel=1e-2
        )

    def test_inversion_preserves_conformal_energy_revolution(self):
        p = build_surface("torus_of_revolution", 96, R=2.0, r=1.0)
        q = apply_mobius(p, "inversion", center=(0.0, 0.0, 5.0))
        assert conformal_energy(q) == pytest.approx(conformal_energy(p), rel=1e-2)

    def test_inversion_keeps_exact_jets(self):
        q = apply_mobius(CLIFFORD, "inversion", center=(0.0, 0.0, 3.0))
        assert q.has_jet
        assert q.conformality_residual() < 1e-9

    def test_center_on_surface_rejected(self):
        center = SPHERE.phi[48, 0] + 1e-6
        with pytest.raises(CenterOnSurface):
            apply_mobius(SPHERE, "inversion", center=center)

    def test_bad_dilation_factor(self):
        with pytest.raises(BadParam):
            apply_mobius(SPHERE, "dilation", factor=-1.0)


class TestResidues:
    def test_sphere_contractible_contour(self):
        r = second_residue(SPHERE, SPHERE_F)
        scale = surface_diameter(SPHERE)
        assert np.linalg.norm(r["gamma1"]) < 1e-6 * scale

    def test_catenoid_gamma1_vanishes(self):
        # H == 0 kills F entirely; the remaining h0-term integrates to a
        # purely real vector, so the Im part is 0 for every neck contour
        r = second_residue(CATENOID, CATENOID_F, row=48)
        assert np.linalg.norm(r["gamma1"]) < 1e-12

    def test_catenoid_homotopy_invariance(self):
        r1 = second_residue(CATENOID, CATENOID_F, row=30)
        r2 = second_residue(CATENOID, CATENOID_F, row=66)
        assert np.linalg.norm(r1["gamma1"] - r2["gamma1"]) < 1e-6

    def test_catenoid_scaling_covariance(self):
        vals = {}
        for t in (1.0, 2.0):
            p = build_surface("catenoid", 64, t=t, S=2.0)
            vals[t] = second_residue(p)["gamma1"]
        # gamma1(t) scales linearly in t; here both sides vanish identically
        assert np.linalg.norm(vals[2.0] - 2 * vals[1.0]) < 1e-10

    def test_clifford_gamma1_homotopy_invariant(self):
        vals = [second_residue(CLIFFORD, CLIFFORD_F, row=r)["gamma1"]
                for r in (10, 48, 80)]
        for v in vals[1:]:
            assert np.linalg.norm(v - vals[0]) < 1e-9

    def test_willmore_flux_gamma0_vanishes(self):
        for p, f in ((SPHERE, SPHERE_F), (CLIFFORD, CLIFFORD_F)):
            r = second_residue(p, f)
            assert np.linalg.norm(r["gamma0"]) < 1e-3

    def test_non_willmore_gamma0_does_not(self):
        p = build_surface("torus_of_revolution", 96, R=2.0, r=1.0)
        r = second_residue(p)
        assert np.linalg.norm(r["gamma0"]) > 1e-2

    def test_radius_selects_row(self):
        p = build_surface("flat_plane", 48, a=0.1, b=1.0)
        r = second_residue(p, radius=0.5)
        assert abs(np.exp(r["x1"]) - 0.5) < 0.05

    def test_contour_requires_periodic_direction(self):
        with pytest.raises(ContourOutOfChart):
            second_residue(CLIFFORD.__class__(
                CATENOID.kind, CATENOID.params, CATENOID.x1, CATENOID.x2,
                False, False, CATENOID.phi))

    def test_contour_near_edge_rejected(self):
        with pytest.raises(ContourOutOfChart):
            second_residue(CATENOID, CATENOID_F, row=1)


class TestFluxIdentity:
    def test_catenoid_identity_exact(self):
        assert flux_identity_residual(CATENOID, CATENOID_F) < 1e-14

    def test_exact_jet_surfaces(self):
        assert flux_identity_residual(CLIFFORD, CLIFFORD_F) < 1e-5
        p = build_surface("torus_of_revolution", 96, R=2.0, r=1.0)
        assert flux_identity_residual(p) < 1e-5

    def test_sphere_identity_converges(self):
        vals = {}
        for res in (64, 128):
            vals[res] = flux_identity_residual(build_surface("round_sphere", res))
        assert vals[128] < 1e-4
        assert vals[64] / vals[128] > 8  # 4th-order contour differencing


class TestExport:
    def test_roundtrip(self, tmp_path):
        p = build_surface("torus_of_revolution", 48, R=2.0, r=1.0)
        save_patch(p, str(tmp_path / "t21"))
        q = load_patch(str(tmp_path / "t21"))
        assert q.kind == p.kind
        assert q.params == pytest.approx(p.params)
        assert np.array_equal(q.phi, p.phi)
        assert q.periodic1 == p.periodic1 and q.periodic2 == p.periodic2

    def test_roundtrip_geometry_close(self, tmp_path):
        save_patch(SPHERE, str(tmp_path / "sph"))
        q = load_patch(str(tmp_path / "sph"))
        f = derive_geometry(q)  # jets are not serialized; FD fallback
        sl = np.s_[4:-4]
        assert np.max(np.abs(f.H[sl] - SPHERE_F.H[sl])) < 1e-3


class TestChartRadius:
    def test_log_radial_chart(self):
        p = build_surface("flat_plane", 48, a=0.1, b=1.0)
        r = chart_radius(p)
        assert r.min() == pytest.approx(0.1, rel=1e-12)
        assert r.max() == pytest.approx(1.0, rel=1e-2)

    def test_doubly_periodic_chart_positive(self):
        r = chart_radius(CLIFFORD)
        assert r.min() > 0
        assert np.isfinite(r).all()
