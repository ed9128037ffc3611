"""Top-level acceptance gate.

Twelve checks, each pinned to the tolerances the package promises in its
README.  Every test prints exactly one PASS/FAIL line (visible under
``pytest -s`` or ``-v``) and then asserts, so a red run names the broken
guarantee directly.  All grids are the published desk-scale ones; the
whole module is meant to stay well under a minute single-threaded.
"""

import numpy as np
import pytest

from wspectra.annulus_harmonics import (
    AnnulusSpec,
    LaurentHarmonic,
    check_average_bound,
    check_ball_decay,
    check_monotonicity,
    check_pointwise_bound,
    check_sequence_lemma,
    monotonicity_ratio,
    random_zero_flux,
    sequence_kernel_sum,
)
from wspectra.immersion_geometry import (
    build_surface,
    conformal_energy,
    derive_geometry,
    integrate,
    normal_energy,
    second_residue,
    willmore_energy,
    willmore_residual,
)
from wspectra.lorentz_norms import (
    closed_form_l21_inv_radius,
    closed_form_l21_log_gradient,
    closed_form_l2_inv_radius,
    closed_form_weak_inv_radius_plane,
    inverse_radius_field,
    norm_l2,
    norm_l21,
    norm_l2_weak,
)
from wspectra.singular_spectra import (
    RadialGrid,
    WeightSpec,
    assemble_mode_operator_2d,
    attach_weight_mass,
    random_div_source,
    verify_div_weight_bound,
    verify_rellich_bounds,
    verify_singular_annulus_bounds,
    verify_weighted_poincare,
)
from wspectra.numlin import solve_geneig_sym
from wspectra.willmore_hessian import (
    assemble_Q,
    calibrate_tol_null,
    index_weight_spec,
    mass_value,
    mobius_null_fields,
    q_value,
    spectrum,
)


def _verdict(label, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    line = f"{tag}  {label}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def test_lorentz_closed_forms():
    f = inverse_radius_field(0.1, 1.0, 1024, 512)
    e2 = abs(norm_l2(f) / closed_form_l2_inv_radius(0.1, 1.0) - 1)
    e21 = abs(norm_l21(f) / closed_form_l21_inv_radius(0.1, 1.0) - 1)
    fw = inverse_radius_field(0.001, 1.0, 1024, 512, radial="log")
    ew = abs(norm_l2_weak(fw) / closed_form_weak_inv_radius_plane() - 1)
    ok = e2 <= 2e-3 and e21 <= 5e-3 and ew <= 5e-3
    _verdict("lorentz norms of 1/|x| hit closed forms", ok,
             f"l2 {e2:.1e}, l21 {e21:.1e}, weak {ew:.1e}")


def test_singular_mode_lower_bounds_2d():
    bad = []
    for m in (1, 2):
        for row in verify_singular_annulus_bounds(m, L_list=(2.0, 4.0, 8.0),
                                                  n_max=8, N=400):
            if row["passed"] is False:
                bad.append((m, row["kind"], row["L"], row["ratio"]))
    _verdict("order-1 and order-2 singular eigenvalue lower bounds", not bad,
             f"violations {bad}" if bad else "m in {1,2}, L in {2,4,8}")


def test_dimension_four_bracket():
    rows = verify_rellich_bounds(4, L_list=(2.0, 4.0, 8.0))
    bad = [(r["L"], r["ratio"]) for r in rows
           if r["kind"] == "dim_u4" and r["passed"] is False]
    _verdict("d=4 eigenvalue sits in the two-sided bracket", not bad,
             f"violations {bad}" if bad else "L in {2,4,8}")


def test_rellich_limits():
    r5 = [r for r in verify_rellich_bounds(5, L_list=(16.0,))
          if r["kind"] == "dim_u4"][0]
    r3 = [r for r in verify_rellich_bounds(3, L_list=(8.0,))
          if r["kind"] == "dim_grad2"][0]
    ok = bool(r5["passed"]) and bool(r3["passed"])
    _verdict("d=5 bound sharp at L=16 and d=3 gradient bound at L=8", ok,
             f"d5 sharp_within {r5['sharp_within']:.3f}, "
             f"d3 ratio {r3['ratio']:.3f}")


def test_weighted_poincare_uniformity():
    ratios = {}
    for beta in (0.6, 0.75, 0.9):
        for row in verify_weighted_poincare(1, beta=beta):
            if row["passed"] is not None:
                ratios[(1, beta, row["kind"])] = row["ratio"]
    for row in verify_weighted_poincare(2, alpha=0.5):
        if row["passed"] is not None:
            ratios[(2, 0.5, row["kind"])] = row["ratio"]
    worst = max(ratios.values())
    _verdict("weighted Poincare constants uniform in L", worst <= 10.0,
             f"worst max/min ratio {worst:.3f} over {len(ratios)} sweeps")


def test_harmonic_annulus_suite():
    rng = np.random.default_rng(7)
    ann = AnnulusSpec(0.01, 1.0)
    t_min = np.sqrt(ann.a / ann.b)
    fails = 0
    for _ in range(100):
        h = random_zero_flux(rng, K=8)
        fails += not check_pointwise_bound(h, ann, n_circles=32,
                                           n_angles=128)["pass"]
        fails += not check_average_bound(h, ann)["pass"]
        fails += not check_monotonicity(h, ann,
                                        rng.uniform(t_min * 1.01, 1.0))
        fails += not check_ball_decay(random_zero_flux(rng, K=8,
                                                       negative=False))
    ratio = monotonicity_ratio(LaurentHarmonic(coeffs={1: 1.0}),
                               AnnulusSpec(0.0, 1.0), 0.5)
    eq_ok = abs(ratio - 1.0) <= 1e-9
    _verdict("zero-flux harmonic inequalities on 100 seeded instances",
             fails == 0 and eq_ok,
             f"failures {fails}, equality ratio off by {abs(ratio - 1):.1e}")


def test_sequence_lemma_corpus():
    rng = np.random.default_rng(104)
    fails = 0
    for _ in range(1000):
        n = int(rng.integers(2, 20))
        a = rng.uniform(0, 3, n)
        b = rng.uniform(0, 1, n)
        s = rng.uniform(0.05, 0.8)
        t = rng.uniform(s + 0.05, 0.95)
        N1 = int(rng.integers(0, max(1, n // 2)))
        need = 0.0
        for k in range(N1, n + 8):
            ak = a[k] if k < n else 0.0
            bk = b[k] if k < n else 0.0
            ker = sequence_kernel_sum(a, s, k, 0, n - 1)
            if ak > bk and ker > 0:
                need = max(need, (ak - bk) / np.sqrt(ker))
        rep = check_sequence_lemma(a, b, s=s, t=t,
                                   Gamma=need * (1 + rng.uniform(0, 1)),
                                   N1=N1)
        fails += not (rep["hypothesis_holds"] and rep["conclusion_holds"])
    _verdict("dyadic sequence lemma on 1000 seeded instances", fails == 0,
             f"failures {fails}")


def test_divergence_weight_bound():
    rng = np.random.default_rng(11)
    corpus = [random_div_source(rng, N=400) for _ in range(50)]
    bad = []
    for alpha in (3.0, 4.0):
        for row in verify_div_weight_bound(alpha, corpus, N=400, slack=0.01):
            if not row["passed"]:
                bad.append((alpha, row["case"], row["ratio"]))
    _verdict("weighted divergence-source energy bound", not bad,
             f"violations {bad}" if bad else "50 sources, alpha in {3,4}")


def test_geometry_golden_values():
    sphere = build_surface("round_sphere", resolution=(64, 64))
    sf = derive_geometry(sphere)
    eW = abs(willmore_energy(sphere, sf) / (4 * np.pi) - 1)
    eN = abs(normal_energy(sphere, sf) / (8 * np.pi) - 1)
    eGB = abs(integrate(sphere, sf.K * sf.e2l) / (4 * np.pi) - 1)
    cliff = build_surface("clifford_torus", resolution=(64, 64))
    cf = derive_geometry(cliff)
    eC = abs(willmore_energy(cliff, cf) / (2 * np.pi**2) - 1)
    gb_t = abs(integrate(cliff, cf.K * cf.e2l))
    _, rms = willmore_residual(cliff, cf)
    fine = build_surface("clifford_torus", resolution=(128, 128))
    _, rms_fine = willmore_residual(fine)
    factor = rms / rms_fine
    ok = (eW <= 1e-3 and eC <= 5e-3 and eN <= 5e-3 and eGB <= 5e-3
          and gb_t <= 0.05 and abs(factor - 4) <= 1.2)
    _verdict("energy golden values and residual refinement", ok,
             f"W_sph {eW:.1e}, W_cliff {eC:.1e}, NE {eN:.1e}, "
             f"GB {eGB:.1e}, |GB_t| {gb_t:.1e}, res factor {factor:.2f}")


def test_conformal_energy_inversion_invariant():
    base = build_surface("torus_of_revolution", resolution=(64, 64),
                         R=2.0, r=1.0)
    inv = build_surface("inverted", resolution=(64, 64),
                        base="torus_of_revolution")
    ce, ce_inv = conformal_energy(base), conformal_energy(inv)
    rel = abs(ce_inv / ce - 1)
    _verdict("conformal energy invariant under inversion", rel <= 1e-2,
             f"rel change {rel:.1e}")


def test_hessian_properties():
    # Mobius null ratios at h and h/2, min sphere eigenvalue, Sylvester
    # counts under the nonuniform weight, flat-annulus factorization.
    detail = []
    ok = True

    def null_ratio(kind, res):
        p = build_surface(kind, res)
        f = derive_geometry(p)
        asm = assemble_Q(p, f)
        return max(
            abs(q_value(asm, u)) / mass_value(asm, u)
            for u in mobius_null_fields(p, f)
            if mass_value(asm, u) > 1e-12
        )

    for kind, coarse, fine in (("round_sphere", (64, 32), (128, 64)),
                               ("clifford_torus", (64, 64), (128, 128))):
        eps_c, eps_f = null_ratio(kind, coarse), null_ratio(kind, fine)
        factor = eps_c / eps_f
        ok &= eps_f < 1e-2 and 2.8 <= factor <= 5.2
        detail.append(f"{kind} eps {eps_f:.1e} x{factor:.2f}")

    sphere = build_surface("round_sphere", (64, 32))
    asm = assemble_Q(sphere)
    eps_sphere = null_ratio("round_sphere", (64, 32))
    counts = {}
    for wname, weight in (("uniform", "uniform"),
                          ("nonuniform", index_weight_spec(0.5, 0.75))):
        tol, _ = calibrate_tol_null(
            lambda r: build_surface("round_sphere", r), (64, 32),
            k=12, weight=weight)
        counts[wname] = spectrum(asm, weight=weight, k=12, tol_null=tol)
    lam0 = float(counts["uniform"].eigenvalues[0])
    ok &= lam0 >= -eps_sphere
    detail.append(f"min eig {lam0:.3f}")
    pair_s = [(c.index, c.nullity) for c in counts.values()]
    ok &= pair_s[0] == pair_s[1]

    casm = assemble_Q(build_surface("clifford_torus", (64, 64)))
    pair_c = []
    for weight in ("uniform", index_weight_spec(0.5, 0.75)):
        tol, _ = calibrate_tol_null(
            lambda r: build_surface("clifford_torus", r), (64, 64),
            k=12, weight=weight)
        cnt = spectrum(casm, weight=weight, k=12, tol_null=tol)
        pair_c.append((cnt.index, cnt.nullity))
    ok &= pair_c[0] == pair_c[1]
    detail.append(f"counts sphere {pair_s[0]}={pair_s[1]}, "
                  f"cliff {pair_c[0]}={pair_c[1]}")

    a, b, n1, n2 = np.exp(-2.0), 1.0, 48, 36
    p = build_surface("flat_plane", (n1, n2), a=a, b=b)
    cnt = spectrum(assemble_Q(p), k=10, tol_null=1e-10)
    grid = RadialGrid(a, b, N=n1 - 2)
    uni = WeightSpec("uniform", a, b)
    pool = []
    for n in range(0, n2 // 2 + 1):
        n2_eff = (2 - 2 * np.cos(n * p.h2)) / p.h2**2
        op = attach_weight_mass(
            assemble_mode_operator_2d(1, n, grid, n2_value=n2_eff), uni)
        rep = solve_geneig_sym(op.A, op.B_weight, k=4, want_vectors=False)
        mult = 1 if n in (0, n2 // 2) else 2
        for v in rep.eigenvalues:
            pool.extend([0.5 * v] * mult)
    ref = np.sort(pool)[:10]
    flat_rel = float(np.max(np.abs(cnt.eigenvalues - ref) / np.abs(ref)))
    ok &= flat_rel < 1e-8
    detail.append(f"flat rel {flat_rel:.1e}")

    _verdict("second-variation spectral properties", ok, ", ".join(detail))


def test_residues_and_log_gradient_norm():
    cat = build_surface("catenoid", resolution=(96, 48), t=1.0, S=2.0)
    cfields = derive_geometry(cat)
    g_mid = second_residue(cat, cfields)["gamma1"]
    g_hi = second_residue(cat, cfields, row=cat.x1.size // 4)["gamma1"]
    contractible = float(np.linalg.norm(g_mid))
    homotopy = float(np.linalg.norm(g_mid - g_hi))
    sphere = build_surface("round_sphere", resolution=64)
    g_sphere = float(np.linalg.norm(second_residue(sphere)["gamma1"]))
    worst_formula = 0.0
    for ell in (2.0, 4.0, 8.0):
        f = inverse_radius_field(np.exp(-ell), 1.0, 4096, 8, radial="log")
        worst_formula = max(worst_formula, abs(
            norm_l21(f) / closed_form_l21_log_gradient(ell) - 1))
    ok = (contractible <= 1e-6 and g_sphere <= 1e-6
          and homotopy <= 1e-6 and worst_formula <= 1e-2)
    _verdict("second residues vanish and the log-gradient norm matches", ok,
             f"|g1| {contractible:.1e}, homotopy {homotopy:.1e}, "
             f"formula {worst_formula:.1e}")
