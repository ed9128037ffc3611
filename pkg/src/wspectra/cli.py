"""Command-line experiment runner.

Every verification in the package sits behind one subcommand.  A run
reads its parameters from flags or from a flat ``key = value`` config
file (flags win), writes bit-stable reports (CSV with LF endings and 17
significant digits, or pretty JSON) plus two-column gnuplot data files
for numeric series, and exits 0 only when every asserted check passed.
Exit 2 flags a failed mathematical check, exit 1 a usage or
configuration problem, so CI can tell the two apart.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import annulus_harmonics as ah
from . import immersion_geometry as ig
from . import lorentz_norms as ln
from . import neck_lab as nl
from . import singular_spectra as ss
from . import willmore_hessian as wh
from .errors import IoError, WspectraError
from .numlin import solve_geneig_sym

SUBCOMMANDS = (
    "harmonic-props", "lorentz-forms", "eig-2d", "eig-dim",
    "weighted-poincare", "interp-const", "div-bound", "surface-geometry",
    "hessian-index", "neck-sweep", "quantization",
)

# Which verifications each subcommand carries; the audit test checks that
# every check name appears exactly once.
COVERAGE = {
    "lorentz-forms": ["inverse_radius_closed_forms", "weak_norm_plane_value"],
    "harmonic-props": ["harmonic_annulus_suite", "monotonicity_equality",
                       "dyadic_sequence_lemma"],
    "eig-2d": ["singular_mode_lower_bounds"],
    "eig-dim": ["rellich_bracket_and_limits"],
    "weighted-poincare": ["weighted_poincare_uniformity"],
    "interp-const": ["interpolation_constant_sweep"],
    "div-bound": ["divergence_weight_bound"],
    "surface-geometry": ["surface_energy_golden_values",
                         "inversion_invariance", "residual_refinement"],
    "hessian-index": ["hessian_null_fields", "index_weight_invariance",
                      "flat_annulus_factorization"],
    "neck-sweep": ["neck_ring_profiles", "neck_positivity_margins"],
    "quantization": ["residue_quantization_trend",
                     "log_gradient_lorentz_formula", "contractible_residue"],
}


class UsageError(Exception):
    pass


# ------------------------------------------------------------ parameters

_REQUIRED = object()


def _conv_int(v):
    try:
        return int(str(v).strip())
    except ValueError:
        raise UsageError(f"not an integer: {v!r}")


def _conv_float(v):
    try:
        return float(str(v).strip())
    except ValueError:
        raise UsageError(f"not a number: {v!r}")


def _conv_floats(v):
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    try:
        return tuple(float(x) for x in str(v).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"not a comma-separated number list: {v!r}")


def _conv_pair(v):
    if isinstance(v, (tuple, list)):
        return tuple(int(x) for x in v)
    parts = [p for p in str(v).split(",") if p.strip()]
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"not a resolution: {v!r}")
    if len(nums) == 1:
        return (nums[0], nums[0])
    if len(nums) == 2:
        return tuple(nums)
    raise UsageError(f"resolution needs one or two integers: {v!r}")


def _conv_str(v):
    return str(v).strip()


# name -> [(option, converter, default)], _REQUIRED marks mandatory ones
SPECS = {
    "lorentz-forms": [
        ("a", _conv_float, 0.1), ("b", _conv_float, 1.0),
        ("nr", _conv_int, 1024), ("ntheta", _conv_int, 512),
        ("weak-a", _conv_float, 1e-3),
    ],
    "harmonic-props": [
        ("seed", _conv_int, 7), ("count", _conv_int, 100),
        ("a", _conv_float, 0.01), ("b", _conv_float, 1.0),
        ("sequence-count", _conv_int, 1000),
    ],
    "eig-2d": [
        ("m", _conv_int, _REQUIRED), ("L", _conv_floats, (2.0, 4.0, 8.0)),
        ("N", _conv_int, 400), ("n-max", _conv_int, 8),
    ],
    "eig-dim": [
        ("d", _conv_int, _REQUIRED), ("L", _conv_floats, (2.0, 4.0, 8.0)),
        ("l-max", _conv_int, 8), ("N", _conv_int, 400),
    ],
    "weighted-poincare": [
        ("m", _conv_int, 1), ("beta", _conv_float, None),
        ("alpha", _conv_float, None),
        ("L", _conv_floats, (2.0, 4.0, 8.0, 16.0)),
        ("n-max", _conv_int, 6), ("N", _conv_int, 240),
    ],
    "interp-const": [
        ("beta", _conv_float, 0.75), ("gamma", _conv_float, 0.6),
        ("L", _conv_floats, (4.0, 8.0, 16.0)), ("N", _conv_int, 240),
    ],
    "div-bound": [
        ("alpha", _conv_floats, (3.0, 4.0)), ("count", _conv_int, 50),
        ("seed", _conv_int, 11), ("N", _conv_int, 400),
    ],
    "surface-geometry": [
        ("surface", _conv_str, _REQUIRED), ("res", _conv_pair, (64, 64)),
        ("refine", _conv_int, 0),
    ],
    "hessian-index": [
        ("surface", _conv_str, "round_sphere"), ("res", _conv_pair, None),
        ("k", _conv_int, 12), ("beta", _conv_float, 0.75),
        ("alpha-radius", _conv_float, 0.5),
    ],
    "neck-sweep": [
        ("kind", _conv_str, "scaled_catenoid"),
        ("t", _conv_floats, (1e-2, 2.5e-3)), ("a", _conv_float, 1e-5),
        ("b", _conv_float, 1.0), ("res", _conv_pair, (160, 32)),
        ("rings", _conv_int, 8), ("beta", _conv_float, 0.75),
        ("beta1", _conv_float, 0.75), ("beta2", _conv_float, 0.6),
    ],
    "quantization": [
        ("kind", _conv_str, "scaled_catenoid"),
        ("t", _conv_floats, (1e-2, 1e-3)), ("a", _conv_float, 1e-5),
        ("b", _conv_float, 1.0), ("res", _conv_pair, (192, 32)),
        ("l", _conv_floats, (2.0, 4.0, 8.0)),
    ],
}


# nested single-record reports read better as JSON
_DEFAULT_FMT = {"surface-geometry": "json"}


def _build_parser():
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            raise UsageError(message)

    top = Parser(prog="wspectra", add_help=True)
    subs = top.add_subparsers(dest="subcommand")
    for name, opts in SPECS.items():
        p = subs.add_parser(name, add_help=True)
        for opt, _conv, _default in opts:
            p.add_argument(f"--{opt}", dest=opt.replace("-", "_"),
                           default=None)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--format", dest="fmt", default=None,
                       choices=["csv", "json"])
    return top


def _load_config(path):
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = line.split("=", 1)
            values[key.strip().replace("_", "-")] = val.strip()
    return values


def _effective_config(args, name):
    spec = SPECS[name]
    known = {opt for opt, _c, _d in spec} | {"out", "format"}
    filed = _load_config(args.config) if args.config else {}
    for key in filed:
        if key not in known:
            raise UsageError(f"unknown config key {key!r} for {name}")
    cfg = {}
    for opt, conv, default in spec:
        flag_val = getattr(args, opt.replace("-", "_"))
        raw = flag_val if flag_val is not None else filed.get(opt)
        if raw is None:
            if default is _REQUIRED:
                raise UsageError(f"missing required option --{opt}")
            cfg[opt.replace("-", "_")] = default
        else:
            cfg[opt.replace("-", "_")] = conv(raw)
    cfg["out"] = args.out or filed.get("out") or "wspectra-reports"
    cfg["fmt"] = args.fmt or filed.get("format") or _DEFAULT_FMT.get(
        name, "csv")
    if cfg["fmt"] not in ("csv", "json"):
        raise UsageError(f"unknown format {cfg['fmt']!r}")
    return cfg


def _check_threads_env():
    raw = os.environ.get("WSPECTRA_THREADS")
    if raw is None or not raw.strip():
        return
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"WSPECTRA_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise UsageError("WSPECTRA_THREADS must be positive")


# ------------------------------------------------------------ reporting

def _fmt_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _columns(records):
    cols = []
    for rec in records:
        for key in rec:
            if key not in cols:
                cols.append(key)
    return cols


def _numeric_columns(records, cols):
    out = []
    for c in cols:
        vals = [r.get(c) for r in records]
        if vals and all(
            isinstance(v, (int, float, np.integer, np.floating))
            and not isinstance(v, (bool, np.bool_)) for v in vals
        ):
            out.append(c)
    return out


def _write_text(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}")


def emit_report(records, fmt="csv", path=None, columns=None):
    """Write records to path; returns the list of files written.

    CSV is bit-stable: LF endings, '.' decimal separator, 17 significant
    digits, column order fixed by first appearance.  JSON is pretty with
    sorted keys.  Whenever the records form numeric series, two-column
    gnuplot files are written next to the report, one per dependent
    column against the first numeric column.
    """
    if fmt not in ("csv", "json"):
        raise UsageError(f"unknown format {fmt!r}")
    written = []
    is_records = isinstance(records, list)
    if fmt == "csv":
        if not is_records:
            raise UsageError("CSV needs a list of records")
        cols = columns if columns is not None else _columns(records)
        lines = [",".join(cols)]
        for rec in records:
            lines.append(",".join(_fmt_value(rec.get(c)) for c in cols))
        _write_text(path, "\n".join(lines) + "\n")
    else:
        _write_text(path, json.dumps(_jsonable(records), indent=2,
                                     sort_keys=True) + "\n")
    written.append(path)
    if is_records and records:
        cols = columns if columns is not None else _columns(records)
        nums = _numeric_columns(records, cols)
        base = path[: -len(os.path.splitext(path)[1])] if "." in \
            os.path.basename(path) else path
        if len(nums) >= 2:
            x = nums[0]
            for y in nums[1:]:
                twin = f"{base}.{y}.dat"
                body = "".join(
                    f"{_fmt_value(r[x])} {_fmt_value(r[y])}\n"
                    for r in records
                )
                _write_text(twin, body)
                written.append(twin)
        elif len(nums) == 1:
            y = nums[0]
            twin = f"{base}.{y}.dat"
            body = "".join(
                f"{i} {_fmt_value(r[y])}\n" for i, r in enumerate(records)
            )
            _write_text(twin, body)
            written.append(twin)
    return written


def _passed(rows):
    return all(r.get("passed") is not False for r in rows)


def _report_path(cfg, name, ext=None):
    os.makedirs(cfg["out"], exist_ok=True)
    return os.path.join(cfg["out"], f"{name}.{ext or cfg['fmt']}")


# ------------------------------------------------------------ handlers

def _run_lorentz_forms(cfg):
    a, b = cfg["a"], cfg["b"]
    if not 0 < a < b:
        raise UsageError("need 0 < a < b")
    if not 0 < cfg["weak_a"] < b:
        raise UsageError("need 0 < weak-a < b")
    f = ln.inverse_radius_field(a, b, cfg["nr"], cfg["ntheta"])
    fw = ln.inverse_radius_field(cfg["weak_a"], b, cfg["nr"], cfg["ntheta"],
                                 radial="log")
    rows = []
    for check, measured, expected, tol in (
        ("l2_inv_radius", ln.norm_l2(f),
         ln.closed_form_l2_inv_radius(a, b), 2e-3),
        ("l21_inv_radius", ln.norm_l21(f),
         ln.closed_form_l21_inv_radius(a, b), 5e-3),
        ("weak_inv_radius", ln.norm_l2_weak(fw),
         ln.closed_form_weak_inv_radius_plane(), 5e-3),
    ):
        rel = abs(measured / expected - 1)
        rows.append({"check": check, "measured": measured,
                     "expected": expected, "rel_err": rel, "tol": tol,
                     "passed": bool(rel <= tol)})
    emit_report(rows, cfg["fmt"], _report_path(cfg, "lorentz-forms"))
    return 0 if _passed(rows) else 2


def _run_harmonic_props(cfg):
    if cfg["count"] < 1 or cfg["sequence_count"] < 1:
        raise UsageError("counts must be positive")
    a, b = cfg["a"], cfg["b"]
    if not 0 < a < b or 4 * a > b / 4:
        raise UsageError("need 0 < a < b with b >= 16 a for the dyadic check")
    rng = np.random.default_rng(cfg["seed"])
    ann = ah.AnnulusSpec(a, b)
    t_min = np.sqrt(a / b)
    fails = {"pointwise_bound": 0, "average_bound": 0,
             "monotonicity": 0, "ball_decay": 0}
    worst = {"pointwise_bound": 0.0, "average_bound": 0.0}
    for _ in range(cfg["count"]):
        h = ah.random_zero_flux(rng, K=8)
        rep = ah.check_pointwise_bound(h, ann, n_circles=32, n_angles=128)
        worst["pointwise_bound"] = max(worst["pointwise_bound"],
                                       rep["max_ratio"])
        fails["pointwise_bound"] += not rep["pass"]
        rep = ah.check_average_bound(h, ann)
        worst["average_bound"] = max(worst["average_bound"],
                                     rep["max_ratio"])
        fails["average_bound"] += not rep["pass"]
        t = rng.uniform(t_min * 1.01, 1.0)
        fails["monotonicity"] += not ah.check_monotonicity(h, ann, t)
        hp = ah.random_zero_flux(rng, K=8, negative=False)
        fails["ball_decay"] += not ah.check_ball_decay(hp)
    rows = [
        {"check": name, "instances": cfg["count"], "failures": n,
         "worst_ratio": worst.get(name), "passed": bool(n == 0)}
        for name, n in fails.items()
    ]
    ratio = ah.monotonicity_ratio(
        ah.LaurentHarmonic(coeffs={1: 1.0}), ah.AnnulusSpec(0.0, b), 0.5)
    rows.append({"check": "monotonicity_equality", "instances": 1,
                 "failures": int(abs(ratio - 1) > 1e-9),
                 "worst_ratio": ratio,
                 "passed": bool(abs(ratio - 1) <= 1e-9)})

    seq_fail = 0
    margin_min = np.inf
    for _ in range(cfg["sequence_count"]):
        n = int(rng.integers(2, 20))
        aa = rng.uniform(0, 3, n)
        bb = rng.uniform(0, 1, n)
        s = rng.uniform(0.05, 0.8)
        t = rng.uniform(s + 0.05, 0.95)
        N1 = int(rng.integers(0, max(1, n // 2)))
        need = 0.0
        for k in range(N1, n + 8):
            ak = aa[k] if k < n else 0.0
            bk = bb[k] if k < n else 0.0
            ker = ah.sequence_kernel_sum(aa, s, k, 0, n - 1)
            if ak > bk and ker > 0:
                need = max(need, (ak - bk) / np.sqrt(ker))
        rep = ah.check_sequence_lemma(aa, bb, s=s, t=t,
                                      Gamma=need * (1 + rng.uniform(0, 1)),
                                      N1=N1)
        if not (rep["hypothesis_holds"] and rep["conclusion_holds"]):
            seq_fail += 1
        else:
            margin_min = min(margin_min, rep["margin"])
    rows.append({"check": "sequence_lemma",
                 "instances": cfg["sequence_count"], "failures": seq_fail,
                 "worst_ratio": margin_min, "passed": bool(seq_fail == 0)})
    emit_report(rows, cfg["fmt"], _report_path(cfg, "harmonic-props"))
    return 0 if _passed(rows) else 2


def _run_eig_2d(cfg):
    if cfg["m"] < 1:
        raise UsageError("order m must be a positive integer")
    if any(L <= 0 for L in cfg["L"]) or cfg["N"] < 32 or cfg["n_max"] < 0:
        raise UsageError("need positive L values, N >= 32, n-max >= 0")
    rows = ss.verify_singular_annulus_bounds(
        cfg["m"], L_list=cfg["L"], n_max=cfg["n_max"], N=cfg["N"])
    emit_report(rows, cfg["fmt"], _report_path(cfg, "eig-2d"))
    return 0 if _passed(rows) else 2


def _run_eig_dim(cfg):
    if cfg["d"] < 3:
        raise UsageError("dimension d must be >= 3")
    if any(L <= 0 for L in cfg["L"]) or cfg["N"] < 32:
        raise UsageError("need positive L values and N >= 32")
    rows = ss.verify_rellich_bounds(cfg["d"], L_list=cfg["L"],
                                    l_max=cfg["l_max"], N=cfg["N"])
    emit_report(rows, cfg["fmt"], _report_path(cfg, "eig-dim"))
    return 0 if _passed(rows) else 2


def _run_weighted_poincare(cfg):
    m = cfg["m"]
    if m < 1:
        raise UsageError("order m must be a positive integer")
    if m == 1:
        beta = cfg["beta"]
        if beta is None:
            raise UsageError("m = 1 needs --beta")
        if not (0.5 < beta < 1 and beta > np.sqrt(2) - 1):
            raise UsageError("need 1/2 < beta < 1")
        rows = ss.verify_weighted_poincare(1, beta=beta, L_list=cfg["L"],
                                           n_max=cfg["n_max"], N=cfg["N"])
    else:
        alpha = cfg["alpha"]
        if alpha is None or alpha <= 0:
            raise UsageError("m > 1 needs --alpha > 0")
        rows = ss.verify_weighted_poincare(m, alpha=alpha, L_list=cfg["L"],
                                           n_max=cfg["n_max"], N=cfg["N"])
    emit_report(rows, cfg["fmt"], _report_path(cfg, "weighted-poincare"))
    return 0 if _passed(rows) else 2


def _run_interp_const(cfg):
    beta, gamma = cfg["beta"], cfg["gamma"]
    if not 0.5 < beta < 1:
        raise UsageError("need 1/2 < beta < 1")
    if not np.sqrt(2) - 1 < gamma < 1:
        raise UsageError("need sqrt(2)-1 < gamma < 1")
    L_min = ss.interpolation_admissible_L(beta)
    bad = [L for L in cfg["L"] if L < L_min]
    if bad:
        raise UsageError(
            f"L values {bad} below the admissible length {L_min:.4f}")
    rep = ss.verify_interpolation_sweep(beta, gamma, L_list=cfg["L"],
                                        N=cfg["N"])
    rows = [dict(r, kind="interp", passed=None) for r in rep["reports"]]
    rows.append({"kind": "interp_summary", "L": "sweep", "beta": beta,
                 "gamma": gamma, "N": cfg["N"], "C": max(
                     r["C"] for r in rep["reports"]),
                 "ratio": rep["ratio"], "passed": rep["passed"]})
    emit_report(rows, cfg["fmt"], _report_path(cfg, "interp-const"))
    return 0 if _passed(rows) else 2


def _run_div_bound(cfg):
    for alpha in cfg["alpha"]:
        if alpha**2 <= 8:
            raise UsageError("need alpha^2 > 8 for a positive constant")
    if cfg["count"] < 1:
        raise UsageError("count must be positive")
    rng = np.random.default_rng(cfg["seed"])
    corpus = [ss.random_div_source(rng, N=cfg["N"])
              for _ in range(cfg["count"])]
    rows = []
    for alpha in cfg["alpha"]:
        rows.extend(ss.verify_div_weight_bound(alpha, corpus, N=cfg["N"]))
    emit_report(rows, cfg["fmt"], _report_path(cfg, "div-bound"))
    return 0 if _passed(rows) else 2


_SURFACES = ("round_sphere", "clifford_torus", "torus_of_revolution",
             "catenoid", "flat_plane")


def _run_surface_geometry(cfg):
    name = cfg["surface"]
    if name not in _SURFACES:
        raise UsageError(
            f"unknown surface {name!r}; choose from {', '.join(_SURFACES)}")
    res = cfg["res"]
    patch = ig.build_surface(name, resolution=res)
    fields = ig.derive_geometry(patch)
    W = ig.willmore_energy(patch, fields)
    CE = ig.conformal_energy(patch, fields)
    NE = ig.normal_energy(patch, fields)
    GB = ig.integrate(patch, fields.K * fields.e2l)
    _, rms = ig.willmore_residual(patch, fields)

    checks = []

    def add(label, measured, expected, tol, mode="rel"):
        err = abs(measured - expected) / (abs(expected) if mode == "rel"
                                          else 1.0)
        checks.append({"check": label, "measured": measured,
                       "expected": expected, "err": err, "tol": tol,
                       "passed": bool(err <= tol)})

    if name == "round_sphere":
        add("willmore_energy", W, 4 * np.pi, 1e-3)
        add("normal_energy", NE, 8 * np.pi, 5e-3)
        add("gauss_bonnet", GB, 4 * np.pi, 5e-3)
    elif name == "clifford_torus":
        add("willmore_energy", W, 2 * np.pi**2, 5e-3)
        add("gauss_bonnet_flat", GB, 0.0, 0.05, mode="abs")
        if cfg["refine"]:
            fine = ig.build_surface(name, resolution=(2 * res[0], 2 * res[1]))
            _, rms_fine = ig.willmore_residual(fine)
            add("residual_refinement_factor", rms / rms_fine, 4.0, 0.30)
    elif name == "torus_of_revolution":
        inv = ig.build_surface("inverted", resolution=res, base=name)
        CE_inv = ig.conformal_energy(inv)
        add("conformal_energy_inversion", CE_inv, CE, 1e-2)
    elif name == "catenoid":
        S = patch.params["S"]
        add("normal_energy", NE, 8 * np.pi * np.tanh(S), 1e-2)
    else:
        add("willmore_energy_flat", W, 0.0, 1e-10, mode="abs")
        add("conformal_energy_flat", CE, 0.0, 1e-10, mode="abs")

    report = {
        "surface": name,
        "resolution": list(res),
        "willmore_energy": W,
        "conformal_energy": CE,
        "normal_energy": NE,
        "gauss_bonnet": GB,
        "willmore_residual_rms": rms,
        "checks": checks,
    }
    if cfg["fmt"] == "json":
        emit_report(report, "json", _report_path(cfg, "surface-geometry"))
    else:
        emit_report(checks, "csv", _report_path(cfg, "surface-geometry"))
    return 0 if _passed(checks) else 2


def _hessian_closed(name, res):
    patch = ig.build_surface(name, resolution=res)
    return wh.assemble_Q(patch), patch


def _run_hessian_index(cfg):
    name = cfg["surface"]
    if name not in ("round_sphere", "clifford_torus", "flat_annulus"):
        raise UsageError(
            "surface must be round_sphere, clifford_torus or flat_annulus")
    if cfg["k"] < 1:
        raise UsageError("k must be positive")
    rows = []

    if name == "flat_annulus":
        res = cfg["res"] or (48, 36)
        n1, n2 = res
        a, b = np.exp(-2.0), 1.0
        patch = ig.build_surface("flat_plane", resolution=res, a=a, b=b)
        asm = wh.assemble_Q(patch)
        counts = wh.spectrum(asm, k=6, tol_null=1e-10)
        grid = ss.RadialGrid(a, b, N=n1 - 2)
        uni = ss.WeightSpec("uniform", a, b)
        pool = []
        for n in range(0, n2 // 2 + 1):
            n2e = (2 - 2 * np.cos(n * patch.h2)) / patch.h2**2
            op = ss.assemble_mode_operator_2d(1, n, grid, n2_value=n2e)
            op = ss.attach_weight_mass(op, uni)
            rep = solve_geneig_sym(op.A, op.B_weight, k=4,
                                   want_vectors=False)
            mult = 1 if n in (0, n2 // 2) else 2
            for v in rep.eigenvalues:
                pool.extend([0.5 * float(v)] * mult)
        ref = np.sort(pool)[:6]
        for i, (two_d, one_d) in enumerate(zip(counts.eigenvalues, ref)):
            rel = abs(two_d / one_d - 1)
            rows.append({"check": f"flat_match_{i}", "measured": two_d,
                         "expected": one_d, "err": rel, "tol": 1e-8,
                         "passed": bool(rel <= 1e-8)})
    else:
        res = cfg["res"] or ((64, 32) if name == "round_sphere" else (64, 64))
        asm, patch = _hessian_closed(name, res)
        fine_res = (2 * res[0], 2 * res[1])
        asm_f, patch_f = _hessian_closed(name, fine_res)

        def null_ratio(a_, p_):
            vals = []
            for u in wh.mobius_null_fields(p_):
                m = wh.mass_value(a_, u)
                if m > 1e-12:
                    vals.append(abs(wh.q_value(a_, u)) / m)
            return max(vals)
        eps_c = null_ratio(asm, patch)
        eps_f = null_ratio(asm_f, patch_f)
        factor = eps_c / eps_f
        rows.append({"check": "null_ratio_refinement", "measured": factor,
                     "expected": 4.0, "err": abs(factor - 4) / 4.0,
                     "tol": 0.5, "passed": bool(2.0 <= factor <= 8.0)})
        rows.append({"check": "null_fields_small", "measured": eps_f,
                     "expected": 0.0, "err": eps_f, "tol": 1e-2,
                     "passed": bool(eps_f <= 1e-2)})

        builder = (lambda r: ig.build_surface(name, resolution=r))
        weights = [("uniform", "uniform"),
                   ("indexw", wh.index_weight_spec(cfg["alpha_radius"],
                                                   cfg["beta"]))]
        counts_by = {}
        for wname, weight in weights:
            tol, _ = wh.calibrate_tol_null(builder, res, k=cfg["k"],
                                           weight=weight)
            counts_by[wname] = wh.spectrum(asm, weight=weight, k=cfg["k"],
                                           tol_null=tol)
        iu, nu = counts_by["uniform"].index, counts_by["uniform"].nullity
        iw, nw = counts_by["indexw"].index, counts_by["indexw"].nullity
        rows.append({"check": "index_weight_invariance",
                     "measured": float(iu * 100 + nu),
                     "expected": float(iw * 100 + nw),
                     "err": float(abs(iu - iw) + abs(nu - nw)), "tol": 0.0,
                     "passed": bool((iu, nu) == (iw, nw))})
        if name == "round_sphere":
            lam0 = float(counts_by["uniform"].eigenvalues[0])
            rows.append({"check": "min_eig_above_minus_eps",
                         "measured": lam0, "expected": 0.0,
                         "err": max(0.0, -lam0), "tol": eps_f,
                         "passed": bool(lam0 >= -eps_f)})
    emit_report(rows, cfg["fmt"], _report_path(cfg, "hessian-index"))
    return 0 if _passed(rows) else 2


def _run_neck_sweep(cfg):
    try:
        family = nl.NeckFamily(cfg["kind"], cfg["t"], a=cfg["a"], b=cfg["b"],
                               resolution=cfg["res"])
    except WspectraError as exc:
        raise UsageError(str(exc))
    report = nl.neck_sweep(family, rings=cfg["rings"], beta=cfg["beta"],
                           beta1=cfg["beta1"], beta2=cfg["beta2"])
    rows = []
    for prof in report.profiles:
        for j, e in enumerate(prof["ring_energies"]):
            rows.append({"t": prof["t"], "ring": j, "energy": float(e)})
    emit_report(rows, "csv", _report_path(cfg, "neck-sweep", "csv"))
    summary = {
        "t": report.t,
        "l21": report.l21,
        "C_emp": [d["C_emp"] for d in report.decay],
        "lambda1_hat": [p["lambda1_hat"] for p in report.positivity],
        "lambda2_hat": [p["lambda2_hat"] for p in report.positivity],
        "min_margin": [p["min_margin"] for p in report.positivity],
        "all_q_positive": [p["all_q_positive"] for p in report.positivity],
        "small_energy_regime": [p["small_energy_regime"]
                                for p in report.positivity],
        "margin_monotone": report.margin_monotone,
        "violations": report.violations,
    }
    emit_report(summary, "json", _report_path(cfg, "neck-sweep", "json"))
    ok = report.validate() and all(
        p["all_q_positive"] or not p["small_energy_regime"]
        for p in report.positivity)
    return 0 if ok else 2


def _run_quantization(cfg):
    try:
        family = nl.NeckFamily(cfg["kind"], cfg["t"], a=cfg["a"], b=cfg["b"],
                               resolution=cfg["res"])
    except WspectraError as exc:
        raise UsageError(str(exc))
    rep = nl.quantization_criterion(family)
    rows = []
    for i, t in enumerate(rep["t"]):
        patch = family.generator(t)
        g_waist = ig.second_residue(patch, radius=t)["gamma1"]
        g_mid = ig.second_residue(
            patch, radius=float(np.sqrt(t * cfg["b"])))["gamma1"]
        diff = float(np.linalg.norm(g_waist - g_mid))
        rows.append({
            "kind": "neck", "t": t,
            "gamma1_norm": rep["gamma1_norm"][i],
            "neck_length": rep["neck_length"][i],
            "product": float(rep["product"][i]),
            "l21_neck": rep["l21_neck"][i],
            "homotopy_diff": diff,
            "passed": bool(diff <= 1e-6),
        })
    sphere = ig.build_surface("round_sphere", resolution=64)
    g = np.linalg.norm(ig.second_residue(sphere)["gamma1"])
    rows.append({"kind": "contractible_sphere",
                 "gamma1_norm": float(g),
                 "passed": bool(g <= 1e-6)})
    for ell in cfg["l"]:
        f = ln.inverse_radius_field(np.exp(-ell), 1.0, 4096, 8, radial="log")
        measured = ln.norm_l21(f)
        expected = ln.closed_form_l21_log_gradient(ell)
        rel = abs(measured / expected - 1)
        rows.append({"kind": "log_gradient_formula", "neck_length": ell,
                     "l21_neck": measured, "rel_err": rel,
                     "passed": bool(rel <= 1e-2)})
    rows.append({"kind": "trend", "trend": rep["trend"],
                 "passed": bool(rep["criterion_met"])})
    emit_report(rows, cfg["fmt"], _report_path(cfg, "quantization"))
    return 0 if _passed(rows) else 2


HANDLERS = {
    "lorentz-forms": _run_lorentz_forms,
    "harmonic-props": _run_harmonic_props,
    "eig-2d": _run_eig_2d,
    "eig-dim": _run_eig_dim,
    "weighted-poincare": _run_weighted_poincare,
    "interp-const": _run_interp_const,
    "div-bound": _run_div_bound,
    "surface-geometry": _run_surface_geometry,
    "hessian-index": _run_hessian_index,
    "neck-sweep": _run_neck_sweep,
    "quantization": _run_quantization,
}


def run(argv=None):
    """Dispatch a single subcommand; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            raise UsageError("a subcommand is required "
                             f"(one of: {', '.join(SUBCOMMANDS)})")
        _check_threads_env()
        cfg = _effective_config(args, args.subcommand)
        return HANDLERS[args.subcommand](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except WspectraError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
