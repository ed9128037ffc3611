import json

import numpy as np
import pytest

from wspectra.cli import (
    COVERAGE,
    HANDLERS,
    SPECS,
    SUBCOMMANDS,
    UsageError,
    _build_parser,
    emit_report,
    run,
)
from wspectra.errors import IoError


class TestExitCodes:
    def test_no_subcommand(self, capsys):
        assert run([]) == 1
        assert "subcommand" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert run(["definitely-not-a-thing"]) == 1

    def test_eig2d_m_zero_is_usage_error(self, capsys):
        assert run(["eig-2d", "--m", "0"]) == 1
        assert "positive" in capsys.readouterr().err

    def test_eig2d_passes(self, tmp_path):
        rc = run(["eig-2d", "--m", "1", "--L", "2,4", "--N", "120",
                  "--n-max", "2", "--out", str(tmp_path)])
        assert rc == 0
        body = (tmp_path / "eig-2d.csv").read_text()
        assert "false" not in body

    def test_check_failure_exits_2(self, tmp_path):
        # a 12-point radial grid cannot hit the 0.2% closed-form target
        rc = run(["lorentz-forms", "--nr", "12", "--ntheta", "8",
                  "--out", str(tmp_path)])
        assert rc == 2
        body = (tmp_path / "lorentz-forms.csv").read_text()
        assert "false" in body

    def test_missing_required_option(self, capsys):
        assert run(["eig-dim"]) == 1
        assert "--d" in capsys.readouterr().err

    def test_bad_number_in_flag(self):
        assert run(["eig-2d", "--m", "one"]) == 1

    def test_weighted_poincare_bad_beta(self):
        assert run(["weighted-poincare", "--beta", "0.4"]) == 1

    def test_interp_inadmissible_length(self, capsys):
        assert run(["interp-const", "--L", "2"]) == 1
        assert "admissible" in capsys.readouterr().err

    def test_unknown_surface(self):
        assert run(["surface-geometry", "--surface", "banana"]) == 1


class TestConfigFile:
    def test_file_supplies_values(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nr = 256\nntheta = 128   # comment\nformat = json\n")
        out = tmp_path / "rep"
        assert run(["lorentz-forms", "--config", str(cfg),
                    "--out", str(out)]) == 0
        assert (out / "lorentz-forms.json").exists()

    def test_flag_overrides_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nr = 256\nntheta = 128\nformat = json\n")
        out = tmp_path / "rep"
        assert run(["lorentz-forms", "--config", str(cfg), "--format", "csv",
                    "--out", str(out)]) == 0
        assert (out / "lorentz-forms.csv").exists()
        assert not (out / "lorentz-forms.json").exists()

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus = 1\n")
        assert run(["lorentz-forms", "--config", str(cfg)]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_file(self):
        assert run(["lorentz-forms", "--config", "/nonexistent.cfg"]) == 1

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just some words\n")
        assert run(["lorentz-forms", "--config", str(cfg)]) == 1


class TestThreadsEnv:
    def test_zero_rejected(self, monkeypatch):
        monkeypatch.setenv("WSPECTRA_THREADS", "0")
        assert run(["lorentz-forms"]) == 1

    def test_garbage_rejected(self, monkeypatch):
        monkeypatch.setenv("WSPECTRA_THREADS", "soon")
        assert run(["lorentz-forms"]) == 1

    def test_positive_accepted(self, monkeypatch, tmp_path):
        monkeypatch.setenv("WSPECTRA_THREADS", "2")
        assert run(["lorentz-forms", "--nr", "128", "--ntheta", "64",
                    "--out", str(tmp_path)]) == 0


RECORDS = [
    {"step": 0, "value": 1.0 / 3.0, "ok": True},
    {"step": 1, "value": 2.5, "ok": False},
    {"step": 2, "value": -1e-17, "ok": True},
]


class TestEmitReport:
    def test_empty_records_header_only(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report([], "csv", str(p), columns=["a", "b"])
        assert p.read_text() == "a,b\n"

    def test_three_records_four_lines(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report(RECORDS, "csv", str(p))
        lines = p.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0] == "step,value,ok"

    def test_seventeen_digit_floats_and_booleans(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report(RECORDS, "csv", str(p))
        body = p.read_text()
        assert "0.33333333333333331" in body
        assert "true" in body and "false" in body
        assert "True" not in body

    def test_lf_only(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report(RECORDS, "csv", str(p))
        assert b"\r" not in p.read_bytes()

    def test_byte_identical_across_runs(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_report(RECORDS, "csv", str(p1))
        emit_report([dict(r) for r in RECORDS], "csv", str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_keys_render_empty(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report([{"a": 1}, {"b": 2.0}], "csv", str(p))
        assert p.read_text() == "a,b\n1,\n,2\n"

    def test_numeric_twins(self, tmp_path):
        p = tmp_path / "r.csv"
        written = emit_report(RECORDS, "csv", str(p))
        twin = tmp_path / "r.value.dat"
        assert str(twin) in written
        rows = [line.split() for line in twin.read_text().splitlines()]
        assert [r[0] for r in rows] == ["0", "1", "2"]
        assert float(rows[1][1]) == 2.5

    def test_single_numeric_column_indexed_twin(self, tmp_path):
        p = tmp_path / "r.csv"
        emit_report([{"v": 3.0}, {"v": 4.0}], "csv", str(p))
        assert (tmp_path / "r.v.dat").read_text() == "0 3\n1 4\n"

    def test_json_pretty_and_deterministic(self, tmp_path):
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        payload = {"z": np.float64(1.5), "a": [np.int64(2)], "ok": np.True_}
        emit_report(payload, "json", str(p1))
        emit_report(payload, "json", str(p2))
        assert p1.read_bytes() == p2.read_bytes()
        data = json.loads(p1.read_text())
        assert data == {"z": 1.5, "a": [2], "ok": True}

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(IoError):
            emit_report(RECORDS, "csv", str(tmp_path / "no" / "dir.csv"))

    def test_unknown_format(self, tmp_path):
        with pytest.raises(UsageError):
            emit_report(RECORDS, "yaml", str(tmp_path / "r.yaml"))


class TestEndToEnd:
    def test_surface_geometry_sphere_json(self, tmp_path):
        rc = run(["surface-geometry", "--surface", "round_sphere",
                  "--res", "64", "--format", "json", "--out", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "surface-geometry.json").read_text())
        assert data["willmore_energy"] == pytest.approx(4 * np.pi, rel=1e-3)

    def test_harmonic_props_small(self, tmp_path):
        rc = run(["harmonic-props", "--count", "5", "--sequence-count", "25",
                  "--out", str(tmp_path)])
        assert rc == 0

    def test_div_bound_deterministic(self, tmp_path, monkeypatch):
        monkeypatch.delenv("WSPECTRA_THREADS", raising=False)
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        args = ["div-bound", "--count", "4", "--N", "200", "--seed", "3"]
        assert run(args + ["--out", str(d1)]) == 0
        assert run(args + ["--out", str(d2)]) == 0
        assert (d1 / "div-bound.csv").read_bytes() == \
            (d2 / "div-bound.csv").read_bytes()

    def test_hessian_index_flat_annulus(self, tmp_path):
        rc = run(["hessian-index", "--surface", "flat_annulus",
                  "--out", str(tmp_path)])
        assert rc == 0
        body = (tmp_path / "hessian-index.csv").read_text()
        assert "flat_match" in body and "false" not in body

    def test_neck_sweep_reports(self, tmp_path):
        rc = run(["neck-sweep", "--t", "1e-2", "--res", "128,32",
                  "--out", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "neck-sweep.csv").exists()
        data = json.loads((tmp_path / "neck-sweep.json").read_text())
        assert data["all_q_positive"] == [True]
        assert data["violations"] == []

    def test_quantization_trend(self, tmp_path):
        rc = run(["quantization", "--t", "1e-2,1e-3", "--res", "128,32",
                  "--l", "2", "--out", str(tmp_path)])
        assert rc == 0
        body = (tmp_path / "quantization.csv").read_text()
        assert "contractible_sphere" in body
        assert "false" not in body


class TestCoverageAudit:
    """Every verification is reachable from exactly one subcommand."""

    def test_tables_agree(self):
        assert set(SUBCOMMANDS) == set(SPECS)
        assert set(SUBCOMMANDS) == set(HANDLERS)
        assert set(SUBCOMMANDS) == set(COVERAGE)

    def test_parser_knows_every_subcommand(self):
        parser = _build_parser()
        for name in SUBCOMMANDS:
            args = parser.parse_args([name])
            assert args.subcommand == name

    def test_checks_unique_across_subcommands(self):
        seen = {}
        for name, checks in COVERAGE.items():
            assert checks, f"{name} carries no checks"
            for c in checks:
                assert c not in seen, f"{c} in both {seen.get(c)} and {name}"
                seen[c] = name

    def test_every_module_reachable(self):
        # numlin is exercised through every eigenvalue subcommand and the
        # cli module is the runner itself; the mathematical modules each
        # anchor at least one named check.
        anchors = {
            "lorentz_norms": "inverse_radius_closed_forms",
            "annulus_harmonics": "harmonic_annulus_suite",
            "singular_spectra": "singular_mode_lower_bounds",
            "immersion_geometry": "surface_energy_golden_values",
            "willmore_hessian": "hessian_null_fields",
            "neck_lab": "neck_positivity_margins",
        }
        all_checks = {c for checks in COVERAGE.values() for c in checks}
        for module, check in anchors.items():
            assert check in all_checks, f"{module} unreachable"
