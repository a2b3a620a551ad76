import csv
import io
import subprocess
import sys

import pytest

from gpd_elcr.cli import main, parse_k_range, read_values
from gpd_elcr.el_core import el_ratio
from gpd_elcr.models import extract_excesses


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def as_dict(text):
    header, values = rows(text)[:2]
    return dict(zip(header, values))


class TestInput:
    def test_header_and_comments(self, tmp_path):
        p = tmp_path / "x.txt"
        p.write_text("# comment\nvalue\n1.5\n\n2.5  # trailing\n3\n")
        assert list(read_values(str(p))) == [1.5, 2.5, 3.0]

    def test_bad_line_reports_number(self, tmp_path, capsys):
        p = tmp_path / "x.txt"
        p.write_text("1\n2\nnan\n")
        code, _, err = run(["fit", str(p), "--k", "5"], capsys)
        assert code == 1 and ":3:" in err

    def test_missing_file(self, capsys):
        code, _, _ = run(["fit", "/nonexistent/file", "--k", "5"], capsys)
        assert code == 1

    def test_k_ranges(self):
        assert parse_k_range("50:100:25") == [50, 75, 100]
        assert parse_k_range("10,20") == [10, 20]
        with pytest.raises(Exception):
            parse_k_range("3")


class TestFit:
    def test_fixture(self, fixture_path, capsys):
        code, out, _ = run(["fit", fixture_path, "--k", "200", "--r", "-0.5", "--mle"], capsys)
        assert code == 0
        d = as_dict(out)
        assert 0.6 <= float(d["gamma"]) <= 1.4
        assert int(d["k"]) == 200 and float(d["b"]) < 0
        assert float(d["ml_gamma"]) > 0

    def test_usage_errors(self, fixture_path, capsys):
        assert run(["fit", fixture_path, "--k", "0"], capsys)[0] == 64
        assert run(["fit", fixture_path, "--k", "20", "--r", "0.7"], capsys)[0] == 64
        assert run(["fit", fixture_path, "--k", "5000"], capsys)[0] == 64
        assert run(["fit", fixture_path], capsys)[0] == 64
        assert run(["nonsense"], capsys)[0] == 64

    def test_constant_column(self, tmp_path, capsys):
        p = tmp_path / "c.txt"
        p.write_text("4.0\n" * 50)
        assert run(["fit", str(p), "--k", "10"], capsys)[0] == 2


class TestRegion:
    def test_el_boundary_self_check(self, fixture_path, capsys):
        code, out, _ = run(["region", fixture_path, "--k", "200", "--method", "el", "--level", "0.95"], capsys)
        assert code == 0
        table = rows(out)
        assert table[0] == ["method", "level", "critical_value"]
        c = float(table[1][2])
        ex = extract_excesses(read_values(fixture_path), 200)
        verts = [(float(g), float(s)) for _, _, g, s in table[3:]]
        assert verts
        for g, s in verts:
            assert s > 0 and g > 0
            assert abs(el_ratio(ex.excesses, g, s, -0.5) - c) <= 0.02 * c

    def test_zhang_center_matches_fit(self, fixture_path, capsys):
        _, fit_out, _ = run(["fit", fixture_path, "--k", "200"], capsys)
        d = as_dict(fit_out)
        code, out, _ = run(["region", fixture_path, "--k", "200", "--method", "zhang"], capsys)
        assert code == 0
        pts = [(float(g), float(s)) for _, _, g, s in rows(out)[3:]]
        # the ellipse is symmetric in the standardized coordinates about the fit
        g_mid = 0.5 * (max(p[0] for p in pts) + min(p[0] for p in pts))
        assert g_mid == pytest.approx(float(d["gamma"]), rel=1e-3)

    def test_levels_nest(self, fixture_path, capsys, tmp_path):
        ex = extract_excesses(read_values(fixture_path), 200)
        _, out95, _ = run(["region", fixture_path, "--k", "200", "--level", "0.95"], capsys)
        _, out99, _ = run(["region", fixture_path, "--k", "200", "--level", "0.99"], capsys)
        c99 = float(rows(out99)[1][2])
        for _, _, g, s in rows(out95)[3:]:
            assert el_ratio(ex.excesses, float(g), float(s), -0.5) <= c99

    def test_dump_grid(self, fixture_path, capsys, tmp_path):
        grid = tmp_path / "grid.csv"
        code, _, _ = run(["region", fixture_path, "--k", "100", "--dump-grid", str(grid)], capsys)
        assert code == 0
        assert grid.read_text().splitlines()[0] == "gamma,sigma,stat"
        assert run(["region", fixture_path, "--k", "100", "--method", "zhang", "--dump-grid", str(grid)],
                   capsys)[0] == 64


class TestCi:
    def test_elw_contains_fit(self, fixture_path, capsys):
        _, fit_out, _ = run(["fit", fixture_path, "--k", "200"], capsys)
        gamma = float(as_dict(fit_out)["gamma"])
        code, out, _ = run(["ci", fixture_path, "--k", "200", "--method", "elw"], capsys)
        d = as_dict(out)
        assert code == 0
        assert float(d["lo"]) < gamma < float(d["hi"])

    def test_pinned_elp_and_zhang(self, fixture_path, capsys):
        # values pinned when the fixture was generated
        _, out, _ = run(["ci", fixture_path, "--k", "200", "--method", "elp", "--calib-reps", "2000"], capsys)
        elp = as_dict(out)
        _, out, _ = run(["ci", fixture_path, "--k", "200", "--method", "zhang"], capsys)
        zw = as_dict(out)
        assert float(elp["lo"]) == pytest.approx(0.809846027643137, rel=1e-6)
        assert float(elp["hi"]) == pytest.approx(1.0682781046932495, rel=1e-6)
        assert float(zw["lo"]) == pytest.approx(0.6371137419544427, rel=1e-9)
        assert float(zw["hi"]) == pytest.approx(1.1707527971961524, rel=1e-9)
        assert float(elp["width"]) > 0 and float(zw["width"]) > 0

    def test_level_narrows(self, fixture_path, capsys):
        widths = []
        for level in ("0.5", "0.95"):
            _, out, _ = run(["ci", fixture_path, "--k", "200", "--level", level], capsys)
            widths.append(float(as_dict(out)["width"]))
        assert widths[0] < widths[1]

    def test_open_interval_exit_code(self, tmp_path, capsys):
        # six excesses: at 99% the profile stays below the critical value down to gamma -> 0
        p = tmp_path / "short.txt"
        p.write_text("\n".join(str(v) for v in [0.0, 0.2, 0.5, 1.0, 2.0, 5.0, 30.0]))
        code, out, err = run(["ci", str(p), "--k", "6", "--method", "elw", "--level", "0.99"], capsys)
        assert code == 3
        d = as_dict(out)
        assert d["open_lo"] == "1" and d["open_hi"] == "0"
        assert "open-ended" in err


class TestCoverage:
    def test_smoke(self, capsys):
        code, out, _ = run(["coverage", "--model", "burr:1,1", "--n", "1000", "--reps", "10", "--k", "100",
                            "--methods", "el,zhang,ml", "--seed", "1"], capsys)
        assert code == 0
        table = rows(out)
        assert table[0] == ["model", "n", "k", "method", "level", "calibration", "reps", "valid", "failures",
                            "coverage"]
        assert len(table) == 4

    def test_threads_do_not_change_bytes(self, tmp_path, monkeypatch):
        paths = []
        for t in ("1", "3"):
            p = tmp_path / f"cov{t}.csv"
            assert main(["coverage", "--model", "burr:1,1", "--n", "300", "--reps", "12", "--k", "20:60:20",
                         "--methods", "el,zhang,ml,elw", "--seed", "5", "--threads", t, "-o", str(p)]) == 0
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_env_thread_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GPD_ELCR_THREADS", "2")
        p = tmp_path / "cov.csv"
        assert main(["coverage", "--model", "gpd:1,1", "--n", "200", "--reps", "4", "--k", "50",
                     "-o", str(p)]) == 0
        monkeypatch.setenv("GPD_ELCR_THREADS", "zero")
        assert main(["coverage", "--model", "gpd:1,1", "--n", "200", "--reps", "4", "--k", "50",
                     "-o", str(p)]) == 64

    @pytest.mark.parametrize("model", ["bogus", "burr:1", "burr:-1,1"])
    def test_bad_model(self, model, capsys):
        assert run(["coverage", "--model", model, "--k", "100"], capsys)[0] == 64


class TestCalibrate:
    def test_fisher_and_chi2(self, capsys):
        _, out, _ = run(["calibrate", "--k", "1000000"], capsys)
        assert float(as_dict(out)["critical_value"]) == pytest.approx(5.991464547, abs=1e-3)
        _, out, _ = run(["calibrate", "--k", "50", "--calibration", "chi2", "--dim", "1"], capsys)
        assert float(as_dict(out)["critical_value"]) == pytest.approx(3.841458821, abs=1e-9)

    def test_small_k(self, capsys):
        assert run(["calibrate", "--k", "3"], capsys)[0] == 64


def test_module_entry_point(fixture_path):
    res = subprocess.run([sys.executable, "-m", "gpd_elcr", "fit", fixture_path, "--k", "100"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert res.stdout.startswith("k,threshold,r,gamma,sigma,b")
