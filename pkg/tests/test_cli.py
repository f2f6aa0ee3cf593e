import csv
import json

import pytest

from kahlerlab.cli import dumps, field_from_spec, main, parse_config
from kahlerlab.errors import ConfigError
from kahlerlab.manifold import make_fubini_study

FS1 = "[model]\nmanifold = fs1\nquadrature_level = 32\nangular_level = 16\n"


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("verb, exp, csv_name, header", [
    ("curvature", "", "curvature.csv", ["re_z1", "im_z1", "S", "norm_R_sq", "norm_ric_sq", "delta_S"]),
    ("zcritical", "j = 1\n", "zcritical.csv", ["re_z1", "im_z1", "Z1"]),
    ("bergman", "k = 4, 8\n", "bergman.csv", ["re_z1", "im_z1", "rho_4", "rho_8"]),
    ("tuynman", "k = 4\nf = xcoord\n", "tuynman.csv", ["k", "residual", "skew_residual"]),
    ("variation", "k = 8\n", "variation.csv", ["k", "residual_h", "residual_10h", "residual_5h", "ratio"]),
    ("tyz-fit", "ks = 8, 12, 16, 20, 24, 28, 32\nn_terms = 4\n", "tyz_fit.csv",
     ["re_z1", "im_z1", "a0", "a1", "a2", "S_half"]),
])
def test_verbs(tmp_path, capsys, verb, exp, csv_name, header):
    cfg = write(tmp_path, "[experiment]\n" + exp + FS1)
    out = tmp_path / "out"
    assert main([verb, "-c", cfg, "-o", str(out)]) == 0
    with open(out / csv_name) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == header and len(rows) > 1
    rep = json.loads((out / f"{verb}.json").read_text())
    assert rep["verb"] == verb and all(c["passed"] for c in rep["checks"])
    assert "FAIL" not in capsys.readouterr().out


def test_flow_verb(tmp_path):
    cfg = write(tmp_path, "[experiment]\nflow_tol = 1e-4\n[model]\nmanifold = fs1\nepsilon = 0.1\n"
                          "quadrature_level = 32\n")
    out = tmp_path / "out"
    assert main(["flow", "-c", cfg, "-o", str(out)]) == 0
    with open(out / "flow.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time", "energy", "max_deviation", "dt"]
    energies = [float(r[1]) for r in rows[1:]]
    assert energies == sorted(energies, reverse=True)


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = write(tmp_path, "[experiment]\nk = 4\nbogus = 1\n" + FS1)
    assert main(["bergman", "-c", cfg, "-o", str(tmp_path)]) == 2
    assert ":3:" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["[experiment]\nk = four\n" + FS1, "[other]\nx = 1\n", "k = 4\n",
                                  "[model]\nmanifold = klein\n"])
def test_config_errors_exit_2(tmp_path, text):
    assert main(["bergman", "-c", write(tmp_path, text), "-o", str(tmp_path)]) == 2


def test_parse_config_line_number():
    with pytest.raises(ConfigError) as err:
        parse_config("[model]\nmanifold = fs1\nlevel = 3\n")
    assert err.value.line == 3


def test_failing_check_exits_1(tmp_path):
    cfg = write(tmp_path, "[experiment]\nk = 4\ntolerance = 1e-30\nf = xcoord\n" + FS1)
    assert main(["tuynman", "-c", cfg, "-o", str(tmp_path)]) == 1


def test_output_is_deterministic(tmp_path):
    cfg = write(tmp_path, "[experiment]\nk = 6\n" + FS1)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["bergman", "-c", cfg, "-o", str(a), "--seed", "3"])
    main(["bergman", "-c", cfg, "-o", str(b), "--seed", "3"])
    assert (a / "bergman.csv").read_bytes() == (b / "bergman.csv").read_bytes()
    assert (a / "bergman.json").read_bytes() == (b / "bergman.json").read_bytes()


def test_report_aggregates(tmp_path, capsys):
    out = tmp_path / "out"
    main(["curvature", "-c", write(tmp_path, FS1), "-o", str(out)])
    main(["zcritical", "-c", write(tmp_path, "[experiment]\nj = 1\n" + FS1, "z.ini"), "-o", str(out)])
    assert main(["report", "-o", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reports"] == 2 and summary["passed"]
    assert (out / "summary.csv").exists()


def test_golden_roundtrip_and_drift(tmp_path, capsys):
    cfg = write(tmp_path, "[experiment]\nverb = zcritical\nj = 1\n" + FS1)
    gold = tmp_path / "gold.json"
    out = str(tmp_path / "out")
    assert main(["golden", "-c", cfg, "-o", out, "--golden", str(gold), "--update-golden"]) == 0
    assert main(["golden", "-c", cfg, "-o", out, "--golden", str(gold)]) == 0
    g = json.loads(gold.read_text())
    g["report"]["data"]["integral"] *= 1 + 1e-6
    gold.write_text(dumps(g))
    capsys.readouterr()
    assert main(["golden", "-c", cfg, "-o", out, "--golden", str(gold)]) == 1
    assert "data.integral" in capsys.readouterr().out
    g["tolerances"] = {"data.integral": [1e-5, 0.0]}
    gold.write_text(dumps(g))
    assert main(["golden", "-c", cfg, "-o", out, "--golden", str(gold)]) == 0


def test_missing_golden(tmp_path):
    cfg = write(tmp_path, "[experiment]\nverb = zcritical\nj = 1\n" + FS1)
    assert main(["golden", "-c", cfg, "-o", str(tmp_path), "--golden", str(tmp_path / "nope.json")]) == 1


@pytest.mark.parametrize("spec", ["height", "moment1", "xcoord", "const:2", "basis:1,0.5"])
def test_field_presets(spec):
    m = make_fubini_study(1, level=8, angular=4)
    assert field_from_spec(m, spec).values.shape == (m.quadrature.size,)


def test_field_preset_errors():
    m = make_fubini_study(1, level=8, angular=4)
    for spec in ["moment3", "nonsense"]:
        with pytest.raises(ConfigError):
            field_from_spec(m, spec)
