import csv
import io
import json
import math
from pathlib import Path

import pytest

from fockops.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from fockops.config import ConfigError, parse_config
from fockops.report import Report, decode_json, emit, to_json
from fockops.runner import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _run_json(kind, cfg, tmp_path, *extra):
    out = tmp_path / f"{kind}.json"
    code = main([kind, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_classify_report_verdicts(tmp_path):
    cfg = _write(tmp_path, "c.yaml", "kind: classify\nsymbol: {a: [0.5, 0], b: [1, 0]}\n")
    code, out = _run_json("classify", cfg, tmp_path)
    assert code == EXIT_OK
    rep = decode_json(out.read_bytes())
    assert rep["verdicts"]["boundedness"]["tag"] == "BoundedCompact"
    assert rep["verdicts"]["power"]["tag"] == "PowerBounded"
    for v in rep["verdicts"].values():
        assert v["rule"]
    assert rep["verdicts"]["iterate_limit"]["tag"] == "RankOne"


def test_norm_report_approaches_sqrt_e(tmp_path):
    cfg = _write(tmp_path, "n.yaml", "kind: norm\nsymbol: {a: 0, b: 1}\ncontrols: {N_ladder: [8, 16, 24, 32]}\n")
    code, out = _run_json("norm", cfg, tmp_path)
    assert code == EXIT_OK
    rep = decode_json(out.read_bytes())
    rows = rep["tables"]["norm_ladder"]["rows"]
    assert rows[-1][3] < 1e-12
    assert rep["values"]["normalization_audit"]["flagged"] is True
    assert rep["values"]["monotone_nondecreasing"] is True


def test_empty_config_is_a_config_error(tmp_path, caplog):
    cfg = _write(tmp_path, "e.yaml", "")
    assert main(["norm", "--config", str(cfg)]) == EXIT_CONFIG
    assert "empty config" in caplog.text


@pytest.mark.parametrize(
    "text, field, line",
    [
        ("kind: norm\nsymbol:\n  a: [0.5, 0]\n  b: 'x'\n", "symbol.b", 4),
        ("kind: norm\nsymbol: {a: 0.5}\ncontrols:\n  tol: -1\n", "controls.tol", 4),
        ("kind: norm\nsymbol: {a: 0.5}\ncontrols:\n  N: 600\n", "controls.N", 4),
        ("kind: bogus\n", "kind", 1),
        ("kind: norm\n", "symbol", None),
        ("kind: norm\nsymbol: {a: 0.5}\nextra: 1\n", "extra", 3),
        ("kind: group\nsemigroup: {variant: WeightedContractive, lambda: -1}\n", "semigroup.variant", 2),
    ],
)
def test_config_errors_name_line_and_field(text, field, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "cfg.yaml")
    assert exc.value.field == field
    assert exc.value.line == line
    assert field in str(exc.value)


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("kind: norm\nsymbol: {a: [0.5\n", "x.yaml")
    assert exc.value.line is not None


def test_json_config_accepted(tmp_path):
    cfg = _write(tmp_path, "c.json", json.dumps({"kind": "classify", "symbol": {"a": [0, 1], "b": 0}}))
    code, out = _run_json("classify", cfg, tmp_path)
    assert code == EXIT_OK
    assert decode_json(out.read_bytes())["verdicts"]["boundedness"]["tag"] == "BoundedNonCompact"


def test_kind_mismatch_is_config_error(tmp_path):
    cfg = _write(tmp_path, "c.yaml", "kind: classify\nsymbol: {a: 0.5}\n")
    assert main(["norm", "--config", str(cfg)]) == EXIT_CONFIG


def test_invalid_semigroup_is_config_error(tmp_path, caplog):
    cfg = _write(tmp_path, "s.yaml", "kind: semigroup\nsemigroup: {variant: WeightedContractive, lambda: -1, alpha_r: 0.51}\n")
    assert main(["semigroup", "--config", str(cfg)]) == EXIT_CONFIG
    assert "violated at t" in caplog.text


def test_nonconvergence_writes_partial_report(tmp_path):
    cfg = _write(tmp_path, "p.yaml", "kind: power\nsymbol: {a: 0.99, b: 0}\ncontrols: {n_max: 10}\n")
    code, out = _run_json("power", cfg, tmp_path)
    assert code == EXIT_NUMERIC
    rep = decode_json(out.read_bytes())
    assert rep["partial"] is True and "did not fall below" in rep["failure"]
    assert len(rep["tables"]["powers"]["rows"]) == 10


def test_overrides_from_command_line(tmp_path):
    cfg = _write(tmp_path, "p.yaml", "kind: power\nsymbol: {a: 0.5, b: 1}\ncontrols: {n_max: 60}\n")
    code, out = _run_json("power", cfg, tmp_path, "--n", "32", "--tol", "1e-3")
    assert code == EXIT_OK
    rep = decode_json(out.read_bytes())
    assert rep["config"]["controls"]["N"] == 32
    assert rep["config"]["controls"]["tol"] == 1e-3
    assert main(["power", "--config", str(cfg), "--n", "2"]) == EXIT_CONFIG


def test_json_is_deterministic(tmp_path):
    for name in ("spectrum_weighted.yaml", "semigroup_contractive.yaml", "sector_square.yaml"):
        kind = name.split("_")[0]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main([kind, "--config", str(CONFIGS / name), "--out", str(a)]) == EXIT_OK
        assert main([kind, "--config", str(CONFIGS / name), "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()


def test_timings_only_on_request(tmp_path):
    cfg = CONFIGS / "classify_contraction.yaml"
    code, out = _run_json("classify", cfg, tmp_path)
    assert "timings" not in decode_json(out.read_bytes())
    code, out = _run_json("classify", cfg, tmp_path, "--timings")
    assert decode_json(out.read_bytes())["timings"]["total"] >= 0


def test_json_round_trips_and_encodes_specials():
    r = Report("norm", {"x": 1})
    r.values.update(inf=math.inf, ninf=-math.inf, z=1 - 2j, f=0.1, big=1e300, n=None)
    data = emit(r)
    back = decode_json(data)
    assert back["values"]["inf"] == math.inf and back["values"]["ninf"] == -math.inf
    assert back["values"]["z"] == [1, -2]
    assert back["values"]["f"] == 0.1 and back["values"]["big"] == 1e300
    assert b"Infinity" not in data and b"NaN" not in data
    # plain json parses it too
    assert json.loads(data)["values"]["inf"] == {"nonfinite": "inf"}
    assert to_json({"b": 1, "a": [2, 3]}) == '{"a": [2, 3], "b": 1}'


def test_eigenvalue_table_has_pairs_and_no_bare_nan(tmp_path):
    code, out = _run_json("spectrum", CONFIGS / "spectrum_weighted.yaml", tmp_path)
    assert code == EXIT_OK
    data = out.read_bytes()
    assert b"NaN" not in data
    rep = decode_json(data)
    t = rep["tables"]["eigenvalues"]
    assert t["columns"] == ["index", "eigenvalue", "closed_form", "rel_error", "trusted"]
    first = t["rows"][0]
    assert isinstance(first[1], list) and len(first[1]) == 2
    beyond = t["rows"][10]
    assert beyond[2] is None and beyond[3] is None
    assert rep["values"]["max_rel_error"] < 1e-6


def test_csv_norm_ladder_columns(tmp_path):
    out = tmp_path / "n.csv"
    assert main(["norm", "--config", str(CONFIGS / "norm_ladder.yaml"), "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "# table: norm_ladder"
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    assert rows[0] == ["N", "norm", "closed_form", "abs_error"]
    assert [int(r[0]) for r in rows[1:5]] == [16, 32, 64, 128]


def test_csv_splits_complex_columns(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--config", str(CONFIGS / "spectrum_weighted.yaml"), "--out", str(out), "--format", "csv"]) == 0
    header = out.read_text().splitlines()[1]
    assert header.startswith("index,eigenvalue_re,eigenvalue_im,closed_form_re,closed_form_im")


def test_batch_directory(tmp_path, monkeypatch):
    cfgs = tmp_path / "cfgs"
    cfgs.mkdir()
    for i, a in enumerate((0.2, 0.5, 0.8)):
        (cfgs / f"c{i}.yaml").write_text(f"kind: classify\nsymbol: {{a: {a}, b: 1}}\n")
    (cfgs / "notes.txt").write_text("ignored")
    out = tmp_path / "out"
    monkeypatch.setenv("FOCKOPS_MAX_WORKERS", "2")
    assert main(["classify", "--config", str(cfgs), "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["c0.json", "c1.json", "c2.json"]
    (cfgs / "bad.yaml").write_text("kind: classify\n")
    assert main(["classify", "--config", str(cfgs), "--out", str(out)]) == EXIT_CONFIG
    monkeypatch.setenv("FOCKOPS_MAX_WORKERS", "zero")
    assert main(["classify", "--config", str(cfgs), "--out", str(out)]) == EXIT_CONFIG


def test_every_shipped_config_runs(tmp_path):
    for cfg in sorted(CONFIGS.glob("*.yaml")):
        kind = cfg.name.split("_")[0]
        assert main([kind, "--config", str(cfg), "--out", str(tmp_path / (cfg.stem + ".out"))]) == EXIT_OK, cfg


def test_run_probe_is_reported_but_not_a_verdict():
    cfg = parse_config(
        "kind: classify\nsymbol: {a: 0.5, b: 0}\nweight: {p: -0.3}\ncontrols: {probe: true, probe_n: 50, N: 32}\n"
    )
    rep = run(cfg)
    assert rep.verdicts["power"]["tag"] == "Indeterminate"
    assert len(rep.tables["probe_power_norms"].rows) == 50
    assert any("empirical" in p for p in rep.provenance)
