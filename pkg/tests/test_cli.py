import json

import pytest

from rmtlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text, name):
    lines = text.splitlines()
    i = lines.index(f"# table: {name}")
    rows = []
    for ln in lines[i + 2:]:
        if ln.startswith("#"):
            break
        rows.append(ln.split(","))
    return lines[i + 1].split(","), rows


def test_law_semicircle(capsys):
    code, out, _ = run(capsys, "law", "--kind", "semicircle", "--grid=-1:1:3")
    assert code == 0
    assert out.startswith("# rmtlab 0.1.0\n# command: law\n# seed: 0\n")
    cols, rows = table(out, "density")
    assert cols == ["x", "density"]
    assert rows[1] == ["0", "0.3183098862"]
    _, mom = table(out, "moments")
    assert mom[1] == ["2", "1"] and mom[3] == ["4", "2"]


def test_law_mp_moment(capsys):
    code, out, _ = run(capsys, "law", "--kind", "mp", "--beta", "0.5", "--moments", "2")
    assert code == 0
    _, mom = table(out, "moments")
    assert float(mom[1][1]) == pytest.approx(0.75)


def test_json_output(capsys):
    code, out, _ = run(capsys, "law", "--kind", "semicircle", "--format", "json", "--moments", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["command"] == "law"
    assert doc["tables"]["moments"]["rows"] == [[1, 0.0], [2, 1.0]]


def test_sinr(capsys):
    code, out, _ = run(capsys, "sinr", "--beta", "0.5", "--sigma0-sq", "0.1",
                       "--detector", "mmse", "--detector", "mf", "--detector", "pe:3")
    assert code == 0
    _, rows = table(out, "sinr")
    assert rows[0][:3] == ["0.5", "mmse", "5.741657387"]
    assert float(rows[1][2]) == pytest.approx(1 / 0.6)
    assert "# flags: " in out and "detector=mmse,mf,pe:3" in out


def test_sinr_snr_db(capsys):
    code, out, _ = run(capsys, "sinr", "--beta", "0.5", "--snr-db", "10")
    assert code == 0
    assert "# sigma0_sq: 0.1" in out


def test_usage_errors(capsys):
    assert run(capsys, "law", "--kind", "nope")[0] == 2
    assert run(capsys, "mc-compare", "--ensemble", "wigner")[0] == 2
    code, _, err = run(capsys, "convolve", "--op", "mul", "--a", "binary", "--b", "mp:1")
    assert code == 2 and "mean" in err.lower()
    assert run(capsys, "sinr", "--beta", "0.5")[0] == 2


def test_describe_without_required_flags(capsys):
    code, out, _ = run(capsys, "mc-compare", "--describe")
    assert code == 0
    assert "replicate" in out and "stat" in out


def test_mc_compare_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for f in (a, b):
        assert run(capsys, "mc-compare", "--ensemble", "wigner", "--N", "200", "--replicates", "2",
                   "--seed", "7", "-o", str(f))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    _, rows = table(a.read_text(), "stats")
    assert rows[-1][0] == "median" and float(rows[-1][2]) < 0.1


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nbeta = 0.5\nsigma0-sq = 0.1\n")
    code, out, _ = run(capsys, "sinr", "--config", str(cfg))
    assert code == 0 and "5.741657387" in out
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "sinr", "--config", str(cfg))[0] == 2


def test_replica_sweep(capsys):
    code, out, _ = run(capsys, "replica-sweep", "--beta-min", "1", "--beta-max", "4", "--steps", "13",
                       "--sigma0-sq", "0.1")
    assert code == 0
    assert "# window: 1.75..3.5" in out
    assert "# beta_star: 1.982" in out
    code, out, _ = run(capsys, "replica-sweep", "--beta-min", "1", "--beta-max", "4", "--steps", "7",
                       "--snr-db", "6")
    assert code == 0 and "# window: none" in out


def test_cs_fixed_point(capsys):
    code, out, _ = run(capsys, "cs-fixed-point", "--beta", "2", "--sigma0-sq", "0.01", "--gamma", "0.05")
    assert code == 0
    _, rows = table(out, "fixed_points")
    assert len(rows) == 2 and float(rows[0][2]) == pytest.approx(0.005025, rel=1e-3)
    assert run(capsys, "cs-fixed-point", "--beta", "2", "--sigma0-sq", "0.04", "--gamma", "0.05")[0] == 3


def test_convolve_clt_closed_form(capsys):
    code, out, _ = run(capsys, "convolve", "--op", "clt", "--law", "binary", "--n", "4", "--grid=-2:2:8")
    assert code == 0
    _, rows = table(out, "density")
    for x, d, cf in rows:
        assert float(d) == pytest.approx(float(cf), abs=1e-4)
