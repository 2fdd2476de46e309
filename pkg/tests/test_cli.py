import csv
import json

import pytest

from toricsim import __version__
from toricsim.cli import fmt, loglog_slope, main


def run(tmp_path, command, cfg=None, *extra):
    args = [command, "--out", str(tmp_path / command)]
    if cfg is not None:
        path = tmp_path / f"{command}.cfg.json"
        path.write_text(json.dumps(cfg))
        args += ["--config", str(path)]
    return main(args + list(extra))


def load(tmp_path, command):
    return json.loads((tmp_path / f"{command}.json").read_text())


def rows(tmp_path, command):
    lines = [ln for ln in (tmp_path / f"{command}.csv").read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


def test_spectrum_l2_toric_endpoint_is_four_fold(tmp_path):
    assert run(tmp_path, "spectrum", {"L": 2, "tau": 1.0, "space": "full", "m": 6}) == 0
    out = load(tmp_path, "spectrum")
    assert out["result"]["ground_degeneracy"] == 4
    assert out["artifact"]["version"] == __version__
    assert out["config"]["space"] == "full"


def test_spectrum_l3_sector(tmp_path):
    assert run(tmp_path, "spectrum", {"L": 3, "tau": 0.5, "m": 4}) == 0
    res = load(tmp_path, "spectrum")["result"]
    e = res["eigenvalues"]
    assert e == sorted(e) and len(e) == 4
    assert max(res["residuals"]) <= 1e-10


def test_malformed_json_is_a_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad), "--out", str(tmp_path / "spectrum")]) == 2
    assert not (tmp_path / "spectrum.json").exists()


@pytest.mark.parametrize("cfg", [{"L": 7}, {"tau": 2.0}, {"bogus": 1}, {"params": {"U": -1}}, {"m": "four"}])
def test_invalid_spectrum_configs(tmp_path, cfg):
    assert run(tmp_path, "spectrum", cfg) == 2


def test_gap_scan_csv_columns(tmp_path):
    assert run(tmp_path, "gap-scan", {"L": 2, "grid": 11}) == 0
    table = rows(tmp_path, "gap-scan")
    assert table[0] == ["tau", "f_tau", "lambda1_over_lambda2", "gap"]
    assert len(table) == 12
    assert float(table[1][3]) == pytest.approx(8.0)


def test_scaling_reports_slope(tmp_path):
    assert run(tmp_path, "scaling", {"Ls": [2, 3], "grid": 11}) == 0
    res = load(tmp_path, "scaling")["result"]
    assert res["slope"] < 0
    assert len(rows(tmp_path, "scaling")) == 3


def test_scaling_single_size_has_no_slope(tmp_path):
    assert run(tmp_path, "scaling", {"Ls": [2], "grid": 5}) == 0
    res = load(tmp_path, "scaling")["result"]
    assert res["slope"] is None and len(res["minima"]) == 1


def test_scaling_refuses_full_space_at_l5(tmp_path, capsys):
    assert run(tmp_path, "scaling", {"Ls": [5], "method": "full"}) == 2
    assert "sector" in capsys.readouterr().err


def test_default_sweep_meets_error_target(tmp_path):
    assert run(tmp_path, "sweep", {"checkpoints": 5}) == 0
    out = load(tmp_path, "sweep")
    assert out["result"]["delta"] <= 0.1
    table = rows(tmp_path, "sweep")
    assert table[0] == ["tau", "fidelity", "energy", "weight_00", "weight_01", "weight_10", "weight_11"]
    assert all(float(r[3]) == pytest.approx(1.0, abs=1e-10) for r in table[1:])


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    cfg = {"L": 2, "T": 4.0, "checkpoints": 3}
    assert run(a, "sweep", cfg, "--seed", "5") == 0
    assert run(b, "sweep", cfg, "--seed", "5") == 0
    for suffix in ("json", "csv"):
        assert (a / f"sweep.{suffix}").read_bytes() == (b / f"sweep.{suffix}").read_bytes()


def test_csv_embeds_config_and_version(tmp_path):
    run(tmp_path, "gap-scan", {"L": 2, "grid": 5})
    head = (tmp_path / "gap-scan.csv").read_text().splitlines()[:3]
    assert head[0] == f"# artifact: toricsim {__version__}"
    assert json.loads(head[2].removeprefix("# config: "))["L"] == 2


def test_duality_exit_codes(tmp_path):
    assert run(tmp_path, "duality", {"L": 2, "lam1": 1.0, "lam2": 1.0}) == 0
    assert load(tmp_path, "duality")["result"]["passed"] is True
    # a tolerance below round-off turns the same comparison into a failed check
    assert run(tmp_path, "duality", {"L": 3, "lam1": 0.43, "lam2": 1.0, "tol": 1e-300}) == 4


def test_protect_marks_strong_fields_not_claimed(tmp_path, capsys):
    cfg = {"Ls": [2], "strengths": [0.1, 1.5], "T": 3.0, "checkpoints": 3}
    assert run(tmp_path, "protect", cfg) == 0
    assert "not claimed" in capsys.readouterr().err
    statuses = [r["status"] for r in load(tmp_path, "protect")["result"]["rows"]]
    assert statuses == ["pass", "not claimed"]


def test_lattice_dump(tmp_path):
    assert run(tmp_path, "lattice-dump", {"L": 2, "first": 3}) == 0
    res = load(tmp_path, "lattice-dump")["result"]
    assert res["lattice"]["n"] == 8
    assert [s["dim"] for s in res["sectors"]] == [8, 8, 8, 8]
    assert res["sectors"][0]["states"][0] == "0x0"


def test_bad_flags(tmp_path):
    assert main(["spectrum", "--threads", "0", "--out", str(tmp_path / "x")]) == 2
    assert main(["nonsense"]) == 2


def test_fmt_uses_17_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"


def test_loglog_slope_exact_power():
    slope, err = loglog_slope([2, 3, 4], [2.0**-1, 3.0**-1, 4.0**-1])
    assert slope == pytest.approx(-1.0)
    assert err == pytest.approx(0.0, abs=1e-12)
