import csv
import json
import math
from pathlib import Path

import pytest

from dephasewalk.main import _mask, main
from dephasewalk.output import verify_manifest

ROOT = Path(__file__).resolve().parent.parent
RING_FLAT = ["--model", "ring", "--j1", "1", "--j2", "1", "--j3", "0.5", "--phi", "0"]


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def _json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_spectrum_without_coupling(tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", *RING_FLAT, "--beta", "0", "--out", str(out)]) == 0
    data = _json(out / "spectrum.json")
    assert all(abs(re) <= 1e-12 and abs(im) <= 1e-12 for re, im in data["exponents"])
    assert data["leading_pair"] is None
    assert verify_manifest(out / "manifest.json") == {"spectrum.json": True}


def test_spectrum_at_the_crossing(tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", *RING_FLAT, "--beta", "0.8127", "--out", str(out)]) == 0
    data = _json(out / "spectrum.json")
    assert abs(data["exponents"][1][0] - data["exponents"][2][0]) <= 1e-3
    assert data["db_residual"] <= 1e-12
    assert data["biorthonormal"] is True


def test_coined_spectrum_reports_pairing(tmp_path):
    out = tmp_path / "c"
    assert main(["spectrum", "--model", "coined", "--L", "3", "--beta", str(0.3 * math.pi / 2), "--out", str(out)]) == 0
    data = _json(out / "spectrum.json")
    assert any(abs(re + 1.0) <= 1e-10 and abs(im) <= 1e-10 for re, im in data["eigenvalues"])
    assert data["pairing_residual"] <= 1e-8
    assert len(data["decay_modes"]) == 2


def test_sweep_writes_the_documented_header(tmp_path):
    out = tmp_path / "w"
    argv = ["sweep", *RING_FLAT, "--lo", "0.7", "--hi", "0.9", "--grid", "11", "--out", str(out)]
    assert main(argv) == 0
    rows = _rows(out / "sweep.csv")
    assert rows[0] == ["beta", "re_lambda2", "im_lambda2", "re_lambda3", "im_lambda3", "g", "db_residual"]
    assert len(rows) == 12
    assert rows[1][0] == "0.7"


def test_sweep_output_does_not_depend_on_threads(tmp_path):
    base = ["sweep", "--model", "ring", "--phi", "1.0471975511965976", "--lo", "0.6", "--hi", "0.9", "--grid", "31"]
    assert main([*base, "--threads", "1", "--out", str(tmp_path / "a")]) == 0
    assert main([*base, "--threads", "4", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_coined_sweep_writes_branches(tmp_path):
    out = tmp_path / "cw"
    argv = ["sweep", "--model", "coined", "--L", "3", "--lo", "0.3", "--hi", "1.2", "--grid", "5", "--out", str(out)]
    assert main(argv) == 0
    header = _rows(out / "sweep_branches.csv")[0]
    assert header[0] == "beta" and header[-1] == "im_lambda6"
    assert set(_json(out / "manifest.json")["outputs"]) == {"sweep.csv", "sweep_branches.csv"}


def test_empty_window_is_a_config_error(tmp_path, capsys):
    argv = ["sweep", *RING_FLAT, "--lo", "0.8", "--hi", "0.8", "--out", str(tmp_path / "e")]
    assert main(argv) == 2
    assert "window" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 2


def test_missing_beta(tmp_path):
    assert main(["relax", *RING_FLAT, "--out", str(tmp_path / "r")]) == 2


def test_numerical_failure_exit_code(tmp_path):
    argv = ["spectrum", *RING_FLAT, "--beta", "0.5", "--snapshots", "0", "--out", str(tmp_path / "n")]
    assert main(argv) == 3


def test_relax_from_config_file(tmp_path):
    out = tmp_path / "fig2d"
    assert main(["relax", "--config", str(ROOT / "configs" / "fig2d_relax.json"), "--steps", "12", "--out", str(out)]) == 0
    rows = _rows(out / "relax.csv")
    assert rows[0] == ["step", "p_1", "p_2", "p_3"]
    assert rows[1] == ["0", "1", "0", "0"]
    last = [float(x) - 1.0 / 3.0 for x in rows[-1][1:]]
    assert abs(last[1]) < 0.1 * min(abs(last[0]), abs(last[2]))
    summary = _json(out / "relax_summary.json")
    assert summary["steps"] == 12


def test_relax_uniform_start_stays_put(tmp_path):
    cfg = tmp_path / "u.json"
    cfg.write_text(json.dumps({
        "model": "ring", "ring": {"phi": 1.0}, "beta": 0.8, "steps": 5, "initial": {"kind": "uniform"},
    }))
    out = tmp_path / "u"
    assert main(["relax", "--config", str(cfg), "--out", str(out)]) == 0
    for row in _rows(out / "relax.csv")[1:]:
        assert row[1:] == ["0.333333333333"] * 3


def test_relax_with_partial_dephasing_reports_coherences(tmp_path):
    out = tmp_path / "qd"
    assert main(["relax", *RING_FLAT, "--beta", "0.8", "--q", "0.5", "--steps", "10", "--out", str(out)]) == 0
    rows = _rows(out / "relax.csv")
    assert rows[0][-1] == "coh_norm"
    assert float(rows[2][-1]) > 0.0


def test_coined_relax_writes_marginals(tmp_path):
    out = tmp_path / "cr"
    argv = ["relax", "--model", "coined", "--L", "3", "--beta", "0.5", "--steps", "20", "--out", str(out)]
    assert main(argv) == 0
    assert _rows(out / "relax_marginal.csv")[0] == ["step", "p_site_1", "p_site_2", "p_site_3"]
    assert "marginals" in _json(out / "relax_summary.json")


def test_trajectory_cap_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DEPHASEWALK_TRAJECTORY_CAP", "10")
    assert main(["relax", *RING_FLAT, "--beta", "0.8", "--steps", "11", "--out", str(tmp_path / "cap")]) == 2


def test_locate_first_order(tmp_path):
    out = tmp_path / "l"
    assert main(["locate", *RING_FLAT, "--lo", "0.7", "--hi", "0.9", "--out", str(out)]) == 0
    data = _json(out / "locate.json")
    assert data["order"] == "FirstOrder"
    assert data["beta_c"] == pytest.approx(0.8127, abs=1e-3)
    assert data["bracket_width"] <= 1e-7


def test_qc_scan_needs_the_ring(tmp_path):
    assert main(["locate", "--model", "coined", "--scan", "qc", "--out", str(tmp_path / "q")]) == 2


def test_locate_qc_scan(tmp_path):
    out = tmp_path / "qc"
    assert main(["locate", *RING_FLAT, "--scan", "qc", "--threads", "2", "--out", str(out)]) == 0
    data = _json(out / "locate.json")
    assert data["scan"] == "qc"
    assert data["q_c"] == pytest.approx(0.23, abs=0.01)
    betas = [entry["beta_c"] for entry in data["drift"]]
    assert len(betas) == 5 and None not in betas
    assert all(b > a for a, b in zip(betas, betas[1:]))
    assert verify_manifest(out / "manifest.json") == {"locate.json": True}


def test_locate_size_scan(tmp_path):
    out = tmp_path / "size"
    argv = ["locate", "--model", "coined", "--L", "3", "--scan", "size", "--L-values", "3", "4", "--out", str(out)]
    assert main(argv) == 0
    data = _json(out / "locate.json")
    assert data["scan"] == "size"
    assert [e["L"] for e in data["entries"]] == [3, 4]
    assert data["entries"][0]["beta_c_over_half_pi"] == pytest.approx(0.4771, abs=1e-3)
    assert data["entries"][1]["beta_c_over_half_pi"] == pytest.approx(0.4451, abs=1e-3)
    assert all(e["order"] == "SecondOrder" for e in data["entries"])


def test_shifted_sweep_reaches_the_exceptional_point(tmp_path):
    # same ring and q as the figA2 config, window narrowed around beta_c(q=0.5)
    out = tmp_path / "a2"
    argv = ["sweep", "--config", str(ROOT / "configs" / "figA2_sweep.json"),
            "--lo", "0.15665", "--hi", "0.15685", "--grid", "20", "--out", str(out)]
    assert main(argv) == 0
    rows = _rows(out / "sweep.csv")
    g = [float(r[rows[0].index("g")]) for r in rows[1:]]
    assert len(g) == 20
    assert max(g) >= 0.999


def test_archive_round_trip(tmp_path, memory_db, capsys):
    out = tmp_path / "a"
    argv = ["sweep", *RING_FLAT, "--lo", "0.7", "--hi", "0.9", "--grid", "5", "--out", str(out), "--archive"]
    assert main(argv) == 0
    capsys.readouterr()

    assert main(["archive", "list"]) == 0
    runs = json.loads(capsys.readouterr().out)
    assert len(runs) == 1 and runs[0]["n_points"] == 5

    assert main(["archive", "show", runs[0]["run_id"]]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert [p["idx"] for p in shown["points"]] == list(range(5))

    assert main(["archive", "purge"]) == 2
    assert main(["archive", "purge", "--confirm"]) == 0
    assert json.loads(capsys.readouterr().out) == {"purged": 1}
    assert main(["archive", "list"]) == 0
    assert json.loads(capsys.readouterr().out) == []


def test_mask_hides_credentials():
    assert _mask("postgresql://user:secret@db:5432/runs") == "postgresql://***@db:5432/runs"
    assert _mask(None) is None
