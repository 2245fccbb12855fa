import csv
import json
import math

import numpy as np
import pytest

from srbreserve.cli import main
from srbreserve.gigclosed import closed_best_estimate

BASE = {
    "params": {"c": 1.0, "T": 1.0},
    "prior": {"kind": "gpd", "sigma": 1.0, "mu": 1.0, "shape": 0.25},
    "observations": "obs.csv",
    "seed": 42,
    "simulate": {"depth": 4, "count": 2000},
    "layers": [{"attachment": 1.2, "limit": 0.8, "dates": [0.5, 0.7, 1.0]},
               {"attachment": 0.0, "limit": None, "dates": [1.0]}],
    "cvar": {"t": 0.7, "thresholds": [1.0, 1.5]},
    "tail": {"levels": [10.0, 100.0]},
    "mc": {"count": 40000},
}
OBS = "t,paid\n0.1,0.2\n0.3,0.5\n"


def _setup(tmp_path, config=None, obs=OBS, name="cfg.json"):
    cfg = dict(BASE if config is None else config)
    (tmp_path / name).write_text(json.dumps(cfg))
    if obs is not None:
        (tmp_path / "obs.csv").write_text(obs)
    return tmp_path / name


def _read_csv(path):
    lines = path.read_text().splitlines()
    meta = {}
    if lines and lines[0].startswith("# "):
        meta = dict(kv.split("=", 1) for kv in lines[0][2:].split())
        lines = lines[1:]
    return meta, list(csv.DictReader(lines))


def _run(tmp_path, command, *extra, config=None, obs=OBS):
    cfg = _setup(tmp_path, config, obs)
    out = tmp_path / "out"
    code = main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


def test_reserve_rows_start_with_the_prior(tmp_path):
    code, out = _run(tmp_path, "reserve")
    assert code == 0
    _, rows = _read_csv(out / "reserve.csv")
    assert [float(r["t"]) for r in rows] == [0.0, 0.1, 0.3]
    assert float(rows[0]["ultimate_best_estimate"]) == pytest.approx(7.0 / 3.0, rel=1e-14)
    for r in rows:
        qs = [float(r[k]) for k in ("q05", "q25", "q50", "q75", "q95")]
        assert np.all(np.diff(qs) > 0)
        assert float(r["reserve"]) == pytest.approx(float(r["ultimate_best_estimate"]) - float(r["paid"]), rel=1e-14)


def test_empty_observation_file_gives_the_prior_row(tmp_path):
    code, out = _run(tmp_path, "reserve", obs="")
    assert code == 0
    _, rows = _read_csv(out / "reserve.csv")
    assert len(rows) == 1 and float(rows[0]["t"]) == 0.0


def test_gig_prior_matches_the_closed_form(tmp_path):
    c, g, T = 1.0, 1.5, 1.0
    config = dict(BASE, prior={"kind": "gig", "lambda": 1.5, "delta": c * T, "gamma": g})
    code, out = _run(tmp_path, "reserve", config=config)
    assert code == 0
    _, rows = _read_csv(out / "reserve.csv")
    for r in rows:
        expected = closed_best_estimate(c, g, 2, float(r["t"]), float(r["paid"]), T)
        assert float(r["ultimate_best_estimate"]) == pytest.approx(float(expected), rel=1e-9)


@pytest.mark.parametrize("obs,line", [("t,paid\n0.1,0.2\n0.3,abc\n", 3), ("t,paid\n0.3,0.2\n0.1,0.5\n", 3),
                                      ("t,paid\n0.1,0.5\n0.3,0.2\n", 3), ("t,paid\n1.5,0.2\n", 2),
                                      ("t,paid\n0.1,0.2,7\n", 2)])
def test_bad_observation_rows_exit_3_with_a_line_number(tmp_path, capsys, obs, line):
    code, _ = _run(tmp_path, "reserve", obs=obs)
    assert code == 3
    assert f"obs.csv:{line}:" in capsys.readouterr().err


def test_bad_header_exits_3(tmp_path):
    assert _run(tmp_path, "reserve", obs="time,paid\n0.1,0.2\n")[0] == 3


@pytest.mark.parametrize("mutate", [
    lambda c: c.update(params={"c": -1.0, "T": 1.0}),
    lambda c: c.update(prior={"kind": "gpd", "sigma": 1.0}),
    lambda c: c.update(prior={"kind": "nope"}),
    lambda c: c.update(unexpected=1),
    lambda c: c.pop("params"),
])
def test_bad_configs_exit_2(tmp_path, capsys, mutate):
    config = json.loads(json.dumps(BASE))
    mutate(config)
    code, _ = _run(tmp_path, "reserve", config=config)
    assert code == 2
    assert "config" in capsys.readouterr().err


def test_multiline_horizons_out_of_order_exit_2(tmp_path):
    config = {"prior": BASE["prior"], "multiline": {"c": 1.0, "T_star": 1.0, "T": 1.0, "c2": 1.0}}
    assert _run(tmp_path, "multiline", config=config, obs=None)[0] == 2


def test_infinite_moment_prior_exits_2(tmp_path, capsys):
    config = dict(BASE, prior={"kind": "levy", "c": 1.0, "T": 1.0})
    assert _run(tmp_path, "reserve", config=config)[0] == 2
    assert "infinite" in capsys.readouterr().err


def test_numerical_failure_exits_4(tmp_path, capsys):
    # the exceedance probability beyond 200 is about e^-200, too small to condition on
    config = dict(BASE, prior={"kind": "exponential", "rate": 1.0}, cvar={"t": 0.7, "thresholds": [200.0]})
    code, _ = _run(tmp_path, "cvar", config=config)
    assert code == 4
    assert "worst quadrature error estimate" in capsys.readouterr().err


def test_simulation_is_reproducible_and_summarised(tmp_path):
    code, out = _run(tmp_path, "simulate")
    assert code == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    assert _run(tmp_path, "simulate")[0] == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first
    meta, rows = _read_csv(out / "simulate_summary.csv")
    assert meta["count"] == "2000" and meta["depth"] == "4" and meta["seed"] == "42"
    assert len(rows) == 17 and float(rows[0]["t"]) == 0.3
    medians = [float(r["q50"]) for r in rows]
    assert np.all(np.diff(medians) >= 0)
    assert (out / "paths.csv").exists()


def test_simulation_seed_flag_and_binary_output(tmp_path):
    config = dict(BASE, simulate={"depth": 3, "count": 10, "binary": True})
    code, out = _run(tmp_path, "simulate", "--seed", "7", config=config)
    assert code == 0
    data = (out / "paths.bin").read_bytes()
    assert len(data) == 24 + 10 * 9 * 8
    meta, _ = _read_csv(out / "simulate_summary.csv")
    assert meta["seed"] == "7"


def test_mc_check_z_scores_are_small(tmp_path):
    for command, table in (("simulate", "simulate_summary"), ("reinsure", "reinsure"), ("cvar", "cvar")):
        code, out = _run(tmp_path, command, "--mc-check")
        assert code == 0
        _, rows = _read_csv(out / f"{table}.csv")
        zs = [abs(float(r["z_score"])) for r in rows if r["z_score"] not in ("", "0.0")]
        assert zs and max(zs) < 4.0


def test_unlimited_layer_from_zero_pays_the_reserve(tmp_path):
    assert _run(tmp_path, "reinsure")[0] == 0
    assert _run(tmp_path, "reserve")[0] == 0
    out = tmp_path / "out"
    _, layers = _read_csv(out / "reinsure.csv")
    _, reserve = _read_csv(out / "reserve.csv")
    whole = [r for r in layers if r["layer"] == "2"]
    assert len(whole) == 1
    assert float(whole[0]["expected_payment"]) == pytest.approx(float(reserve[-1]["reserve"]), rel=1e-10)
    _, checks = _read_csv(out / "reinsure_telescoping.csv")
    assert all(r["ok"] == "true" for r in checks)


def test_tail_table_reports_the_normalizer(tmp_path):
    code, out = _run(tmp_path, "tail")
    assert code == 0
    meta, rows = _read_csv(out / "tail.csv")
    assert float(meta["posterior_normalizer"]) > 0
    assert all(float(r["ratio"]) > 0 for r in rows)


def test_json_output_to_stdout(tmp_path, capsys):
    cfg = _setup(tmp_path, dict(BASE, prior={"kind": "halfnormal", "scale": 1.0}))
    assert main(["tail", "--config", str(cfg), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["table"] == "tail"
    assert all(r["limit"] == "inf" for r in doc["rows"])


def test_csv_to_stdout_names_the_table(tmp_path, capsys):
    cfg = _setup(tmp_path)
    assert main(["cvar", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# table=cvar\n")


def test_plots_are_written_and_reproducible(tmp_path):
    code, out = _run(tmp_path, "reserve", "--plot")
    assert code == 0
    png = (out / "reserve.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"
    assert _run(tmp_path, "reserve", "--plot")[0] == 0
    assert (out / "reserve.png").read_bytes() == png


def test_plot_needs_an_output_directory(tmp_path):
    cfg = _setup(tmp_path)
    assert main(["reserve", "--config", str(cfg), "--plot"]) == 2


def test_identical_lines_report_symmetrically(tmp_path):
    config = {"prior": {"kind": "gpd", "sigma": 1.0, "mu": 1.0, "shape": 0.1},
              "multiline": {"c": 1.0, "T_star": 2.0, "T": 1.0, "c2": 1.0}, "observations": "obs.csv"}
    code, out = _run(tmp_path, "multiline", config=config, obs="t,paid1,paid2\n0.4,0.6,0.6\n")
    assert code == 0
    _, rows = _read_csv(out / "multiline.csv")
    assert len(rows) == 4
    for t in ("0.0", "0.4"):
        l1, l2 = [r for r in rows if r["t"] == t]
        for key in ("ultimate_best_estimate", "variance", "q50"):
            assert float(l1[key]) == pytest.approx(float(l2[key]), rel=1e-7)
    _, corr = _read_csv(out / "multiline_correlation.csv")
    assert -1.0 < float(corr[0]["correlation"]) < 1.0


def test_multiline_rejects_a_time_change(tmp_path):
    config = {"prior": BASE["prior"], "multiline": {"c": 1.0, "T_star": 2.0, "T": 1.0, "c2": 1.0},
              "timechange": {"kind": "identity"}}
    assert _run(tmp_path, "multiline", config=config, obs=None)[0] == 2


def test_time_changed_reserve_uses_operational_time(tmp_path):
    config = dict(BASE, timechange={"kind": "weibull", "a": 0.5, "b": 2.0})
    code, out = _run(tmp_path, "reserve", config=config)
    assert code == 0
    _, rows = _read_csv(out / "reserve.csv")
    assert [float(r["t"]) for r in rows] == [0.0, 0.1, 0.3]
    assert all(math.isfinite(float(r["variance"])) for r in rows)


def test_selftest_runs_selected_criteria(capsys):
    assert main(["selftest", "--criteria", "1,2"]) == 0
    out = capsys.readouterr().out
    assert "criterion  1" in out and "2/2 criteria passed" in out
