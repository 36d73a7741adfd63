import csv
import json

import numpy as np
import pytest

from hierlap.cli import main
from hierlap.errors import InversionUnsupportedError, RegimeError
from hierlap.harness import (
    RATE_COLUMNS, ExperimentConfig, fit_slope, run_checks, run_qp_limit, run_rates,
)


@pytest.fixture(scope="module")
def rates_d2():
    return run_rates(ExperimentConfig(alpha=1.0))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(n_min=5, n_max=4)
    with pytest.raises(ValueError):
        ExperimentConfig(method="mc", trials=500)
    with pytest.raises(ValueError):
        ExperimentConfig(method="grid")


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"alpha": 0.5, "n_max": 9, "noise": "epanechnikov:0.4"}))
    cfg = ExperimentConfig.from_json(path)
    assert (cfg.alpha, cfg.n_max, cfg.noise_spec.kind) == (0.5, 9, "epanechnikov")
    cfg = cfg.updated(n_max=11, alpha=None)
    assert (cfg.alpha, cfg.n_max) == (0.5, 11)
    path.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError):
        ExperimentConfig.from_json(path)


def test_fit_slope():
    x = np.array([2.0, 4, 8, 16])
    assert fit_slope(x, 3 * x**-0.7) == pytest.approx(-0.7)


def test_rate_report_schema(rates_d2, tmp_path):
    out = tmp_path / "r.csv"
    rates_d2.to_csv(out)
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == RATE_COLUMNS
    assert [int(r[0]) for r in rows[1:]] == list(range(6, 15))


def test_rate_report_properties(rates_d2):
    assert rates_d2.variable == "v_N"
    assert rates_d2.slope_ok
    assert not rates_d2.pinsker_violations
    tv = rates_d2.column("tv")
    n = rates_d2.column("N")
    assert np.all(np.diff(tv[n >= 8]) < 0)


def test_rates_regime_gates():
    with pytest.raises(RegimeError):
        run_rates(ExperimentConfig(alpha=0.25))
    with pytest.raises(InversionUnsupportedError):
        run_rates(ExperimentConfig(noise="rademacher:0.5", n_min=2, n_max=3))
    with pytest.raises(RegimeError):
        run_qp_limit(ExperimentConfig(alpha=0.5))


def test_mc_method_runs_with_rademacher():
    cfg = ExperimentConfig(noise="rademacher:0.5", method="mc", n_min=3, n_max=4,
                           trials=5000, lyapunov_draws=5000)
    rep = run_rates(cfg)
    assert np.all(np.isnan(rep.column("kl")))
    assert np.all(rep.column("tv") > 0)


def test_checks_default_pass():
    ledger = run_checks(ExperimentConfig())
    assert ledger["passed"]
    assert {e["status"] for e in ledger["checks"]} <= {"pass", "skip"}


def test_checks_rademacher_gating():
    ledger = run_checks(ExperimentConfig(noise="rademacher:0.5"))
    st = {e["name"]: e["status"] for e in ledger["checks"]}
    assert st["pinsker"] == st["entropy_subadditivity"] == "skip"
    assert st["eigen_relation"] == st["variance_closed_form_vs_mc"] == "pass"


def test_checks_corrupted_weights_fail():
    ledger = run_checks(ExperimentConfig(weight_scale=1.1))
    st = {e["name"]: e["status"] for e in ledger["checks"]}
    assert st["coupling_weights_sum_to_one"] == "fail"
    assert not ledger["passed"]


def test_cli_outputs_are_byte_identical(tmp_path):
    for sub, name in (("rates", "r.csv"), ("checks", "l.json"), ("density-dump", "d.csv")):
        outs = []
        path = tmp_path / name
        for _ in range(2):
            args = [sub, "--n-min", "5", "--n-max", "7", "--out", str(path)]
            assert main(args) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["rates", "--alpha", "0.25", "--n-min", "8", "--n-max", "16"]) == 1
    assert "non-Gaussian" in capsys.readouterr().out
    assert main(["rates", "--noise", "rademacher:0.5", "--n-min", "2", "--n-max", "3"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"preset": "powerlaw", "q": 3.0, "delta": 1.5}))
    assert main(["checks", "--config", str(cfg), "--n-min", "3", "--n-max", "5"]) == 0


def test_delta_one_scaled_tv_non_increasing_within_tolerance():
    rep = run_rates(ExperimentConfig(alpha=0.5))
    assert rep.variable == "N"
    scaled = rep.column("tv") * np.sqrt(rep.column("N"))
    # each step may rise by at most 20%
    assert np.all(scaled[1:] <= 1.2 * scaled[:-1])
    assert not rep.pinsker_violations


def test_qp_limit_report(tmp_path):
    out = tmp_path / "lim.csv"
    rep = run_qp_limit(ExperimentConfig(alpha=0.25, n_min=8, n_max=16, out=str(out)))
    v = rep.verdicts()
    assert v["tv_limit_decreasing"] and v["tv_normal_stable"] and v["kurtosis_matches_limit"]
    assert rep.column("tv_normal").min() > 0.01
    # A_N approaches A geometrically, one factor sqrt(2) per level
    gaps = rep.A - rep.column("A_N")
    assert np.all(gaps > 0)
    assert np.allclose(gaps[:-1] / gaps[1:], np.sqrt(2), rtol=0.02)
    summary = json.loads(out.with_suffix(".json").read_text())
    assert summary["A"] == rep.A
