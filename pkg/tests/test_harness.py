import json
from pathlib import Path

import numpy as np
import pytest

from oscillab.cli import main
from oscillab.harness import (ConfigError, ExperimentConfig, RunReport,
                              check_theorem, coeff_audit, lp_selftest, run,
                              sweep)

SMOKE = dict(kind="pde-loss", family="constant", c=1.0, N=64, nu_min=2,
             nu_max=6, samples=8, t0=1e-4, t1=1.0, seed=0)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_config_parse_and_round_trip():
    text = """
    # comment line
    family = yamazaki-osc
    profile = sin
    N = 256
    theta = 0.25
    """
    cfg = ExperimentConfig.parse(text)
    assert cfg.family == "yamazaki-osc"
    assert cfg.N == 256
    again = ExperimentConfig.parse(cfg.serialize())
    assert again == cfg
    assert again.serialize() == cfg.serialize()
    assert again.config_hash() == cfg.config_hash()


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.parse("family = constant\ntypo_key = 3\n")


def test_config_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        ExperimentConfig.parse("family = constant\nfamily = constant\n")


def test_config_bad_value_rejected():
    with pytest.raises(ConfigError, match="bad value"):
        ExperimentConfig.parse("family = constant\nN = many\n")


@pytest.mark.parametrize("overrides,msg", [
    (dict(profile="weierstrass", theta=0.0), "theta must be positive"),
    (dict(beta=0.5), "beta must be 0"),
    (dict(N=100), "power of two"),
    (dict(nu_min=2, nu_max=4), "nu_max - nu_min"),
    (dict(t0=0.5, t1=0.2), "t0 < t1"),
    (dict(theta=1.5), "theta"),
    (dict(kind="bogus"), "unknown kind"),
])
def test_config_validation(overrides, msg):
    base = dict(family="yamazaki-osc", profile="sin")
    base.update(overrides)
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig(**base).validate()


def test_config_ell_resolution():
    cfg = ExperimentConfig(family="yamazaki-osc", profile="weierstrass", theta=0.5)
    assert cfg.resolved_ell() == 1
    cfg = ExperimentConfig(family="yamazaki-osc", profile="sin")
    assert cfg.resolved_ell() == 0


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def smoke_report(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("smoke")
    cfg = ExperimentConfig(**SMOKE, outdir=str(outdir))
    return cfg, run(cfg)


def test_smoke_run_no_loss(smoke_report):
    cfg, rep = smoke_report
    assert max(abs(s) for s in rep.sigma) <= 0.02
    assert rep.checks["no-loss"]["passed"]
    assert rep.gamma0 == 1.0
    assert (Path(cfg.outdir) / "ledger.csv").read_text().startswith("# oscillab-csv v1\n")
    assert (Path(cfg.outdir) / "run.json").exists()


def test_smoke_report_round_trip(smoke_report):
    cfg, rep = smoke_report
    back = RunReport.load(Path(cfg.outdir) / "run.json")
    assert back.config_hash == rep.config_hash
    assert back.sigma == pytest.approx(rep.sigma)


def test_check_theorem_smoke(smoke_report):
    _, rep = smoke_report
    res = check_theorem(rep, "thm-2.1")
    assert res.passed
    assert res.margins["sup_sigma"] <= 0.02


def test_determinism_csv_bytes(tmp_path):
    cfgs = [ExperimentConfig(**SMOKE, outdir=str(tmp_path / d)) for d in ("a", "b")]
    for cfg in cfgs:
        run(cfg)
    b1 = (tmp_path / "a" / "ledger.csv").read_bytes()
    b2 = (tmp_path / "b" / "ledger.csv").read_bytes()
    assert b1 == b2


def test_run_rejects_invalid_config(tmp_path):
    cfg = ExperimentConfig(family="yamazaki-osc", profile="weierstrass",
                           theta=0.0, outdir=str(tmp_path))
    with pytest.raises(ConfigError):
        run(cfg)


def test_mode_amp_run(tmp_path):
    cfg = ExperimentConfig(kind="mode-amp", family="delta-osc", m=2.0, rho=0.5,
                           delta=0.0, t0=1e-4, t1=1.0, ode_tol=1e-8,
                           xi_pow_min=4, xi_pow_max=6, outdir=str(tmp_path))
    rep = run(cfg)
    assert set(rep.amplification["per_xi"]) == {4, 5, 6}
    assert rep.amplification["max_min_ratio"] >= 1.0
    assert (Path(tmp_path) / "run.json").exists()


def test_mode_amp_needs_time_only(tmp_path):
    cfg = ExperimentConfig(kind="mode-amp", family="yamazaki-osc", profile="sin",
                           outdir=str(tmp_path))
    with pytest.raises(ConfigError, match="time-only"):
        run(cfg)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def test_sweep_empty_axis_is_single_run(tmp_path):
    cfg = ExperimentConfig(**SMOKE, outdir=str(tmp_path))
    results = sweep(cfg, {})
    assert len(results) == 1
    cell, rep, err = results[0]
    assert err is None and cell == {}
    assert (tmp_path / "summary.csv").read_text().startswith("# oscillab-csv v1\n")


def test_sweep_partial_failure_isolated(tmp_path):
    cfg = ExperimentConfig(**SMOKE, outdir=str(tmp_path))
    # N = 4 fails validation inside its own cell; the sibling cell completes
    results = sweep(cfg, {"N": [64, 4]})
    status = {tuple(c.items()): (r is not None) for c, r, e in results}
    assert status[(("N", 64),)] is True
    assert status[(("N", 4),)] is False
    summary = (tmp_path / "summary.csv").read_text()
    assert "ok" in summary and "ConfigError" in summary


# ---------------------------------------------------------------------------
# theorem checks on synthetic reports
# ---------------------------------------------------------------------------

def _fake_report(**kw):
    base = dict(config={"family": "delta-osc", "delta": 0.0}, config_hash="x",
                gamma0=1.0, c_eq=1.0, times=[], sigma=[], residual=[],
                beta_hat=0.0, checks={}, amplification={}, steps_total=0,
                wall_clock_s=0.0)
    base.update(kw)
    return RunReport(**base)


def test_check_thm22_envelope():
    t = list(np.linspace(0.0, 1.0, 11))
    sigma = [0.1 * ti + 0.01 for ti in t]
    rep = _fake_report(times=t, sigma=sigma, residual=[0.01] * 11, beta_hat=0.1)
    res = check_theorem(rep, "thm-2.2")
    assert res.passed
    rep_bad = _fake_report(times=t, sigma=[0.5 * ti**3 for ti in t],
                           residual=[0.01] * 11, beta_hat=0.0)
    assert not check_theorem(rep_bad, "thm-2.2").passed


def test_check_delta_family_synthetic():
    def amp_reports(expo1, top_scale):
        per0 = {p: {"amp_max": 1.5} for p in range(4, 13)}
        per1 = {p: {"amp_max": 2.0 ** (expo1 * p)} for p in range(4, 13)}
        perv = {p: {"amp_max": 2.0 ** (0.01 * p**2 * top_scale)} for p in range(4, 13)}
        r0 = _fake_report(amplification={"per_xi": per0, "max_min_ratio": 1.0,
                                         "exponent": 0.0})
        r1 = _fake_report(config={"family": "delta-osc", "delta": 1.0},
                          amplification={"per_xi": per1, "max_min_ratio": 9.0,
                                         "exponent": expo1})
        rv = _fake_report(config={"family": "violator", "q": 2.0},
                          amplification={"per_xi": perv, "max_min_ratio": 50.0,
                                         "exponent": 0.2 * top_scale})
        return [r0, r1, rv]

    res = check_theorem(amp_reports(0.05, 1.0), "delta-family")
    assert res.passed
    # violator indistinguishable from delta1: must fail
    res = check_theorem(amp_reports(0.3, 0.1), "delta-family")
    assert not res.passed


def test_check_requires_all_families():
    with pytest.raises(ConfigError, match="missing"):
        check_theorem([_fake_report()], "delta-family")
    with pytest.raises(ConfigError, match="unknown criterion"):
        check_theorem([_fake_report()], "thm-9")


# ---------------------------------------------------------------------------
# self tests, audits, CLI
# ---------------------------------------------------------------------------

def test_lp_selftest_quick():
    results = lp_selftest(N=128, trials=50)
    assert all(passed for _, passed, _ in results)


def test_coeff_audit_yamazaki():
    out = coeff_audit("yamazaki-osc", {"m": 2, "rho": 0.5, "profile": "sin"})
    assert out["ellipticity"]["lambda_min"] >= 1.5 - 1e-6
    assert out["oscillation"]["sup_t_dta"] <= 0.5 + 1e-9
    assert out["modulus_ell0"] <= 0.5 * 1.0000001


def test_cli_simulate_and_check(tmp_path, capsys):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("\n".join(f"{k} = {v}" for k, v in SMOKE.items())
                       + f"\noutdir = {tmp_path / 'out'}\n")
    assert main(["simulate", str(cfgfile)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["checks"]["no-loss"]["passed"]
    assert main(["check", str(tmp_path / "out" / "run.json"),
                 "--criterion", "thm-2.1"]) == 0


def test_cli_selftest(capsys):
    assert main(["lp-selftest", "--grid", "128", "--trials", "20"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_cli_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["simulate", str(bad)]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_coeff_audit(capsys):
    assert main(["coeff-audit", "yamazaki-osc",
                 "--params", "m=2,rho=0.5,profile=sin"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lambda0_declared"] == pytest.approx(1.5)


def test_2d_smoke_run(tmp_path):
    cfg = ExperimentConfig(kind="pde-loss", family="yamazaki-osc", m=2.0,
                           rho=0.5, profile="sin", dim=2, N=32, nu_min=2,
                           nu_max=6, samples=4, t0=1e-3, t1=0.2,
                           outdir=str(tmp_path), seed=0)
    rep = run(cfg)
    assert max(abs(s) for s in rep.sigma) <= 0.02
    assert rep.checks["ellipticity"]["passed"]


def test_sweep_parallel_workers(tmp_path, monkeypatch):
    monkeypatch.setenv("OSCILLAB_THREADS", "2")
    cfg = ExperimentConfig(**SMOKE, outdir=str(tmp_path))
    results = sweep(cfg, {"seed": [0, 1]})
    assert all(err is None for _, _, err in results)
    assert (tmp_path / "summary.csv").exists()
