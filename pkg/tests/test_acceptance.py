"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured margins and runtime.

The heavy experiment pairs (base resolution plus doubled resolution) are run
once per session and shared between the criteria that read them.  Artifacts
land in runs/acceptance/ at the repository root so the plotting frontend can
consume them.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oscillab.coefficients import make_family
from oscillab.energy import EnergyLedger
from oscillab.harness import (ExperimentConfig, check_theorem, lp_selftest,
                              run)
from oscillab.lp import (SpectralField, alpha_symbol, find_gamma0,
                         make_trials, positivity_quotients)
from oscillab.regularize import blend, block_eps, f_weight, phi
from oscillab.solver import solve_mode

ARTIFACTS = Path(__file__).resolve().parent.parent / "runs" / "acceptance"


def _report(name, passed, elapsed, budget_s, details):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {status} ({elapsed:.1f}s / budget {budget_s:.0f}s) {details}")
    assert passed, f"{name}: {details}"
    assert elapsed < budget_s, f"{name} exceeded runtime budget"


# ---------------------------------------------------------------------------
# shared experiment pairs
# ---------------------------------------------------------------------------

def _loss_pair(profile, theta, tag):
    start = time.perf_counter()
    base = dict(kind="pde-loss", family="yamazaki-osc", m=2.0, rho=0.5,
                profile=profile, theta=theta, nu_min=2, nu_max=10, samples=64,
                t0=1e-4, t1=1.0, data="block-noise", seed=0)
    reports = {}
    for label, N, osf in (("base", 512, 4), ("doubled", 1024, 8)):
        cfg = ExperimentConfig(**base, N=N, oversample=osf,
                               outdir=str(ARTIFACTS / f"{tag}-{label}"))
        reports[label] = run(cfg)
    return reports, time.perf_counter() - start


@pytest.fixture(scope="session")
def ell0_pair():
    return _loss_pair("triangle", 0.0, "ell0")


@pytest.fixture(scope="session")
def ell1_pair():
    return _loss_pair("weierstrass", 0.5, "ell1")


@pytest.fixture(scope="session")
def mode_reports():
    start = time.perf_counter()
    reports = []
    for family, extra, tag in (
            ("delta-osc", {"delta": 0.0}, "mode-delta0"),
            ("delta-osc", {"delta": 1.0}, "mode-delta1"),
            ("violator", {"q": 2.0}, "mode-violator")):
        cfg = ExperimentConfig(kind="mode-amp", family=family, m=1.1, rho=0.9,
                               t0=1e-6, t1=1.0, ode_tol=1e-10, xi_pow_min=4,
                               xi_pow_max=12, outdir=str(ARTIFACTS / tag),
                               seed=0, **extra)
        reports.append(run(cfg))
    return reports, time.perf_counter() - start


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_acceptance_lp_selftest():
    start = time.perf_counter()
    results = lp_selftest(N=256, trials=1000, seed=0)
    elapsed = time.perf_counter() - start
    failed = [name for name, ok, _ in results if not ok]
    details = "; ".join(f"{name}={val:.2e}" for name, _, val in results)
    _report("lp-selftest", not failed, elapsed, 30.0, details)


def test_acceptance_positivity():
    start = time.perf_counter()
    margins = []
    ok = True
    for snum, profile in enumerate(("sin", "weierstrass")):
        field = make_family("yamazaki-osc",
                            {"m": 2.0, "rho": 0.5, "profile": profile, "terms": 6})
        nus = list(range(0, 11, 2))
        syms = [alpha_symbol(blend(field, block_eps(nu, field.T_final)), 1.0)
                for nu in nus]
        trials = make_trials(1, 256, 64, seed=11)
        times = np.logspace(-6, 0, 7)
        gamma0, _ = find_gamma0(syms, trials, times, field.lambda0,
                                gamma_max_pow=14)
        ok = ok and gamma0 <= 2**10
        # fresh-field verification at the returned gamma
        worst = math.inf
        fresh = make_trials(1, 256, 1000, seed=1000 + snum,
                            include_low_modes=False)
        for i, u in enumerate(fresh):
            ev = syms[i % len(syms)].with_gamma(gamma0)
            t = float(times[i % len(times)])
            q1, q2 = positivity_quotients(ev, u, t)
            worst = min(worst, q1, q2)
        ok = ok and worst >= field.lambda0 / 2.0
        margins.append(f"{profile}: gamma0={gamma0:g} worst_quotient={worst:.4f} "
                       f"(threshold {field.lambda0 / 2.0})")
    _report("positivity", ok, time.perf_counter() - start, 300.0,
            "; ".join(margins))


def test_acceptance_regularization():
    start = time.perf_counter()
    field = make_family("yamazaki-osc", {"m": 2.0, "rho": 0.5, "profile": "sin"})
    rng = np.random.default_rng(3)
    ok = True
    details = []

    # exact-region identities at 1e-10
    worst_exact = 0.0
    for nu in (2, 5, 8):
        eps = block_eps(nu, field.T_final)
        reg = blend(field, eps)
        x = rng.uniform(0, 2 * np.pi, 10)
        for t in rng.uniform(2 * eps, 1.0, 10):
            worst_exact = max(worst_exact, float(np.max(np.abs(
                reg.scalar(t, x) - field.scalar(t, x)))))
        frozen = field.scalar(eps, x)
        for t in rng.uniform(-0.1, eps / 2, 10):
            worst_exact = max(worst_exact, float(np.max(np.abs(
                reg.scalar(t, x) - frozen))))
    ok = ok and worst_exact <= 1e-10
    details.append(f"exact-region defect {worst_exact:.1e}")

    # ellipticity preservation
    reg = blend(field, 2.0 ** -6)
    t = rng.uniform(-0.1, 1.0, 400)
    x = rng.uniform(0, 2 * np.pi, 400)
    vals = np.array([float(reg.scalar(ti, xi)) for ti, xi in zip(t, x)])
    ell_ok = bool(np.all(vals >= field.lambda0 - 1e-12)
                  and np.all(vals <= field.Lambda0 + 1e-12))
    ok = ok and ell_ok
    details.append(f"ellipticity preserved {ell_ok}")

    # derivative-envelope constants uniform over nu <= 10
    c1s, c3s = [], []
    for nu in range(0, 11):
        eps = block_eps(nu, field.T_final)
        regn = blend(field, eps)
        ph = phi(eps)
        c1 = c3 = 0.0
        for tt in np.geomspace(eps / 1.9, 1.0, 40):
            pv = float(ph(tt))
            if pv == 0.0:
                continue
            c1 = max(c1, abs(regn.time_factor_dt(tt)) / pv)
            c3 = max(c3, abs(regn.time_factor_dtt(tt)) / pv**2)
        c1s.append(c1)
        c3s.append(c3)
    spread1 = max(c1s) / min(c1s)
    spread3 = max(c3s) / min(c3s)
    ok = ok and spread1 <= 10.0 and spread3 <= 10.0
    details.append(f"C1 spread {spread1:.2f}, C3 spread {spread3:.2f}")

    # f_nu(1) <= 4 for nu <= 12
    fmax = max(float(f_weight(nu, 1.0)) for nu in range(0, 13))
    ok = ok and fmax <= 4.0
    details.append(f"max f_nu(1) = {fmax:.3f}")

    _report("regularization", ok, time.perf_counter() - start, 120.0,
            "; ".join(details))


def test_acceptance_energy_equivalence(ell0_pair):
    reports, runs_elapsed = ell0_pair
    start = time.perf_counter()
    c_eqs = {}
    for label, rep in reports.items():
        led = EnergyLedger.read_csv(Path(rep.config["outdir"]) / "ledger.csv")
        worst = 1.0
        for nu in led.nus():
            if not 2 <= nu <= 8:
                continue
            r = led.e_nu[nu] / led.e_classical[nu]
            worst = max(worst, float(np.max(r)), float(1.0 / np.min(r)))
        c_eqs[label] = worst
    drift = abs(c_eqs["base"] / c_eqs["doubled"] - 1.0)
    ok = drift <= 0.2 and all(math.isfinite(v) for v in c_eqs.values())
    _report("energy-equivalence", ok,
            runs_elapsed + time.perf_counter() - start, 600.0,
            f"C_eq base {c_eqs['base']:.3f}, doubled {c_eqs['doubled']:.3f}, "
            f"rel drift {drift:.3f}")


def test_acceptance_thm21_no_loss(ell0_pair):
    reports, runs_elapsed = ell0_pair
    start = time.perf_counter()
    rep = reports["base"]
    res = check_theorem(rep, "thm-2.1")
    drift = float(np.max(np.abs(np.array(rep.sigma)
                                - np.array(reports["doubled"].sigma))))
    ok = res.passed and drift <= 0.02
    _report("thm-2.1-no-loss", ok,
            runs_elapsed + time.perf_counter() - start, 1200.0,
            f"sup sigma {res.margins['sup_sigma']:.4f} <= 0.05, "
            f"doubling drift {drift:.4f} <= 0.02")


def test_acceptance_thm22_linear_loss(ell1_pair):
    reports, runs_elapsed = ell1_pair
    start = time.perf_counter()
    rep = reports["base"]
    res = check_theorem(rep, "thm-2.2")
    drift = float(np.max(np.abs(np.array(rep.sigma)
                                - np.array(reports["doubled"].sigma))))
    ok = res.passed and drift <= 0.02 and math.isfinite(rep.beta_hat)
    _report("thm-2.2-linear-loss", ok,
            runs_elapsed + time.perf_counter() - start, 1200.0,
            f"beta_hat {rep.beta_hat:.4f}, envelope excursion "
            f"{res.margins['sup_envelope']:.4f} <= 0.05, residuals "
            f"{res.margins['sup_residual']:.4f} <= 0.05, drift {drift:.4f}")


def test_acceptance_delta_trichotomy(mode_reports):
    reports, runs_elapsed = mode_reports
    start = time.perf_counter()
    res = check_theorem(reports, "delta-family")
    _report("delta-trichotomy", res.passed,
            runs_elapsed + time.perf_counter() - start, 600.0,
            ", ".join(f"{k}={v:.3f}" for k, v in res.margins.items()))


def test_acceptance_solver_oracles():
    from oscillab.lp import grid_coords
    from oscillab.solver import WaveState, cfl_dt, step
    from oscillab.coefficients import CoefficientField

    start = time.perf_counter()
    details = []
    ok = True

    # constant-coefficient mode exactness at 1e-6
    N, k = 64, 4
    x = grid_coords(1, N)[0]
    f = make_family("constant", {"c": 1.0})
    st = WaveState(0.0, SpectralField.from_values(np.cos(k * x)),
                   SpectralField.zero(1, N))
    dt = (2 * np.pi / k) / 200
    for _ in range(200):
        st = step(st, f, dt)
    err = float(np.max(np.abs(st.u.values() - np.cos(k * x))))
    ok = ok and err <= 1e-6
    details.append(f"mode exactness {err:.1e}")

    # energy conservation for a static spatial coefficient at 1e-6
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    half = lambda t: np.full_like(np.asarray(t, dtype=float), 0.5)
    A = CoefficientField(dim=1, name="static", params={}, m=2.0,
                         time_factor=half, time_factor_dt=zero,
                         time_factor_dtt=zero, profile=np.sin, sup_profile=1.0,
                         lambda0=1.5, Lambda0=2.5, ell=0, delta=0.0,
                         osc_constants={}, T_final=10.0, time_only=False,
                         static=True)
    st = WaveState(0.0, SpectralField.from_values(np.cos(x)),
                   SpectralField.zero(1, N))

    def energy(s):
        du = np.real(np.fft.ifftn(1j * np.fft.fftfreq(N, 1.0 / N) * s.u.coeff) * N)
        return s.ut.norm() ** 2 + float(np.mean(A.scalar(s.t, x) * du**2))

    e0 = energy(st)
    dtc = cfl_dt(N, A.Lambda0, 0.1)
    while st.t < 1.0 - 1e-12:
        st = step(st, A, min(dtc, 1.0 - st.t))
    cons = abs(energy(st) / e0 - 1.0)
    ok = ok and cons <= 1e-6
    details.append(f"conservation {cons:.1e}")

    # RK4 order ratio 16 +- 2
    def final_error(nsteps):
        s = WaveState(0.0, SpectralField.from_values(np.cos(k * x)),
                      SpectralField.zero(1, N))
        h = 0.5 / nsteps
        for _ in range(nsteps):
            s = step(s, f, h)
        return np.max(np.abs(s.u.values() - np.cos(k * x) * math.cos(k * s.t)))

    ratio = final_error(100) / final_error(200)
    ok = ok and 14.0 <= ratio <= 18.0
    details.append(f"RK4 ratio {ratio:.2f}")

    # Wronskian drift <= 10 tol on the short constant-coefficient run
    tol = 1e-10
    traj = solve_mode(lambda t: 4.0, 3.0, (1e-6, 1e-6 + 2 * np.pi / 6), tol)
    drift = traj.wronskian_drift()
    ok = ok and drift <= 10 * tol
    details.append(f"wronskian drift {drift:.1e}")

    _report("solver-oracles", ok, time.perf_counter() - start, 120.0,
            "; ".join(details))
