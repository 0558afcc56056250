"""Experiment orchestration: configs, runs, sweeps, and theorem checks.

A run wires the modules together: coefficient audit -> positivity search ->
per-block solves -> energy ledger -> loss fit, then writes ``ledger.csv``
(schema ``# oscillab-csv v1``) and ``run.json`` into the output directory.
CSV bytes are deterministic for a fixed config and seed.

Loss measurement protocol: each block nu in [nu_min, nu_max] is solved on
its own grid N_nu = max(N, oversample * 2^nu), with initial data supported
in block nu and e_nu(t0) normalised to 1; sigma(t) is then the least-squares
slope of (1/2) log2 e_nu(t) against nu.  Blocks need their own grids because
a block at 2^nu must sit inside the dealiased band N/3; doubling the
resolution doubles every per-block grid.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .coefficients import (SamplingPlan, check_ellipticity,
                           check_oscillation_bounds, estimate_space_modulus,
                           make_family)
from .energy import EnergyLedger, block_energy, fit_beta, fit_loss
from .lp import (SpectralField, alpha_symbol, find_gamma0, get_decomposition,
                 grid_coords, make_trials, paraproduct)
from .regularize import blend, block_eps
from .solver import WaveState, advance, cfl_dt, mode_amplification

NO_LOSS_TOL = 0.05       # derivatives; theorem margin for the no-loss check
ENVELOPE_TOL = 0.05      # derivatives; allowed excursion above beta_hat * t
DRIFT_TOL = 0.02         # derivatives; resolution-doubling stability


class ConfigError(ValueError):
    pass


# name -> (type, default, help); None default means required
_SCHEMA = {
    "kind": (str, "pde-loss", "pde-loss | mode-amp"),
    "family": (str, None, "constant | yamazaki-osc | delta-osc | violator"),
    "m": (float, 2.0, "coefficient mean"),
    "rho": (float, 0.5, "oscillation amplitude"),
    "c": (float, 1.0, "constant family value"),
    "profile": (str, "one", "spatial profile name"),
    "terms": (int, 0, "weierstrass terms; 0 = set by grid resolution"),
    "delta": (float, 0.0, "time-oscillation grade in [0,1]"),
    "q": (float, 2.0, "violator exponent, q > 1"),
    "ell": (int, -1, "space regularity exponent; -1 = profile default"),
    "dim": (int, 1, "spatial dimension, 1 or 2"),
    "N": (int, 512, "base grid size (power of two)"),
    "oversample": (int, 4, "per-block grid factor: N_nu = max(N, oversample*2^nu)"),
    "t0": (float, 1e-4, "start time"),
    "t1": (float, 1.0, "end time"),
    "theta": (float, 0.0, "Sobolev shift in [0,1)"),
    "beta": (float, 0.0, "loss-weight rate (0 when ell = 0)"),
    "k1": (float, 0.0, "f_nu weight strength"),
    "nu_min": (int, 2, "lowest block"),
    "nu_max": (int, 10, "highest block"),
    "samples": (int, 64, "energy sample times per run"),
    "data": (str, "block-noise", "block-noise | mode"),
    "safety": (float, 0.25, "CFL safety factor"),
    "ode_tol": (float, 1e-10, "mode-path local error tolerance"),
    "xi_pow_min": (int, 4, "mode path: lowest log2 xi"),
    "xi_pow_max": (int, 12, "mode path: highest log2 xi"),
    "gamma_search_n": (int, 256, "grid for the positivity search"),
    "gamma_trials": (int, 64, "trial fields per gamma"),
    "gamma_pow_max": (int, 14, "doubling search cap 2^this"),
    "outdir": (str, "runs/out", "artifact directory"),
    "seed": (int, 0, "rng seed"),
}


@dataclass
class ExperimentConfig:
    kind: str = "pde-loss"
    family: str = "yamazaki-osc"
    m: float = 2.0
    rho: float = 0.5
    c: float = 1.0
    profile: str = "one"
    terms: int = 0
    delta: float = 0.0
    q: float = 2.0
    ell: int = -1
    dim: int = 1
    N: int = 512
    oversample: int = 4
    t0: float = 1e-4
    t1: float = 1.0
    theta: float = 0.0
    beta: float = 0.0
    k1: float = 0.0
    nu_min: int = 2
    nu_max: int = 10
    samples: int = 64
    data: str = "block-noise"
    safety: float = 0.25
    ode_tol: float = 1e-10
    xi_pow_min: int = 4
    xi_pow_max: int = 12
    gamma_search_n: int = 256
    gamma_trials: int = 64
    gamma_pow_max: int = 14
    outdir: str = "runs/out"
    seed: int = 0

    # -- construction -------------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        """Parse the key = value config document (strict keys)."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            typ = _SCHEMA[key][0]
            try:
                values[key] = typ(val) if typ is not str else val
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def serialize(self) -> str:
        lines = [f"{k} = {getattr(self, k)}" for k in _SCHEMA]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]

    # -- validation ---------------------------------------------------------

    def validate(self):
        if self.kind not in ("pde-loss", "mode-amp"):
            raise ConfigError(f"unknown kind {self.kind!r}")
        if self.N < 8 or (self.N & (self.N - 1)) != 0:
            raise ConfigError("N must be a power of two, at least 8")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if not 0.0 <= self.theta < 1.0:
            raise ConfigError("theta must lie in [0, 1)")
        ell = self.resolved_ell()
        if ell == 1 and self.theta == 0.0:
            raise ConfigError("theta must be positive when ell = 1")
        if ell == 0 and self.beta != 0.0:
            raise ConfigError("beta must be 0 when ell = 0")
        field = self.build_family()
        if not self.t0 < self.t1 <= field.T_final:
            raise ConfigError(
                f"need t0 < t1 <= T_final = {field.T_final}, got [{self.t0}, {self.t1}]")
        if self.kind == "pde-loss" and self.nu_max - self.nu_min < 4:
            raise ConfigError("need nu_max - nu_min >= 4 for the loss fit")
        if self.oversample < 4:
            raise ConfigError("oversample must be at least 4")

    def resolved_ell(self) -> int:
        if self.ell >= 0:
            return self.ell
        return 1 if self.profile == "weierstrass" else 0

    # -- family construction ------------------------------------------------

    def family_params(self, grid_n: Optional[int] = None) -> dict:
        if self.family == "constant":
            return {"c": self.c}
        if self.family == "yamazaki-osc":
            terms = self.terms
            if terms == 0:
                terms = max(1, int(math.log2((grid_n or self.N) // 3))) \
                    if self.profile == "weierstrass" else 24
            params = {"m": self.m, "rho": self.rho, "profile": self.profile,
                      "terms": terms}
            if self.ell >= 0:
                params["ell"] = self.ell
            return params
        if self.family == "delta-osc":
            return {"m": self.m, "rho": self.rho, "delta": self.delta}
        if self.family == "violator":
            return {"m": self.m, "rho": self.rho, "q": self.q}
        raise ConfigError(f"unknown family {self.family!r}")

    def build_family(self, grid_n: Optional[int] = None):
        return make_family(self.family, self.family_params(grid_n), dim=self.dim)


# ---------------------------------------------------------------------------
# run report
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    config_hash: str
    gamma0: float
    c_eq: float
    times: list
    sigma: list
    residual: list
    beta_hat: float
    checks: dict
    amplification: dict
    steps_total: int
    wall_clock_s: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_json(Path(path).read_text())


def _block_grid(cfg: ExperimentConfig, nu: int) -> int:
    return max(cfg.N, cfg.oversample * 2**nu)


def _block_data(cfg: ExperimentConfig, nu: int, N: int) -> SpectralField:
    """Initial data supported in dyadic block nu (cosine mode or seeded
    band noise around 2^nu)."""
    coords = grid_coords(cfg.dim, N)
    if cfg.data == "mode":
        return SpectralField.from_values(np.cos((2**nu) * coords[0]))
    rng = np.random.default_rng([cfg.seed, nu])
    vals = np.zeros((N,) * cfg.dim)
    lo, hi = int(0.75 * 2**nu), int(1.25 * 2**nu)
    for k in range(lo, hi + 1):
        amp, phase = rng.standard_normal(), rng.uniform(0, 2 * np.pi)
        vals += amp * np.cos(k * coords[0] + phase)
    return SpectralField.from_values(vals)


def _solve_block(cfg: ExperimentConfig, nu: int, sample_times: np.ndarray,
                 gamma0: float):
    """Solve one block's run and sample its corrected energies."""
    N = _block_grid(cfg, nu)
    field = cfg.build_family(N)
    decomp = get_decomposition(cfg.dim, N)
    reg = blend(field, block_eps(nu, field.T_final))
    sym = alpha_symbol(reg, gamma0)

    u0 = _block_data(cfg, nu, N)
    state = WaveState(cfg.t0, u0.band_limit(N / 3.0), SpectralField.zero(cfg.dim, N))
    s0 = block_energy(state, sym, nu, decomp)
    if s0.e_nu <= 0:
        raise RuntimeError(f"block {nu}: initial data carries no block energy")
    state = state.scaled(1.0 / math.sqrt(s0.e_nu))

    dt = cfl_dt(N, field.Lambda0, cfg.safety)
    e_nu = np.zeros(len(sample_times))
    e_cl = np.zeros(len(sample_times))
    steps = 0
    for i, t in enumerate(sample_times):
        if t > state.t:
            state, n = advance(state, field, float(t), dt)
            steps += n
        s = block_energy(state, sym, nu, decomp)
        e_nu[i], e_cl[i] = s.e_nu, s.e_classical
    return e_nu, e_cl, steps


def _run_pde_loss(cfg: ExperimentConfig, report_checks: dict) -> dict:
    field = cfg.build_family()
    ell = cfg.resolved_ell()

    # positivity threshold on the search grid, over the block ensemble; the
    # quotients are grid-insensitive, so planar runs search on a smaller grid
    search_n = cfg.gamma_search_n if cfg.dim == 1 else min(cfg.gamma_search_n, 64)
    n_trials = cfg.gamma_trials if cfg.dim == 1 else min(cfg.gamma_trials, 16)
    nus = list(range(cfg.nu_min, cfg.nu_max + 1, max(1, (cfg.nu_max - cfg.nu_min) // 4)))
    syms = [alpha_symbol(blend(cfg.build_family(search_n),
                               block_eps(nu, field.T_final)), 1.0) for nu in nus]
    trials = make_trials(cfg.dim, search_n, n_trials, cfg.seed)
    times = np.logspace(math.log10(max(cfg.t0 * 1e-2, 1e-8)), math.log10(cfg.t1), 7)
    gamma0, _ = find_gamma0(syms, trials, times, field.lambda0, cfg.gamma_pow_max)

    sample_times = np.linspace(cfg.t0, cfg.t1, cfg.samples)
    ledger = EnergyLedger(times=sample_times, theta=cfg.theta, beta=cfg.beta,
                          K1=cfg.k1, ell=ell, gamma0=gamma0)
    steps_total = 0
    for nu in range(cfg.nu_min, cfg.nu_max + 1):
        e_nu, e_cl, steps = _solve_block(cfg, nu, sample_times, gamma0)
        ledger.e_nu[nu] = e_nu
        ledger.e_classical[nu] = e_cl
        steps_total += steps

    curve = fit_loss(ledger, (cfg.nu_min, cfg.nu_max))
    beta_hat = fit_beta(curve)
    c_eq = ledger.equivalence_constant()

    sup_sigma = float(np.max(curve.sigma))
    sup_resid = float(np.max(curve.residual))
    sup_envelope = float(np.max(curve.sigma - beta_hat * curve.times))
    report_checks["no-loss"] = {
        "passed": bool(sup_sigma <= NO_LOSS_TOL),
        "sup_sigma": sup_sigma, "margin": NO_LOSS_TOL - sup_sigma}
    report_checks["linear-loss"] = {
        "passed": bool(sup_envelope <= ENVELOPE_TOL and sup_resid <= ENVELOPE_TOL),
        "beta_hat": beta_hat, "sup_envelope": sup_envelope, "sup_residual": sup_resid}
    return {"gamma0": gamma0, "ledger": ledger, "curve": curve,
            "beta_hat": beta_hat, "c_eq": c_eq, "steps": steps_total}


def _run_mode_amp(cfg: ExperimentConfig, report_checks: dict) -> dict:
    field = cfg.build_family()
    if not field.time_only:
        raise ConfigError("mode-amp runs need a time-only family")
    amps = {}
    steps_total = 0
    for p in range(cfg.xi_pow_min, cfg.xi_pow_max + 1):
        r = mode_amplification(field, float(2**p), cfg.t0, cfg.t1, cfg.ode_tol)
        amps[p] = {"xi": float(2**p), "amp_max": r["amp_max"],
                   "amp_cos": r["amp_cos"], "steps": r["steps"],
                   "wronskian_drift": r["wronskian_drift"]}
        steps_total += r["steps"]
    ps = np.array(sorted(amps))
    la = np.log2([amps[p]["amp_max"] for p in ps])
    exponent = float(np.polyfit(ps, la, 1)[0]) if len(ps) > 1 else 0.0
    local = {int(p): float(d) for p, d in zip(ps[1:], np.diff(la))}
    ratio = float(2.0 ** (np.max(la) - np.min(la)))
    report_checks["amplification"] = {
        "passed": True, "exponent": exponent, "max_min_ratio": ratio}
    return {"amps": amps, "exponent": exponent, "local_exponents": local,
            "max_min_ratio": ratio, "steps": steps_total}


def run(cfg: ExperimentConfig) -> RunReport:
    """Execute one experiment and write its artifacts."""
    cfg.validate()
    start = time.perf_counter()
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    field = cfg.build_family()
    ell_check = check_ellipticity(field, SamplingPlan(t_per_decade=50, x_count=64))
    checks = {"ellipticity": {"passed": ell_check["lambda_min"] > 0.0, **ell_check}}

    amplification = {}
    if cfg.kind == "mode-amp":
        res = _run_mode_amp(cfg, checks)
        gamma0, c_eq, beta_hat = 1.0, 1.0, 0.0
        times, sigma, residual = [], [], []
        amplification = {"per_xi": res["amps"], "exponent": res["exponent"],
                         "local_exponents": res["local_exponents"],
                         "max_min_ratio": res["max_min_ratio"]}
        steps = res["steps"]
    else:
        res = _run_pde_loss(cfg, checks)
        gamma0, c_eq, beta_hat = res["gamma0"], res["c_eq"], res["beta_hat"]
        curve = res["curve"]
        times = [float(t) for t in curve.times]
        sigma = [float(s) for s in curve.sigma]
        residual = [float(r) for r in curve.residual]
        res["ledger"].write_csv(outdir / "ledger.csv")
        steps = res["steps"]

    report = RunReport(
        config=json.loads(json.dumps(asdict(cfg))), config_hash=cfg.config_hash(),
        gamma0=gamma0, c_eq=c_eq, times=times, sigma=sigma, residual=residual,
        beta_hat=beta_hat, checks=checks, amplification=amplification,
        steps_total=int(steps), wall_clock_s=time.perf_counter() - start)
    (outdir / "run.json").write_text(report.to_json())
    return report


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_cell(args):
    cfg, cell = args
    try:
        report = run(cfg)
        return cell, report, None
    except Exception as exc:  # failures stay local to the cell
        return cell, None, f"{type(exc).__name__}: {exc}"


def sweep(base: ExperimentConfig, axes: dict[str, list]) -> list:
    """Run every combination of the axis values; partial failures are
    recorded per cell and the sweep continues."""
    cells = [{}]
    for key, values in axes.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown axis key {key!r}")
        cells = [{**c, key: v} for c in cells for v in values]

    jobs = []
    for cell in cells:
        cfg = ExperimentConfig(**{**asdict(base), **cell})
        tag = "-".join(f"{k}={v}" for k, v in cell.items()) or "single"
        cfg.outdir = str(Path(base.outdir) / tag)
        jobs.append((cfg, cell))

    workers = int(os.environ.get("OSCILLAB_THREADS", "1"))
    results = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]

    summary_path = Path(base.outdir) / "summary.csv"
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    with open(summary_path, "w") as fh:
        fh.write("# oscillab-csv v1\n")
        fh.write("cell,gamma0,c_eq,beta_hat,sup_sigma,exponent,status\n")
        for cell, report, err in results:
            tag = "-".join(f"{k}={v}" for k, v in cell.items()) or "single"
            if report is None:
                fh.write(f"{tag},,,,,,{err}\n")
            else:
                sup_sigma = max(report.sigma) if report.sigma else ""
                expo = report.amplification.get("exponent", "") \
                    if report.amplification else ""
                fh.write(f"{tag},{report.gamma0},{report.c_eq},{report.beta_hat},"
                         f"{sup_sigma},{expo},ok\n")
    return results


# ---------------------------------------------------------------------------
# theorem checks
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    which: str
    passed: bool
    margins: dict


def check_theorem(reports, which: str) -> CheckResult:
    """Evaluate a theorem-level criterion on finished run reports.

    thm-2.1       no loss: sup_t sigma(t) <= 0.05 (one pde-loss report)
    thm-2.2       linear loss: sigma(t) <= beta_hat t + 0.05, residuals <= 0.05
    delta-family  trichotomy over three mode-amp reports
                  (delta = 0, delta = 1, violator)
    """
    if isinstance(reports, RunReport):
        reports = [reports]
    if which == "thm-2.1":
        (rep,) = reports
        if not rep.sigma:
            raise ConfigError("thm-2.1 needs a pde-loss report")
        sup_sigma = max(rep.sigma)
        return CheckResult(which, sup_sigma <= NO_LOSS_TOL,
                           {"sup_sigma": sup_sigma, "tol": NO_LOSS_TOL})
    if which == "thm-2.2":
        (rep,) = reports
        if not rep.sigma:
            raise ConfigError("thm-2.2 needs a pde-loss report")
        t = np.array(rep.times)
        sig = np.array(rep.sigma)
        sup_env = float(np.max(sig - rep.beta_hat * t))
        sup_resid = max(rep.residual)
        passed = (math.isfinite(rep.beta_hat) and sup_env <= ENVELOPE_TOL
                  and sup_resid <= ENVELOPE_TOL)
        return CheckResult(which, passed,
                           {"beta_hat": rep.beta_hat, "sup_envelope": sup_env,
                            "sup_residual": sup_resid, "tol": ENVELOPE_TOL})
    if which == "delta-family":
        tagged = {}
        for rep in reports:
            fam = rep.config["family"]
            if fam == "violator":
                tagged["violator"] = rep
            elif fam == "delta-osc":
                tagged[f"delta{rep.config['delta']:g}"] = rep
        missing = {"delta0", "delta1", "violator"} - set(tagged)
        if missing:
            raise ConfigError(f"delta-family check missing reports: {sorted(missing)}")
        r0, r1, rv = tagged["delta0"], tagged["delta1"], tagged["violator"]
        ratio0 = r0.amplification["max_min_ratio"]
        expo1 = r1.amplification["exponent"]
        per_xi = rv.amplification["per_xi"]
        ps = np.array(sorted(int(p) for p in per_xi))
        la = np.log2([per_xi[str(p) if str(p) in per_xi else p]["amp_max"]
                      for p in ps])
        half = len(ps) // 2
        low_slope = float(np.polyfit(ps[: half + 1], la[: half + 1], 1)[0])
        top_slope = float(np.polyfit(ps[half:], la[half:], 1)[0])
        passed = (ratio0 <= 10.0 and 0.0 < expo1 < math.inf
                  and top_slope >= 2.0 * expo1 and top_slope > low_slope)
        return CheckResult(which, passed, {
            "delta0_max_min_ratio": ratio0, "delta1_exponent": expo1,
            "violator_top_slope": top_slope, "violator_low_slope": low_slope})
    raise ConfigError(f"unknown criterion {which!r} "
                      "(thm-2.1 | thm-2.2 | delta-family)")


# ---------------------------------------------------------------------------
# self-tests and audits
# ---------------------------------------------------------------------------

def lp_selftest(N: int = 256, trials: int = 1000, seed: int = 0) -> list:
    """Partition of unity, reconstruction, Bernstein bounds, constant
    paraproduct identity.  Returns (name, passed, value) tuples."""
    rng = np.random.default_rng(seed)
    decomp = get_decomposition(1, N)
    results = []
    defect = decomp.partition_defect()
    results.append(("partition-of-unity", defect <= 1e-12, defect))

    u = SpectralField.from_values(rng.standard_normal(N))
    rec = sum((decomp.block(u, j) for j in range(1, decomp.J + 1)),
              decomp.block(u, 0))
    defect = float(np.max(np.abs(rec.coeff - u.coeff)))
    results.append(("block-reconstruction", defect <= 1e-12, defect))

    worst = 0.0
    for _ in range(trials):
        v = SpectralField.from_values(rng.standard_normal(N)).band_limit(N / 3.0)
        for j in range(1, decomp.J + 1):
            b = decomp.block(v, j)
            nb = b.norm()
            if nb < 1e-14:
                continue
            ng = b.gradient_norm()
            worst = max(worst, ng / (2.0 ** (j + 1) * nb), nb * 2.0 ** (j - 1) / ng)
    results.append(("bernstein", worst <= 1.0, worst))

    w = SpectralField.from_values(rng.standard_normal(N)).band_limit(N / 3.0)
    defect = 0.0
    for gamma in (1.0, 8.0, 300.0):
        tc = paraproduct(2.5, w, gamma)
        defect = max(defect, float(np.max(np.abs(tc.coeff - 2.5 * w.coeff))))
    results.append(("constant-paraproduct", defect <= 1e-12, defect))
    return results


def coeff_audit(family: str, params: dict, dim: int = 1) -> dict:
    """Empirical regularity/oscillation constants of one family."""
    field = make_family(family, params, dim=dim)
    plan = SamplingPlan()
    out = {
        "family": family, "params": field.params,
        "lambda0_declared": field.lambda0, "Lambda0_declared": field.Lambda0,
        "ellipticity": check_ellipticity(field, plan),
        "oscillation": check_oscillation_bounds(field, plan),
        "declared": field.osc_constants,
        "modulus_ell0": estimate_space_modulus(field, 0),
        "modulus_ell1": estimate_space_modulus(field, 1),
    }
    return out
