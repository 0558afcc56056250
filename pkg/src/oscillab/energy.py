"""Block energies with the low-order corrector, weighted totals, and the
derivative-loss read-off.

The corrected block fields are
    v_nu = T_{alpha^(-1/2)} d_t u_nu - T_{d_t(alpha^(-1/2))} u_nu
    w_nu = T_{alpha^(1/2) (gamma^2+|xi|^2)^(1/2)} u_nu
and e_nu = ||v_nu||^2 + ||w_nu||^2 + ||u_nu||^2, which stays equivalent to
the classical block energy uniformly in nu and t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .lp import (DyadicDecomposition, SymbolEvaluator, get_decomposition,
                 paraproduct)
from .regularize import f_weight
from .solver import WaveState

CSV_HEADER = "# oscillab-csv v1"
CSV_COLUMNS = ("t", "nu", "e_nu", "e_classical", "weight", "total")

# modes this far (relatively) below the spectral peak cannot move the
# energies at measurement precision and are skipped by the symbol path
MODE_REL_TOL = 1e-13


def block_fields(state: WaveState, sym: SymbolEvaluator, nu: int,
                 decomp: Optional[DyadicDecomposition] = None,
                 method: str = "auto") -> dict:
    """Corrected block fields {v_nu, w_nu, u_nu} of one solution snapshot."""
    decomp = decomp or get_decomposition(state.dim, state.N)
    u_nu = decomp.block(state.u, nu)
    ut_nu = decomp.block(state.ut, nu)
    bound = sym.bind(state.t, state.dim, state.N)
    kw = dict(decomp=decomp, method=method, mode_rel_tol=MODE_REL_TOL)
    v = paraproduct(bound.symbol("alpha_inv_half"), ut_nu, sym.gamma, **kw) - \
        paraproduct(bound.symbol("dt_alpha_inv_half"), u_nu, sym.gamma, **kw)
    w = paraproduct(bound.symbol("order1"), u_nu, sym.gamma, **kw)
    return {"v_nu": v, "w_nu": w, "u_nu": u_nu, "ut_nu": ut_nu}


@dataclass(frozen=True)
class BlockEnergySample:
    """Corrected and classical energies of one block at one time."""

    nu: int
    t: float
    e_nu: float
    e_classical: float

    @property
    def ratio(self) -> float:
        return self.e_nu / self.e_classical if self.e_classical > 0 else math.inf


def block_energy(state: WaveState, sym: SymbolEvaluator, nu: int,
                 decomp: Optional[DyadicDecomposition] = None,
                 method: str = "auto") -> BlockEnergySample:
    fields = block_fields(state, sym, nu, decomp, method)
    e_nu = (fields["v_nu"].norm() ** 2 + fields["w_nu"].norm() ** 2
            + fields["u_nu"].norm() ** 2)
    e_cl = (fields["ut_nu"].norm() ** 2 + fields["u_nu"].norm() ** 2
            + fields["u_nu"].gradient_norm() ** 2)
    return BlockEnergySample(nu, state.t, e_nu, e_cl)


# ---------------------------------------------------------------------------
# weights and the total energy
# ---------------------------------------------------------------------------

def weight(nu: int, t, theta: float, beta: float, K1: float):
    """exp(-K1 f_nu(t)) exp(-2 beta (nu+1) t) 2^(-2 nu theta)."""
    t = np.asarray(t, dtype=float)
    w = (2.0 ** (-2.0 * nu * theta)) * np.exp(-2.0 * beta * (nu + 1) * t)
    if K1 != 0.0:
        w = w * np.exp(-K1 * f_weight(nu, t))
    return w


def total_energy(times, e_series: dict, theta: float, beta: float, K1: float,
                 ell: int = 0):
    """Weighted total sum_nu weight(nu, t) e_nu(t) over the recorded blocks."""
    if not 0.0 <= theta < 1.0:
        raise ValueError("theta must lie in [0, 1)")
    if ell == 1 and theta == 0.0:
        raise ValueError("theta must be positive when ell = 1")
    if ell == 0 and beta != 0.0:
        raise ValueError("beta is fixed to 0 when ell = 0")
    times = np.asarray(times, dtype=float)
    total = np.zeros_like(times)
    for nu, e in e_series.items():
        total += weight(int(nu), times, theta, beta, K1) * np.asarray(e, dtype=float)
    return total


# ---------------------------------------------------------------------------
# ledger
# ---------------------------------------------------------------------------

@dataclass
class EnergyLedger:
    """Time series of block energies for one run, with the weighted total."""

    times: np.ndarray
    e_nu: dict = dc_field(default_factory=dict)         # nu -> array over times
    e_classical: dict = dc_field(default_factory=dict)  # nu -> array over times
    theta: float = 0.0
    beta: float = 0.0
    K1: float = 0.0
    ell: int = 0
    gamma0: float = 1.0

    def nus(self):
        return sorted(self.e_nu)

    def totals(self) -> np.ndarray:
        return total_energy(self.times, self.e_nu, self.theta, self.beta,
                            self.K1, self.ell)

    def equivalence_constant(self) -> float:
        """Smallest C with e_nu/e_classical in [1/C, C] over all samples."""
        worst = 1.0
        for nu in self.nus():
            r = np.asarray(self.e_nu[nu]) / np.asarray(self.e_classical[nu])
            worst = max(worst, float(np.max(r)), float(1.0 / np.min(r)))
        return worst

    def write_csv(self, path):
        totals = self.totals()
        with open(path, "w") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i, t in enumerate(self.times):
                for nu in self.nus():
                    w = float(weight(nu, t, self.theta, self.beta, self.K1))
                    fh.write("%.17g,%d,%.17g,%.17g,%.17g,%.17g\n" % (
                        t, nu, self.e_nu[nu][i], self.e_classical[nu][i],
                        w, totals[i]))

    @classmethod
    def read_csv(cls, path) -> "EnergyLedger":
        with open(path) as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError(f"not an oscillab ledger: header {header!r}")
            cols = fh.readline().strip().split(",")
            if tuple(cols) != CSV_COLUMNS:
                raise ValueError(f"unexpected ledger columns {cols}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        times = sorted({float(r[0]) for r in rows})
        nus = sorted({int(r[1]) for r in rows})
        tindex = {t: i for i, t in enumerate(times)}
        led = cls(times=np.array(times))
        for nu in nus:
            led.e_nu[nu] = np.zeros(len(times))
            led.e_classical[nu] = np.zeros(len(times))
        for r in rows:
            i, nu = tindex[float(r[0])], int(r[1])
            led.e_nu[nu][i] = float(r[2])
            led.e_classical[nu][i] = float(r[3])
        return led


# ---------------------------------------------------------------------------
# loss read-off
# ---------------------------------------------------------------------------

@dataclass
class LossCurve:
    """sigma(t): fitted derivative loss, with per-time fit residuals."""

    times: np.ndarray
    sigma: np.ndarray
    residual: np.ndarray


def fit_loss(ledger: EnergyLedger, nu_range: tuple[int, int]) -> LossCurve:
    """Least-squares slope of (1/2) log2 e_nu(t) against nu.

    Runs must use single-block data with e_nu(0) normalised to 1, so the
    slope at time t reads off the number of derivatives lost by t.
    """
    nu_min, nu_max = nu_range
    if nu_max - nu_min < 4:
        raise ValueError("need nu_max - nu_min >= 4 for a stable fit")
    nus = [nu for nu in ledger.nus() if nu_min <= nu <= nu_max]
    if len(nus) < 2:
        raise ValueError(f"ledger holds no blocks in [{nu_min}, {nu_max}]")
    nu_arr = np.array(nus, dtype=float)
    sigma = np.zeros_like(ledger.times)
    resid = np.zeros_like(ledger.times)
    for i in range(len(ledger.times)):
        y = 0.5 * np.log2([max(ledger.e_nu[nu][i], 1e-300) for nu in nus])
        slope, intercept = np.polyfit(nu_arr, y, 1)
        fit = slope * nu_arr + intercept
        sigma[i] = slope
        resid[i] = float(np.sqrt(np.mean((y - fit) ** 2)))
    return LossCurve(np.asarray(ledger.times, dtype=float), sigma, resid)


def fit_beta(curve: LossCurve) -> float:
    """Nonnegative least-squares slope of sigma(t) through the origin."""
    t = curve.times
    denom = float(np.sum(t * t))
    if denom == 0.0:
        return 0.0
    return max(0.0, float(np.sum(t * curve.sigma) / denom))
