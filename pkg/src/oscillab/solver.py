"""Time integration: pseudo-spectral RK4 for the wave equation and an
adaptive Cash-Karp 5(4) integrator for the per-mode oscillator.

The PDE path advances (u, u_t) with div(a grad u) evaluated pseudo-
spectrally and re-truncated to |k| <= N/3 after every coefficient
multiplication (two-thirds dealiasing).  Oscillating coefficients are
resolved in time by capping the step at a fraction of t near the origin.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .lp import SpectralField, freq_axes, grid_coords, kmag2_grid


@lru_cache(maxsize=32)
def band_mask(dim: int, N: int) -> np.ndarray:
    """Dealiasing mask |k| <= N/3."""
    return kmag2_grid(dim, N) <= (N // 3) ** 2


@dataclass
class WaveState:
    """Solution snapshot (t, u, u_t), band-limited to |k| <= N/3."""

    t: float
    u: SpectralField
    ut: SpectralField

    @property
    def dim(self) -> int:
        return self.u.dim

    @property
    def N(self) -> int:
        return self.u.N

    def scaled(self, s: float) -> "WaveState":
        return WaveState(self.t, self.u * s, self.ut * s)


class _GridCoefficient:
    """Caches the spatial profile of a separable coefficient on one grid."""

    def __init__(self, field, dim: int, N: int):
        self.field = field
        coords = grid_coords(dim, N)
        base = getattr(field, "base", field)
        self.profile = np.asarray(base.profile(*coords), dtype=float)
        self.m = base.m
        self.time_factor = field.time_factor

    def values(self, t: float) -> np.ndarray:
        return self.m + float(self.time_factor(t)) * self.profile


_grid_coeff_cache: dict = {}


def _grid_coefficient(field, dim: int, N: int) -> _GridCoefficient:
    # keyed by object identity; the stored reference pins the id
    key = (id(field), dim, N)
    hit = _grid_coeff_cache.get(key)
    if hit is not None and hit.field is field:
        return hit
    if len(_grid_coeff_cache) > 64:
        _grid_coeff_cache.clear()
    gc = _GridCoefficient(field, dim, N)
    _grid_coeff_cache[key] = gc
    return gc


def _rhs_coeff(ucoeff: np.ndarray, avals: np.ndarray, dim: int, N: int,
               mask: np.ndarray) -> np.ndarray:
    kax = freq_axes(dim, N)
    size = ucoeff.size
    out = np.zeros_like(ucoeff)
    for d in range(dim):
        k = kax[d].reshape([-1 if a == d else 1 for a in range(dim)])
        du = np.real(np.fft.ifftn(1j * k * ucoeff) * size)
        out += 1j * k * (np.fft.fftn(avals * du) / size)
    return out * mask


def rhs(state: WaveState, A, forcing: Optional[SpectralField] = None) -> SpectralField:
    """div(A(t,.) grad u) + forcing, dealiased."""
    dim, N = state.dim, state.N
    coords = grid_coords(dim, N)
    avals = np.asarray(A.scalar(state.t, *coords), dtype=float)
    out = _rhs_coeff(state.u.coeff, avals, dim, N, band_mask(dim, N))
    if forcing is not None:
        out = out + forcing.coeff * band_mask(dim, N)
    return SpectralField(dim, N, out)


def cfl_dt(N: int, Lambda0: float, safety: float = 0.5) -> float:
    """Stable RK4 step for the dealiased band: safety / (sqrt(Lambda0) N/3)."""
    if N < 8:
        raise ValueError("N must be at least 8")
    if not 0.0 < safety <= 1.0:
        raise ValueError("safety must lie in (0, 1]")
    return safety / (math.sqrt(Lambda0) * (N / 3.0))


def step(state: WaveState, A, dt: float,
         forcing: Optional[SpectralField] = None) -> WaveState:
    """One classical RK4 step of (u, u_t)' = (u_t, div(A grad u) + F)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    Lambda0 = getattr(A, "Lambda0", None)
    if Lambda0 is not None and dt > cfl_dt(state.N, Lambda0, 1.0):
        warnings.warn(f"dt = {dt:.3e} exceeds the RK4 stability margin "
                      f"{cfl_dt(state.N, Lambda0, 1.0):.3e}", stacklevel=2)
    dim, N = state.dim, state.N
    mask = band_mask(dim, N)
    grid = _grid_coefficient(A, dim, N) if hasattr(A, "time_factor") else None
    fco = forcing.coeff * mask if forcing is not None else 0.0

    def f(t, uc, vc):
        avals = grid.values(t) if grid is not None else \
            np.asarray(A.scalar(t, *grid_coords(dim, N)), dtype=float)
        return vc, _rhs_coeff(uc, avals, dim, N, mask) + fco

    t, u, v = state.t, state.u.coeff, state.ut.coeff
    k1u, k1v = f(t, u, v)
    k2u, k2v = f(t + dt / 2, u + dt / 2 * k1u, v + dt / 2 * k1v)
    k3u, k3v = f(t + dt / 2, u + dt / 2 * k2u, v + dt / 2 * k2v)
    k4u, k4v = f(t + dt, u + dt * k3u, v + dt * k3v)
    un = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
    vn = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return WaveState(t + dt, SpectralField(dim, N, un), SpectralField(dim, N, vn))


def advance(state: WaveState, A, t_target: float, dt: float,
            forcing: Optional[SpectralField] = None,
            osc_frac: float = 0.05) -> tuple[WaveState, int]:
    """Advance forward to t_target with step min(dt, osc_frac * t), landing
    exactly on the target.

    The osc_frac cap resolves coefficient oscillation at scale t near the
    origin; it is skipped for time-independent coefficients.
    """
    if t_target < state.t:
        raise ValueError("advance only integrates forward")
    static = getattr(A, "static", False) or getattr(getattr(A, "base", None), "static", False)
    nsteps = 0
    while t_target - state.t > 1e-14 * max(1.0, abs(t_target)):
        h = dt
        if not static and state.t > 0:
            h = min(h, osc_frac * state.t)
        h = min(h, t_target - state.t)
        state = step(state, A, h, forcing)
        nsteps += 1
    return state, nsteps


# ---------------------------------------------------------------------------
# per-mode oscillator v'' + a(t) xi^2 v = 0
# ---------------------------------------------------------------------------

@dataclass
class ModeState:
    """One sample of the per-mode oscillator (first fundamental solution)."""

    xi: float
    t: float
    v: float
    vp: float


@dataclass
class ModeTrajectory:
    """Fundamental system of v'' + a(t) xi^2 v = 0 at sample times.

    ``Phi``[i] is the 2x2 fundamental matrix at ``times``[i] (columns are the
    (1,0) and (0,1) solutions); the Wronskian det Phi stays 1 up to the
    integrator tolerance.
    """

    xi: float
    times: np.ndarray
    Phi: np.ndarray
    steps: int
    completed: bool
    t_reached: float

    def states(self):
        return [ModeState(self.xi, float(t), float(P[0, 0]), float(P[1, 0]))
                for t, P in zip(self.times, self.Phi)]

    def wronskian_drift(self) -> float:
        dets = self.Phi[:, 0, 0] * self.Phi[:, 1, 1] - self.Phi[:, 0, 1] * self.Phi[:, 1, 0]
        return float(np.max(np.abs(dets - 1.0)))


class StepUnderflowError(RuntimeError):
    def __init__(self, t_reached: float):
        super().__init__(f"adaptive step underflow at t = {t_reached:.6e}")
        self.t_reached = t_reached


# Cash-Karp 5(4) tableau
_CK_C = (0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8)
_CK_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
)
_CK_B5 = (37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771)
_CK_B4 = (2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4)


def solve_mode(a_scalar: Callable[[float], float], xi: float,
               t_span: tuple[float, float], tol: float,
               Lambda0: float = 4.0,
               sample_times: Optional[np.ndarray] = None) -> ModeTrajectory:
    """Adaptive Cash-Karp integration of the fundamental system.

    Local error is controlled at ``tol`` (mixed absolute/relative); the step
    is additionally capped at min(0.1 t, 0.2/(xi sqrt(Lambda0))) so both the
    coefficient oscillation (scale t) and the wave oscillation (scale 1/xi)
    stay resolved.
    """
    if tol < 1e-13:
        raise ValueError("tol below double-precision resolution")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not 0.0 < t0 < t1:
        raise ValueError("need 0 < t0 < t1")
    xi2 = xi * xi
    cap_wave = 0.2 / (abs(xi) * math.sqrt(Lambda0)) if xi != 0 else math.inf

    if sample_times is None:
        sample_times = np.array([t1])
    sample_times = np.asarray(sample_times, dtype=float)
    out = np.empty((len(sample_times), 2, 2))

    # state y = (v1, v1', v2, v2'); plain floats keep the hot loop cheap
    y = [1.0, 0.0, 0.0, 1.0]
    t = t0
    isample = 0
    while isample < len(sample_times) and sample_times[isample] <= t0 * (1 + 1e-12):
        out[isample] = [[y[0], y[2]], [y[1], y[3]]]
        isample += 1

    h = min(0.1 * t0, cap_wave, t1 - t0)
    steps = 0
    ks = [[0.0] * 4 for _ in range(6)]
    while t < t1 * (1.0 - 1e-14):
        # steps never overshoot the next sample time, so samples land exactly
        htry = min(h, 0.1 * t, cap_wave, t1 - t)
        if isample < len(sample_times):
            htry = min(htry, sample_times[isample] - t)
        if htry < 1e-15 * t:
            return ModeTrajectory(xi, sample_times[:isample], out[:isample],
                                  steps, False, t)
        for i in range(6):
            ti = t + _CK_C[i] * htry
            yi0, yi1, yi2, yi3 = y
            arow = _CK_A[i]
            for j in range(i):
                aij = arow[j]
                if aij != 0.0:
                    kj = ks[j]
                    yi0 += htry * aij * kj[0]
                    yi1 += htry * aij * kj[1]
                    yi2 += htry * aij * kj[2]
                    yi3 += htry * aij * kj[3]
            w2 = -a_scalar(ti) * xi2
            ks[i] = [yi1, w2 * yi0, yi3, w2 * yi2]
        y5 = list(y)
        err = 0.0
        for c in range(4):
            d5 = 0.0
            d4 = 0.0
            for i in range(6):
                d5 += _CK_B5[i] * ks[i][c]
                d4 += _CK_B4[i] * ks[i][c]
            y5[c] = y[c] + htry * d5
            e = abs(htry * (d5 - d4))
            sc = tol * (1.0 + max(abs(y[c]), abs(y5[c])))
            err = max(err, e / sc)
        if err <= 1.0:
            t += htry
            y = y5
            steps += 1
            while isample < len(sample_times) and \
                    sample_times[isample] <= t + 1e-12 * max(t, 1.0):
                out[isample] = [[y[0], y[2]], [y[1], y[3]]]
                isample += 1
        fac = 0.9 * (1.0 / err) ** 0.2 if err > 0 else 5.0
        h = htry * min(5.0, max(0.2, fac))
    while isample < len(sample_times):
        out[isample] = [[y[0], y[2]], [y[1], y[3]]]
        isample += 1
    return ModeTrajectory(xi, sample_times, out, steps, True, t)


def mode_energy_matrix(a_val: float, xi: float) -> np.ndarray:
    """B with E = |B y|^2 for the mode energy |v'|^2/xi^2 + a |v|^2."""
    return np.diag([math.sqrt(a_val), 1.0 / xi])


def mode_amplification(field, xi: float, t0: float, t1: float, tol: float,
                       sample_times: Optional[np.ndarray] = None) -> dict:
    """Worst-case and cosine-data energy amplification E(t1)/E(t0).

    The worst case is the squared largest singular value of the energy-
    normalised propagator B(t1) Phi B(t0)^-1.
    """
    a = field.a_scalar
    if a is None:
        raise ValueError("mode path needs a time-only coefficient")
    traj = solve_mode(a, xi, (t0, t1), tol, Lambda0=field.Lambda0,
                      sample_times=sample_times)
    if not traj.completed:
        raise StepUnderflowError(traj.t_reached)
    B0 = mode_energy_matrix(a(t0), xi)
    results = {"xi": xi, "steps": traj.steps,
               "wronskian_drift": traj.wronskian_drift(), "trajectory": traj}
    amps_max = []
    amps_cos = []
    for t, P in zip(traj.times, traj.Phi):
        Bt = mode_energy_matrix(a(float(t)), xi)
        T = Bt @ P @ np.linalg.inv(B0)
        amps_max.append(float(np.linalg.norm(T, 2) ** 2))
        y = P @ np.array([1.0, 0.0])
        E0 = a(t0) * 1.0
        Et = a(float(t)) * y[0] ** 2 + (y[1] / xi) ** 2
        amps_cos.append(float(Et / E0))
    results["amp_max"] = amps_max[-1]
    results["amp_cos"] = amps_cos[-1]
    results["amp_max_curve"] = np.array(amps_max)
    results["amp_cos_curve"] = np.array(amps_cos)
    return results
