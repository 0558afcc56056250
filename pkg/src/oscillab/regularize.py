"""Time regularisation of oscillating coefficients at scale eps.

Pipeline: freeze the coefficient outside [eps, T] (truncation), convolve in
time with a compactly supported C^inf mollifier at width eps/2, then blend
back the raw coefficient away from t=0 with a smooth cutoff.  The result
agrees with the raw coefficient for t >= 2 eps, with the frozen value for
t <= eps/2, and is defined on all of R.

Everything acts on the scalar time factor of the (separable) coefficient
fields, so the quadrature runs over 64 kernel nodes per evaluation, not over
grid-sized arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._kernels import (bump, bump_d1, bump_d2, ramp_c2, smoothstep_down,
                       smoothstep_down_d1, smoothstep_down_d2)
from .coefficients import CoefficientField


@lru_cache(maxsize=16)
def _gauss(n: int):
    x, w = leggauss(n)
    return x, w


# Kernel mass computed once at high order; runtime rules are checked against it.
_BUMP_MASS = float((_gauss(256)[1] * bump(_gauss(256)[0])).sum())


def kernel_mass_defect(quad_nodes: int) -> float:
    """|discrete mass - 1| of the normalised mollifier under the given rule."""
    x, w = _gauss(quad_nodes)
    return abs(float((w * bump(x)).sum()) / _BUMP_MASS - 1.0)


def mollifier(s):
    """Unit-mass even C^inf kernel supported in (-1, 1)."""
    return bump(s) / _BUMP_MASS


# ---------------------------------------------------------------------------
# cutoff theta
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaCutoff:
    """Smooth time cutoff: 1 for t <= eps/2, 0 for t >= 2 eps."""

    eps: float

    def _z(self, t):
        # transition variable of the underlying monotone step on [1/4, 3/4]
        s = np.asarray(t, dtype=float) / (3.0 * self.eps) + 1.0 / 12.0
        return (s - 0.25) * 2.0

    def __call__(self, t):
        return smoothstep_down(self._z(t))

    def d1(self, t):
        return smoothstep_down_d1(self._z(t)) * (2.0 / (3.0 * self.eps))

    def d2(self, t):
        return smoothstep_down_d2(self._z(t)) * (2.0 / (3.0 * self.eps)) ** 2


def cutoff_theta(eps: float) -> ThetaCutoff:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return ThetaCutoff(eps)


# ---------------------------------------------------------------------------
# truncation and mollification of the time factor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedTimeFactor:
    """f~ = f clamped to [eps, T]; defined for every real t."""

    f: Callable
    eps: float
    T: float

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.eps, self.T)
        return self.f(t)


def truncate_time(base: CoefficientField, eps: float) -> TruncatedTimeFactor:
    """Freeze the time factor below eps and above T."""
    if not 0.0 < eps <= base.T_final / 2.0:
        raise ValueError(f"eps must lie in (0, T/2] = (0, {base.T_final / 2}]")
    return TruncatedTimeFactor(base.time_factor, eps, base.T_final)


def _mollify_scalar(trunc: Callable, eps: float, t: float, quad_nodes: int,
                    deriv: int = 0, breakpoints=()) -> float:
    """(rho_{eps/2} *_t trunc)(t), or the same against the kernel derivative.

    Integrates over tau in [t - eta, t + eta] (eta = eps/2), splitting the
    window at interior breakpoints so the rule never straddles a kink.  For
    derivative kernels the (analytically vanishing) constant mode is
    subtracted first, which removes the quadrature noise floor of the
    cancelling integral.
    """
    eta = eps / 2.0
    kern = (bump, bump_d1, bump_d2)[deriv]
    scale = 1.0 / (_BUMP_MASS * eta ** (deriv + 1))
    center = float(trunc(t)) if deriv > 0 else 0.0
    lo, hi = t - eta, t + eta
    cuts = sorted(b for b in breakpoints if lo < b < hi)
    edges = [lo, *cuts, hi]
    x, w = _gauss(quad_nodes)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        tau = mid + half * x
        vals = np.asarray(trunc(tau), dtype=float) - center
        total += half * float((w * kern((t - tau) / eta) * vals).sum())
    return scale * total


@dataclass(frozen=True)
class MollifiedTimeFactor:
    """C^2 time factor (rho_{eps/2} *_t f~) with kernel-side derivatives."""

    trunc: TruncatedTimeFactor
    eps: float
    quad_nodes: int = 64

    def __post_init__(self):
        if kernel_mass_defect(self.quad_nodes) > 1e-10:
            raise ValueError(
                f"quadrature under-resolved: kernel mass defect "
                f"{kernel_mass_defect(self.quad_nodes):.2e} with {self.quad_nodes} nodes")

    @property
    def _breaks(self):
        return (self.trunc.eps, self.trunc.T)

    def __call__(self, t: float) -> float:
        eta = self.eps / 2.0
        if t <= self.trunc.eps - eta:
            return float(self.trunc(self.trunc.eps))
        return _mollify_scalar(self.trunc, self.eps, float(t), self.quad_nodes,
                               0, self._breaks)

    def d1(self, t: float) -> float:
        eta = self.eps / 2.0
        if t <= self.trunc.eps - eta:
            return 0.0
        return _mollify_scalar(self.trunc, self.eps, float(t), self.quad_nodes,
                               1, self._breaks)

    def d2(self, t: float) -> float:
        eta = self.eps / 2.0
        if t <= self.trunc.eps - eta:
            return 0.0
        return _mollify_scalar(self.trunc, self.eps, float(t), self.quad_nodes,
                               2, self._breaks)


def mollify_time(trunc: TruncatedTimeFactor, eps: float,
                 quad_nodes: int = 64) -> MollifiedTimeFactor:
    if quad_nodes < 64:
        raise ValueError("need at least 64 quadrature nodes on the kernel support")
    return MollifiedTimeFactor(trunc, eps, quad_nodes)


# ---------------------------------------------------------------------------
# the blended coefficient
# ---------------------------------------------------------------------------

class RegularizedCoefficient:
    """Coefficient a_eps = (mollified) theta_eps + (raw) (1 - theta_eps).

    Exact identities: a_eps = a for 2 eps <= t <= T and a_eps = a(eps, .) for
    t <= eps/2.  Ellipticity is preserved pointwise because mollification is
    an average against a nonnegative unit-mass kernel and the blend is convex.
    """

    def __init__(self, base: CoefficientField, eps: float, quad_nodes: int = 64):
        if not 0.0 < eps <= base.T_final / 2.0:
            raise ValueError(f"eps must lie in (0, T/2] = (0, {base.T_final / 2}]")
        self.base = base
        self.eps = float(eps)
        self.theta = cutoff_theta(self.eps)
        self.moll = mollify_time(truncate_time(base, self.eps), self.eps, quad_nodes)

    # -- blended time factor and its derivatives ---------------------------

    def time_factor(self, t: float) -> float:
        t = float(t)
        th = float(self.theta(t))
        if th == 0.0:
            return float(self.base.time_factor(min(t, self.base.T_final)))
        if th == 1.0:
            return self.moll(t)
        return self.moll(t) * th + float(self.base.time_factor(t)) * (1.0 - th)

    def time_factor_dt(self, t: float) -> float:
        t = float(t)
        th = float(self.theta(t))
        if th == 0.0:
            return float(self.base.time_factor_dt(t)) if t <= self.base.T_final else 0.0
        if th == 1.0:
            return self.moll.d1(t)
        dth = float(self.theta.d1(t))
        return (self.moll.d1(t) * th + self.moll(t) * dth
                + float(self.base.time_factor_dt(t)) * (1.0 - th)
                - float(self.base.time_factor(t)) * dth)

    def time_factor_dtt(self, t: float) -> float:
        t = float(t)
        th = float(self.theta(t))
        if th == 0.0:
            return float(self.base.time_factor_dtt(t)) if t <= self.base.T_final else 0.0
        if th == 1.0:
            return self.moll.d2(t)
        dth = float(self.theta.d1(t))
        ddth = float(self.theta.d2(t))
        return (self.moll.d2(t) * th + 2.0 * self.moll.d1(t) * dth
                + self.moll(t) * ddth
                + float(self.base.time_factor_dtt(t)) * (1.0 - th)
                - 2.0 * float(self.base.time_factor_dt(t)) * dth
                - float(self.base.time_factor(t)) * ddth)

    # -- field interface ----------------------------------------------------

    @property
    def x_dependent(self) -> bool:
        return not (self.base.time_only or self.base.static)

    def scalar(self, t, *coords):
        return self.base.m + self.time_factor(t) * self.base.profile(*coords)

    def scalar_dt(self, t, *coords):
        return self.time_factor_dt(t) * self.base.profile(*coords)

    def scalar_dtt(self, t, *coords):
        return self.time_factor_dtt(t) * self.base.profile(*coords)

    def eval(self, t, x, j: int = 1, k: int = 1):
        if j != k:
            return np.zeros_like(np.asarray(self.base.profile(
                *self.base._coords(x)), dtype=float))
        return self.scalar(t, *self.base._coords(x))

    def eval_dt(self, t, x, j: int = 1, k: int = 1):
        if j != k:
            return np.zeros_like(np.asarray(self.base.profile(
                *self.base._coords(x)), dtype=float))
        return self.scalar_dt(t, *self.base._coords(x))

    def eval_dtt(self, t, x, j: int = 1, k: int = 1):
        if j != k:
            return np.zeros_like(np.asarray(self.base.profile(
                *self.base._coords(x)), dtype=float))
        return self.scalar_dtt(t, *self.base._coords(x))


def blend(base: CoefficientField, eps: float, quad_nodes: int = 64) -> RegularizedCoefficient:
    """Full regularisation pipeline at scale eps."""
    return RegularizedCoefficient(base, eps, quad_nodes)


def block_eps(nu: int, T: float) -> float:
    """Per-block regularisation scale 2^-nu, clamped into (0, T/2]."""
    return min(2.0 ** (-nu), T / 2.0)


# ---------------------------------------------------------------------------
# the envelope phi and the integrated weight f_nu
# ---------------------------------------------------------------------------

# the ramp saturates this far (as a fraction of eps/2) above eps/2; a short
# ramp keeps the envelope comparable to the mollified derivatives, whose
# kernel tails die off much faster than any power
PHI_RAMP_FRAC = 0.1


@dataclass(frozen=True)
class PhiFunction:
    """Envelope for the regularised time derivatives: zero below eps/2,
    a C^2 ramp onto 1/t above."""

    eps: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        half = self.eps / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = ramp_c2((t - half) / (half * PHI_RAMP_FRAC)) / t
        return np.where(t > half, vals, 0.0)


def phi(eps: float) -> PhiFunction:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return PhiFunction(eps)


def f_weight(nu: int, t, quad_nodes: int = 64):
    """Integral of phi_nu^2 2^-nu + 2^nu 1_[0, 2^(1-nu)] from 0 to t.

    The indicator part is exact; the ramp region of phi^2 is integrated by
    Gauss quadrature and the saturated tail (phi = 1/t) in closed form.
    Bounded by 4 uniformly in nu for this concrete phi.
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    eps = 2.0 ** (-nu)
    half = eps / 2.0
    sat = half * (1.0 + PHI_RAMP_FRAC)  # ramp saturation point: phi = 1/t beyond
    x, w = _gauss(quad_nodes)
    out = np.zeros_like(t_arr)
    for i, ti in enumerate(t_arr):
        if ti < 0:
            raise ValueError("t must be nonnegative")
        ind = (2.0**nu) * min(ti, 2.0 ** (-nu + 1))
        ramp_hi = min(ti, sat)
        sq = 0.0
        if ramp_hi > half:
            mid, hw = 0.5 * (half + ramp_hi), 0.5 * (ramp_hi - half)
            tau = mid + hw * x
            sq += hw * float((w * (ramp_c2((tau - half) / (half * PHI_RAMP_FRAC))
                                   / tau) ** 2).sum())
        if ti > sat:
            sq += 1.0 / sat - 1.0 / ti
        out[i] = ind + (2.0 ** (-nu)) * sq
    return out if np.ndim(t) else float(out[0])
