"""Coefficient families a(t,x) = m + f(t) g(x) and hypothesis audits.

All built-in families are isotropic (the matrix is a(t,x) Id), with the time
factor f and the spatial profile g in closed form, including exact time
derivatives.  Profiles are sup-normalised to |g| <= 1, so the ellipticity
window is [m - rho, m + rho].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

FAMILIES = ("constant", "yamazaki-osc", "delta-osc", "violator")
PROFILES = ("one", "sin", "two-plus-sin", "triangle", "weierstrass")


# ---------------------------------------------------------------------------
# spatial profiles
# ---------------------------------------------------------------------------

def _profile_one(*coords):
    return np.ones_like(np.asarray(coords[0], dtype=float))


def _profile_sin(*coords):
    out = np.sin(np.asarray(coords[0], dtype=float))
    for c in coords[1:]:
        out = out * np.sin(np.asarray(c, dtype=float))
    return out


def _profile_two_plus_sin(*coords):
    # (2 + sin) / 3, sup-normalised and bounded away from zero
    return (2.0 + _profile_sin(*coords)) / 3.0


def _triangle_1d(x):
    x = np.mod(np.asarray(x, dtype=float), 2.0 * np.pi)
    return 1.0 - 2.0 * np.abs(x - np.pi) / np.pi


def _profile_triangle(*coords):
    out = _triangle_1d(coords[0])
    for c in coords[1:]:
        out = out * _triangle_1d(c)
    return out


def _profile_weierstrass(terms):
    def g(*coords):
        x = np.asarray(coords[0], dtype=float)
        out = np.zeros_like(x)
        for j in range(1, terms + 1):
            term = np.cos((2.0**j) * x)
            for c in coords[1:]:
                term = term * np.cos((2.0**j) * np.asarray(c, dtype=float))
            out = out + (2.0 ** (-j)) * term
        return out

    return g


def make_profile(name: str, terms: int = 24):
    """Return (g, sup_g, natural ell) for a named spatial profile."""
    if name == "one":
        return _profile_one, 1.0, 0
    if name == "sin":
        return _profile_sin, 1.0, 0
    if name == "two-plus-sin":
        return _profile_two_plus_sin, 1.0, 0
    if name == "triangle":
        return _profile_triangle, 1.0, 0
    if name == "weierstrass":
        if terms < 1:
            raise ValueError("weierstrass profile needs terms >= 1")
        return _profile_weierstrass(terms), 1.0 - 2.0 ** (-terms), 1
    raise ValueError(f"unknown profile {name!r} (choose from {PROFILES})")


# ---------------------------------------------------------------------------
# coefficient field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """Isotropic coefficient a(t,x) = m + f(t) g(x) with exact derivatives.

    ``eval``/``eval_dt``/``eval_dtt`` expose the matrix entries a_jk; the
    grid-vectorised ``scalar*`` methods are what the solver and the symbol
    machinery consume.  Evaluation is pure and reentrant.
    """

    dim: int
    name: str
    params: dict
    m: float
    time_factor: Callable
    time_factor_dt: Callable
    time_factor_dtt: Callable
    profile: Callable
    sup_profile: float
    lambda0: float
    Lambda0: float
    ell: int
    delta: Optional[float]
    osc_constants: dict
    T_final: float
    time_only: bool
    static: bool = False
    a_scalar: Optional[Callable[[float], float]] = None

    def scalar(self, t, *coords):
        return self.m + np.asarray(self.time_factor(t)) * self.profile(*coords)

    def scalar_dt(self, t, *coords):
        return np.asarray(self.time_factor_dt(t)) * self.profile(*coords)

    def scalar_dtt(self, t, *coords):
        return np.asarray(self.time_factor_dtt(t)) * self.profile(*coords)

    def _coords(self, x):
        if self.dim == 1:
            return (np.asarray(x, dtype=float),)
        x = np.asarray(x, dtype=float)
        return tuple(np.moveaxis(x, -1, 0))

    def eval(self, t, x, j: int = 1, k: int = 1):
        """Matrix entry a_jk(t,x); off-diagonal entries vanish."""
        if j != k:
            return np.zeros_like(np.asarray(self.scalar(t, *self._coords(x))))
        return self.scalar(t, *self._coords(x))

    def eval_dt(self, t, x, j: int = 1, k: int = 1):
        if j != k:
            return np.zeros_like(np.asarray(self.scalar_dt(t, *self._coords(x))))
        return self.scalar_dt(t, *self._coords(x))

    def eval_dtt(self, t, x, j: int = 1, k: int = 1):
        if j != k:
            return np.zeros_like(np.asarray(self.scalar_dtt(t, *self._coords(x))))
        return self.scalar_dtt(t, *self._coords(x))


def make_family(name: str, params: Optional[dict] = None, dim: int = 1) -> CoefficientField:
    """Build one of the built-in coefficient families.

    constant      a = c
    yamazaki-osc  a = m + rho sin(log t) g(x)
    delta-osc     a(t) = m + rho sin((-log t)^(1+delta) / (1+delta)), 0 < t <= 1
    violator      a(t) = m + rho sin(t^(1-q) / (q-1)), q > 1 (negative control)
    """
    params = dict(params or {})
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")

    if name == "constant":
        c = float(params.pop("c", 1.0))
        T = float(params.pop("T", 1.0))
        _reject_extra(params)
        if c <= 0:
            raise ValueError("constant family needs c > 0")
        zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
        return CoefficientField(
            dim=dim, name=name, params={"c": c, "T": T}, m=c,
            time_factor=zero, time_factor_dt=zero, time_factor_dtt=zero,
            profile=_profile_one, sup_profile=0.0,
            lambda0=c, Lambda0=c, ell=0, delta=0.0,
            osc_constants={"t_dta": 0.0, "t2_dtta": 0.0, "graded": 0.0},
            T_final=T, time_only=True, static=True,
            a_scalar=lambda t, _c=c: _c,
        )

    if name == "yamazaki-osc":
        m = float(params.pop("m", 2.0))
        rho = float(params.pop("rho", 0.5))
        profile_name = str(params.pop("profile", "one"))
        terms = int(params.pop("terms", 24))
        T = float(params.pop("T", 1.0))
        ell = params.pop("ell", None)
        _reject_extra(params)
        g, sup_g, natural_ell = make_profile(profile_name, terms)
        ell = natural_ell if ell is None else int(ell)
        lam0 = m - rho * sup_g
        if lam0 <= 0:
            raise ValueError(f"oscillation too large: m - rho*sup|g| = {lam0} <= 0")

        def f(t):
            return rho * np.sin(np.log(np.asarray(t, dtype=float)))

        def f_dt(t):
            t = np.asarray(t, dtype=float)
            return rho * np.cos(np.log(t)) / t

        def f_dtt(t):
            t = np.asarray(t, dtype=float)
            lt = np.log(t)
            return -rho * (np.sin(lt) + np.cos(lt)) / t**2

        time_only = profile_name == "one"
        return CoefficientField(
            dim=dim, name=name,
            params={"m": m, "rho": rho, "profile": profile_name, "terms": terms,
                    "T": T, "ell": ell},
            m=m, time_factor=f, time_factor_dt=f_dt, time_factor_dtt=f_dtt,
            profile=g, sup_profile=sup_g,
            lambda0=lam0, Lambda0=m + rho * sup_g, ell=ell, delta=0.0,
            osc_constants={"t_dta": rho * sup_g,
                           "t2_dtta": math.sqrt(2.0) * rho * sup_g,
                           "graded": rho * sup_g},
            T_final=T, time_only=time_only,
            a_scalar=(lambda t, _m=m, _r=rho: _m + _r * math.sin(math.log(t)))
            if time_only else None,
        )

    if name == "delta-osc":
        m = float(params.pop("m", 2.0))
        rho = float(params.pop("rho", 0.5))
        delta = float(params.pop("delta", 0.0))
        _reject_extra(params)
        if not 0.0 <= delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if m - rho <= 0:
            raise ValueError(f"oscillation too large: m - rho = {m - rho} <= 0")
        e = 1.0 + delta

        def f(t):
            L = -np.log(np.asarray(t, dtype=float))
            return rho * np.sin(L**e / e)

        def f_dt(t):
            t = np.asarray(t, dtype=float)
            L = -np.log(t)
            return -rho * np.cos(L**e / e) * L**delta / t

        def f_dtt(t):
            # d/dt of f_dt; the L^(delta-1) term is singular at t=1 for
            # fractional delta (endpoint artefact of the family definition)
            t = np.asarray(t, dtype=float)
            L = -np.log(t)
            theta = L**e / e
            chain = L**delta if delta == 0.0 else \
                L**delta + delta * L ** (delta - 1.0)
            return rho * (
                -np.sin(theta) * L ** (2.0 * delta) + np.cos(theta) * chain
            ) / t**2

        osc = {"graded": rho}
        if delta == 0.0:
            osc.update({"t_dta": rho, "t2_dtta": math.sqrt(2.0) * rho,
                        "graded2": math.sqrt(2.0) * rho})
        elif delta == 1.0:
            osc.update({"graded2": rho})
        return CoefficientField(
            dim=dim, name=name, params={"m": m, "rho": rho, "delta": delta},
            m=m, time_factor=f, time_factor_dt=f_dt, time_factor_dtt=f_dtt,
            profile=_profile_one, sup_profile=1.0,
            lambda0=m - rho, Lambda0=m + rho, ell=0, delta=delta,
            osc_constants=osc, T_final=1.0, time_only=True,
            a_scalar=lambda t, _m=m, _r=rho, _e=e: _m + _r * math.sin((-math.log(t)) ** _e / _e),
        )

    if name == "violator":
        m = float(params.pop("m", 2.0))
        rho = float(params.pop("rho", 0.5))
        q = float(params.pop("q", 2.0))
        _reject_extra(params)
        if q <= 1.0:
            raise ValueError("violator needs q > 1")
        if m - rho <= 0:
            raise ValueError(f"oscillation too large: m - rho = {m - rho} <= 0")

        def f(t):
            t = np.asarray(t, dtype=float)
            return rho * np.sin(t ** (1.0 - q) / (q - 1.0))

        def f_dt(t):
            t = np.asarray(t, dtype=float)
            return -rho * np.cos(t ** (1.0 - q) / (q - 1.0)) * t ** (-q)

        def f_dtt(t):
            t = np.asarray(t, dtype=float)
            theta = t ** (1.0 - q) / (q - 1.0)
            return rho * (-np.sin(theta) * t ** (-2.0 * q)
                          + q * np.cos(theta) * t ** (-q - 1.0))

        return CoefficientField(
            dim=dim, name=name, params={"m": m, "rho": rho, "q": q},
            m=m, time_factor=f, time_factor_dt=f_dt, time_factor_dtt=f_dtt,
            profile=_profile_one, sup_profile=1.0,
            lambda0=m - rho, Lambda0=m + rho, ell=0, delta=None,
            osc_constants={}, T_final=1.0, time_only=True,
            a_scalar=lambda t, _m=m, _r=rho, _q=q: _m + _r * math.sin(
                t ** (1.0 - _q) / (_q - 1.0)),
        )

    raise ValueError(f"unknown family {name!r} (choose from {FAMILIES})")


def _reject_extra(params: dict):
    if params:
        raise ValueError(f"unknown family parameters: {sorted(params)}")


# ---------------------------------------------------------------------------
# sampling plans and hypothesis audits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplingPlan:
    """Log-uniform time grid plus quasi-random spatial points.

    Times cover [t_min, T] with ``t_per_decade`` points per decade; spatial
    points use a golden-ratio lattice so audits are deterministic.
    """

    t_min: float = 1e-8
    t_per_decade: int = 400
    x_count: int = 256
    y_scales: tuple = dc_field(default_factory=lambda: tuple(2.0 ** (-k) for k in range(1, 21)))
    seed: int = 0

    def times(self, T: float) -> np.ndarray:
        decades = math.log10(T / self.t_min)
        n = max(2, int(round(decades * self.t_per_decade)))
        return np.logspace(math.log10(self.t_min), math.log10(T), n)

    def points(self, dim: int) -> np.ndarray:
        n = self.x_count
        i = np.arange(1, n + 1, dtype=float) + float(self.seed)
        if dim == 1:
            phi = (1.0 + math.sqrt(5.0)) / 2.0
            return (2.0 * np.pi) * np.mod(i / phi, 1.0)[:, None]
        plastic = 1.3247179572447460
        alphas = np.array([1.0 / plastic, 1.0 / plastic**2])
        return (2.0 * np.pi) * np.mod(np.outer(i, alphas), 1.0)


def check_ellipticity(field: CoefficientField, plan: SamplingPlan | None = None) -> dict:
    """Extremal Rayleigh quotients of a(t,x) Id over the sampling plan."""
    plan = plan or SamplingPlan()
    ts = plan.times(field.T_final)
    pts = plan.points(field.dim)
    coords = tuple(pts[:, d] for d in range(field.dim))
    lo, hi = math.inf, -math.inf
    for t in ts:
        vals = field.scalar(float(t), *coords)
        lo = min(lo, float(np.min(vals)))
        hi = max(hi, float(np.max(vals)))
    if lo <= 0.0:
        raise ValueError(f"field is not hyperbolic on samples: min quotient {lo} <= 0")
    return {"lambda_min": lo, "lambda_max": hi}


def log_modulus(y: np.ndarray, ell: int) -> np.ndarray:
    """Denominator |y| log^ell(1 + 1/|y|) of the space modulus."""
    y = np.asarray(y, dtype=float)
    return y * np.log1p(1.0 / y) ** ell


def estimate_space_modulus(field: CoefficientField, ell: int,
                           plan: SamplingPlan | None = None) -> float:
    """Empirical sup of |a(t,x+y)-a(t,x)| / (|y| log^ell(1+1/|y|))."""
    plan = plan or SamplingPlan(t_per_decade=8)
    ts = plan.times(field.T_final)
    pts = plan.points(field.dim)
    rng = np.random.default_rng(plan.seed)
    best = 0.0
    for ymag in plan.y_scales:
        if field.dim == 1:
            offs = np.full((plan.x_count, 1), ymag)
        else:
            ang = rng.uniform(0.0, 2.0 * np.pi, size=plan.x_count)
            offs = ymag * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        shifted = pts + offs
        c0 = tuple(pts[:, d] for d in range(field.dim))
        c1 = tuple(shifted[:, d] for d in range(field.dim))
        denom = float(log_modulus(np.array(ymag), ell))
        for t in ts:
            diff = np.abs(field.scalar(float(t), *c1) - field.scalar(float(t), *c0))
            best = max(best, float(np.max(diff)) / denom)
    return best


def check_oscillation_bounds(field: CoefficientField,
                             plan: SamplingPlan | None = None) -> dict:
    """Sampled sup of |t da/dt|, |t^2 d2a/dt2| and the graded quotient
    |da/dt| t / (1 + |log t|^delta)."""
    plan = plan or SamplingPlan()
    ts = plan.times(field.T_final)
    pts = plan.points(field.dim)
    coords = tuple(pts[:, d] for d in range(field.dim))
    delta = field.delta if field.delta is not None else 0.0
    s1 = s2 = sg = 0.0
    for t in ts:
        t = float(t)
        da = np.abs(field.scalar_dt(t, *coords))
        dda = np.abs(field.scalar_dtt(t, *coords))
        s1 = max(s1, t * float(np.max(da)))
        s2 = max(s2, t * t * float(np.max(dda)))
        sg = max(sg, t * float(np.max(da)) / (1.0 + abs(math.log(t)) ** delta))
    return {"sup_t_dta": s1, "sup_t2_dtta": s2, "sup_graded": sg}
