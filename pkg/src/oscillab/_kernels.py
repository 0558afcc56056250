"""Smooth bump, transition and ramp profiles shared by the cutoff machinery.

Everything here is a fixed, concrete C^inf (or C^2 for the ramp) profile;
the rest of the package only relies on the support/monotonicity properties
stated in the docstrings.
"""
from __future__ import annotations

import numpy as np

# Transition edges of the radial Fourier cutoff.  Strict inequalities
# (1 < 1.1 and 1.9 < 2) keep block supports numerically robust.
CHI_FLAT = 1.1
CHI_ZERO = 1.9


def bump(s):
    """Unnormalised C^inf bump exp(-1/(1-s^2)) on (-1,1), zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


def bump_d1(s):
    """First derivative of ``bump``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    om = 1.0 - si * si
    out[inside] = np.exp(-1.0 / om) * (-2.0 * si / om**2)
    return out


def bump_d2(s):
    """Second derivative of ``bump``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    om = 1.0 - si * si
    w1 = -2.0 * si / om**2
    w2 = -2.0 * (1.0 + 3.0 * si * si) / om**3
    out[inside] = np.exp(-1.0 / om) * (w2 + w1 * w1)
    return out


def _exp_edge(z):
    # exp(-1/z) continued by 0 for z <= 0; flat to all orders at z = 0.
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 1e-12
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def smoothstep_down(z):
    """C^inf monotone transition: 1 for z <= 0, 0 for z >= 1, strictly
    decreasing on (0,1)."""
    z = np.asarray(z, dtype=float)
    p = _exp_edge(z)
    q = _exp_edge(1.0 - z)
    out = np.ones_like(z)
    band = (z > 0.0) & (z < 1.0)
    out[band] = q[band] / (p[band] + q[band])
    out[z >= 1.0] = 0.0
    return out


def smoothstep_down_d1(z):
    """d/dz of ``smoothstep_down`` (zero outside (0,1))."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    band = (z > 1e-12) & (z < 1.0 - 1e-12)
    zb = z[band]
    p = np.exp(-1.0 / zb)
    q = np.exp(-1.0 / (1.0 - zb))
    dp = p / zb**2
    dq = -q / (1.0 - zb) ** 2
    out[band] = (dq * p - dp * q) / (p + q) ** 2
    return out


def smoothstep_down_d2(z):
    """d^2/dz^2 of ``smoothstep_down``."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    band = (z > 1e-12) & (z < 1.0 - 1e-12)
    zb = z[band]
    om = 1.0 - zb
    p = np.exp(-1.0 / zb)
    q = np.exp(-1.0 / om)
    dp = p / zb**2
    dq = -q / om**2
    d2p = p * (1.0 - 2.0 * zb) / zb**4
    d2q = q * (2.0 * zb - 1.0) / om**4
    D = p + q
    dD = dp + dq
    num1 = d2q * p - d2p * q
    num2 = dq * p - dp * q
    out[band] = num1 / D**2 - 2.0 * num2 * dD / D**3
    return out


def chi_profile(r):
    """Radial cutoff chi(r): 1 for r <= 1.1, 0 for r >= 1.9, smooth and
    non-increasing in between."""
    return smoothstep_down((np.asarray(r, dtype=float) - CHI_FLAT) / (CHI_ZERO - CHI_FLAT))


def ramp_c2(s):
    """Quintic C^2 ramp: 0 at s <= 0, 1 at s >= 1, monotone (zero first and
    second derivatives at both ends)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
