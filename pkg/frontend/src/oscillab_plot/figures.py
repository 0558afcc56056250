"""The four standard figures, rendered deterministically.

Styling is fixed (Agg backend, pinned size/dpi, no timestamps in metadata),
so identical inputs produce identical image bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import InputError, read_ledger, read_report  # noqa: E402

KINDS = ("energy", "loss", "amplification", "comparison")
ENVELOPE_TOL = 0.05


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: kind, input artifact paths, output image path."""

    kind: str
    inputs: tuple
    output: str
    logx: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown figure kind {self.kind!r} (choose from {KINDS})")
        if not self.inputs:
            raise InputError("figure needs at least one input file")


def _new_axes():
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    return fig, ax


def _save(fig, output):
    Path(output).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, metadata={"Software": "oscillab-plot"})
    plt.close(fig)


def _energy(spec: FigureSpec):
    led = read_ledger(spec.inputs[0])
    fig, ax = _new_axes()
    for nu in led["nus"]:
        ax.semilogy(led["times"], np.maximum(led["e_nu"][nu], 1e-300),
                    label=f"block {nu}")
    ax.semilogy(led["times"], np.maximum(led["total"], 1e-300), "k--",
                label="weighted total")
    if spec.logx:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("block energy")
    ax.legend(fontsize=7, ncol=2)
    ax.set_title("corrected block energies")
    _save(fig, spec.output)


def _loss(spec: FigureSpec):
    rep = read_report(spec.inputs[0], need=("times", "sigma", "beta_hat"))
    t = np.array(rep["times"])
    sigma = np.array(rep["sigma"])
    beta = float(rep["beta_hat"])
    fig, ax = _new_axes()
    ax.plot(t, sigma, "o-", ms=3, label="measured loss")
    ax.plot(t, beta * t, "-", label=f"fit slope {beta:.3g}")
    ax.plot(t, beta * t + ENVELOPE_TOL, "--", label="envelope + tolerance")
    if spec.logx:
        ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("derivatives lost")
    ax.legend(fontsize=8)
    ax.set_title("derivative loss over time")
    _save(fig, spec.output)


def _amplification(spec: FigureSpec):
    fig, ax = _new_axes()
    for path in spec.inputs:
        rep = read_report(path, need=("amplification",))
        per_xi = rep["amplification"].get("per_xi")
        if not per_xi:
            raise InputError(f"{path}: missing field 'amplification.per_xi'")
        ps = sorted(int(p) for p in per_xi)
        amps = [per_xi[str(p)] if str(p) in per_xi else per_xi[p] for p in ps]
        la = np.log2([a["amp_max"] for a in amps])
        cfg = rep["config"]
        label = cfg["family"]
        if cfg["family"] == "delta-osc":
            label += f" (delta={cfg['delta']:g})"
        ax.plot(ps, la, "o-", ms=4, label=label)
    ax.set_xlabel("log2 xi")
    ax.set_ylabel("log2 energy amplification")
    ax.legend(fontsize=8)
    ax.set_title("per-mode amplification vs frequency")
    _save(fig, spec.output)


def _comparison(spec: FigureSpec):
    if len(spec.inputs) < 2:
        raise InputError("comparison figure needs two run.json inputs")
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0), dpi=120, sharey=True)
    for ax, path in zip(axes, spec.inputs[:2]):
        rep = read_report(path, need=("times", "sigma", "beta_hat"))
        t = np.array(rep["times"])
        sigma = np.array(rep["sigma"])
        beta = float(rep["beta_hat"])
        ax.plot(t, sigma, "o-", ms=3)
        ax.plot(t, beta * t + ENVELOPE_TOL, "--")
        prof = rep["config"].get("profile", "?")
        ax.set_title(f"{prof} (beta_hat = {beta:.3g})", fontsize=9)
        ax.set_xlabel("t")
    axes[0].set_ylabel("derivatives lost")
    fig.suptitle("space regularity comparison")
    _save(fig, spec.output)


_RENDERERS = {"energy": _energy, "loss": _loss,
              "amplification": _amplification, "comparison": _comparison}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    _RENDERERS[spec.kind](spec)
    return spec.output
