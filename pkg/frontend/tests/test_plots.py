"""Frontend tests run against synthetic artifacts that follow the primary's
file schemas, plus (when present) the real acceptance artifacts."""
import json
from pathlib import Path

import numpy as np
import pytest

from oscillab_plot import FigureSpec, InputError, read_ledger, render
from oscillab_plot.cli import main

ACCEPTANCE = Path(__file__).resolve().parents[2] / "runs" / "acceptance"


# ---------------------------------------------------------------------------
# synthetic artifacts
# ---------------------------------------------------------------------------

def write_ledger(path, nus=(2, 3, 4), n_times=6):
    times = np.linspace(0.1, 1.0, n_times)
    lines = ["# oscillab-csv v1", "t,nu,e_nu,e_classical,weight,total"]
    for i, t in enumerate(times):
        for nu in nus:
            e = 1.0 + 0.1 * nu * t
            lines.append(f"{t},{nu},{e},{e * 1.1},1,{len(nus) * e}")
    path.write_text("\n".join(lines) + "\n")
    return path


def write_report(path, kind="loss", family="yamazaki-osc", profile="sin",
                 delta=0.0, beta=0.02):
    times = list(np.linspace(0.0, 1.0, 8))
    data = {
        "config": {"family": family, "profile": profile, "delta": delta,
                   "outdir": str(path.parent)},
        "config_hash": "abc123", "gamma0": 1.0, "c_eq": 1.4,
        "times": times, "sigma": [beta * t for t in times],
        "residual": [0.01] * 8, "beta_hat": beta, "checks": {},
        "amplification": {}, "steps_total": 10, "wall_clock_s": 1.0,
    }
    if kind == "amplification":
        data["amplification"] = {
            "per_xi": {str(p): {"xi": float(2**p), "amp_max": 2.0 ** (0.1 * p),
                                "amp_cos": 1.0, "steps": 5,
                                "wronskian_drift": 1e-9} for p in range(4, 13)},
            "exponent": 0.1, "max_min_ratio": 2.0, "local_exponents": {}}
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def artifacts(tmp_path):
    led = write_ledger(tmp_path / "ledger.csv")
    loss = write_report(tmp_path / "run.json")
    loss2 = write_report(tmp_path / "run2.json", profile="weierstrass", beta=0.04)
    amp = write_report(tmp_path / "amp.json", kind="amplification",
                       family="delta-osc", delta=1.0)
    return {"ledger": led, "loss": loss, "loss2": loss2, "amp": amp,
            "out": tmp_path / "fig.png"}


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind,inputs", [
    ("energy", ("ledger",)),
    ("loss", ("loss",)),
    ("amplification", ("amp",)),
    ("comparison", ("loss", "loss2")),
])
def test_render_kinds(artifacts, kind, inputs):
    spec = FigureSpec(kind, tuple(str(artifacts[i]) for i in inputs),
                      str(artifacts["out"]))
    out = render(spec)
    data = Path(out).read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_render_deterministic(artifacts, tmp_path):
    outs = []
    for name in ("one.png", "two.png"):
        spec = FigureSpec("loss", (str(artifacts["loss"]),), str(tmp_path / name))
        render(spec)
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------------------
# schema validation
# ---------------------------------------------------------------------------

def test_reject_missing_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,nu,e_nu,e_classical,weight,total\n0.1,2,1,1,1,1\n")
    with pytest.raises(InputError, match="header"):
        read_ledger(bad)


def test_reject_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# oscillab-csv v1\nt,nu,e_nu\n0.1,2,1\n")
    with pytest.raises(InputError, match="e_classical"):
        read_ledger(bad)


def test_reject_report_missing_field(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"config": {}, "config_hash": "x"}))
    with pytest.raises(InputError, match="missing field"):
        render(FigureSpec("loss", (str(p),), str(tmp_path / "f.png")))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(InputError, match="unknown figure kind"):
        FigureSpec("pie", ("x.csv",), "out.png")


def test_comparison_needs_two_inputs(artifacts, tmp_path):
    with pytest.raises(InputError, match="two"):
        render(FigureSpec("comparison", (str(artifacts["loss"]),),
                          str(tmp_path / "f.png")))


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_ok(artifacts):
    rc = main(["energy", str(artifacts["ledger"]), "-o", str(artifacts["out"])])
    assert rc == 0
    assert artifacts["out"].exists()


def test_cli_nonzero_on_bad_schema(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,nu\n0.1,2\n")
    rc = main(["energy", str(bad), "-o", str(tmp_path / "f.png")])
    assert rc == 2
    assert "header" in capsys.readouterr().err


def test_cli_nonzero_on_missing_file(tmp_path, capsys):
    rc = main(["loss", str(tmp_path / "nope.json"), "-o", str(tmp_path / "f.png")])
    assert rc == 2


# ---------------------------------------------------------------------------
# real acceptance artifacts, when the primary suite has produced them
# ---------------------------------------------------------------------------

def test_acceptance_artifacts_render(tmp_path):
    needed = {
        "energy": [ACCEPTANCE / "ell0-base" / "ledger.csv"],
        "loss": [ACCEPTANCE / "ell1-base" / "run.json"],
        "amplification": [ACCEPTANCE / t / "run.json"
                          for t in ("mode-delta0", "mode-delta1", "mode-violator")],
        "comparison": [ACCEPTANCE / "ell0-base" / "run.json",
                       ACCEPTANCE / "ell1-base" / "run.json"],
    }
    missing = [str(p) for paths in needed.values() for p in paths if not p.exists()]
    if missing:
        pytest.skip(f"acceptance artifacts not generated yet: {missing[0]}")
    for kind, paths in needed.items():
        out = tmp_path / f"{kind}.png"
        rc = main([kind, *[str(p) for p in paths], "-o", str(out)])
        assert rc == 0, kind
        assert out.exists()
        print(f"\nACCEPTANCE plot-{kind}: PASS -> {out.name}")


def test_logx_axis_scale(artifacts, tmp_path):
    lin = tmp_path / "lin.png"
    log = tmp_path / "log.png"
    assert main(["energy", str(artifacts["ledger"]), "-o", str(lin)]) == 0
    assert main(["energy", str(artifacts["ledger"]), "--logx", "-o", str(log)]) == 0
    assert lin.read_bytes() != log.read_bytes()
