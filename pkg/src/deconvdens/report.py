"""Output writers: delimited tables, JSON payloads and the figures
rendered alongside them.

All floats in delimited output are printed with 17 significant digits
so that a rerun can be compared byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .rates import RateReport  # noqa: E402
from .simulate import RiskResult, SlopeVerdict  # noqa: E402

__all__ = [
    "fmt",
    "write_risk_csv",
    "write_risk_json",
    "write_estimates_csv",
    "render_risk_figure",
    "render_estimate_figure",
]


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_risk_csv(result: RiskResult, report: Optional[RateReport],
                   path: str | Path) -> None:
    theory = float(report.rho) if report is not None else float("nan")
    with open(path, "w") as fh:
        fh.write("n,mean_risk,se,theory_exponent\n")
        for n, m, s in zip(result.sample_sizes, result.mean_risk, result.se):
            fh.write(f"{n},{fmt(m)},{fmt(s)},{fmt(theory)}\n")


def write_risk_json(result: RiskResult, report: Optional[RateReport],
                    verdict: Optional[SlopeVerdict],
                    path: str | Path) -> None:
    obj = {
        "sample_sizes": list(result.sample_sizes),
        "mean_risk": [float(v) for v in result.mean_risk],
        "se": [float(v) for v in result.se],
        "p": result.p,
        "truncated_mass": result.truncated_mass,
        "per_rep": {str(n): [float(v) for v in arr]
                    for n, arr in result.per_rep.items()},
    }
    if report is not None:
        obj["rate_report"] = report.to_json_obj()
    obj["slope"] = None
    if verdict is not None:
        obj["slope"] = {
            "slope": verdict.slope,
            "slope_se": verdict.slope_se,
            "target": verdict.target,
            "passed": verdict.passed,
            "form": verdict.form,
        }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_estimates_csv(xs: np.ndarray, values: np.ndarray,
                        chosen: Sequence[Sequence[int]],
                        path: str | Path) -> None:
    xs = np.atleast_2d(xs)
    d = xs.shape[1]
    with open(path, "w") as fh:
        cols = [f"x{j + 1}" for j in range(d)] + ["f_hat"] \
            + [f"k{j + 1}" for j in range(d)]
        fh.write(",".join(cols) + "\n")
        for i in range(xs.shape[0]):
            row = [fmt(v) for v in xs[i]] + [fmt(values[i])] \
                + [str(k) for k in chosen[i]]
            fh.write(",".join(row) + "\n")


def render_risk_figure(result: RiskResult, report: Optional[RateReport],
                       path: str | Path) -> None:
    ns = np.asarray(result.sample_sizes, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.errorbar(ns, result.mean_risk, yerr=2.0 * result.se, fmt="o-",
                capsize=3, label="empirical risk")
    if report is not None and np.isfinite(float(report.rho)):
        rho = float(report.rho)
        ref = result.mean_risk[0] * (ns / ns[0]) ** (-rho)
        ax.plot(ns, ref, "k--", lw=1,
                label=rf"slope $-{rho:.4g}$ reference")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(rf"$L_{{{result.p:g}}}$ risk")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_estimate_figure(xs: np.ndarray, values: np.ndarray,
                           path: str | Path) -> None:
    xs = np.atleast_2d(xs)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    if xs.shape[1] == 1:
        ax.plot(xs[:, 0], values, "-", lw=1.5)
        ax.set_xlabel("x")
        ax.set_ylabel(r"$\hat f(x)$")
    else:
        ax.plot(values, ".")
        ax.set_xlabel("evaluation point index")
        ax.set_ylabel(r"$\hat f$")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
