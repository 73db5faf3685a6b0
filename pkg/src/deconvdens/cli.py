"""Command-line surface.

Subcommands: estimate | simulate | rates | check.  Global flags:
--config PATH (JSON or TOML), --seed U64, --threads N, --output DIR.
Exit codes: 0 ok, 2 validation failure, 3 I/O failure, 4 rate-assertion
failure.  All floats in delimited output carry 17 significant digits and
reruns with the same config and seed are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .densities import test_density
from .estimator import m_infinity
from .kernels import Assumption5Error, KernelSpec, default_kernel_spec, \
    kcheck_l1, verify_assumption5
from .model import ClassParams, GridSpec, default_grid, load_sample, \
    probe_assumption4
from .operator import builtin_noise
from .rates import RateInputs, classify_and_rate
from .selector import estimate_curve, write_traces
from .simulate import ExperimentPlan, empirical_risk, slope_vs_theory

__all__ = ["main", "ValidationError", "RateAssertionError"]


class ValidationError(ValueError):
    pass


class RateAssertionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCHEMA = {
    "seed": None,
    "noise": {"name": None, "scale": None, "alpha": None, "d": None},
    "kernel": {"ell": None, "m": None, "radius": None},
    "grid": {"mode": None, "k_min": None, "k_max": None},
    "class": {"beta": None, "r": None, "L": None, "R": None, "Q": None,
              "p": None},
    "rates": {"alpha": None, "mu": None, "n": None, "grid_mode": None,
              "sweep": {"param": None, "values": None}},
    "estimate": {"data": None, "window": None, "points": None, "p": None,
                 "traces": None},
    "simulate": {"density": None, "density_params": None, "d": None,
                 "sample_sizes": None, "replications": None,
                 "resolution": None, "p": None, "form": None,
                 "inject_constant": None},
}


def _validate(cfg, schema, where="config"):
    if not isinstance(cfg, dict):
        raise ValidationError(f"{where}: expected a table/object")
    for key, val in cfg.items():
        if key not in schema:
            raise ValidationError(f"{where}: unknown key {key!r}")
        sub = schema[key]
        if isinstance(sub, dict):
            _validate(val, sub, f"{where}.{key}")


def load_config(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:  # pragma: no cover - pre-3.11 interpreters
            import tomli as tomllib
        cfg = tomllib.loads(text.decode())
    else:
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"cannot parse config {path}: {e}") from e
    _validate(cfg, _SCHEMA)
    return cfg


def _num(v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def _noise_from(cfg: dict, d: int):
    sec = cfg.get("noise", {})
    return builtin_noise(sec.get("name", "none"),
                         scale=float(sec.get("scale", 1.0)),
                         d=int(sec.get("d", d)),
                         alpha=float(sec.get("alpha", 0.0)))


def _kernel_from(cfg: dict, noise):
    sec = cfg.get("kernel")
    if not sec:
        return default_kernel_spec(noise)
    base = default_kernel_spec(noise)
    return KernelSpec(ell=int(sec.get("ell", base.ell)),
                      base_smoothness=int(sec.get("m", base.base_smoothness)),
                      support_radius=float(sec.get("radius",
                                                   base.support_radius)))


def _grid_from(cfg: dict, noise, n: int):
    sec = cfg.get("grid")
    if not sec:
        return default_grid(noise, n)
    base = default_grid(noise, n, mode=sec.get("mode", "isotropic"))
    return GridSpec(mode=sec.get("mode", base.mode),
                    k_min=int(sec.get("k_min", base.k_min)),
                    k_max=int(sec.get("k_max", base.k_max)))


def _class_from(cfg: dict) -> ClassParams:
    sec = cfg.get("class")
    if sec is None:
        raise ValidationError("a [class] section is required")
    try:
        beta = tuple(_num(b) for b in sec["beta"])
        r = tuple(_num(v) for v in sec["r"])
        L = tuple(_num(v) for v in sec.get("L", [1.0] * len(beta)))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"class section malformed: {e}") from e
    return ClassParams(beta=beta, r=r, L=L,
                       R=_num(sec.get("R", 2.0)),
                       Q=_num(sec.get("Q", 1.0)),
                       p=_num(sec.get("p", 2.0)))


def _rate_inputs_from(cfg: dict) -> RateInputs:
    klass = _class_from(cfg)
    sec = cfg.get("rates", {})
    mu = tuple(_num(m) for m in sec.get("mu", [1.0] * klass.d))
    return RateInputs(klass=klass,
                      alpha=float(sec.get("alpha", 0.0)),
                      mu=mu,
                      n=int(sec.get("n", 1024)),
                      grid_mode=sec.get("grid_mode", "isotropic"))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_estimate(cfg: dict, args) -> int:
    sec = cfg.get("estimate", {})
    data = args.data or sec.get("data")
    if data is None:
        raise ValidationError("estimate: no data file given")
    sample = load_sample(data)

    noise = _noise_from(cfg, sample.d)
    if noise.d != sample.d:
        raise ValidationError("noise dimension does not match the data")
    from .kernels import attested
    spec = attested(_kernel_from(cfg, noise), noise)
    grid = _grid_from(cfg, noise, sample.n)

    window = sec.get("window")
    if window is None:
        lo = np.min(sample.points, axis=0)
        hi = np.max(sample.points, axis=0)
    else:
        lo = np.full(sample.d, _num(window[0]))
        hi = np.full(sample.d, _num(window[1]))
    npts = int(sec.get("points", 101))
    if sample.d == 1:
        xs = np.linspace(lo[0], hi[0], npts)[:, None]
    else:
        axes = [np.linspace(lo[j], hi[j], npts) for j in range(sample.d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        xs = np.stack([m.ravel() for m in mesh], axis=-1)

    p = _num(sec.get("p", 2.0))
    values, traces = estimate_curve(sample, grid, xs, spec, noise, p,
                                    collect_traces=True)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    chosen = [tr.chosen.exponents for tr in traces]
    report.write_estimates_csv(xs, values, chosen, out / "estimates.csv")
    if sec.get("traces"):
        write_traces(traces, out / "traces.jsonl")
    if not args.no_figures:
        report.render_estimate_figure(xs, values, out / "estimates.png")
    print(f"wrote {out / 'estimates.csv'} ({len(values)} points)")
    return 0


def cmd_rates(cfg: dict, args) -> int:
    inputs = _rate_inputs_from(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    rep = classify_and_rate(inputs)
    with open(out / "rates.json", "w") as fh:
        json.dump(rep.to_json_obj(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"zone={rep.zone} rho={report.fmt(float(rep.rho))} "
          f"consistent={rep.consistent}")

    if args.sweep:
        sweep = cfg.get("rates", {}).get("sweep")
        if not sweep or "param" not in sweep or "values" not in sweep:
            raise ValidationError("--sweep needs rates.sweep.param/values")
        param, values = sweep["param"], sweep["values"]
        rows = []
        for v in values:
            rows.append((v, classify_and_rate(_swept(inputs, param, v))))
        with open(out / "rates_sweep.csv", "w") as fh:
            fh.write(f"{param},zone,rho,varrho,consistent\n")
            for v, rp in rows:
                fh.write(f"{report.fmt(_num(v))},{rp.zone},"
                         f"{report.fmt(float(rp.rho))},"
                         f"{report.fmt(float(rp.varrho))},"
                         f"{rp.consistent}\n")
        print(f"wrote {out / 'rates_sweep.csv'} ({len(rows)} rows)")
    return 0


def _swept(inputs: RateInputs, param: str, value) -> RateInputs:
    from dataclasses import replace
    k = inputs.klass
    d = k.d
    if param in ("p", "R", "Q"):
        return replace(inputs, klass=replace(k, **{param: _num(value)}))
    if param in ("beta", "r", "L"):
        return replace(inputs,
                       klass=replace(k, **{param: (_num(value),) * d}))
    if param == "alpha":
        return replace(inputs, alpha=float(value))
    if param == "mu":
        return replace(inputs, mu=(_num(value),) * d)
    if param == "n":
        return replace(inputs, n=int(value))
    raise ValidationError(f"cannot sweep over {param!r}")


def cmd_simulate(cfg: dict, args) -> int:
    sec = cfg.get("simulate")
    if sec is None or "sample_sizes" not in sec:
        raise ValidationError("simulate: need simulate.sample_sizes")
    d = int(sec.get("d", 1))
    density = test_density(sec.get("density", "tensor_spline"), d=d,
                           **(sec.get("density_params") or {}))
    noise = _noise_from(cfg, d)
    if noise.d != d:
        raise ValidationError("noise dimension does not match the density")
    sizes = tuple(int(n) for n in sec["sample_sizes"])
    reps = sec.get("replications")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    grid = _grid_from(cfg, noise, max(sizes)) if cfg.get("grid") else None
    kernel = _kernel_from(cfg, noise) if cfg.get("kernel") else None
    plan = ExperimentPlan(
        density=density, noise=noise, sample_sizes=sizes,
        replications=tuple(int(m) for m in reps) if reps else None,
        eval_resolution=int(sec.get("resolution", 101)),
        p=_num(sec.get("p", 2.0)), grid_spec=grid, kernel=kernel, seed=seed,
    )

    estimator = None
    if args.inject_constant or sec.get("inject_constant"):
        def estimator(sample, xs):
            return np.zeros(np.atleast_2d(xs).shape[0])

    result = empirical_risk(plan, estimator=estimator, threads=args.threads)

    if "class" in cfg:
        inputs = _rate_inputs_from(cfg)
    else:
        klass = ClassParams(beta=(density.beta_decl,) * d,
                            r=(density.r_decl,) * d,
                            L=(1.0,) * d, p=plan.p)
        inputs = RateInputs(klass=klass, alpha=noise.alpha, mu=noise.mu,
                            n=max(sizes))
    rate_report = classify_and_rate(inputs)

    verdict = None
    try:
        verdict = slope_vs_theory(result, rate_report,
                                  form=sec.get("form", "delta"))
    except ValueError:
        pass  # too few sizes for a slope fit; smoke runs are fine

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    report.write_risk_csv(result, rate_report, out / "risk.csv")
    report.write_risk_json(result, rate_report, verdict, out / "risk.json")
    if not args.no_figures:
        report.render_risk_figure(result, rate_report, out / "risk.png")

    for n, m, s in zip(result.sample_sizes, result.mean_risk, result.se):
        print(f"n={n} risk={report.fmt(m)} se={report.fmt(s)}")
    if verdict is not None:
        tag = "PASS" if verdict.passed else "FAIL"
        print(f"slope={report.fmt(verdict.slope)} "
              f"target={report.fmt(verdict.target)} [{tag}]")
    if args.assert_rate:
        if verdict is None:
            raise RateAssertionError("rate assertion requested but the plan "
                                     "cannot support a slope fit")
        if not verdict.passed:
            raise RateAssertionError(
                f"fitted slope {verdict.slope:.4g} outside tolerance of "
                f"target {verdict.target:.4g}")
    return 0


def cmd_check(cfg: dict, args) -> int:
    sec = cfg.get("noise", {})
    d = int(sec.get("d", 1))
    noise = _noise_from(cfg, d)
    spec = _kernel_from(cfg, noise)

    print(f"noise: {noise.name} scale={noise.scale} alpha={noise.alpha} d={noise.d}")
    print(f"mu per coordinate: {list(noise.mu)}")

    ta = np.linspace(-64.0, 64.0, 4097)
    tt = ta[:, None] if noise.d == 1 else \
        np.stack(np.meshgrid(*([np.linspace(-16, 16, 129)] * noise.d),
                             indexing="ij"), axis=-1).reshape(-1, noise.d)
    ok, margin = probe_assumption4(noise, tt)
    if noise.alpha != 1.0:
        print(f"lower-bound certificate: epsilon={report.fmt(noise.epsilon)} "
              f"(lattice margin {report.fmt(margin)})")
    else:
        print(f"lower-bound certificate: upsilon0={report.fmt(noise.upsilon0)} "
              f"(lattice margin {report.fmt(margin)})")
    if not ok:
        raise ValidationError("declared noise lower bound fails on the "
                              "probe lattice")

    try:
        k1, k2 = verify_assumption5(spec, noise)
    except Assumption5Error as e:
        raise ValidationError(f"kernel decay check failed: {e}") from e
    print(f"k1={report.fmt(k1)} k2={report.fmt(k2)}")

    m_inf = m_infinity(spec, noise, noise.d, k1=k1)
    print(f"kernel-fourier L1 (per coordinate): {report.fmt(kcheck_l1(spec))}")
    print(f"M_inf={report.fmt(m_inf)}")

    # A contamination law with a bounded density forces mu_j > 1/2; flag
    # any declared exponent at or below that threshold.
    bad = [j for j, m in enumerate(noise.mu) if m <= 0.5]
    if bad:
        print(f"warning: mu_j <= 1/2 at coordinates {bad}: incompatible "
              "with a bounded noise density")
    else:
        print("mu_j > 1/2 for every coordinate: consistent with a bounded "
              "noise density")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="deconvdens",
        description="Adaptive density estimation under additive "
                    "contamination.")
    ap.add_argument("--config", type=str, default=None,
                    help="JSON or TOML configuration file")
    ap.add_argument("--seed", type=int, default=None, help="master seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--output", type=str, default=".",
                    help="output directory")
    ap.add_argument("--no-figures", action="store_true",
                    help="skip figure rendering")
    sub = ap.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="run the adaptive estimator "
                                            "on a data file")
    p_est.add_argument("data", nargs="?", default=None,
                       help="CSV or binary sample file "
                            "(overrides estimate.data)")

    sub.add_parser("check", help="verify noise/kernel assumptions")

    p_rat = sub.add_parser("rates", help="zone classification and "
                                         "convergence exponents")
    p_rat.add_argument("--sweep", action="store_true",
                       help="emit CSV rows over rates.sweep.values")

    p_sim = sub.add_parser("simulate", help="Monte-Carlo risk experiment")
    p_sim.add_argument("--assert-rate", action="store_true",
                       help="exit 4 unless the fitted slope matches theory")
    p_sim.add_argument("--inject-constant", action="store_true",
                       help="replace the estimator by the zero constant "
                            "(negative control)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        handler = {"estimate": cmd_estimate, "simulate": cmd_simulate,
                   "rates": cmd_rates, "check": cmd_check}[args.command]
        return handler(cfg, args)
    except RateAssertionError as e:
        print(f"rate assertion failed: {e}", file=sys.stderr)
        return 4
    except (ValidationError, ValueError, Assumption5Error) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
