"""Monte-Carlo harness: data generation from the contamination scheme,
empirical L_p risk of the adaptive estimator, and slope-versus-theory
verdicts.

Randomness comes from a counter-based generator keyed by
(seed, replication, stream), so replications can run in any order or in
parallel and still reproduce bit-identically; aggregation always sums
in replication order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .densities import TestDensity
from .kernels import KernelSpec, default_kernel_spec
from .model import BandwidthVec, GridSpec, NoiseSpec, Sample, default_grid
from .rates import RateReport
from .selector import estimate_curve

__all__ = [
    "ExperimentPlan",
    "RiskResult",
    "SlopeVerdict",
    "replication_rng",
    "sample_model",
    "empirical_risk",
    "slope_vs_theory",
]


def replication_rng(seed: int, replication: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one (replication, stream) cell."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(((replication & 0xFFFFFFFF) << 32)
                              | (stream & 0xFFFFFFFF))], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_model(density: TestDensity, noise: NoiseSpec, n: int,
                 seed) -> Sample:
    """Draw Z_i = X_i + eps_i Y_i.  The contamination indicators are
    drawn first; noise variates are drawn only for contaminated rows."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else replication_rng(int(seed), 0, 0)
    x = np.asarray(density.sample(rng, n), dtype=float)
    a = noise.alpha
    if a == 0.0:
        return Sample(x)
    eps = rng.random(n) < a
    m = int(np.count_nonzero(eps))
    if m:
        if noise.sampler is None:
            raise ValueError("noise law has no sampler; cannot simulate "
                             "contaminated observations")
        y = np.asarray(noise.sampler(rng, m), dtype=float)
        x[eps] += y
    return Sample(x)


@dataclass(frozen=True)
class ExperimentPlan:
    density: TestDensity
    noise: NoiseSpec
    sample_sizes: tuple[int, ...]
    replications: Optional[tuple[int, ...]] = None  # per n; defaulted
    eval_resolution: int = 101
    p: float = 2.0
    grid_spec: Optional[GridSpec] = None  # None: per-n default grid
    kernel: Optional[KernelSpec] = None
    seed: int = 0

    def __post_init__(self):
        if any(n < 2 for n in self.sample_sizes):
            raise ValueError("all sample sizes must be >= 2")
        if self.replications is not None:
            if len(self.replications) != len(self.sample_sizes):
                raise ValueError("replications must align with sample sizes")
            if any(m < 1 for m in self.replications):
                raise ValueError("need at least one replication")

    def reps_for(self, i: int) -> int:
        if self.replications is not None:
            return self.replications[i]
        return 100 if self.sample_sizes[i] <= 4096 else 30

    def kernel_spec(self) -> KernelSpec:
        return self.kernel or default_kernel_spec(self.noise)


@dataclass
class RiskResult:
    sample_sizes: tuple[int, ...]
    mean_risk: np.ndarray
    se: np.ndarray
    per_rep: dict[int, np.ndarray]  # n -> per-replication ||err||_p^p
    p: float
    truncated_mass: float
    theory_exponent: Optional[float] = None


def _eval_lattice(density: TestDensity, resolution: int):
    lo, hi = density.window()
    axes = [np.linspace(lo[j], hi[j], resolution) for j in range(density.d)]
    if density.d == 1:
        pts = axes[0][:, None]
        cell = float(axes[0][1] - axes[0][0])
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        cell = float(np.prod([a[1] - a[0] for a in axes]))
    return pts, cell


def _one_replication(plan: ExperimentPlan, n: int, n_index: int, rep: int,
                     xs: np.ndarray, f_true: np.ndarray, cell: float,
                     grid: GridSpec,
                     estimator: Optional[Callable]) -> float:
    rng = replication_rng(plan.seed, rep, n_index)
    sample = sample_model(plan.density, plan.noise, n, rng)
    if estimator is None:
        values, _ = estimate_curve(sample, grid, xs, plan.kernel_spec(),
                                   plan.noise, plan.p)
    else:
        values = np.asarray(estimator(sample, xs), dtype=float)
    return float(np.sum(np.abs(values - f_true) ** plan.p) * cell)


def empirical_risk(plan: ExperimentPlan,
                   estimator: Optional[Callable] = None,
                   threads: int = 1) -> RiskResult:
    """Replication-averaged L_p risk per sample size.

    ``estimator`` overrides the adaptive pipeline for oracle checks: a
    callable (sample, x_points) -> values.
    """
    xs, cell = _eval_lattice(plan.density, plan.eval_resolution)
    f_true = plan.density.pdf(xs if plan.density.d > 1 else xs[:, 0])
    means, ses = [], []
    per_rep: dict[int, np.ndarray] = {}
    for i, n in enumerate(plan.sample_sizes):
        grid = plan.grid_spec or default_grid(plan.noise, n)
        reps = plan.reps_for(i)

        def run(rep, n=n, i=i, grid=grid):
            return _one_replication(plan, n, i, rep, xs, f_true, cell,
                                    grid, estimator)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                pows = np.array(list(pool.map(run, range(reps))))
        else:
            pows = np.array([run(rep) for rep in range(reps)])
        per_rep[n] = pows
        mean_pow = float(np.sum(pows) / reps)  # pairwise, fixed order
        risk = mean_pow ** (1.0 / plan.p)
        if reps > 1:
            se_pow = float(np.std(pows, ddof=1)) / math.sqrt(reps)
            se = se_pow / (plan.p * mean_pow ** (1.0 - 1.0 / plan.p)) \
                if mean_pow > 0 else 0.0
        else:
            se = math.nan
        means.append(risk)
        ses.append(se)

    lo, hi = plan.density.window()
    from scipy import integrate
    mass, _ = integrate.quad(lambda t: plan.density.pdf1(np.array(t)),
                             lo[0], hi[0], limit=200)
    truncated = max(0.0, 1.0 - mass ** plan.density.d)
    return RiskResult(sample_sizes=tuple(plan.sample_sizes),
                      mean_risk=np.array(means), se=np.array(ses),
                      per_rep=per_rep, p=plan.p, truncated_mass=truncated)


@dataclass(frozen=True)
class SlopeVerdict:
    slope: float
    slope_se: float
    target: float
    passed: bool
    form: str


def slope_vs_theory(result: RiskResult, report: RateReport,
                    form: str = "delta") -> SlopeVerdict:
    """Least-squares slope of ln risk against ln n (``plain``) or
    ln(n/ln n) (``delta``: the rate scale carries the logarithm), with
    PASS iff |slope + rho| <= max(0.25 rho, 2 SE)."""
    ns = np.asarray(result.sample_sizes, dtype=float)
    if len(ns) < 4 or np.max(ns) / np.min(ns) < 16.0:
        raise ValueError("need >= 4 sample sizes spanning >= 16x")
    if form == "plain":
        x = np.log(ns)
    elif form == "delta":
        x = np.log(ns / np.log(ns))
    else:
        raise ValueError("form must be 'plain' or 'delta'")
    y = np.log(result.mean_risk)
    xc = x - x.mean()
    slope = float(np.sum(xc * y) / np.sum(xc**2))
    resid = y - y.mean() - slope * xc
    dof = len(ns) - 2
    slope_se = float(math.sqrt(np.sum(resid**2) / dof / np.sum(xc**2))) \
        if dof > 0 else math.nan
    rho = float(report.rho)
    tol = max(0.25 * rho, 2.0 * slope_se if math.isfinite(slope_se) else 0.0)
    passed = abs(slope + rho) <= tol
    return SlopeVerdict(slope=slope, slope_se=slope_se, target=-rho,
                        passed=passed, form=form)
