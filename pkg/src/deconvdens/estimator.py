"""The estimator family f_hat_h, the empirical second moment, the
penalty lambda_n, the stochastic envelope U_n and the variance scale
F_n — all with the exact displayed constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import KernelSpec, kcheck_l1, verify_assumption5
from .model import BandwidthVec, NoiseSpec, Sample
from .operator import DeconvKernelTable, eval_M_batch, eval_M_line

__all__ = [
    "EnvelopeParams",
    "m_infinity",
    "lambda_n",
    "estimate_at",
    "estimate_batch_1d",
    "envelope_U",
    "envelope_U_from_sigma",
    "variance_scale_F",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class EnvelopeParams:
    m_inf: float
    p: float
    mu_alpha: tuple[float, ...]
    n: float  # real-valued on purpose: the formulas are smooth in n

    def __post_init__(self):
        if self.m_inf < 1.0:
            raise ValueError("m_inf must be >= 1 (the definition takes a max with 1)")
        if self.n < 2:
            raise ValueError("need n >= 2")


def m_infinity(spec: KernelSpec, noise: NoiseSpec, d: int,
               kcheck_l1_d: Optional[float] = None,
               k1: Optional[float] = None) -> float:
    """M_inf = [(2 pi)^-d * (eps^-1 ||K^||_1  if alpha != 1
                            else  upsilon0^-1 * k1)] v 1.

    The Fourier constants can be passed in directly (tests do); otherwise
    they are computed from the kernel spec.
    """
    if noise.alpha != 1.0:
        if kcheck_l1_d is None:
            kcheck_l1_d = kcheck_l1(spec) ** d
        raw = kcheck_l1_d / noise.epsilon
    else:
        if k1 is None:
            k1, _ = verify_assumption5(spec, noise)
        raw = k1 / noise.upsilon0
    return max(raw / TWO_PI**d, 1.0)


def lambda_n(env: EnvelopeParams, h: BandwidthVec) -> float:
    """lambda_n(h) = 4 ln M_inf + 6 ln n + (8p+26) sum_j (1+mu_j(alpha)) |ln h_j|."""
    logs = sum((1.0 + m) * abs(k)
               for m, k in zip(env.mu_alpha, h.exponents))
    return 4.0 * math.log(env.m_inf) + 6.0 * math.log(env.n) \
        + (8.0 * env.p + 26.0) * logs


def _h_weight(env: EnvelopeParams, h: BandwidthVec) -> float:
    """prod_j h_j (h_j ^ 1)^mu_j(alpha)  (exact, from exponents)."""
    expo = sum(k + m * min(k, 0) for k, m in zip(h.exponents, env.mu_alpha))
    return math.exp(expo)


def estimate_at(table: DeconvKernelTable, sample: Sample,
                x: np.ndarray) -> tuple[float, float]:
    """(f_hat, sigma2_hat) at one point: empirical means of M(Z_i - x)
    and M^2(Z_i - x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (sample.d,):
        raise ValueError("evaluation point dimension mismatch")
    if sample.d == 1:
        vals = eval_M_line(table, sample.points[:, 0] - x[0])
    else:
        vals = eval_M_batch(table, sample.points - x)
    return float(np.mean(vals)), float(np.mean(vals**2))


def estimate_batch_1d(table: DeconvKernelTable, z: np.ndarray,
                      xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized d=1 path: f_hat and sigma2_hat at every point of xs."""
    diffs = z[:, None] - xs[None, :]
    vals = eval_M_line(table, diffs.ravel()).reshape(diffs.shape)
    return vals.mean(axis=0), (vals**2).mean(axis=0)


def envelope_U_from_sigma(env: EnvelopeParams, sigma2: float,
                          h: BandwidthVec) -> float:
    """U_n(x,h) = sqrt(2 lambda_n sigma2 / n)
                 + 4 M_inf lambda_n / (3 n prod h_j (h_j^1)^mu_j(alpha))."""
    lam = lambda_n(env, h)
    return math.sqrt(2.0 * lam * max(sigma2, 0.0) / env.n) \
        + 4.0 * env.m_inf * lam / (3.0 * env.n * _h_weight(env, h))


def envelope_U(env: EnvelopeParams, table: DeconvKernelTable,
               sample: Sample, x: np.ndarray, h: BandwidthVec) -> float:
    _, sigma2 = estimate_at(table, sample, x)
    return envelope_U_from_sigma(env, sigma2, h)


def variance_scale_F(noise: NoiseSpec, h: BandwidthVec, n: float) -> float:
    """F_n(h) = (ln n + sum |ln h_j|)^(1/2)
               * prod (n h_j)^(-1/2) (h_j ^ 1)^(-mu_j(alpha))."""
    mu = noise.mu_alpha
    lead = math.sqrt(math.log(n) + sum(abs(k) for k in h.exponents))
    prod = 1.0
    for k, m in zip(h.exponents, mu):
        prod *= (n * math.exp(k)) ** -0.5 * math.exp(-m * min(k, 0))
    return lead * prod
