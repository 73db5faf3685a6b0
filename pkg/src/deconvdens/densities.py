"""Test densities for the simulation harness.

Each density exposes an exact pdf, an exact sampler, a declared
smoothness/integrability membership used to parameterize the rate
oracle, and a window holding all but ~1e-4 of its mass.  Multivariate
versions are coordinate products throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["TestDensity", "test_density"]


@dataclass(frozen=True)
class TestDensity:
    name: str
    d: int
    pdf1: Callable[[np.ndarray], np.ndarray]  # univariate marginal pdf
    sampler: Callable  # (rng, n) -> (n, d)
    beta_decl: float
    r_decl: float
    half_window: float

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d == 1 and x.ndim <= 1:
            return self.pdf1(x)
        return np.prod(self.pdf1(x), axis=-1)

    def sample(self, rng, n: int) -> np.ndarray:
        return self.sampler(rng, n)

    def window(self) -> tuple[np.ndarray, np.ndarray]:
        w = self.half_window
        return -w * np.ones(self.d), w * np.ones(self.d)


def _irwin_hall_pdf(k: int):
    # density of U_1 + ... + U_{k+1} - (k+1)/2, U_i ~ Uniform(0,1)
    n_sum = k + 1
    coeffs = [(-1) ** j * math.comb(n_sum, j) for j in range(n_sum + 1)]
    fact = math.factorial(k)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        t = x + n_sum / 2.0
        out = np.zeros_like(t)
        for j, c in enumerate(coeffs):
            # indicator form, not clip(.)**k: 0**0 == 1 would break k = 0
            out += c * np.where(t > j, (t - j) ** k, 0.0)
        out /= fact
        out[(t < 0) | (t > n_sum)] = 0.0
        return out

    return pdf


def test_density(name: str, d: int = 1, **params) -> TestDensity:
    """Built-in test densities: 'tensor_spline' (degree k, default the
    triangular k=1), 'gauss_mixture', 'laplace_like'."""
    if name == "tensor_spline":
        k = int(params.get("k", 1))
        if k < 0:
            raise ValueError("spline degree must be >= 0")
        pdf1 = _irwin_hall_pdf(k)

        def samp(rng, n, dd=d, m=k + 1):
            u = rng.random(size=(m, n, dd))
            return u.sum(axis=0) - m / 2.0

        return TestDensity(name=f"tensor_spline({k})", d=d, pdf1=pdf1,
                           sampler=samp, beta_decl=float(k + 1),
                           r_decl=math.inf, half_window=(k + 1) / 2.0 + 0.5)

    if name == "gauss_mixture":
        w = np.asarray(params.get("weights", [0.5, 0.5]), dtype=float)
        mu = np.asarray(params.get("means", [-1.0, 1.0]), dtype=float)
        sd = np.asarray(params.get("sds", [0.5, 0.5]), dtype=float)
        if not (len(w) == len(mu) == len(sd)) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("mixture weights/means/sds inconsistent")

        def pdf1(x, w=w, mu=mu, sd=sd):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for wi, mi, si in zip(w, mu, sd):
                out += wi * np.exp(-0.5 * ((x - mi) / si) ** 2) \
                    / (si * math.sqrt(2.0 * math.pi))
            return out

        def samp(rng, n, dd=d, w=w, mu=mu, sd=sd):
            comp = rng.choice(len(w), size=(n, dd), p=w)
            return rng.normal(mu[comp], sd[comp])

        half = float(np.max(np.abs(mu)) + 5.0 * np.max(sd))
        return TestDensity(name="gauss_mixture", d=d, pdf1=pdf1, sampler=samp,
                           beta_decl=math.inf, r_decl=math.inf,
                           half_window=half)

    if name == "laplace_like":
        b = float(params.get("scale", 1.0))

        def pdf1(x, b=b):
            x = np.asarray(x, dtype=float)
            return np.exp(-np.abs(x) / b) / (2.0 * b)

        def samp(rng, n, dd=d, b=b):
            return rng.laplace(0.0, b, size=(n, dd))

        return TestDensity(name="laplace_like", d=d, pdf1=pdf1, sampler=samp,
                           beta_decl=1.0, r_decl=1.0,
                           half_window=12.0 * b)

    raise ValueError(f"unknown test density {name!r}")
