"""Shared domain types: contamination model, smoothness classes,
bandwidth grids and sample containers.

Bandwidths live on the geometric lattice {e^k : k integer} and are
stored as integer exponent vectors.  This keeps the coordinatewise
max, the partial order and |ln h_j| exact, which matters because the
penalty and envelope formulas consume |ln h_j| directly and ties in
the selection rule must be stable.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "NoiseSpec",
    "ClassParams",
    "BandwidthVec",
    "GridSpec",
    "Sample",
    "enumerate_grid",
    "bandwidth_join",
    "default_grid",
    "load_sample",
    "save_sample_binary",
    "probe_assumption4",
]

_DCNV_MAGIC = b"DCNV"


# ---------------------------------------------------------------------------
# bandwidths and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class BandwidthVec:
    """A bandwidth vector h with h_j = e^{k_j}, stored as exponents k."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if not self.exponents:
            raise ValueError("empty bandwidth vector")
        if not all(isinstance(k, int) for k in self.exponents):
            raise TypeError("exponents must be integers")

    @property
    def d(self) -> int:
        return len(self.exponents)

    @property
    def h(self) -> np.ndarray:
        return np.exp(np.asarray(self.exponents, dtype=float))

    @property
    def v_h(self) -> float:
        """Product of the coordinates, V_h."""
        return math.exp(sum(self.exponents))

    def log_abs_sum(self, weights: Sequence[float] | None = None) -> float:
        """Sum of (weight_j)*|ln h_j|; weights default to 1."""
        if weights is None:
            return float(sum(abs(k) for k in self.exponents))
        return float(sum(w * abs(k) for w, k in zip(weights, self.exponents)))

    def join(self, other: "BandwidthVec") -> "BandwidthVec":
        return bandwidth_join(self, other)

    def dominates(self, other: "BandwidthVec") -> bool:
        """Coordinatewise h >= eta."""
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        return all(a >= b for a, b in zip(self.exponents, other.exponents))


def bandwidth_join(h: BandwidthVec, eta: BandwidthVec) -> BandwidthVec:
    """Coordinatewise maximum h v eta, computed on exponents."""
    if h.d != eta.d:
        raise ValueError("dimension mismatch in bandwidth join")
    return BandwidthVec(tuple(max(a, b) for a, b in zip(h.exponents, eta.exponents)))


@dataclass(frozen=True)
class GridSpec:
    mode: str  # "anisotropic" | "isotropic"
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.mode not in ("anisotropic", "isotropic"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        if self.k_min > self.k_max:
            raise ValueError("empty grid")


def enumerate_grid(spec: GridSpec, d: int) -> list[BandwidthVec]:
    """All bandwidth vectors of the truncated grid, lexicographically sorted.

    Anisotropic mode is the full exponent box [k_min, k_max]^d (join-closed
    by construction); isotropic mode is its diagonal.
    """
    ks = range(spec.k_min, spec.k_max + 1)
    if spec.mode == "isotropic":
        return [BandwidthVec((k,) * d) for k in ks]
    return [BandwidthVec(t) for t in sorted(product(ks, repeat=d))]


def default_grid(noise: "NoiseSpec", n: int, mode: str = "isotropic") -> GridSpec:
    """Grid truncation: k_max = 0 and k_min chosen so that
    n * prod h_j (h_j ^ 2 mu_j(alpha)) stays >= 1; below that the envelope
    dominates any signal and those bandwidths are never selected."""
    mu_max = max(noise.mu_alpha) if noise.mu_alpha else 0.0
    k_min = math.ceil(-math.log(n) / (1.0 + 2.0 * mu_max))
    return GridSpec(mode=mode, k_min=min(k_min, 0), k_max=0)


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseSpec:
    """Contamination model: each observation is X_i + eps_i * Y_i with
    eps_i ~ Bernoulli(alpha) and Y_i ~ g.

    ``g_fourier`` maps an (..., d) array of frequencies to the (complex)
    characteristic function of g.  ``mu`` are the polynomial ill-posedness
    exponents, consumed only when alpha = 1; ``epsilon`` lower-bounds
    |1 - alpha + alpha*g_fourier| when alpha != 1; ``upsilon0`` is the
    constant of the polynomial lower bound when alpha = 1.
    """

    alpha: float
    g_fourier: Callable[[np.ndarray], np.ndarray]
    mu: tuple[float, ...]
    epsilon: float
    upsilon0: float
    g_l1_norm: float = 1.0
    name: str = "custom"
    scale: float = 0.0
    penetration: float = 0.0
    sampler: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if any(m <= 0 for m in self.mu):
            raise ValueError("all mu_j must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.upsilon0 <= 0:
            raise ValueError("upsilon0 must be positive")

    @property
    def d(self) -> int:
        return len(self.mu)

    @property
    def mu_alpha(self) -> tuple[float, ...]:
        """mu(alpha): mu if alpha = 1, the zero vector otherwise."""
        if self.alpha == 1.0:
            return self.mu
        return (0.0,) * len(self.mu)

    def cache_key(self) -> Optional[tuple]:
        if self.name == "custom":
            return None
        return (self.name, self.alpha, self.scale, self.d)


def probe_assumption4(noise: NoiseSpec, t_lattice: np.ndarray) -> tuple[bool, float]:
    """Check the declared lower bound on a finite frequency lattice.

    Returns (ok, worst_margin) where worst_margin is the minimum of
    |1-a+a*g| - eps (alpha != 1) or |g|*prod(1+t^2)^{mu/2} - upsilon0
    (alpha = 1) over the lattice.
    """
    t = np.atleast_2d(np.asarray(t_lattice, dtype=float))
    gv = np.asarray(noise.g_fourier(t))
    if noise.alpha != 1.0:
        vals = np.abs(1.0 - noise.alpha + noise.alpha * gv)
        margin = float(np.min(vals) - noise.epsilon)
    else:
        w = np.prod((1.0 + t**2) ** (np.asarray(noise.mu) / 2.0), axis=-1)
        margin = float(np.min(np.abs(gv) * w) - noise.upsilon0)
    return margin >= -1e-12, margin


@dataclass(frozen=True)
class ClassParams:
    """Smoothness-class and loss parameters driving the rate calculus."""

    beta: tuple[float, ...]
    r: tuple[float, ...]
    L: tuple[float, ...]
    R: float = 2.0
    Q: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        d = len(self.beta)
        if len(self.r) != d or len(self.L) != d:
            raise ValueError("beta, r, L must share one dimension")
        if any(b <= 0 for b in self.beta):
            raise ValueError("beta_j must be positive")
        if any(rr < 1 for rr in self.r):
            raise ValueError("r_j must be >= 1 (inf allowed)")
        if any(l <= 0 for l in self.L):
            raise ValueError("L_j must be positive")
        if self.R <= 1:
            raise ValueError("R must exceed 1")
        if self.Q <= 0:
            raise ValueError("Q must be positive")
        if not (1 < self.p < math.inf):
            raise ValueError("p must lie in (1, inf)")

    @property
    def d(self) -> int:
        return len(self.beta)


# ---------------------------------------------------------------------------
# samples and their file formats
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sample:
    points: np.ndarray  # (n, d)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("sample must be a nonempty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample contains non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _looks_like_header(line: str) -> bool:
    for tok in line.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            float(tok)
        except ValueError:
            return True
    return False


def load_sample(path: str | Path) -> Sample:
    """Read a sample from CSV (optional auto-detected header) or from the
    binary column-major format (16-byte header: magic 'DCNV', version,
    u32 n, u32 d; float64 payload)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _DCNV_MAGIC:
        with open(path, "rb") as fh:
            magic, _version, n, d = struct.unpack("<4sIII", fh.read(16))
            payload = np.fromfile(fh, dtype="<f8", count=n * d)
        if payload.size != n * d:
            raise IOError(f"truncated binary sample file {path}")
        return Sample(payload.reshape((d, n)).T.copy())
    with open(path, "r") as fh:
        first = fh.readline()
    skip = 1 if _looks_like_header(first) else 0
    data = np.genfromtxt(path, delimiter=",", skip_header=skip, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.size == 0 or np.isnan(data).any():
        raise IOError(f"could not parse numeric sample from {path}")
    return Sample(data)


def save_sample_binary(sample: Sample, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _DCNV_MAGIC, 1, sample.n, sample.d))
        np.ascontiguousarray(sample.points.T, dtype="<f8").tofile(fh)
