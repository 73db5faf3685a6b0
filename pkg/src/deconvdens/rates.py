"""The complete exponent algebra: effective-smoothness aggregates, zone
classification, minimax rate exponents, theoretical bandwidths,
threshold scales, and the internal lemma identities.

All exponents are computed over exact extended-real rationals (XR), so
branch comparisons and the golden rate values are exact; only the
scale quantities involving n and L carry floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .kernels import KernelSpec, kernel_l1_moment, kernel_sup_norm
from .model import BandwidthVec, ClassParams
from .xreal import INF, XR, xr

__all__ = [
    "RateInputs",
    "RateReport",
    "aggregates",
    "kappa_tau",
    "classify_and_rate",
    "gamma_q",
    "special_bandwidths",
    "ThresholdScales",
    "threshold_scales",
    "lemma_identities",
    "bias_envelope",
    "universal_constant",
    "default_frak_L",
]


def _to_xr(v) -> XR:
    if isinstance(v, XR):
        return v
    if isinstance(v, float) and math.isinf(v):
        return INF
    return xr(Fraction(v))


@dataclass(frozen=True)
class RateInputs:
    klass: ClassParams
    alpha: float
    mu: tuple[float, ...]
    n: int
    grid_mode: str = "isotropic"

    def __post_init__(self):
        if len(self.mu) != self.klass.d:
            raise ValueError("mu dimension does not match the class")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.grid_mode not in ("anisotropic", "isotropic"):
            raise ValueError("grid_mode must be anisotropic or isotropic")

    @property
    def d(self) -> int:
        return self.klass.d

    # exact views -----------------------------------------------------
    @property
    def beta_x(self) -> tuple[XR, ...]:
        return tuple(_to_xr(b) for b in self.klass.beta)

    @property
    def r_x(self) -> tuple[XR, ...]:
        return tuple(_to_xr(r) for r in self.klass.r)

    @property
    def p_x(self) -> XR:
        return _to_xr(self.klass.p)

    @property
    def mu_alpha_x(self) -> tuple[XR, ...]:
        if self.alpha == 1.0:
            return tuple(_to_xr(m) for m in self.mu)
        return tuple(xr(0) for _ in self.mu)


# ---------------------------------------------------------------------------
# aggregates and the two scalar functions
# ---------------------------------------------------------------------------

def _beta_of(inputs: RateInputs, alpha_one: bool) -> XR:
    mu = (tuple(_to_xr(m) for m in inputs.mu) if alpha_one
          else tuple(xr(0) for _ in inputs.mu))
    s = xr(0)
    for m, b in zip(mu, inputs.beta_x):
        s = s + (2 * m + 1) / b
    return xr(1) / s


def _omega_of(inputs: RateInputs, alpha_one: bool) -> XR:
    mu = (tuple(_to_xr(m) for m in inputs.mu) if alpha_one
          else tuple(xr(0) for _ in inputs.mu))
    s = xr(0)
    for m, b, r in zip(mu, inputs.beta_x, inputs.r_x):
        s = s + (2 * m + 1) / (b * r)
    if s == 0:
        return INF
    return xr(1) / s


def aggregates(inputs: RateInputs) -> tuple[XR, XR, float, tuple[XR, ...]]:
    """(beta(alpha), omega(alpha), L(alpha), mu(alpha))."""
    a1 = inputs.alpha == 1.0
    beta_a = _beta_of(inputs, a1)
    omega_a = _omega_of(inputs, a1)
    L_a = 1.0
    for m, b, L in zip(inputs.mu_alpha_x, inputs.klass.beta, inputs.klass.L):
        L_a *= L ** float((2 * m + 1) / _to_xr(b))
    return beta_a, omega_a, L_a, inputs.mu_alpha_x


def kappa_tau(inputs: RateInputs, s) -> tuple[XR, XR]:
    """kappa_alpha(s) = omega(alpha)(2 + 1/beta(alpha)) - s,
    tau(s) = 1 - 1/omega(0) + 1/(s beta(0))."""
    s = _to_xr(s)
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    try:
        kappa = omega_a * (2 + 1 / beta_a) - s
    except ArithmeticError:  # omega and s both infinite
        kappa = None
    beta0 = _beta_of(inputs, False)
    omega0 = _omega_of(inputs, False)
    tau = 1 - 1 / omega0 + 1 / (s * beta0)
    return kappa, tau


def _kappa_minus_pomega(inputs: RateInputs) -> XR:
    """kappa_alpha(p) - p*omega(alpha), arranged so that an infinite
    omega multiplies the (possibly vanishing) finite factor."""
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    return omega_a * (2 + 1 / beta_a - inputs.p_x) - inputs.p_x


def _p_star(inputs: RateInputs) -> XR:
    return max([inputs.p_x, *inputs.r_x])


def _p_pm(inputs: RateInputs) -> XR:
    finite = [r for r in inputs.r_x if not r.is_inf]
    return max([inputs.p_x, *finite]) if finite else inputs.p_x


def _z_of(inputs: RateInputs) -> XR:
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    beta0 = _beta_of(inputs, False)
    _, tau_inf = kappa_tau(inputs, INF)
    return omega_a * (2 + 1 / beta_a) * beta0 * tau_inf + 1


# ---------------------------------------------------------------------------
# the rate exponents
# ---------------------------------------------------------------------------

def _tail_expr(inputs: RateInputs) -> XR:
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    return (1 - 1 / inputs.p_x) / (1 - 1 / omega_a + 1 / beta_a)


def _dense_expr(inputs: RateInputs) -> XR:
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    return beta_a / (2 * beta_a + 1)


def _sparse1_expr(inputs: RateInputs) -> XR:
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    beta0 = _beta_of(inputs, False)
    _, tau_p = kappa_tau(inputs, inputs.p_x)
    return tau_p * omega_a * beta0 / _z_of(inputs)


def _sparse2_expr(inputs: RateInputs) -> XR:
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    pstar = _p_star(inputs)
    if pstar.is_inf:
        # convention kappa_alpha(p*)/p* = -1 at p* = infinity
        return omega_a / inputs.p_x
    kappa_ps, _ = kappa_tau(inputs, pstar)
    return omega_a * (1 - pstar / inputs.p_x) / kappa_ps


def _varrho(inputs: RateInputs) -> XR:
    diff = _kappa_minus_pomega(inputs)
    kappa_p, _ = kappa_tau(inputs, inputs.p_x)
    if diff > 0:
        return _tail_expr(inputs)
    if kappa_p > 0 or diff == 0:
        return _dense_expr(inputs)
    _, tau_ps = kappa_tau(inputs, _p_star(inputs))
    if tau_ps > 0:
        return _sparse1_expr(inputs)
    return _sparse2_expr(inputs)


def _rho(inputs: RateInputs) -> XR:
    diff = _kappa_minus_pomega(inputs)
    kappa_p, _ = kappa_tau(inputs, inputs.p_x)
    if diff > 0:
        return _tail_expr(inputs)
    if kappa_p > 0 or diff == 0:
        return _dense_expr(inputs)
    _, tau_inf = kappa_tau(inputs, INF)
    if tau_inf > 0:
        return _sparse1_expr(inputs)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    return omega_a / inputs.p_x


@dataclass(frozen=True)
class RateReport:
    mu_alpha: tuple
    beta_a: XR
    omega_a: XR
    L_a: float
    kappa_p: XR
    tau_p: XR
    tau_pstar: XR
    tau_inf: XR
    p_star: XR
    p_pm: XR
    z_a: XR
    zone: str
    varrho: XR
    rho: XR
    delta_n: float
    bld_n: float
    b_n: float
    consistent: bool

    def to_json_obj(self) -> dict:
        def num(v):
            if isinstance(v, XR):
                if v.is_inf:
                    return "inf" if v.is_pos_inf else "-inf"
                return float(v)
            return v

        def exact(v):
            if isinstance(v, XR) and not v.is_inf:
                return str(v.frac)
            return None

        obj = {}
        for name in ("beta_a", "omega_a", "kappa_p", "tau_p", "tau_pstar",
                     "tau_inf", "p_star", "p_pm", "z_a", "varrho", "rho"):
            v = getattr(self, name)
            obj[name] = num(v)
            e = exact(v)
            if e is not None:
                obj[name + "_exact"] = e
        obj["mu_alpha"] = [float(m) for m in self.mu_alpha]
        obj["L_a"] = self.L_a
        obj["zone"] = self.zone
        obj["delta_n"] = self.delta_n
        obj["bld_n"] = self.bld_n
        obj["b_n"] = self.b_n
        obj["consistent"] = self.consistent
        return obj


def classify_and_rate(inputs: RateInputs) -> RateReport:
    """Zone label, both rate exponents, and the n-dependent scales."""
    beta_a, omega_a, L_a, mu_a = aggregates(inputs)
    kappa_p, tau_p = kappa_tau(inputs, inputs.p_x)
    pstar = _p_star(inputs)
    _, tau_ps = kappa_tau(inputs, pstar)
    _, tau_inf = kappa_tau(inputs, INF)
    diff = _kappa_minus_pomega(inputs)

    if diff > 0:
        zone = "tail"
    elif diff == 0:
        # the boundary takes the dense-branch exponent; only the
        # logarithmic factor below remembers it
        zone = "dense"
    elif kappa_p > 0:
        zone = "dense"
    elif kappa_p == 0:
        zone = "boundary-kappa-zero"
    elif tau_ps > 0:
        zone = "sparse1"
    else:
        zone = "sparse2"

    n = inputs.n
    ln_n = math.log(n)
    delta_n = L_a * ln_n / n

    # lower-rate scale
    if kappa_p > 0:
        bld_n = L_a / n
    else:
        bld_n = L_a * ln_n / n
        if tau_ps > 0:
            L0 = math.prod(
                L ** float(1 / _to_xr(b))
                for L, b in zip(inputs.klass.L, inputs.klass.beta))
            try:
                expo = (-kappa_p) / (omega_a * inputs.p_x * tau_p)
                bld_n *= L0 ** float(expo)
            except (ZeroDivisionError, ArithmeticError):
                bld_n = math.nan

    # logarithmic grid factor
    t_grid = (inputs.d - 1) if inputs.grid_mode == "anisotropic" else 0
    p = float(inputs.klass.p)
    if diff > 0:
        b_n = ln_n**t_grid
    elif diff == 0:
        b_n = max(ln_n ** (1.0 / p), ln_n**t_grid)
    elif kappa_p == 0:
        b_n = ln_n ** (1.0 / p)
    else:
        b_n = 1.0

    max_r = max(inputs.r_x)
    consistent = not (kappa_p <= 0 and tau_p <= 0 and max_r <= inputs.p_x)

    return RateReport(
        mu_alpha=mu_a, beta_a=beta_a, omega_a=omega_a, L_a=L_a,
        kappa_p=kappa_p, tau_p=tau_p, tau_pstar=tau_ps, tau_inf=tau_inf,
        p_star=pstar, p_pm=_p_pm(inputs), z_a=_z_of(inputs), zone=zone,
        varrho=_varrho(inputs), rho=_rho(inputs),
        delta_n=delta_n, bld_n=bld_n, b_n=b_n, consistent=consistent,
    )


# ---------------------------------------------------------------------------
# embedding parameters (gamma, q)
# ---------------------------------------------------------------------------

def gamma_q(inputs: RateInputs):
    """(gamma_j), (q_j), gamma(alpha), upsilon(alpha); defined when the
    embedding threshold tau(p_pm) is positive."""
    ppm = _p_pm(inputs)
    _, tau_ppm = kappa_tau(inputs, ppm)
    if tau_ppm <= 0:
        raise ValueError("embedding regime violated: tau(p_pm) <= 0")
    gam, q = [], []
    for b, r in zip(inputs.beta_x, inputs.r_x):
        if r.is_inf:
            gam.append(b)
            q.append(INF)
        else:
            _, tau_r = kappa_tau(inputs, r)
            gam.append(b * tau_ppm / tau_r)
            q.append(ppm)
    inv_g = xr(0)
    inv_u = xr(0)
    for m, g, qq in zip(inputs.mu_alpha_x, gam, q):
        inv_g = inv_g + (2 * m + 1) / g
        inv_u = inv_u + ((2 * m + 1) / (g * qq) if not qq.is_inf else xr(0))
    gamma_a = xr(1) / inv_g
    upsilon_a = INF if inv_u == 0 else xr(1) / inv_u
    return tuple(gam), tuple(q), gamma_a, upsilon_a


# ---------------------------------------------------------------------------
# theoretical bandwidths and threshold scales
# ---------------------------------------------------------------------------

def _heff(s: XR, w: XR) -> XR:
    """s*w/(s+w) with the limits at infinity."""
    if s.is_inf and w.is_inf:
        return INF
    if s.is_inf:
        return w
    if w.is_inf:
        return s
    return s * w / (s + w)


def default_frak_L(inputs: RateInputs) -> float:
    return min(1.0, min(inputs.klass.L))


def _bandwidth_family(inputs, v, s, frak_a, frak_L, smooth, integ, agg_beta,
                      agg_w):
    """Shared form of the two theoretical bandwidth constructions."""
    delta = aggregates(inputs)[2] * math.log(inputs.n) / inputs.n
    base = frak_a**-2 * delta
    he = _heff(_to_xr(s), agg_w)
    out = []
    for b, r, L in zip(smooth, integ, inputs.klass.L):
        if r.is_inf:
            e_base = xr(0)
            e_v = 1 / b
        else:
            e_base = he / (b * r)
            e_v = 1 / b - he * (2 + 1 / agg_beta) / (b * r)
        out.append((frak_L / L) ** float(1 / b)
                   * base ** float(e_base) * v ** float(e_v))
    return out


def special_bandwidths(inputs: RateInputs, v: float, s,
                       frak_a: float = 1.0,
                       frak_L: Optional[float] = None):
    """The two theoretical bandwidth vectors at level v and index s, plus
    their snapped grid versions (largest grid point below each value).

    The second family needs the embedding parameters; it is None when
    tau(p_pm) <= 0.
    """
    if frak_L is None:
        frak_L = default_frak_L(inputs)
    if not (0 < frak_L <= 1):
        raise ValueError("frak_L must lie in (0, 1]")
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    eta_tilde = _bandwidth_family(inputs, v, s, frak_a, frak_L,
                                  inputs.beta_x, inputs.r_x, beta_a, omega_a)
    try:
        gam, q, gamma_a, upsilon_a = gamma_q(inputs)
        eta_hat = _bandwidth_family(inputs, v, s, frak_a, frak_L,
                                    gam, q, gamma_a, upsilon_a)
    except ValueError:
        eta_hat = None

    def snap(vals):
        return BandwidthVec(tuple(math.floor(math.log(x)) for x in vals))

    snapped = (snap(eta_tilde), snap(eta_hat) if eta_hat else None)
    return eta_tilde, eta_hat, snapped


@dataclass(frozen=True)
class ThresholdScales:
    Bv: float
    v_lower: float
    v_main: float
    v1: float
    v2: float
    v3: float
    v_bar: float
    X: XR
    Y: XR
    pi_u: XR
    u_star: XR
    y: XR
    interval: tuple[float, float]


def threshold_scales(inputs: RateInputs, u, frak_a: float = 1.0) -> ThresholdScales:
    """The proof-level scale quantities as powers of (frak_a^-2 delta_n),
    and the admissible interval per the five-case table."""
    u = _to_xr(u)
    if u < 1:
        raise ValueError("u must lie in [1, inf]")
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    beta0 = _beta_of(inputs, False)
    omega0 = _omega_of(inputs, False)
    _, tau_inf = kappa_tau(inputs, INF)
    pstar = _p_star(inputs)
    _, tau_ps = kappa_tau(inputs, pstar)
    z_a = _z_of(inputs)
    delta = aggregates(inputs)[2] * math.log(inputs.n) / inputs.n
    base = frak_a**-2 * delta

    def bpow(expo: XR) -> float:
        if expo.is_inf:
            return math.inf if (expo.is_pos_inf) == (base < 1.0) else 0.0
        try:
            return base ** float(expo)
        except OverflowError:
            # base > 0, so only the magnitude can blow up (underflow
            # already rounds to 0.0 silently)
            return math.inf

    X = xr(0)
    Y = xr(0)
    for m, b, r in zip(inputs.mu_alpha_x, inputs.beta_x, inputs.r_x):
        X = X + m / b
        Y = Y + m / (b * r)

    Bv = bpow(1 / (2 + 1 / beta_a))
    v_lower = bpow(1 / (1 - 1 / omega_a + 1 / beta_a))
    try:
        v_main = bpow(omega_a * tau_inf * beta0 / (z_a + omega_a / u))
    except (ArithmeticError, ZeroDivisionError):
        v_main = math.nan

    if u.is_inf:
        v1 = 1.0
    else:
        try:
            v1 = bpow(1 / (1 - u / omega0 + 1 / beta0))
        except ZeroDivisionError:  # threshold denominator exactly 0
            v1 = bpow(INF)

    # alpha=1 effective quantities, used by the deconvolution-side scales
    beta_1 = _beta_of(inputs, True)
    omega_1 = _omega_of(inputs, True)
    he1 = _heff(u, omega_1)
    try:
        kappa1_ps_u = he1 * (2 + 1 / beta_1) - pstar
        v2 = bpow(he1 / kappa1_ps_u)
    except (ArithmeticError, ZeroDivisionError):
        kappa1_ps_u = None
        v2 = math.nan

    pi_u = (1 / omega0 - 1 / u) * (1 + X) - (1 / beta0) * (Y + 1 / u)
    if pi_u <= 0:
        v3 = math.inf
    else:
        v3 = bpow(-(Y + 1 / u) / pi_u)

    u_star = INF if tau_inf >= 0 else xr(1) / (-tau_inf * beta0)
    y = max(u_star, pstar)
    v_bar = v_main if tau_ps > 0 else v2

    if pstar.is_inf:
        interval = (Bv, 1.0)
    elif inputs.alpha != 1.0:
        interval = (Bv, v1)
    elif kappa1_ps_u is not None and kappa1_ps_u >= 0:
        interval = (Bv, v3)
    else:
        thresh = (1 + X) / y - 1 / u
        if Y >= thresh:
            interval = (Bv, v_bar)
        else:
            interval = (Bv, min(v_bar, v3))

    if not math.isnan(interval[0]) and not math.isnan(interval[1]):
        interval = (min(interval), max(interval))
    return ThresholdScales(Bv=Bv, v_lower=v_lower, v_main=v_main, v1=v1,
                           v2=v2, v3=v3, v_bar=v_bar, X=X, Y=Y, pi_u=pi_u,
                           u_star=u_star, y=y, interval=interval)


# ---------------------------------------------------------------------------
# lemma identities
# ---------------------------------------------------------------------------

def lemma_identities(inputs: RateInputs, u) -> dict:
    """Exact checks of the internal identities; see tests for the
    randomized sweeps."""
    u = _to_xr(u)
    report: dict = {}
    beta_a = _beta_of(inputs, inputs.alpha == 1.0)
    omega_a = _omega_of(inputs, inputs.alpha == 1.0)
    beta0 = _beta_of(inputs, False)
    _, tau_inf = kappa_tau(inputs, INF)
    pstar = _p_star(inputs)
    _, tau_ps = kappa_tau(inputs, pstar)
    z_a = _z_of(inputs)

    # identity linking the embedding aggregates to the originals
    if tau_ps > 0 and tau_inf != 0:
        _, _, gamma_a, upsilon_a = gamma_q(inputs)
        lhs = 1 / gamma_a - 1 / beta_a
        rhs = (1 / (tau_inf * beta0)) * (1 / omega_a - 1 / upsilon_a)
        report["identity_residual"] = float(lhs - rhs)
        report["identity_exact"] = bool(lhs == rhs)
    else:
        report["identity_residual"] = None
        report["identity_exact"] = None

    scales = threshold_scales(inputs, u)
    X, Y, y = scales.X, scales.Y, scales.y
    he = _heff(u, omega_a)
    try:
        kappa_a_ps_u = he * (2 + 1 / beta_a) - pstar
    except ArithmeticError:
        kappa_a_ps_u = None

    # implication (a): negative generalized kappa with tau(p*) > 0
    prem_a = (kappa_a_ps_u is not None and kappa_a_ps_u <= 0
              and tau_ps > 0)
    try:
        concl_a = (z_a + omega_a / u) > 0
    except ArithmeticError:
        concl_a = True  # omega/u indeterminate only when both infinite
    report["implication_a"] = (bool(prem_a), bool(concl_a))

    # implication (b)
    prem_b = (tau_ps > 0) and (Y >= (1 + X) / y - 1 / u)
    try:
        concl_b = (z_a / omega_a - 1 + 2 / u) >= 0
    except ArithmeticError:
        concl_b = True
    report["implication_b"] = (bool(prem_b), bool(concl_b))

    # implication (c): existence of a feasible index s
    beta_1 = _beta_of(inputs, True)
    omega_1 = _omega_of(inputs, True)
    kappa1_ps_inf = _heff(INF, omega_1) * (2 + 1 / beta_1) - pstar \
        if not (omega_1.is_inf and pstar.is_inf) else None
    prem_c = (not pstar.is_inf and Y > 0 and (Y - (1 + X) / y) > 0
              and kappa1_ps_inf is not None and kappa1_ps_inf >= 0)
    witness = None
    if prem_c:
        lower = max(pstar, (1 + X) / Y)
        for bump in (Fraction(0), Fraction(1, 1024), Fraction(1, 64),
                     Fraction(1, 8), Fraction(1), Fraction(8)):
            s = lower + bump
            if s <= pstar or s < (1 + X) / Y:
                continue
            _, tau_s = kappa_tau(inputs, s)
            if tau_s > 0:
                witness = s
                break
    report["implication_c"] = (bool(prem_c),
                               witness is not None if prem_c else None)
    if witness is not None:
        report["implication_c_witness"] = float(witness)
    return report


# ---------------------------------------------------------------------------
# bias envelope and universal constants
# ---------------------------------------------------------------------------

def bias_envelope(inputs: RateInputs, h: BandwidthVec,
                  C1: Optional[Sequence[float]] = None,
                  spec: Optional[KernelSpec] = None) -> np.ndarray:
    """Per-coordinate bias budget C1_j L_j h_j^beta_j.  C1 defaults to
    the kernel moment int |K_ell(z)| |z|^beta_j dz."""
    if C1 is None:
        if spec is None:
            spec = KernelSpec()
        C1 = [kernel_l1_moment(spec, float(b)) for b in inputs.klass.beta]
    hv = h.h
    return np.array([c * L * hv[j] ** b
                     for j, (c, L, b) in enumerate(
                         zip(C1, inputs.klass.L, inputs.klass.beta))])


def universal_constant(spec: KernelSpec, d: int, c_kl: float = 1.0) -> float:
    """(20 d)^-1 [max(2 c_kl ||K_ell||_inf, ||K_ell||_1)]^-d with the
    free constant c_kl exposed as an input."""
    m = max(2.0 * c_kl * kernel_sup_norm(spec), kernel_l1_moment(spec, 0.0))
    return (20.0 * d) ** -1 * m ** -float(d)
