"""Randomized sweep over the exponent algebra.

The oracle below re-derives every quantity from the raw displays using
plain Fractions (None standing for +infinity), independently of the
library's extended-real type, and the suite demands exact agreement on
1000 seeded draws plus the structural implications.
"""
import math
import random
from fractions import Fraction

import pytest

from deconvdens.model import ClassParams
from deconvdens.rates import (RateInputs, classify_and_rate, kappa_tau,
                              lemma_identities)
from deconvdens.xreal import INF

N_DRAWS = 1000


# --- plain-Fraction oracle (None == +inf) ----------------------------------

def _inv(x):
    if x is None:
        return Fraction(0)
    return 1 / x


def _agg(betas, rs, mus):
    inv_b = sum((2 * m + 1) / b for m, b in zip(mus, betas))
    beta = 1 / inv_b
    inv_w = sum((2 * m + 1) / (b * r)
                for m, b, r in zip(mus, betas, rs) if r is not None)
    omega = None if inv_w == 0 else 1 / inv_w
    return beta, omega


def _oracle(betas, rs, p, mus, alpha):
    zero = [Fraction(0)] * len(betas)
    mu_a = mus if alpha == 1 else zero
    beta_a, omega_a = _agg(betas, rs, mu_a)
    beta0, omega0 = _agg(betas, rs, zero)

    def kappa(s):
        if omega_a is None and s is None:
            return None  # genuinely indeterminate
        if omega_a is None:
            return None  # +inf; only sign matters and it is positive
        if s is None:
            return "neg-inf"
        return omega_a * (2 + 1 / beta_a) - s

    def tau(s):
        return 1 - _inv(omega0) + _inv(None if s is None else s * beta0)

    p_star_inf = any(r is None for r in rs)
    p_star = None if p_star_inf else max([p] + [r for r in rs])

    # kappa(p) - p omega, with inf * 0 treated as exactly 0
    gap = 2 + 1 / beta_a - p
    if omega_a is None:
        diff = None if gap > 0 else ("neg-inf" if gap < 0 else -p)
        diff_sign = 1 if gap > 0 else (-1 if gap < 0 or p > 0 else 0)
    else:
        d = omega_a * gap - p
        diff_sign = (d > 0) - (d < 0)

    kp = kappa(p)
    tail = (1 - 1 / p) / (1 - _inv(omega_a) + 1 / beta_a)
    dense = beta_a / (2 * beta_a + 1)

    if diff_sign > 0:
        zone, varrho = "tail", tail
    elif diff_sign == 0 or (kp is None or kp > 0):
        zone = "dense" if (diff_sign == 0 or kp is None or kp > 0) else "?"
        zone = "dense"
        varrho = dense
    elif kp == 0:
        zone, varrho = "boundary-kappa-zero", dense
    elif tau(p_star) > 0:
        zone = "sparse1"
        z = (None if omega_a is None else
             omega_a * (2 + 1 / beta_a) * beta0 * tau(None) + 1)
        varrho = tau(p) * beta0 / (_inv(omega_a) * 0 + z / omega_a) \
            if omega_a is not None else tau(p) * beta0 / (beta0 * tau(None))
    else:
        zone = "sparse2"
        if p_star is None:
            varrho = (omega_a if omega_a is not None else None)
            varrho = None if varrho is None else varrho / p
        else:
            varrho = omega_a * (1 - p_star / p) / kappa(p_star)

    max_r_fin = [r for r in rs if r is not None]
    max_r_inf = len(max_r_fin) < len(rs)
    incons = ((kp is not None and kp <= 0) and tau(p) <= 0
              and not max_r_inf and max(max_r_fin) <= p)
    return zone, varrho, not incons


def _draw(rng):
    # all parameters dyadic rationals: exactly representable as floats,
    # so the library and the oracle see identical numbers
    d = rng.choice([1, 1, 1, 2])
    betas = [Fraction(rng.randint(1, 16), rng.choice([1, 2, 4]))
             for _ in range(d)]
    rs = [None if rng.random() < 0.2
          else Fraction(rng.randint(1, 8)) for _ in range(d)]
    p = Fraction(rng.randint(5, 32), 4)
    mus = [Fraction(rng.randint(1, 6), 2) for _ in range(d)]
    alpha = rng.choice([0.0, 0.3, 1.0])
    return betas, rs, p, mus, alpha


def _to_inputs(betas, rs, p, mus, alpha):
    klass = ClassParams(
        beta=tuple(float(b) for b in betas),
        r=tuple(math.inf if r is None else float(r) for r in rs),
        L=(1.0,) * len(betas), p=float(p))
    return RateInputs(klass=klass, alpha=alpha,
                      mu=tuple(float(m) for m in mus), n=1024)


def test_oracle_agreement_1000_draws():
    rng = random.Random(20240817)
    checked = 0
    for _ in range(N_DRAWS):
        betas, rs, p, mus, alpha = _draw(rng)
        zone_o, varrho_o, consistent_o = _oracle(betas, rs, p, mus, alpha)
        rep = classify_and_rate(_to_inputs(betas, rs, p, mus, alpha))
        assert rep.zone == zone_o, (betas, rs, p, mus, alpha)
        assert rep.consistent == consistent_o
        if varrho_o is not None and not rep.varrho.is_inf:
            assert rep.varrho.frac == varrho_o, (betas, rs, p, mus, alpha)
            checked += 1
    assert checked > N_DRAWS // 2


def test_boundary_continuity_identity():
    # at kappa(p) = p omega the tail and dense expressions coincide
    # exactly; construct boundary draws by solving for p
    rng = random.Random(7)
    hits = 0
    for _ in range(300):
        betas, rs, _, mus, alpha = _draw(rng)
        inp0 = _to_inputs(betas, rs, Fraction(2), mus, alpha)
        from deconvdens.rates import _beta_of, _omega_of, _tail_expr, _dense_expr
        beta_a = _beta_of(inp0, alpha == 1.0)
        omega_a = _omega_of(inp0, alpha == 1.0)
        if omega_a.is_inf:
            continue
        p_boundary = omega_a * (2 + 1 / beta_a) / (1 + omega_a)
        if p_boundary <= 1:
            continue
        pb = p_boundary.frac
        if Fraction(float(pb)) != pb:
            continue  # not exactly representable as a float
        inp = _to_inputs(betas, rs, pb, mus, alpha)
        assert (_tail_expr(inp) - _dense_expr(inp)).frac == 0
        rep = classify_and_rate(inp)
        assert rep.zone == "dense"
        hits += 1
    assert hits > 25  # most boundary p values are non-dyadic and skipped


def test_lemma_identity_residuals():
    rng = random.Random(99)
    defined = 0
    for _ in range(N_DRAWS):
        betas, rs, p, mus, alpha = _draw(rng)
        inp = _to_inputs(betas, rs, p, mus, alpha)
        rep = lemma_identities(inp, u=float(Fraction(rng.randint(4, 32), 4)))
        if rep["identity_residual"] is not None:
            assert abs(rep["identity_residual"]) <= 1e-10
            assert rep["identity_exact"]
            defined += 1
        for key in ("implication_a", "implication_b", "implication_c"):
            prem, concl = rep[key]
            if prem:
                assert concl, (key, betas, rs, p, mus, alpha)
    assert defined > N_DRAWS // 4


def test_rho_equals_varrho_when_tau_inf_positive():
    rng = random.Random(1234)
    for _ in range(N_DRAWS):
        betas, rs, p, mus, alpha = _draw(rng)
        inp = _to_inputs(betas, rs, p, mus, alpha)
        _, tau_inf = kappa_tau(inp, INF)
        rep = classify_and_rate(inp)
        if tau_inf > 0:
            assert rep.rho == rep.varrho
