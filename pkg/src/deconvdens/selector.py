"""Pointwise bandwidth selection.

For each evaluation point x the rule compares every pair of grid
bandwidths through

    R_hat_h(x) = sup_eta [ |f_hat_{h v eta} - f_hat_eta|
                           - 4 U_n(x, h v eta) - 4 U_n(x, eta) ]_+

and picks h_hat(x) minimizing R_hat_h(x) + 8 U*_n(x,h), where
U*_n(x,h) is the envelope sup over eta >= h.  Ties go to the
lexicographically smallest exponent vector so that runs are exactly
reproducible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .estimator import (EnvelopeParams, estimate_at, estimate_batch_1d,
                        envelope_U_from_sigma, m_infinity)
from .kernels import KernelSpec
from .model import BandwidthVec, GridSpec, NoiseSpec, Sample, bandwidth_join, enumerate_grid
from .operator import get_table

__all__ = [
    "SelectionTrace",
    "r_hat",
    "u_star",
    "select",
    "estimate_curve",
    "write_traces",
]

Key = tuple[int, ...]


@dataclass
class SelectionTrace:
    x: tuple[float, ...]
    records: dict[Key, dict]  # per-h: f_hat, U, R_hat, U_star, objective
    chosen: BandwidthVec
    value: float
    at_boundary: bool = False

    def to_json_obj(self) -> dict:
        return {
            "x": list(self.x),
            "chosen": list(self.chosen.exponents),
            "value": self.value,
            "at_boundary": self.at_boundary,
            "records": {
                ",".join(map(str, k)): v for k, v in self.records.items()
            },
        }


def _as_key(h: BandwidthVec) -> Key:
    return h.exponents


def r_hat(x, h: BandwidthVec, grid: Sequence[BandwidthVec],
          estimates: Mapping[Key, float],
          envelopes: Mapping[Key, float]) -> float:
    """The sup over eta of the clamped pairwise comparison."""
    best = 0.0
    for eta in grid:
        join = bandwidth_join(h, eta)
        jk, ek = _as_key(join), _as_key(eta)
        if jk not in estimates or jk not in envelopes:
            raise KeyError("grid not join-closed: missing element "
                           f"{jk} = join({h.exponents}, {eta.exponents})")
        term = abs(estimates[jk] - estimates[ek]) \
            - 4.0 * envelopes[jk] - 4.0 * envelopes[ek]
        if term > best:
            best = term
    return best


def u_star(x, h: BandwidthVec, grid: Sequence[BandwidthVec],
           envelopes: Mapping[Key, float]) -> float:
    """sup of the envelope over grid elements eta >= h (h included)."""
    return max(envelopes[_as_key(eta)] for eta in grid if eta.dominates(h))


def select(x, grid: Sequence[BandwidthVec],
           estimates: Mapping[Key, float],
           envelopes: Mapping[Key, float]) -> SelectionTrace:
    """Evaluate the rule over the whole grid and pick the minimizer."""
    records: dict[Key, dict] = {}
    best_key: Optional[Key] = None
    best_obj = math.inf
    for h in sorted(grid):
        rk = r_hat(x, h, grid, estimates, envelopes)
        us = u_star(x, h, grid, envelopes)
        obj = rk + 8.0 * us
        k = _as_key(h)
        records[k] = {
            "f_hat": estimates[k],
            "U": envelopes[k],
            "R_hat": rk,
            "U_star": us,
            "objective": obj,
        }
        if obj < best_obj:  # strict: first (lex smallest) wins ties
            best_obj = obj
            best_key = k
    chosen = BandwidthVec(best_key)
    exps = [h.exponents for h in grid]
    lo = tuple(min(e[j] for e in exps) for j in range(chosen.d))
    hi = tuple(max(e[j] for e in exps) for j in range(chosen.d))
    boundary = any(c == a or c == b
                   for c, a, b in zip(best_key, lo, hi))
    xt = tuple(np.atleast_1d(np.asarray(x, dtype=float)).tolist())
    return SelectionTrace(x=xt, records=records, chosen=chosen,
                          value=estimates[best_key], at_boundary=boundary)


def estimate_curve(sample: Sample, grid_spec: GridSpec,
                   x_points: np.ndarray, spec: KernelSpec,
                   noise: NoiseSpec, p: float,
                   collect_traces: bool = False):
    """Batch driver: kernel tables -> per-(x,h) estimates and envelopes
    -> selection at every evaluation point.

    Returns (values, traces); traces is None unless requested.
    """
    xs = np.atleast_2d(np.asarray(x_points, dtype=float))
    if xs.shape[1] != sample.d:
        raise ValueError("evaluation points do not match sample dimension")
    grid = enumerate_grid(grid_spec, sample.d)
    env = EnvelopeParams(
        m_inf=m_infinity(spec, noise, sample.d),
        p=p, mu_alpha=noise.mu_alpha, n=float(sample.n),
    )
    tables = {_as_key(h): get_table(spec, noise, h) for h in grid}

    nx = xs.shape[0]
    f_all = np.empty((len(grid), nx))
    u_all = np.empty((len(grid), nx))
    for i, h in enumerate(grid):
        tab = tables[_as_key(h)]
        if sample.d == 1:
            f_row, s2_row = estimate_batch_1d(tab, sample.points[:, 0],
                                              xs[:, 0])
        else:
            pairs = [estimate_at(tab, sample, xs[j]) for j in range(nx)]
            f_row = np.array([a for a, _ in pairs])
            s2_row = np.array([b for _, b in pairs])
        f_all[i] = f_row
        u_all[i] = [envelope_U_from_sigma(env, s2, h) for s2 in s2_row]

    values = np.empty(nx)
    traces = [] if collect_traces else None
    for j in range(nx):
        estimates = {_as_key(h): f_all[i, j] for i, h in enumerate(grid)}
        envelopes = {_as_key(h): u_all[i, j] for i, h in enumerate(grid)}
        tr = select(xs[j], grid, estimates, envelopes)
        values[j] = tr.value
        if collect_traces:
            traces.append(tr)
    return values, traces


def write_traces(traces: Sequence[SelectionTrace], path) -> None:
    """JSON lines, one object per evaluation point."""
    with open(path, "w") as fh:
        for tr in traces:
            fh.write(json.dumps(tr.to_json_obj()) + "\n")
