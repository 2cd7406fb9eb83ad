"""Self-check suites run by ``psatbounds verify``.

Each check returns a :class:`Check`; a suite passes iff all its checks pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from psatbounds.analytic import ProblemParams
from psatbounds.moments import (
    WeightPair,
    OverlapPoint, binomial_clause_Z, clause_weight_Z, log_clause_weight_Z,
    log_pair_weight_binomial, log_pair_weight_direct, normalized_f0, pair_enumeration_f,
    pair_weight_f,
)
from psatbounds.tuning import tilted_clause_moments, tuned_weights

SUITES = ("oracles", "identities", "appendix")


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    tol: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name}: worst={self.worst:.3e} tol={self.tol:.1e}"


def _check(name, errs, tol) -> Check:
    worst = float(np.max(errs)) if len(errs) else 0.0
    return Check(name, bool(worst <= tol), worst, tol)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def clause_enumeration(seed: int = 1, draws: int = 20, n: int = 6) -> list[Check]:
    rng = np.random.default_rng(seed)
    z_err, f_err = [], []
    for k in (2, 3, 4):
        for _ in range(draws):
            g, e = rng.uniform(0.05, 1.0), rng.uniform(0.0, 1.0)
            z_err.append(_rel(float(clause_weight_Z(k, g, e)), binomial_clause_Z(k, g, e)))
        u0 = 0.5 * 2.0**-k
        for z in range(n + 1):
            g, e = rng.uniform(0.2, 1.0), rng.uniform(0.05, 1.0)
            ref = pair_enumeration_f(k, n, z, u0, g, e)
            got = pair_weight_f(k, u0, OverlapPoint(z / n, WeightPair(g, e)))
            f_err.append(_rel(got, ref))
    return [_check("clause weight Z vs Binomial(k,1/2) average", z_err, 1e-12),
            _check("pair weight f vs all (2n)^k clause pairs", f_err, 1e-12)]


def tuning_identities(ks=range(3, 31), ps=None) -> list[Check]:
    ps = np.round(np.arange(0.1, 1.0001, 0.1), 10) if ps is None else ps
    res, cen = [], []
    for k in ks:
        for p in ps:
            if k == 2 and p == 1.0:
                continue
            params = ProblemParams(int(k), float(p))
            w = tuned_weights(params)
            res.extend([w.residual1, w.residual2])
            mean_h, mean_u, _, _ = tilted_clause_moments(params, w)
            cen.extend([abs(mean_h), abs(mean_u - params.u0)])
    return [_check("tuning equations residuals", res, 1e-10),
            _check("tilted clause law centred at (0, u0)", cen, 1e-10)]


def appendix_identities(seed: int = 2, grid: int = 1000) -> list[Check]:
    rng = np.random.default_rng(seed)
    dual, f0h, fh, dom = [], [], [], []
    x = np.arange(1, grid + 1) / (2.0 * grid)
    for k in range(2, 13):
        for p in (0.1, 0.5, 0.9, 1.0):
            if k == 2 and p == 1.0:
                continue
            params = ProblemParams(k, p)
            w = tuned_weights(params)
            e = w.eps0
            f0h.append(_rel(float(normalized_f0(k, w, 0.5)),
                            4 * (1 - e) ** 2 * (2 - e) ** (2 * k - 2)))
            lz = float(log_clause_weight_Z(k, w.gamma0, w.eta0))
            if params.u0 > 0:
                lz -= params.u0 * math.log(w.eta0)
            lf = float(log_pair_weight_direct(k, params.u0, 0.5, w.gamma0, w.eta0))
            fh.append(_rel(math.exp(lf), math.exp(2 * lz)))
        u0 = 0.5 * 2.0**-k
        # binomial form is only well conditioned for moderate gamma below 1/2
        a_hi = rng.uniform(0.5, 1.0, 50)
        g_hi = rng.uniform(0.05, 1.0, 50)
        a_lo = rng.uniform(0.0, 0.5, 50)
        g_lo = rng.uniform(0.5, 1.0, 50)
        for a, g in ((a_hi, g_hi), (a_lo, g_lo)):
            eta = rng.uniform(0.01, 1.0, a.size)
            d = np.exp(log_pair_weight_direct(k, u0, a, g, eta))
            b = np.exp(log_pair_weight_binomial(k, u0, a, g, eta))
            dual.extend(np.abs(d - b) / d)
        g, eta = rng.uniform(0.05, 1.0), rng.uniform(0.01, 1.0)
        up = log_pair_weight_direct(k, u0, 0.5 + x, g, eta)
        dn = log_pair_weight_direct(k, u0, 0.5 - x, g, eta)
        dom.append(float(np.max(dn - up)))
    y = np.linspace(0.0, 1.0, 10001)
    h = 1 - y + np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)), 0.0)
    a3 = np.maximum((1 - y) ** 2 / 2 - h, h - (1 - y) ** 2)
    return [_check("direct vs binomial pair weight", dual, 1e-10),
            _check("f0(1/2) closed form", f0h, 1e-10),
            _check("f(1/2) equals (eta^-u0 Z)^2", fh, 1e-10),
            # strict dominance: worst log difference must be negative
            Check("f(1/2+x) > f(1/2-x) on grid", bool(max(dom) < 0), max(dom), 0.0),
            Check("(1-y)^2/2 <= 1-y+y ln y <= (1-y)^2", bool(a3.max() <= 1e-15),
                  float(a3.max()), 1e-15)]


def run_suite(name: str) -> list[Check]:
    if name == "oracles":
        return clause_enumeration()
    if name == "identities":
        return tuning_identities()
    if name == "appendix":
        return appendix_identities()
    if name == "all":
        return [c for s in SUITES for c in run_suite(s)]
    raise ValueError(f"unknown suite {name!r}")
