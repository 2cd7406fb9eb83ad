"""First- and second-moment kernels of the weighted assignment count.

Everything is returned in the log domain (nats). The pair kernel ``f`` is
written so that ``r * log f`` keeps full precision even when ``f`` is within
1e-18 of 1, which happens for k around 60 where ``r`` is of order 2^k.

Functions with a leading ``k, u0, alpha, gamma, eta`` signature broadcast
over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import comb, gammaln, logsumexp

from psatbounds.analytic import LN2, ProblemParams
from psatbounds.errors import DomainError, NumericalFailure
from psatbounds.tuning import TunedWeights


@dataclass(frozen=True)
class WeightPair:
    gamma: float
    eta: float

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise DomainError(f"0 < gamma <= 1 required (got {self.gamma})")
        if not (0.0 <= self.eta <= 1.0):
            raise DomainError(f"0 <= eta <= 1 required (got {self.eta})")


@dataclass(frozen=True)
class OverlapPoint:
    alpha: float
    weights: WeightPair

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha must lie in [0, 1] (got {self.alpha})")


@dataclass
class Schedule:
    """Piecewise-constant weights on an increasing alpha grid."""

    alpha: np.ndarray
    gamma: np.ndarray
    eta: np.ndarray
    floor: TunedWeights
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if np.any(np.diff(self.alpha) <= 0):
            raise DomainError("schedule grid must be strictly increasing")
        if np.any(self.gamma < self.floor.gamma0) or np.any(self.eta < self.floor.eta0):
            raise DomainError("schedule weights fall below the tuned floor")

    def at(self, alpha):
        """Weights of the nearest grid point (alpha below 1/2 is mirrored)."""
        a = np.asarray(alpha, dtype=float)
        a = np.where(a < 0.5, 1.0 - a, a)
        idx = np.clip(np.searchsorted(self.alpha, a), 1, len(self.alpha) - 1)
        left = self.alpha[idx - 1]
        right = self.alpha[idx]
        idx = np.where(a - left <= right - a, idx - 1, idx)
        idx = np.where(a < self.alpha[0], 0, idx)
        return self.gamma[idx], self.eta[idx]


def _log_eta_term(u0: float, eta):
    """-2 u0 ln eta with the 0 * ln 0 = 0 convention."""
    eta = np.asarray(eta, dtype=float)
    if u0 == 0.0:
        return np.zeros_like(eta)
    with np.errstate(divide="ignore"):
        return -2.0 * u0 * np.log(eta)


def _eps(gamma):
    gamma = np.asarray(gamma, dtype=float)
    return (1.0 - gamma) * (1.0 + gamma)


def clause_weight_Z(k: int, gamma, eta):
    """Expected clause weight E[gamma^H eta^U] for one uniform random clause."""
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return ((gamma + 1.0 / gamma) / 2.0) ** k - (2.0 * gamma) ** (-k) * (1.0 - eta)


def log_clause_weight_Z(k: int, gamma, eta):
    gamma = np.asarray(gamma, dtype=float)
    eta = np.asarray(eta, dtype=float)
    # (gamma + 1/gamma)/2 = 1 + (1 - gamma)^2 / (2 gamma)
    log_a = np.log1p((1.0 - gamma) ** 2 / (2.0 * gamma))
    ratio = np.exp(-k * (np.log(2.0 * gamma) + log_a))
    return k * log_a + np.log1p(-(1.0 - eta) * ratio)


def log_first_moment(n: int, params: ProblemParams, r: float, w: WeightPair) -> float:
    """log E[X] = n ln 2 + r n (ln Z - u0 ln eta)."""
    z = float(clause_weight_Z(params.k, w.gamma, w.eta))
    if not z > 0.0:
        raise DomainError(f"clause weight Z = {z} is not positive")
    if w.eta == 0.0 and params.u0 > 0.0:
        raise DomainError("eta = 0 requires u0 = 0")
    per_clause = float(log_clause_weight_Z(params.k, w.gamma, w.eta)) + 0.5 * float(
        _log_eta_term(params.u0, w.eta))
    return n * LN2 + r * n * per_clause


def _ratios(k, alpha, gamma):
    """Logs of A, B, C and their alpha-derivatives for the direct form of f."""
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    eps = _eps(gamma)
    g2 = gamma * gamma
    log_a = np.log1p(alpha * eps * eps / (2.0 * g2))
    log_b = np.log1p(alpha * eps / g2) - LN2
    with np.errstate(divide="ignore"):
        log_c = np.log(alpha) - np.log(g2) - LN2
    da = eps * eps / (2.0 * g2)
    db = eps / (2.0 * g2)
    dc = 1.0 / (2.0 * g2)
    return log_a, log_b, log_c, da, db, dc


def log_pair_weight_direct(k: int, u0: float, alpha, gamma, eta):
    """ln f(alpha, gamma, eta) from the three-term bracket."""
    eta = np.asarray(eta, dtype=float)
    log_a, log_b, log_c, *_ = _ratios(k, alpha, gamma)
    rb = np.exp(k * (log_b - log_a))
    rc = np.exp(k * (log_c - log_a))
    d = 2.0 * (1.0 - eta) * rb - (1.0 - eta) ** 2 * rc
    with np.errstate(divide="ignore", invalid="ignore"):
        return _log_eta_term(u0, eta) + k * log_a + np.log1p(-d)


def log_pair_weight_binomial(k: int, u0: float, alpha, gamma, eta):
    """ln f via the sum-of-squares expansion in x = alpha - 1/2.

    f = eta^-2u0 gamma^-2k sum_j C(k,j) (2x)^j t_j^2 with
    t_j = (eps/2)^j (1 - eps/2)^(k-j) - (1 - eta) 2^-k.
    """
    alpha, gamma, eta = np.broadcast_arrays(
        np.asarray(alpha, dtype=float), np.asarray(gamma, dtype=float),
        np.asarray(eta, dtype=float))
    eps = _eps(gamma)
    x2 = 2.0 * alpha - 1.0
    j = np.arange(k + 1).reshape((-1,) + (1,) * alpha.ndim)
    half = eps / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_head = k * np.log1p(-half)
        c0 = (1.0 - eta) * np.exp(-k * LN2 - log_head)
        # t_j / (1 - eps/2)^k
        tj_rel = np.where(j == 0, 1.0, (half / (1.0 - half)) ** j) - c0
        coef = comb(k, j.ravel()).reshape(j.shape)
        terms = coef * np.where(j == 0, 1.0, x2 ** j) * tj_rel ** 2
        tail = terms[1:].sum(axis=0)
        # t_0 / (1 - eps/2)^k = 1 - c0; log1p keeps precision when c0 is tiny
        stable = c0 < 1.0
        safe_t0_sq = np.where(stable, (1.0 - c0) ** 2, 1.0)
        log_sum = np.where(
            stable,
            2.0 * np.log1p(-np.where(stable, c0, 0.0)) + np.log1p(tail / safe_t0_sq),
            np.log(terms.sum(axis=0)),
        )
        return _log_eta_term(u0, eta) - k * np.log1p(-eps) + 2.0 * log_head + log_sum


def log_pair_weight(k: int, u0: float, alpha, gamma, eta):
    """ln f, choosing the binomial form for alpha >= 1/2 and the direct form below."""
    alpha = np.asarray(alpha, dtype=float)
    hi = log_pair_weight_binomial(k, u0, np.where(alpha >= 0.5, alpha, 0.5), gamma, eta)
    lo = log_pair_weight_direct(k, u0, np.where(alpha < 0.5, alpha, 0.5), gamma, eta)
    return np.where(alpha >= 0.5, hi, lo)


def pair_weight_f(k: int, u0: float, pt: OverlapPoint, mode: str = "auto") -> float:
    a, g, e = pt.alpha, pt.weights.gamma, pt.weights.eta
    if e == 0.0 and u0 > 0.0:
        raise DomainError("eta = 0 requires u0 = 0")
    if mode == "direct":
        v = log_pair_weight_direct(k, u0, a, g, e)
    elif mode == "binomial":
        v = log_pair_weight_binomial(k, u0, a, g, e)
    elif mode == "auto":
        v = log_pair_weight(k, u0, a, g, e)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return float(np.exp(v))


def entropy(alpha):
    """-a ln a - (1-a) ln(1-a), zero at the endpoints."""
    a = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ha = np.where(a > 0, -a * np.log(np.where(a > 0, a, 1.0)), 0.0)
        hb = np.where(a < 1, -(1 - a) * np.log(np.where(a < 1, 1 - a, 1.0)), 0.0)
    return ha + hb


def log_g(r: float, k: int, u0: float, alpha, gamma, eta):
    """ln g_r = r ln f + entropy(alpha)."""
    lf = log_pair_weight(k, u0, alpha, gamma, eta)
    if np.any(~np.isfinite(lf)):
        raise NumericalFailure("pair weight f is not positive and finite")
    return r * lf + entropy(alpha)


def log_f_derivatives(k: int, u0: float, alpha, gamma, eta, order: int = 1):
    """Derivatives of ln f in alpha at fixed weights, orders 1..``order``.

    Uses the direct form: every term is c * P(alpha)^k with P linear in alpha.
    """
    eta = np.asarray(eta, dtype=float)
    log_a, log_b, log_c, da, db, dc = _ratios(k, alpha, gamma)
    a = np.exp(log_a)
    falling = [1.0]
    for n in range(1, order + 1):
        falling.append(falling[-1] * (k - n + 1))
    coefs = (1.0, -2.0 * (1.0 - eta), (1.0 - eta) ** 2)
    logs = (log_a, log_b, log_c)
    slopes = (da, db, dc)
    moments = []
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for n in range(order + 1):
            tot = 0.0
            for c, lp, dp in zip(coefs, logs, slopes):
                if n > k:
                    continue
                power = np.where(np.isneginf(lp) & (k - n == 0), 1.0,
                                 np.exp((k - n) * (lp - log_a)))
                tot = tot + c * falling[n] * power * (dp / a) ** n
            moments.append(tot)
    m0 = moments[0]
    out = []
    l1 = moments[1] / m0
    out.append(l1)
    if order >= 2:
        m2 = moments[2] / m0
        out.append(m2 - l1 * l1)
    if order >= 3:
        m3 = moments[3] / m0
        out.append(m3 - 3.0 * l1 * m2 + 2.0 * l1 ** 3)
    return out


def entropy_derivatives(alpha, order: int = 1):
    a = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore"):
        out = [np.log1p(-a) - np.log(a)]
        if order >= 2:
            out.append(-1.0 / a - 1.0 / (1.0 - a))
        if order >= 3:
            out.append(1.0 / a**2 - 1.0 / (1.0 - a) ** 2)
    return out


def dlog_g_dalpha(r: float, k: int, u0: float, alpha, gamma, eta):
    """d/d alpha of ln g_r at fixed (gamma, eta); alpha must lie in (0, 1)."""
    a = np.asarray(alpha, dtype=float)
    if np.any((a <= 0.0) | (a >= 1.0)):
        raise DomainError("derivative is only defined for alpha in (0, 1)")
    (d1,) = log_f_derivatives(k, u0, a, gamma, eta, 1)
    return r * d1 + entropy_derivatives(a, 1)[0]


def log_g_derivatives(r: float, k: int, u0: float, alpha, gamma, eta, order: int = 3):
    lf = log_f_derivatives(k, u0, alpha, gamma, eta, order)
    he = entropy_derivatives(alpha, order)
    return [r * x + y for x, y in zip(lf, he)]


def normalized_f0(k: int, w: TunedWeights, alpha):
    """f0(alpha) = 2^2k gamma0^2k eta0^(2 u0) f(alpha, gamma0, eta0), as a polynomial in x."""
    x = np.asarray(alpha, dtype=float) - 0.5
    e = w.eps0
    return ((2 * x * e * e + (2 - e) ** 2) ** k
            - 2 * e * (2 - e) ** (k - 1) * (2 - e + 2 * x * e) ** k
            + e * e * (2 - e) ** (2 * k - 2) * (1 + 2 * x) ** k)


def inner_interval(k: int) -> tuple[float, float]:
    half_width = 3.0 * math.log(k) / k
    return half_width, 1.0 - half_width


def capital_G(r: float, alpha, params: ProblemParams, tuned: TunedWeights):
    """ln G_r: tuned weights on the inner interval, their square roots outside."""
    k = params.k
    lo, hi = inner_interval(k)
    if lo >= 0.5:
        raise DomainError(f"G_r interval empty for k={k} (needs k >= 17)")
    a = np.asarray(alpha, dtype=float)
    inner = (a >= lo) & (a <= hi)
    sg, se = tuned.sqrt_weights
    gamma = np.where(inner, tuned.gamma0, sg)
    eta = np.where(inner, tuned.eta0, se)
    return log_g(r, k, params.u0, a, gamma, eta)


def log_binomial(n: int, z):
    z = np.asarray(z, dtype=float)
    return gammaln(n + 1.0) - gammaln(z + 1.0) - gammaln(n - z + 1.0)


WeightSpec = "tuple[float, float] | Callable[[np.ndarray], tuple] | Schedule"


def _weights_for(weights, z: np.ndarray, n: int):
    if isinstance(weights, Schedule):
        return weights.at(z / n)
    if callable(weights):
        return weights(z)
    if isinstance(weights, WeightPair):
        return weights.gamma, weights.eta
    g, e = weights
    return g, e


def log_second_moment_sum(n: int, m: int, k: int, u0: float, weights,
                          floor: TunedWeights | None = None) -> float:
    """ln[2^n sum_z C(n,z) f(z/n, gamma(z), eta(z))^m].

    ``weights`` is a constant ``(gamma, eta)`` pair, a :class:`WeightPair`,
    a :class:`Schedule`, or a callable mapping the overlap array ``z`` to
    ``(gamma, eta)`` arrays.
    """
    z = np.arange(n + 1, dtype=float)
    gamma, eta = _weights_for(weights, z, n)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), z.shape)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), z.shape)
    if floor is not None and (np.any(gamma < floor.gamma0) or np.any(eta < floor.eta0)):
        raise DomainError("weights fall below the tuned floor")
    lf = log_pair_weight(k, u0, z / n, gamma, eta)
    if np.any(~np.isfinite(lf)):
        bad = int(np.flatnonzero(~np.isfinite(lf))[0])
        raise NumericalFailure(f"f(z/n) is not positive at z={bad}")
    terms = log_binomial(n, z) + (m * lf if m else 0.0)
    return float(n * LN2 + logsumexp(terms))


def pair_enumeration_f(k: int, n: int, z: int, u0: float, gamma: float, eta: float) -> float:
    """Exact per-clause pair weight by enumerating all (2n)^k clauses.

    sigma is all-true; tau agrees with sigma on the first ``z`` variables.
    Oracle for the closed form of f; cost (2n)^k.
    """
    tau = np.ones(n, dtype=bool)
    tau[z:] = False
    # literal l = 2v + s: variable v, positive when s == 0
    lit_var = np.repeat(np.arange(n), 2)
    lit_pos = np.tile([True, False], n)
    idx = np.indices((2 * n,) * k).reshape(k, -1)
    var, pos = lit_var[idx], lit_pos[idx]
    sat_s = pos  # sigma sets every variable true
    sat_t = tau[var] == pos
    hs = 2 * sat_s.sum(axis=0) - k
    ht = 2 * sat_t.sum(axis=0) - k
    w = gamma ** (hs + ht).astype(float)
    w = w * np.where(sat_s.any(axis=0), 1.0, eta) * np.where(sat_t.any(axis=0), 1.0, eta)
    total = float(w.mean())
    return total * (eta ** (-2.0 * u0) if u0 else 1.0)


def binomial_clause_Z(k: int, gamma: float, eta: float) -> float:
    """Brute-force E[gamma^H eta^U]: j false literals ~ Binomial(k, 1/2)."""
    total = 0.0
    for j in range(k + 1):
        total += comb(k, j, exact=True) * 2.0 ** -k * gamma ** (k - 2 * j) * (eta if j == k else 1.0)
    return total
