"""Closed-form density bounds for p-satisfiability of random k-CNF.

All logarithms are natural. Densities are clauses per variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from psatbounds.errors import DomainError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Clause width ``k`` and satisfiability margin ``p``.

    ``q`` and ``u0`` are derived on access so they can never drift from ``p``.
    """

    k: int
    p: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise DomainError(f"k >= 2 required (got k={self.k})")
        if not (0.0 < self.p <= 1.0):
            raise DomainError(f"0 < p <= 1 required (got p={self.p})")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def from_q(cls, k: int, q: float) -> "ProblemParams":
        if not (0.0 <= q < 1.0):
            raise DomainError(f"0 <= q < 1 required (got q={q})")
        return cls(k, 1.0 - q)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def u0(self) -> float:
        """Target fraction of unsatisfied clauses, (1 - p) 2^-k."""
        return math.ldexp(self.q, -self.k)


def xlogx(x: float) -> float:
    return 0.0 if x == 0.0 else x * math.log(x)


def threshold_T(params: ProblemParams) -> float:
    """First-moment density scale 2^k ln2 / (p + (1-p) ln(1-p))."""
    k, p = params.k, params.p
    if p == 1.0:
        return math.ldexp(LN2, k)
    q = params.q
    denom = p + q * math.log1p(-p)
    return math.ldexp(LN2, k) / denom


def lemma2_upper(params: ProblemParams) -> float:
    """Sharper first-moment bound obtained with the optimal clause weight.

    Always at most :func:`threshold_T` (by ln t <= t - 1).
    """
    k, q = params.k, params.q
    two_k = math.ldexp(1.0, k)
    # ln((2^k - 1)/(2^k - q)) = log1p((q - 1)/(2^k - q))
    denom = xlogx(q) - (two_k - q) * math.log1p((q - 1.0) / (two_k - q))
    return math.ldexp(LN2, k) / denom


def phi_rate(q: float) -> float:
    """(1 - sqrt q)^2 / (1 - q + q ln q); equals 1 at q=0 and tends to 1/2 as q -> 1."""
    if not (0.0 <= q < 1.0):
        raise DomainError(f"0 <= q < 1 required (got q={q})")
    return (1.0 - math.sqrt(q)) ** 2 / (1.0 - q + xlogx(q))


def delta_rate(params: ProblemParams) -> tuple[float, float]:
    """Return ``(phi, delta)`` with delta = 20 k 2^(-k phi)."""
    if params.q >= 1.0:
        raise DomainError("q = 1 is excluded (rate denominator vanishes)")
    phi = phi_rate(params.q)
    return phi, 20.0 * params.k * 2.0 ** (-params.k * phi)


@dataclass(frozen=True)
class LowerTarget:
    value: float
    delta: float

    @property
    def vacuous(self) -> bool:
        return self.delta >= 1.0

    def __float__(self) -> float:
        return self.value


def t_lower(params: ProblemParams) -> LowerTarget:
    """Asymptotic lower-bound target T_k(p) (1 - delta).

    The result is flagged ``vacuous`` when delta >= 1, where the raw formula
    would give a nonpositive density.
    """
    _, delta = delta_rate(params)
    value = threshold_T(params) * (1.0 - delta)
    return LowerTarget(value=value if delta < 1.0 else math.nan, delta=delta)


def cghs_bounds(params: ProblemParams) -> tuple[float, float]:
    """Leading-order small-p bounds of Coppersmith, Gamarnik, Hajiaghayi and Sorkin.

    The lower bound omits its unspecified -O(1/p) correction.
    """
    k, p = params.k, params.p
    if p >= 1.0:
        raise DomainError("cghs bounds are stated for p < 1")
    lower = k * math.ldexp(1.0, k + 2) / (math.pi * (k + 1) ** 2) / p**2
    upper = 2.0 * (math.ldexp(1.0, k) - 1.0) * LN2 / p**2
    return lower, upper


@dataclass(frozen=True)
class DensityBounds:
    t_big: float
    upper: float
    t_small: float  # nan when vacuous
    delta: float
    cghs_lower: float  # nan at p = 1
    cghs_upper: float

    @property
    def vacuous(self) -> bool:
        return not self.delta < 1.0


def density_bounds(params: ProblemParams) -> DensityBounds:
    t_big = threshold_T(params)
    upper = lemma2_upper(params)
    if params.q < 1.0:
        lt = t_lower(params)
        t_small, delta = lt.value, lt.delta
    else:
        t_small, delta = math.nan, math.inf
    if params.p < 1.0:
        lo, hi = cghs_bounds(params)
    else:
        lo, hi = math.nan, math.nan
    return DensityBounds(t_big, upper, t_small, delta, lo, hi)
