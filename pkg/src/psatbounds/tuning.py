"""Weight tuning: the (gamma0, eta0) pair that centres the tilted clause law.

With eps0 = 1 - gamma0^2 the two tuning equations reduce to the scalar
equation ``psi(eps0) = 1 - q / 2^(k-1)`` where
``psi(t) = sum_{j=1}^{k-1} (2 - t)^-j`` is increasing on [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from psatbounds.analytic import ProblemParams
from psatbounds.errors import DegenerateTuning, DomainError


def psi_eval(k: int, t: float) -> float:
    if k < 2:
        raise DomainError("k >= 2 required")
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"0 <= t <= 1 required (got t={t})")
    if t == 1.0:
        return float(k - 1)
    # (b^(k-1) - 1) / ((1 - t) b^(k-1)) with b = 2 - t, written to avoid
    # cancellation as t -> 1
    s = 1.0 - t
    log_b = math.log1p(s)
    return math.expm1((k - 1) * log_b) / s * math.exp(-(k - 1) * log_b)


def _scaled_gap(k: int, q: float, t: float) -> float:
    """(1 - t) 2^(k-1) (psi(t) - target), accurate when t is tiny.

    Same sign as psi(t) - target on [0, 1).
    """
    w_minus_1 = math.expm1(-(k - 1) * math.log1p(-t / 2.0))
    return t * (math.ldexp(1.0, k - 1) - q) - w_minus_1 - (1.0 - q)


def psi_residual(k: int, q: float, t: float) -> float:
    """psi(t) - (1 - q/2^(k-1)), evaluated without cancellation."""
    if t >= 1.0:
        return (k - 1) - (1.0 - math.ldexp(q, -(k - 1)))
    return math.ldexp(_scaled_gap(k, q, t), -(k - 1)) / (1.0 - t)


def solve_epsilon0(k: int, q: float) -> float:
    """Root of psi(eps) = 1 - q/2^(k-1) on [0, 1] by bisection.

    Returns 1.0 exactly for the degenerate (k=2, q=0) case; callers decide
    whether to accept it.
    """
    if not (0.0 <= q <= 1.0):
        raise DomainError(f"0 <= q <= 1 required (got q={q})")
    # psi(0) = 1 - 2^-(k-1) <= target holds for every q <= 1
    target = 1.0 - math.ldexp(q, -(k - 1))
    if target > k - 1:
        raise DomainError(f"target {target} above psi(1) = {k - 1}")
    if q == 1.0:
        return 0.0
    if psi_residual(k, q, 1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    # the gap is negative at lo and positive just below hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _scaled_gap(k, q, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return lo if abs(_scaled_gap(k, q, lo)) <= abs(_scaled_gap(k, q, hi)) else hi


@dataclass(frozen=True)
class TunedWeights:
    k: int
    u0: float
    eps0: float
    gamma0: float
    eta0: float
    residual1: float
    residual2: float

    @property
    def sqrt_weights(self) -> tuple[float, float]:
        return math.sqrt(self.gamma0), math.sqrt(self.eta0)


def tuning_residuals(k: int, u0: float, gamma0: float, eta0: float,
                     eps0: float | None = None) -> tuple[float, float]:
    g2 = gamma0 * gamma0 if eps0 is None else 1.0 - eps0
    e = 1.0 - g2 if eps0 is None else eps0
    r1 = abs((1.0 - eta0) - e * (1.0 + g2) ** (k - 1))
    r2 = abs(u0 - eta0 / ((1.0 + g2) ** k - (1.0 - eta0)))
    return r1, r2


def tuned_weights(params: ProblemParams) -> TunedWeights:
    """Solve the tuning equations for (gamma0, eta0)."""
    k, q = params.k, params.q
    eps0 = solve_epsilon0(k, q)
    if eps0 >= 1.0:
        raise DegenerateTuning(
            f"gamma0 = 0 for (k={k}, p={params.p}); the (k=2, p=1) case is excluded"
        )
    gamma0 = math.sqrt(1.0 - eps0)
    # 1 - eps (2 - eps)^(k-1) = 1 - (1 - q)(...); keep the product form
    eta0 = 1.0 - eps0 * (2.0 - eps0) ** (k - 1)
    if eta0 < 0.0:
        eta0 = 0.0
    r1, r2 = tuning_residuals(k, params.u0, gamma0, eta0, eps0)
    return TunedWeights(k, params.u0, eps0, gamma0, eta0, r1, r2)


@dataclass(frozen=True)
class TiltedClauseLaw:
    """Tilted probability that a clause has exactly j of its k literals false."""

    probs: np.ndarray

    def __post_init__(self):
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValueError("tilted law is not a probability vector")


def tilted_law(k: int, gamma: float, eta: float) -> TiltedClauseLaw:
    j = np.arange(k + 1)
    # log weights avoid overflow of gamma^-k at large k
    logw = np.log(comb(k, j)) - k * math.log(2.0) + (k - 2 * j) * math.log(gamma)
    w = np.exp(logw - logw.max())
    w[k] *= eta
    return TiltedClauseLaw(w / w.sum())


def tilted_clause_moments(params: ProblemParams, w: TunedWeights):
    """Mean of H and of U for one clause under the tilted law.

    Returns ``(mean_h, mean_u, law, closed_form)`` where ``closed_form`` holds
    the same two means from the closed-form expressions, for cross-checking.
    """
    k = params.k
    law = tilted_law(k, w.gamma0, w.eta0)
    j = np.arange(k + 1)
    mean_h = float(np.dot(law.probs, k - 2 * j))
    mean_u = float(law.probs[k])

    g, eta = w.gamma0, w.eta0
    z = ((g + 1 / g) / 2) ** k - (2 * g) ** (-k) * (1 - eta)
    zh = k * (g - 1 / g) / 2 * ((g + 1 / g) / 2) ** (k - 1) + k * (2 * g) ** (-k) * (1 - eta)
    zu = (2 * g) ** (-k) * eta
    return mean_h, mean_u, law, (zh / z, zu / z)
