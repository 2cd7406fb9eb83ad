"""Grid certification of the dominance condition and the resulting density bounds.

For a density ``r`` the second-moment argument goes through when
``ln g_r(1/2, gamma0, eta0)`` strictly exceeds ``ln g_r(alpha, gamma, eta)``
for every ``alpha != 1/2`` under some weight schedule with
``gamma >= gamma0`` and ``eta >= eta0``.  Overlaps below 1/2 are handled by
mirroring the schedule, since f(1/2 + x) > f(1/2 - x) for any fixed weights.

The check is numerical, not interval-arithmetic:

* near 1/2 the schedule is frozen at (gamma0, eta0) and a second-order Taylor
  bound with a sampled third-derivative bound covers ``[1/2, 1/2 + x_c]``;
* elsewhere each grid point must beat the target by ``room`` plus a coverage
  term, a sampled derivative bound (times a safety factor) over its cell.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from psatbounds.analytic import (LN2, ProblemParams, cghs_bounds, density_bounds,
                                 lemma2_upper, threshold_T)
from psatbounds.errors import DegenerateTuning, DomainError
from psatbounds.moments import (capital_G, entropy, inner_interval, log_f_derivatives,
                                log_g, log_g_derivatives, log_pair_weight)
from psatbounds.tuning import TunedWeights, tuned_weights

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
CURVATURE_STEP = 1e-3


@dataclass(frozen=True)
class CertifyConfig:
    grid_points: int = 10000
    room: float = 1e-4
    deriv_safety: float = 2.0
    refine_factor: int = 10
    r_tolerance: float = 1e-4
    window_A: float = 3.0
    sweeps: int = 3
    line_tol: float = 1e-6
    max_sweeps: int = 50
    sweep_tol: float = 1e-13

    def __post_init__(self):
        if self.grid_points < 100:
            raise DomainError("grid_points >= 100 required")
        for name in ("room", "deriv_safety", "r_tolerance", "window_A", "line_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.refine_factor < 1 or self.sweeps < 1:
            raise DomainError("refine_factor and sweeps must be >= 1")
        if self.max_sweeps < self.sweeps:
            raise DomainError("max_sweeps must be >= sweeps")


def _golden_min(fun, lo, hi, tol, maxiter=200):
    """Vectorised golden-section minimisation of ``fun`` on per-element brackets.

    Returns the best argument seen and its value (endpoints included).
    """
    a, b = lo.copy(), hi.copy()
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    best_x = np.where(fc <= fd, c, d)
    best_f = np.minimum(fc, fd)
    for _ in range(maxiter):
        if np.all(b - a <= tol * np.maximum(hi - lo, 1e-300)):
            break
        left = fc <= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - INVPHI * (b - a)
        new_d = a + INVPHI * (b - a)
        # reuse the surviving interior point
        c, d, fc, fd = (np.where(left, new_c, d), np.where(left, c, new_d),
                        np.where(left, np.nan, fd), np.where(left, fc, np.nan))
        need_c = np.isnan(fc)
        need_d = np.isnan(fd)
        if need_c.any():
            fc = np.where(need_c, fun(c), fc)
        if need_d.any():
            fd = np.where(need_d, fun(d), fd)
        better = fc < best_f
        best_x, best_f = np.where(better, c, best_x), np.where(better, fc, best_f)
        better = fd < best_f
        best_x, best_f = np.where(better, d, best_x), np.where(better, fd, best_f)
    for edge in (lo, hi):
        fe = fun(edge)
        better = fe < best_f
        best_x, best_f = np.where(better, edge, best_x), np.where(better, fe, best_f)
    return best_x, best_f


def optimize_weights(alpha, params: ProblemParams, tuned: TunedWeights,
                     config: CertifyConfig = CertifyConfig()):
    """Coordinate descent on (gamma, eta) minimising ln f(alpha, ., .) pointwise.

    For r > 0 this also minimises ln g_r, so the result does not depend on r.
    Two seeds are tried, (gamma0, eta0) and their square roots, and the
    better basin is kept.  Returns ``(gamma, eta, log_f)`` arrays.
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    k, u0 = params.k, params.u0
    g0, e0 = tuned.gamma0, tuned.eta0
    ones = np.ones_like(alpha)
    g_lo, g_hi = g0 * ones, ones.copy()
    e_lo, e_hi = e0 * ones, ones.copy()

    def lf(g, e):
        v = log_pair_weight(k, u0, alpha, g, e)
        return np.where(np.isfinite(v), v, np.inf)

    best = None
    for seed in ((g0, e0), tuned.sqrt_weights):
        g = seed[0] * ones
        e = seed[1] * ones
        val = lf(g, e)
        # at least ``sweeps`` passes, then continue while the valley is still being descended
        for sweep in range(config.max_sweeps):
            before = val
            g_new, v_new = _golden_min(lambda t: lf(t, e), g_lo, g_hi, config.line_tol)
            keep = v_new < val
            g, val = np.where(keep, g_new, g), np.where(keep, v_new, val)
            e_new, v_new = _golden_min(lambda t: lf(g, t), e_lo, e_hi, config.line_tol)
            keep = v_new < val
            e, val = np.where(keep, e_new, e), np.where(keep, v_new, val)
            if sweep + 1 >= config.sweeps and np.all(before - val <= config.sweep_tol):
                break
        if best is None:
            best = (g, e, val)
        else:
            take = val < best[2]
            best = tuple(np.where(take, new, old) for new, old in zip((g, e, val), best))
    return best


def optimize_point(alpha: float, r: float, params: ProblemParams, tuned: TunedWeights,
                   config: CertifyConfig = CertifyConfig()) -> tuple[float, float, float]:
    """Weights for a single overlap, returned with ln g_r at that point."""
    if not (0.5 < alpha <= 1.0):
        raise DomainError("alpha must lie in (1/2, 1]")
    g, e, lf = optimize_weights(np.array([alpha]), params, tuned, config)
    return float(g[0]), float(e[0]), float(r * lf[0] + entropy(alpha))


@dataclass
class Certificate:
    k: int
    p: float
    r: float
    status: str  # certified | failed | degenerate
    target_log_g: float = math.nan
    room: float = math.nan
    derivative_bound: float = math.nan
    grid_points: int = 0
    window_A: float = math.nan
    points: list = field(default_factory=list)
    worst_margin: float = math.nan
    worst_slack: float = math.nan
    half_curvature: float = math.nan
    curvature_zone: float = 0.0
    reason: str = ""
    config: dict = field(default_factory=dict)
    kind: str = "numerically certified"
    symmetry: str = "alpha < 1/2 covered by mirrored weights (f(1/2+x) > f(1/2-x))"
    seed_info: None = None

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def to_dict(self) -> dict:
        return asdict(self)


class GridProblem:
    """Everything about a certification that does not depend on the density.

    The optimal weights minimise ln f and so are shared by every r; the
    derivative samples split as r * (ln f)' + entropy', so per-r work is a
    few vector operations.
    """

    def __init__(self, params: ProblemParams, config: CertifyConfig = CertifyConfig()):
        self.params = params
        self.config = config
        self.tuned = tuned_weights(params)
        k, u0 = params.k, params.u0
        t = self.tuned
        n, rf = config.grid_points, config.refine_factor
        self.gap = 0.5 / n
        self.alpha = 0.5 + self.gap * np.arange(1, n + 1)
        self.alpha[-1] = 1.0
        self.gamma, self.eta, self.log_f = optimize_weights(self.alpha, params, t, config)
        self.log_f_tuned = log_pair_weight(k, u0, self.alpha, t.gamma0, t.eta0)
        self.log_f_half = float(log_pair_weight(k, u0, 0.5, t.gamma0, t.eta0))
        self.entropy = entropy(self.alpha)

        # cell samples: midpoints of rf sub-intervals of [alpha - gap/2, alpha + gap/2]
        offs = ((np.arange(rf) + 0.5) / rf - 0.5) * self.gap
        cells = self.alpha[:, None] + offs[None, :]
        last = cells[-1]
        cells[-1] = 1.0 - (1.0 - last[last < 1.0].min()) * (np.arange(rf)[::-1] + 0.5) / rf \
            if np.any(last >= 1.0) else last
        cells[-1] = np.clip(cells[-1], 1.0 - 0.5 * self.gap, np.nextafter(1.0, 0.0))
        self.cell_alpha = cells
        g = np.broadcast_to(self.gamma[:, None], cells.shape)
        e = np.broadcast_to(self.eta[:, None], cells.shape)
        (self.cell_dlf,) = log_f_derivatives(k, u0, cells, g, e, 1)
        self.cell_dh = np.log1p(-cells) - np.log(cells)

        # fine samples for the curvature zone, weights frozen at (gamma0, eta0)
        x = np.linspace(0.0, 0.25, 20 * n // 2 + 1)
        self.near_x = x
        d = log_f_derivatives(k, u0, 0.5 + x, t.gamma0, t.eta0, 3)
        self.near_d2f = d[1]
        self.near_d3f = d[2]

    def target(self, r: float) -> float:
        return r * self.log_f_half + LN2

    def half_curvature_fd(self, r: float, h: float = CURVATURE_STEP) -> float:
        t = self.tuned
        a = np.array([0.5 - h, 0.5, 0.5 + h])
        v = log_g(r, self.params.k, self.params.u0, a, t.gamma0, t.eta0)
        return float((v[0] - 2 * v[1] + v[2]) / (h * h))

    def curvature_zone(self, r: float) -> tuple[float, float]:
        """Return (second derivative at 1/2, radius x_c of the Taylor-certified zone)."""
        c2 = float(r * self.near_d2f[0] - 4.0)
        if not c2 < 0:
            return c2, 0.0
        x = self.near_x
        third = np.abs(r * self.near_d3f + 1.0 / (0.5 + x) ** 2 - 1.0 / (0.5 - x) ** 2)
        # bound on [0, x_i] uses the samples up to the next one
        m = self.config.deriv_safety * np.maximum.accumulate(np.append(third[1:], third[-1]))
        ok = c2 / 2.0 + m * x / 6.0 < 0.0
        bad = np.flatnonzero(~ok)
        last = (bad[0] - 1) if bad.size else len(x) - 1
        return c2, float(x[max(last, 0)])

    def certify(self, r: float) -> Certificate:
        cfg, params = self.config, self.params
        k, u0 = params.k, params.u0
        t = self.tuned
        cert = Certificate(k=k, p=params.p, r=float(r), status="failed",
                           room=cfg.room, grid_points=cfg.grid_points,
                           window_A=cfg.window_A, config=asdict(cfg))
        target = self.target(r)
        cert.target_log_g = target
        c2, xc = self.curvature_zone(r)
        fd = self.half_curvature_fd(r)
        cert.half_curvature = fd
        cert.curvature_zone = xc

        near = (self.alpha + 0.5 * self.gap) - 0.5 <= xc
        gamma = np.where(near, t.gamma0, self.gamma)
        eta = np.where(near, t.eta0, self.eta)
        lf = np.where(near, self.log_f_tuned, self.log_f)
        lg = r * lf + self.entropy
        margin = target - lg

        deriv = np.abs(r * self.cell_dlf + self.cell_dh).max(axis=1) * cfg.deriv_safety
        far = ~near
        cover = np.where(far, deriv * 0.5 * self.gap, 0.0)
        slack = np.where(far, margin - cfg.room - cover, np.inf)
        cert.derivative_bound = float(deriv[far].max()) if far.any() else 0.0
        cert.worst_margin = float(margin[far].min()) if far.any() else math.nan
        cert.worst_slack = float(slack.min()) if far.any() else math.nan
        cert.points = [
            {"alpha": float(a), "gamma": float(g), "eta": float(e),
             "log_g": float(v), "margin": float(mg)}
            for a, g, e, v, mg in zip(self.alpha, gamma, eta, lg, margin)
        ]

        if not np.all(np.isfinite(lg)):
            bad = self.alpha[~np.isfinite(lg)][0]
            cert.reason = f"non-finite ln g at alpha={bad!r}"
            return cert
        if not (c2 < 0 and fd < 0):
            cert.reason = "second derivative at 1/2 is not negative"
            return cert
        first_far = self.alpha[far][0] - 0.5 * self.gap if far.any() else 1.0
        if xc + 0.5 < first_far:
            cert.reason = "curvature zone does not reach the first grid cell"
            return cert
        if np.any(slack < 0):
            i = int(np.argmin(slack))
            cert.reason = (f"dominance fails at alpha={self.alpha[i]:.6g} "
                           f"(margin {margin[i]:.3g}, needs {cfg.room + cover[i]:.3g})")
            return cert
        cert.status = "certified"
        return cert


def degenerate_certificate(params: ProblemParams, r: float, config: CertifyConfig,
                           reason: str) -> Certificate:
    return Certificate(k=params.k, p=params.p, r=float(r), status="degenerate",
                       room=config.room, grid_points=config.grid_points,
                       window_A=config.window_A, reason=reason, config=asdict(config))


def certify_density(params: ProblemParams, r: float,
                    config: CertifyConfig = CertifyConfig()) -> Certificate:
    if not r > 0:
        raise DomainError("density r must be positive")
    try:
        problem = GridProblem(params, config)
    except DegenerateTuning as exc:
        return degenerate_certificate(params, r, config, str(exc))
    return problem.certify(r)


def max_certified_density(params: ProblemParams, config: CertifyConfig = CertifyConfig(),
                          problem: GridProblem | None = None):
    """Largest certified density, found by bisection in r.

    Returns ``(r_low, certificate)``.  ``r_low`` is nan with a degenerate or
    failed certificate when nothing can be certified.
    """
    try:
        problem = problem or GridProblem(params, config)
    except DegenerateTuning as exc:
        return math.nan, degenerate_certificate(params, 0.0, config, str(exc))
    hi = lemma2_upper(params)
    cands = [1.0]
    if params.p < 1.0:
        cands.append(cghs_bounds(params)[0])
    lo_cert = None
    for r0 in sorted((c for c in cands if c < hi), reverse=True):
        c = problem.certify(r0)
        if c.certified:
            lo_cert = c
            break
    if lo_cert is None:
        r0 = hi
        for _ in range(60):
            r0 /= 2.0
            c = problem.certify(r0)
            if c.certified:
                lo_cert = c
                break
    if lo_cert is None:
        fail = problem.certify(hi)
        fail.reason = "no certifiable density found: " + fail.reason
        return math.nan, fail
    start = lo_cert.r
    hi_cert = problem.certify(hi)
    if hi_cert.certified:
        # the first-moment bound can never be certified; reaching here means a bug
        raise AssertionError("density at the first-moment upper bound certified")
    lo, hi_r = start, hi
    while (hi_r - lo) / lo > config.r_tolerance:
        mid = 0.5 * (lo + hi_r)
        c = problem.certify(mid)
        if c.certified:
            lo, lo_cert = mid, c
        else:
            hi_r = mid
    # certifiability is assumed monotone in r; probe below the result
    for probe in np.linspace(start, lo, 5)[1:-1]:
        c = problem.certify(float(probe))
        if not c.certified:
            below = [x for x in np.linspace(start, lo, 5) if x < probe]
            lo = float(max(below))
            lo_cert = problem.certify(lo)
            lo_cert.reason = "monotonicity probe failed; downgraded"
            break
    return lo, lo_cert


@dataclass
class CurveRow:
    k: int
    q: float
    p: float
    T_k: float
    upper_lemma2: float
    t_k: float
    certified_lower: float
    cghs_lower: float
    cghs_upper: float
    gamma0: float
    eta0: float
    status: str


CURVE_COLUMNS = [f for f in CurveRow.__dataclass_fields__]


@dataclass
class BoundCurve:
    k: int
    rows: list


def bound_curve(k: int, q_grid, config: CertifyConfig = CertifyConfig()) -> BoundCurve:
    rows = []
    for q in q_grid:
        q = float(q)
        params = ProblemParams.from_q(k, q)
        b = density_bounds(params)
        try:
            tw = tuned_weights(params)
            g0, e0 = tw.gamma0, tw.eta0
        except DegenerateTuning:
            g0 = e0 = math.nan
        try:
            r_low, cert = max_certified_density(params, config)
            status = cert.status if cert.status != "failed" else "failed"
        except Exception as exc:  # a bad row must not abort the curve
            r_low, status = math.nan, f"error: {exc}"
        rows.append(CurveRow(k, q, params.p, b.t_big, b.upper, b.t_small, r_low,
                             b.cghs_lower, b.cghs_upper, g0, e0, status))
    return BoundCurve(k, rows)


def proposition_check(params: ProblemParams, r: float, points: int = 100_000) -> dict:
    """Sample the three claims about G_r: curvature at 1/2, global maximum, monotonicity."""
    k = params.k
    lo, hi = inner_interval(k)
    if lo >= 0.5:
        raise DomainError(f"G_r interval empty for k={k} (needs k >= 17)")
    tuned = tuned_weights(params)
    grid = np.arange(1, points) / points
    lg = capital_G(r, grid, params, tuned)
    half = float(capital_G(r, 0.5, params, tuned))
    h = CURVATURE_STEP
    side = capital_G(r, np.array([0.5 - h, 0.5 + h]), params, tuned)
    curv = float((side[0] - 2 * half + side[1]) / (h * h))
    off = np.abs(grid - 0.5) > 0.25 / points
    worst = float((lg[off] - half).max())
    mono = (grid >= 0.5) & (grid <= hi)
    steps = np.diff(lg[mono])
    # for k = 17 the decreasing range [1/2, 1 - 3 ln k / k] is essentially empty
    decreasing = bool(np.all(steps < 0))
    return {
        "k": k, "p": params.p, "r": float(r),
        "curvature_at_half": curv,
        "curvature_negative": curv < 0,
        "max_excess_over_half": worst,
        "half_is_global_max": worst < 0,
        "max_step_on_decreasing_range": float(steps.max()) if steps.size else math.nan,
        "decreasing": decreasing,
        "passed": bool(curv < 0 and worst < 0 and decreasing),
    }
