import math

import numpy as np
import pytest

from psatbounds.analytic import ProblemParams, cghs_bounds, lemma2_upper, t_lower, threshold_T
from psatbounds.certify import (
    CURVE_COLUMNS, CertifyConfig, GridProblem, bound_curve, certify_density,
    max_certified_density, optimize_point, proposition_check,
)
from psatbounds.errors import DomainError
from psatbounds.moments import log_g, log_pair_weight
from psatbounds.tuning import tuned_weights

CFG = CertifyConfig(grid_points=2000)
P3 = ProblemParams(3, 0.5)
R_CROSS = 20.256982207871769  # density where 4 f(1/2)^r = 1 at (k=3, p=1/2)


@pytest.fixture(scope="module")
def grid3():
    return GridProblem(P3, CFG)


@pytest.fixture(scope="module")
def max3(grid3):
    return max_certified_density(P3, CFG, grid3)


def test_config_validation():
    with pytest.raises(DomainError):
        CertifyConfig(grid_points=50)
    with pytest.raises(DomainError):
        CertifyConfig(room=0.0)
    d = CertifyConfig()
    assert (d.grid_points, d.room, d.deriv_safety, d.refine_factor, d.r_tolerance,
            d.window_A) == (10000, 1e-4, 2.0, 10, 1e-4, 3.0)


def test_optimize_point_near_half():
    t = tuned_weights(P3)
    g, e, v = optimize_point(0.5 + 1e-9, 10.0, P3, t, CFG)
    assert g == pytest.approx(t.gamma0, abs=1e-5)
    assert e == pytest.approx(t.eta0, abs=1e-5)
    target = 10.0 * float(log_pair_weight(3, P3.u0, 0.5, t.gamma0, t.eta0)) + math.log(2)
    assert v == pytest.approx(target, abs=1e-8)
    with pytest.raises(DomainError):
        optimize_point(0.4, 10.0, P3, t, CFG)


def test_optimize_point_full_overlap_improves_seed():
    pp = ProblemParams(20, 0.5)
    t = tuned_weights(pp)
    g, e, v = optimize_point(1.0, 0.5, pp, t, CFG)
    assert v <= 0.5 * float(log_pair_weight(20, pp.u0, 1.0, t.gamma0, t.eta0)) + 1e-15
    assert g >= t.gamma0 and e >= t.eta0


def test_optimize_point_against_grid_scan():
    t = tuned_weights(P3)
    r, a = 10.0, 0.9
    g, e, v = optimize_point(a, r, P3, t, CFG)
    gg, ee = np.meshgrid(np.linspace(t.gamma0, 1, 801), np.linspace(t.eta0, 1, 801))
    scan = log_g(r, 3, P3.u0, a, gg, ee)
    i = np.unravel_index(np.argmin(scan), scan.shape)
    # refine the scan minimum on a finer local patch
    gf, ef = np.meshgrid(np.linspace(max(t.gamma0, gg[i] - 2e-3), min(1, gg[i] + 2e-3), 401),
                         np.linspace(max(t.eta0, ee[i] - 2e-3), min(1, ee[i] + 2e-3), 401))
    best = float(log_g(r, 3, P3.u0, a, gf, ef).min())
    assert v == pytest.approx(best, abs=1e-6)
    target = r * float(log_pair_weight(3, P3.u0, 0.5, t.gamma0, t.eta0)) + math.log(2)
    assert v < target


def test_certify_examples(grid3):
    c = grid3.certify(10.0)
    assert c.status == "certified" and c.certified
    assert c.half_curvature < 0
    c = grid3.certify(40.0)
    assert c.status == "failed" and c.reason
    c = certify_density(ProblemParams(2, 1.0), 1.0, CFG)
    assert c.status == "degenerate"
    with pytest.raises(DomainError):
        certify_density(P3, -1.0, CFG)


def test_certificate_schema_and_replay(grid3):
    c = grid3.certify(10.0)
    d = c.to_dict()
    for key in ("k", "p", "r", "status", "target_log_g", "room", "derivative_bound",
                "grid_points", "window_A", "points", "worst_margin", "half_curvature",
                "seed_info", "config"):
        assert key in d
    assert d["seed_info"] is None
    assert len(d["points"]) == CFG.grid_points
    t = tuned_weights(P3)
    pts = d["points"]
    a = np.array([p["alpha"] for p in pts])
    g = np.array([p["gamma"] for p in pts])
    e = np.array([p["eta"] for p in pts])
    v = np.array([p["log_g"] for p in pts])
    np.testing.assert_allclose(log_g(10.0, 3, P3.u0, a, g, e), v, rtol=0, atol=1e-12)
    assert np.all(g >= t.gamma0) and np.all(e >= t.eta0)
    assert np.all(np.diff(a) > 0) and a[0] > 0.5 and a[-1] == 1.0
    margins = np.array([p["margin"] for p in pts])
    np.testing.assert_allclose(margins, d["target_log_g"] - v, atol=1e-15)


def test_certified_density_is_deterministic(grid3):
    a = grid3.certify(10.0).to_dict()
    b = certify_density(P3, 10.0, CFG).to_dict()
    assert a == b


def test_max_density_k3(max3):
    r_low, cert = max3
    assert cert.certified
    assert 10 < r_low < lemma2_upper(P3)
    assert r_low <= R_CROSS
    assert r_low > cghs_bounds(P3)[0]


def test_max_density_k3_p1():
    r_low, cert = max_certified_density(ProblemParams(3, 1.0), CFG)
    assert cert.certified and r_low > 2.5


def test_max_density_ratio_improves_with_k(max3):
    r10, _ = max_certified_density(ProblemParams(10, 0.5), CFG)
    assert r10 / threshold_T(ProblemParams(10, 0.5)) > max3[0] / threshold_T(P3)


def test_max_density_degenerate():
    r, cert = max_certified_density(ProblemParams(2, 1.0), CFG)
    assert math.isnan(r) and cert.status == "degenerate"


def test_anti_monotone_in_p():
    vals = [max_certified_density(ProblemParams(3, p), CFG)[0] for p in (0.2, 0.4, 0.6, 0.8, 1.0)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_curvature_negative_when_certified(grid3):
    for r in (2.0, 6.0, 10.0):
        c = grid3.certify(r)
        assert c.certified and c.half_curvature < 0


@pytest.mark.parametrize("k", [30, 40])
def test_proposition_small_r(k):
    rep = proposition_check(ProblemParams(k, 0.5), 1.0, points=20000)
    assert rep["curvature_negative"] and rep["half_is_global_max"] and rep["decreasing"]
    assert rep["passed"]


def test_proposition_k17_switch_excess():
    # the tuned-weight interval is only ~1e-5 wide at k = 17; just outside it the
    # square-root weights give a larger f, so 1/2 is not the global maximum
    rep = proposition_check(ProblemParams(17, 0.5), 1.0, points=20000)
    assert rep["curvature_negative"]
    assert not rep["half_is_global_max"]
    assert 0 < rep["max_excess_over_half"] < 1e-5


def test_proposition_above_upper_fails_global():
    pp = ProblemParams(20, 0.5)
    rep = proposition_check(pp, 2 * threshold_T(pp), points=20000)
    assert not rep["half_is_global_max"]


def test_proposition_reports_at_target():
    pp = ProblemParams(30, 0.5)
    rep = proposition_check(pp, t_lower(pp).value, points=20000)
    assert rep["curvature_negative"]
    assert set(rep) >= {"curvature_at_half", "max_excess_over_half", "passed"}


def test_proposition_domain():
    with pytest.raises(DomainError):
        proposition_check(ProblemParams(16, 0.5), 1.0)


def test_bound_curve_small():
    curve = bound_curve(3, [0.0, 0.3, 0.5, 0.8], CFG)
    assert len(curve.rows) == 4
    assert CURVE_COLUMNS == ["k", "q", "p", "T_k", "upper_lemma2", "t_k", "certified_lower",
                             "cghs_lower", "cghs_upper", "gamma0", "eta0", "status"]
    for row in curve.rows:
        if row.status == "certified":
            assert row.certified_lower < row.upper_lemma2
    assert math.isnan(curve.rows[0].cghs_lower)


def test_bound_curve_degenerate_row():
    curve = bound_curve(2, [0.0, 0.5], CFG)
    assert curve.rows[0].status == "degenerate"
    assert math.isnan(curve.rows[0].gamma0)
