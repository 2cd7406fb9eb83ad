import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from psatbounds.analytic import ProblemParams
from psatbounds.errors import DegenerateTuning, DomainError
from psatbounds.tuning import (
    psi_eval, psi_residual, solve_epsilon0, tilted_clause_moments, tilted_law, tuned_weights,
)

# 40-digit reference values
EPS0_3_HALF = 0.216388375108775672
GAMMA0_3_HALF = 0.885218405192314292
ETA0_3_HALF = 0.311610061206730502
EPS0_3_ZERO = 0.381966011250105152


def test_psi_values():
    assert psi_eval(3, 0.0) == 0.75
    assert psi_eval(2, 1.0) == 1.0
    assert psi_eval(3, 0.2163884) == pytest.approx(0.875, abs=1e-7)
    with pytest.raises(DomainError):
        psi_eval(3, 1.5)


@given(st.integers(2, 40), st.floats(0.0, 1.0))
def test_psi_matches_sum(k, t):
    direct = sum((2 - t) ** -j for j in range(1, k))
    assert psi_eval(k, t) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("k", [2, 3, 5, 10, 30])
def test_psi_increasing(k):
    t = np.linspace(0, 1, 2001)
    v = np.array([psi_eval(k, x) for x in t])
    assert np.all(np.diff(v) > 0)


def test_psi_a7_sandwich():
    # t^2/2 <= psi(t) - (1 - 2^(1-k) + t - (k+1) t / 2^k) <= 2 t^2 for t <= 1/(2k)
    for k in (64, 80, 100):
        t = np.linspace(0, 1 / (2 * k), 200)
        lin = (1 - 2.0**-(k - 1)) + t * (1 - (k + 1) * 2.0**-k)
        got = np.array([psi_eval(k, x) for x in t]) - lin
        assert np.all(got >= t * t / 2 - 1e-15)
        assert np.all(got <= 2 * t * t + 1e-15)


def test_solve_epsilon0_closed_forms():
    assert solve_epsilon0(3, 0.5) == pytest.approx(EPS0_3_HALF, abs=1e-15)
    w = (-1 + math.sqrt(4.5)) / 2
    assert solve_epsilon0(3, 0.5) == pytest.approx(2 - 1 / w, abs=1e-14)
    assert solve_epsilon0(3, 0.0) == pytest.approx(EPS0_3_ZERO, abs=1e-15)
    assert solve_epsilon0(3, 0.0) == pytest.approx(1 - (math.sqrt(5) - 1) / 2, abs=1e-15)
    assert solve_epsilon0(2, 0.0) == 1.0


@given(st.integers(2, 60), st.floats(0.0, 0.999))
def test_solve_epsilon0_residual(k, q):
    e = solve_epsilon0(k, q)
    if e < 1:
        assert abs(psi_residual(k, q, e)) <= 1e-12


def test_tuned_weights_k3():
    w = tuned_weights(ProblemParams(3, 0.5))
    assert w.gamma0 == pytest.approx(GAMMA0_3_HALF, abs=1e-14)
    assert w.eta0 == pytest.approx(ETA0_3_HALF, abs=1e-14)
    assert w.residual1 <= 1e-10 and w.residual2 <= 1e-10
    u0 = w.eta0 / ((1 + w.gamma0**2) ** 3 - (1 - w.eta0))
    assert u0 == pytest.approx(0.0625, abs=1e-14)


def test_tuned_weights_p1():
    w = tuned_weights(ProblemParams(3, 1.0))
    assert w.eta0 == 0.0
    assert w.gamma0**2 == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-14)


def test_degenerate_rejected():
    with pytest.raises(DegenerateTuning, match="k=2, p=1"):
        tuned_weights(ProblemParams(2, 1.0))


def test_round_trip_grid():
    for k in range(2, 31):
        for p in np.round(np.arange(0.1, 1.0001, 0.1), 10):
            if k == 2 and p == 1.0:
                continue
            w = tuned_weights(ProblemParams(k, float(p)))
            assert w.residual1 <= 1e-10 and w.residual2 <= 1e-10, (k, p)
            assert 0 < w.gamma0 <= 1 and 0 <= w.eta0 < 1


def test_fact1_eps_sandwich():
    for k in (30, 40, 50):
        for y in (0.1, 0.5, 0.9):
            e = tuned_weights(ProblemParams.from_q(k, y)).eps0
            hi = 2 * (1 - y) / (2**k - k - 1)
            lo = hi - 4 * k * (1 - y) ** 2 / 2 ** (2 * k)
            assert lo * (1 - 1e-12) <= e <= hi * (1 + 1e-12)


def test_fact1_eta_bound():
    for k in (30, 40):
        for y in np.linspace(0.05, 0.95, 19):
            eta = tuned_weights(ProblemParams.from_q(k, float(y))).eta0
            alt = y - (k + 1) * (1 - y) / (2**k - k - 1) + 4 * k * (1 - y) ** 2 / 2**k
            assert eta <= min(y, alt) + 1e-15


def test_tilted_law():
    law = tilted_law(3, 0.9, 0.5)
    assert law.probs.sum() == pytest.approx(1.0, abs=1e-12)
    raw = np.array([math.comb(3, j) * 0.9 ** (3 - 2 * j) * (0.5 if j == 3 else 1)
                    for j in range(4)])
    np.testing.assert_allclose(law.probs, raw / raw.sum(), rtol=1e-13)


def test_tilted_moments_k3():
    pp = ProblemParams(3, 0.5)
    h, u, law, (hc, uc) = tilted_clause_moments(pp, tuned_weights(pp))
    assert abs(h) < 1e-12 and abs(u - 0.0625) < 1e-12
    assert abs(hc) < 1e-12 and abs(uc - 0.0625) < 1e-12
    pp = ProblemParams(3, 1.0)
    h, u, law, _ = tilted_clause_moments(pp, tuned_weights(pp))
    assert u == 0.0 and abs(h) < 1e-12


@given(st.integers(2, 30), st.floats(0.05, 1.0))
def test_centering_property(k, p):
    if k == 2 and p == 1.0:
        return
    pp = ProblemParams(k, p)
    h, u, law, (hc, uc) = tilted_clause_moments(pp, tuned_weights(pp))
    assert law.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(h) <= 1e-10 and abs(u - pp.u0) <= 1e-10
    assert abs(hc) <= 1e-10 and abs(uc - pp.u0) <= 1e-10
