import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import comb

from rmtlab.distributions import concentration_estimate, make_distribution, make_rng
from rmtlab.lcd import LcdQuery
from rmtlab.smallball import (
    SmallBallBoundInput,
    clamp_probability,
    measured_u,
    random_sums,
    rows_to_csv,
    smallball_compare,
    theorem_bound,
)

RADEMACHER = make_distribution("rademacher")
GAUSS = make_distribution("gaussian")


def test_bound_arithmetic():
    # 0.2 / (0.5 sqrt 0.5) + e^-9
    got = theorem_bound(SmallBallBoundInput(0.1, 10.0, 0.5, 0.5, 3.0, 1.0))
    assert got == pytest.approx(0.2 / (0.5 * math.sqrt(0.5)) + math.exp(-9), rel=1e-12)
    assert got == pytest.approx(0.565809, abs=1e-6)
    got = theorem_bound(SmallBallBoundInput(0.1, math.inf, 0.5, 0.5, 3.0, 1.0))
    assert got == pytest.approx(0.282966, abs=1e-6)


def test_bound_vanishes():
    assert theorem_bound(SmallBallBoundInput(0.0, math.inf, 0.3, 0.5, 100.0, 2.0)) == 0.0


def test_bound_infinite_when_u_is_one():
    assert theorem_bound(SmallBallBoundInput(0.1, 10.0, 0.5, 1.0, 3.0)) == math.inf
    assert clamp_probability(math.inf) == 1.0
    assert clamp_probability(-0.5) == 0.0


def test_bound_monotonicity_grid():
    eps = [0.0, 0.01, 0.1, 0.5]
    lcds = [1.0, 10.0, 100.0, math.inf]
    alphas = [0.5, 1.0, 3.0]
    for r in (0.1, 0.5):
        for u in (0.2, 0.7):
            for a in alphas:
                for l in lcds:
                    vals = [theorem_bound(SmallBallBoundInput(e, l, r, u, a)) for e in eps]
                    assert all(x < y for x, y in zip(vals, vals[1:]))
                for e in eps:
                    vals = [theorem_bound(SmallBallBoundInput(e, l, r, u, a)) for l in lcds]
                    assert all(x > y for x, y in zip(vals, vals[1:]))
            for l in lcds:
                vals = [theorem_bound(SmallBallBoundInput(0.1, l, r, u, a)) for a in alphas]
                assert all(x > y for x, y in zip(vals, vals[1:]))


def test_measured_u():
    assert measured_u(RADEMACHER) == 1.0
    assert measured_u(GAUSS) == pytest.approx(2 * stats.norm.cdf(1) - 1, abs=0.005)


def test_flat_rademacher_atom():
    n = 100
    atom = comb(n, n // 2, exact=True) / 2**n
    assert atom == pytest.approx(0.0796, abs=1e-4)
    x = np.ones(n) / math.sqrt(n)
    sums = random_sums(x, RADEMACHER, 200_000, seed=1)
    assert concentration_estimate(sums, 0.01).value >= atom - 4 * math.sqrt(atom / 200_000)


def test_single_coordinate_rademacher():
    sums = random_sums(np.eye(10)[0], RADEMACHER, 100_000, seed=2)
    assert concentration_estimate(sums, 0.5).value == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("which", ["e1", "flat", "random"])
def test_gaussian_rotation_invariance(which):
    n = 100
    x = {"e1": np.eye(n)[0], "flat": np.ones(n) / 10, "random": make_rng(5).standard_normal(n)}[which]
    x = x / np.linalg.norm(x)
    m = 400_000
    sums = random_sums(x, GAUSS, m, seed=3)
    assert stats.kstest(sums, "norm").pvalue > 1e-3
    # the window centred at 0 is an unbiased estimate of 2 Phi(eps) - 1
    p = 2 * stats.norm.cdf(0.05) - 1
    frac = np.mean(np.abs(sums) <= 0.05)
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / m)


def test_compare_rows_and_csv():
    x = np.eye(4)[0]
    rows = smallball_compare(x, GAUSS, [0.01, 0.1], LcdQuery(10, 0.1, 5), 20_000, seed=1)
    assert [r.epsilon for r in rows] == [0.01, 0.1]
    assert rows[0].lcd == pytest.approx(1 / 1.1, abs=1e-7)
    for r in rows:
        assert r.bound_clamped == clamp_probability(r.bound_raw)
        assert r.passed == (r.empirical <= r.bound_clamped)
    text = rows_to_csv(rows).splitlines()
    assert text[0] == "epsilon,empirical,lcd,bound_raw,bound_clamped,pass"
    assert len(text) == 3


def test_compare_rademacher_bound_is_vacuous():
    rows = smallball_compare(np.eye(4)[0], RADEMACHER, [0.1], LcdQuery(10, 0.1, 5), 10_000, seed=1)
    assert rows[0].bound_raw == math.inf and rows[0].bound_clamped == 1.0 and rows[0].passed


def test_compare_validation():
    with pytest.raises(ValueError):
        smallball_compare(np.ones(3), GAUSS, [0.1], LcdQuery(), 10_000, 1)
    with pytest.raises(ValueError):
        smallball_compare(np.eye(3)[0], GAUSS, [0.1], LcdQuery(), 999, 1)


def test_censored_lcd_enters_as_t_max():
    phi = (1 + math.sqrt(5)) / 2
    x = np.array([1.0, phi]) / math.hypot(1.0, phi)
    rows = smallball_compare(x, GAUSS, [0.1], LcdQuery(0.3, 0.005, 10), 10_000, seed=1)
    assert rows[0].lcd == 10.0
