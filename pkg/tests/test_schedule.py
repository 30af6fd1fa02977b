import numpy as np
import pytest

from mbolab.schedule import (
    InadmissibleParameters,
    ScheduleParams,
    check_admissible,
    exponents,
    practical_override,
    schedule_for_n,
)


def test_params_validation():
    with pytest.raises(ValueError):
        ScheduleParams(k=4, s=0.25, q=2.0)
    with pytest.raises(ValueError):
        ScheduleParams(k=2, s=1.0, q=2.0)  # s must stay below 2/k
    with pytest.raises(ValueError):
        ScheduleParams(k=2, s=0.25, q=-1.0)
    with pytest.raises(ValueError):
        ScheduleParams(k=2, s=0.25, q=2.0, delta=1.5)


@pytest.mark.parametrize(
    "k,s,q,expected",
    [
        (2, 0.25, 1.5, True),   # boundary 1/(1 - 0.25) = 4/3
        (2, 0.25, 4.0 / 3.0, False),  # exactly on the boundary
        (2, 0.75, 4.0, False),  # boundary is exactly 4 here
        (2, 0.75, 4.01, True),
        (3, 0.25, 2.5, True),   # boundary 1/(2/3 - 1/4) = 2.4
        (3, 0.25, 2.3, False),
    ],
)
def test_admissibility_boundary(k, s, q, expected):
    ok, report = check_admissible(k, s, q)
    assert ok is expected
    assert "boundary" in report


def test_admissibility_rejects_bad_s():
    ok, report = check_admissible(2, 1.5, 10.0)
    assert not ok
    ok, report = check_admissible(3, 0.7, 10.0)
    assert not ok


def test_exponent_formulas():
    # alpha = -1 + 2q/k - sq, beta = -1/2 + 4q + 13q/k - sq/2
    alpha, beta = exponents(2, 0.25, 5.0)
    assert alpha == pytest.approx(-1 + 5.0 - 1.25)
    assert beta == pytest.approx(-0.5 + 20.0 + 32.5 - 0.625)
    with pytest.raises(InadmissibleParameters):
        exponents(2, 0.75, 1.0)  # alpha negative


def test_schedule_values():
    p = ScheduleParams(k=2, s=0.25, q=1.5, c_h=0.06)
    out = schedule_for_n(p, 2000)
    ln = np.log(2000)
    assert out.K == int(np.ceil(ln**1.5))
    assert out.h == pytest.approx(0.06 * ln ** (-0.9 * out.alpha))
    assert out.eps == pytest.approx(ln ** (-1.1 * out.beta))
    assert out.eps_lower_theorem == pytest.approx((ln / 2000) ** 0.125)
    assert not out.feasible  # theorem-scale eps is unattainably tiny here
    assert not out.clamped


def test_schedule_clamps_K():
    p = ScheduleParams(k=2, s=0.25, q=6.0)
    out = schedule_for_n(p, 10)
    assert out.clamped
    assert out.K == 10


def test_schedule_rejects_inadmissible():
    with pytest.raises(InadmissibleParameters):
        schedule_for_n(ScheduleParams(k=2, s=0.25, q=1.0), 1000)
    with pytest.raises(ValueError):
        schedule_for_n(ScheduleParams(k=2, s=0.25, q=1.5), 2)


def test_practical_override_regimes():
    inside = practical_override(2000, eps=0.001, h=0.05, K=30)
    assert inside.eps_le_h32
    assert inside.regime == "inside proven regime"
    conj = practical_override(2000, eps=0.02, h=0.05, K=30)
    assert not conj.eps_le_h32 and conj.eps_lt_h
    assert "conjectured" in conj.regime
    practical = practical_override(2000, eps=0.1, h=0.05, K=30)
    assert "practical" in practical.regime
    # at n = 2000 the theorem-scale lower bound (log n / n)^{1/8} ~ 0.5 sits
    # above every desk-scale eps, while the corollary bound does not
    assert not practical.eps_above_theorem_lb
    assert practical.eps_above_corollary_lb == (0.1 > (np.log(2000) / 2000) ** (1 / 6))


def test_practical_override_validation():
    with pytest.raises(ValueError):
        practical_override(2000, eps=-0.1, h=0.05, K=30)
    with pytest.raises(ValueError):
        practical_override(2000, eps=0.1, h=0.05, K=5000)
