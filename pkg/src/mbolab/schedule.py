"""Admissibility region and (K_n, h_n, eps_n) schedule calculus.

The asymptotic orders K >= (log n)^q, h >> (log n)^{-alpha},
eps << (log n)^{-beta} are realized at finite n with a slack exponent delta
on the logarithm power; natural logarithm throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InadmissibleParameters(ValueError):
    pass


@dataclass(frozen=True)
class ScheduleParams:
    k: int
    s: float
    q: float
    c_h: float = 1.0
    c_eps: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if self.k not in (2, 3):
            raise ValueError("k must be 2 or 3")
        if not 0 < self.s < 2 / self.k:
            raise ValueError("s must lie in (0, 2/k)")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("slack delta must lie in (0, 1)")


@dataclass(frozen=True)
class ScheduleOutput:
    n: int
    K: int
    alpha: float
    beta: float
    h: float
    eps: float
    eps_lower_theorem: float
    eps_lower_corollary: float
    feasible: bool
    clamped: bool


def check_admissible(k: int, s: float, q: float):
    """True iff 0 < s < 2/k and q exceeds the boundary 1/(2/k - s)."""
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    if not 0 < s < 2 / k:
        return False, f"s = {s} outside the open interval (0, {2 / k}); region requires 0 < s < 2/k"
    boundary = 1.0 / (2.0 / k - s)
    ok = q > boundary
    verdict = "inside" if ok else "outside"
    report = (
        f"q = {q} vs boundary 1/(2/k - s) = {boundary:.6g}: {verdict} the admissible "
        f"region {{(s, q): 0 < s < 2/k, q > 1/(2/k - s)}}"
    )
    return ok, report


def exponents(k: int, s: float, q: float):
    """alpha = -1 + 2q/k - sq and beta = -1/2 + 4q + 13q/k - sq/2; both must
    be nonnegative for an admissible schedule."""
    alpha = -1.0 + 2.0 * q / k - s * q
    beta = -0.5 + 4.0 * q + 13.0 * q / k - s * q / 2.0
    if alpha < 0 or beta < 0:
        raise InadmissibleParameters(f"exponents out of range: alpha = {alpha}, beta = {beta}")
    return alpha, beta


def schedule_for_n(params: ScheduleParams, n: int) -> ScheduleOutput:
    if n < 3:
        raise ValueError("n must be at least 3 so that log(n) > 1")
    ok, report = check_admissible(params.k, params.s, params.q)
    if not ok:
        raise InadmissibleParameters(report)
    alpha, beta = exponents(params.k, params.s, params.q)
    ln = np.log(n)
    K_raw = int(np.ceil(ln**params.q))
    clamped = K_raw > n
    K = min(K_raw, n)
    h = params.c_h * ln ** (-(1 - params.delta) * alpha)
    eps = params.c_eps * ln ** (-(1 + params.delta) * beta)
    lb_exp = 1.0 / params.k if params.k >= 3 else 1.0 / 8.0
    eps_lower_theorem = (ln / n) ** lb_exp
    eps_lower_corollary = (ln / n) ** (1.0 / (params.k + 4))
    feasible = max(eps_lower_theorem, eps_lower_corollary) < eps
    return ScheduleOutput(
        n=n,
        K=K,
        alpha=alpha,
        beta=beta,
        h=float(h),
        eps=float(eps),
        eps_lower_theorem=float(eps_lower_theorem),
        eps_lower_corollary=float(eps_lower_corollary),
        feasible=bool(feasible),
        clamped=bool(clamped),
    )


@dataclass(frozen=True)
class OverrideReport:
    n: int
    eps: float
    h: float
    K: int
    eps_le_h32: bool
    eps_lt_h: bool
    eps_above_theorem_lb: bool
    eps_above_corollary_lb: bool
    regime: str


def practical_override(n: int, eps: float, h: float, K: int, k: int = 2) -> OverrideReport:
    """Report how user-chosen (eps, h, K) sit relative to the proven regime."""
    if n < 3 or eps <= 0 or h <= 0 or K <= 0:
        raise ValueError("n >= 3 and positive eps, h, K required")
    if K > n:
        raise ValueError("K must not exceed n")
    ln = np.log(n)
    lb_exp = 1.0 / k if k >= 3 else 1.0 / 8.0
    lb_thm = (ln / n) ** lb_exp
    lb_cor = (ln / n) ** (1.0 / (k + 4))
    eps_le_h32 = eps <= h**1.5
    eps_lt_h = eps < h
    if eps_le_h32:
        regime = "inside proven regime"
    elif eps_lt_h:
        regime = "outside proven regime, inside conjectured sharp regime"
    else:
        regime = "outside proven regime, inside practical regime"
    return OverrideReport(
        n=n,
        eps=eps,
        h=h,
        K=K,
        eps_le_h32=bool(eps_le_h32),
        eps_lt_h=bool(eps_lt_h),
        eps_above_theorem_lb=bool(eps > lb_thm),
        eps_above_corollary_lb=bool(eps > lb_cor),
        regime=regime,
    )
