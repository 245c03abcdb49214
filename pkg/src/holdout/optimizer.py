"""Optimal hold-out size, the noise-level frontier, and implicit noise levels.

The optimal size for a given noise level is found by exhaustive integer scan of
the negative utility. A noise level is feasible only when the expected pure loss is
nonnegative on the whole domain, i.e. the fitted loss never drops below the noise.

Sweeping the noise level traces the frontier. The optimal size grows with the noise
level up to a peak and then shrinks; the noise level at the peak is the (loose)
upper bound on the noise, and the frontier is cut off there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import BoundMode, LossCurve, utility_profile
from .errors import DomainError

UPPER_BOUND_GRID = 256


@dataclass(frozen=True)
class OptimalSplit:
    m_star: int | None
    implied_K: float | None
    utility_at_min: float | None
    feasible: bool
    sigma2: float

    @property
    def implied_K_rounded(self) -> int | None:
        return None if self.implied_K is None else int(round(self.implied_K))

    def to_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "m_star": self.m_star,
            "implied_K": self.implied_K,
            "implied_K_rounded": self.implied_K_rounded,
            "utility_at_min": self.utility_at_min,
            "feasible": self.feasible,
        }


@dataclass(frozen=True)
class ParetoPoint:
    sigma2: float
    m_star: int | None
    feasible: bool
    implied_K: float | None = None


def optimal_m(curve: LossCurve, sigma2: float, mode: BoundMode = BoundMode()) -> OptimalSplit:
    """Argmin of E + V over integer m in the curve domain; ties go to the smaller m."""
    m, E, _, U = utility_profile(curve, sigma2, mode)
    if np.any(E < 0):
        return OptimalSplit(None, None, None, False, float(sigma2))
    i = int(np.argmin(U))
    m_star = int(m[i])
    implied = curve.n_total / m_star if curve.n_total else None
    return OptimalSplit(m_star, implied, float(U[i]), True, float(sigma2))


def _m_star(curve: LossCurve, sigma2: float, mode: BoundMode) -> int:
    return optimal_m(curve, sigma2, mode).m_star


def max_feasible_sigma2(curve: LossCurve) -> float:
    """Largest noise level for which the expected pure loss stays >= 0 everywhere."""
    return float(np.min(curve.practical(curve.domain())))


def sigma2_upper_bound(
    curve: LossCurve, mode: BoundMode = BoundMode(), tolerance: float = 1e-6
) -> float:
    """Noise level at which the frontier peaks (largest one attaining the peak m*).

    A coarse scan locates the peak, then bisection on "m* still at its peak"
    narrows the right edge of the peak plateau to ``tolerance``.
    """
    s_max = max_feasible_sigma2(curve)
    if not s_max > 0:
        raise DomainError(
            f"curve is infeasible even as sigma2 -> 0 (minimum fitted loss {s_max:g})"
        )
    grid = s_max * np.arange(1, UPPER_BOUND_GRID + 1) / UPPER_BOUND_GRID
    ms = np.array([_m_star(curve, s, mode) for s in grid])
    peak = int(ms.max())
    i = int(np.flatnonzero(ms == peak)[-1])
    if i == grid.size - 1:
        return s_max
    lo, hi = grid[i], grid[i + 1]
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        mm = _m_star(curve, mid, mode)
        if mm >= peak:
            peak, lo = mm, mid
        else:
            hi = mid
    return float(lo)


def default_sigma2_grid(
    curve: LossCurve, mode: BoundMode = BoundMode(), n: int = 60, low: float = 1e-3
) -> np.ndarray:
    """``n`` log-spaced noise levels from ``low`` to the frontier's upper bound."""
    ub = sigma2_upper_bound(curve, mode)
    return np.geomspace(min(low, ub), ub, n)


def pareto_frontier(
    curve: LossCurve,
    sigma2_grid: Sequence[float],
    mode: BoundMode = BoundMode(),
    upper_bound: float | None = None,
) -> list[ParetoPoint]:
    """One frontier point per grid value; points past the upper bound are infeasible."""
    grid = np.asarray(sigma2_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("sigma2 grid must be nonempty, positive and increasing")
    if upper_bound is None:
        try:
            upper_bound = sigma2_upper_bound(curve, mode)
        except DomainError:
            upper_bound = -np.inf
    slack = 1e-12 * max(1.0, abs(upper_bound))
    out = []
    for s in grid:
        opt = optimal_m(curve, float(s), mode)
        out.append(
            ParetoPoint(float(s), opt.m_star, bool(opt.feasible and s <= upper_bound + slack), opt.implied_K)
        )
    return out


def implicit_sigma2(
    curve: LossCurve,
    K: int,
    mode: BoundMode = BoundMode(),
    tolerance: float = 1e-10,
) -> float | None:
    """Noise level under which ``K``-fold CV (m = floor(N/K)) is optimal, or None.

    Bisects on the nondecreasing part of the frontier, to relative ``tolerance``.
    Returns None when floor(N/K) is not reached at any noise level up to the upper
    bound, or when the optimum steps over it.
    """
    if curve.n_total is None:
        raise DomainError("curve has no total sample size; cannot map K to m")
    if K < 2:
        raise DomainError(f"K must be >= 2, got {K}")
    target = curve.n_total // K
    if not curve.m_lo <= target <= curve.m_hi:
        raise DomainError(
            f"K={K} gives m={target}, outside the curve domain [{curve.m_lo}, {curve.m_hi}]"
        )
    try:
        hi = sigma2_upper_bound(curve, mode)
    except DomainError:
        return None
    m_hi = _m_star(curve, hi, mode)
    if m_hi < target:
        return None
    lo = hi * 1e-12
    m_lo = _m_star(curve, lo, mode)
    if m_lo > target:
        return None
    if m_lo == target:
        return float(lo)
    while hi - lo > tolerance * hi:
        mid = 0.5 * (lo + hi)
        if _m_star(curve, mid, mode) >= target:
            hi = mid
        else:
            lo = mid
    return float(hi) if _m_star(curve, hi, mode) == target else None
