"""Loss curve through the anchors, the variance-bound curve, and negative utility.

The power-law curve uses a normalized hold-out size
``t = (m - m_loo) / (m_lmo - m_loo)`` so that it passes through all three anchors:

    E(m; s2) = t ** (log(beta) / log(alpha)) * (l_lmo - l_loo) + l_loo - s2

with ``beta = (l_kref - l_loo) / (l_lmo - l_loo)`` and
``alpha = (m_kref - m_loo) / (m_lmo - m_loo)``. The noise level ``s2`` only enters at
evaluation time, so a single fitted curve serves a whole sweep over noise levels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .cv import LossAnchors
from .errors import AnchorError, DomainError

FIT_KINDS = ("power", "pchip", "cubic_spline")


@dataclass(frozen=True)
class BoundMode:
    """Which variance bound to apply.

    ``symmetry="symmetric"`` uses constant 4 (symmetric errors), ``"asymmetric"``
    uses 16. Setting ``sigma2_max`` switches to the heteroskedastic form, in which
    the bound uses that fixed upper noise level instead of the swept ``sigma2``.
    """

    symmetry: str = "symmetric"
    sigma2_max: float | None = None

    def __post_init__(self):
        if self.symmetry not in ("symmetric", "asymmetric"):
            raise DomainError(f"unknown symmetry {self.symmetry!r}")
        if self.sigma2_max is not None and not self.sigma2_max > 0:
            raise DomainError("sigma2_max must be positive")

    @property
    def constant(self) -> float:
        return 4.0 if self.symmetry == "symmetric" else 16.0

    @property
    def heteroskedastic(self) -> bool:
        return self.sigma2_max is not None

    def effective_sigma2(self, sigma2: float) -> float:
        return float(sigma2) if self.sigma2_max is None else float(self.sigma2_max)

    def to_dict(self) -> dict:
        return {"symmetry": self.symmetry, "sigma2_max": self.sigma2_max, "constant": self.constant}


@dataclass(frozen=True)
class LossCurve:
    fit_kind: str
    points: tuple[tuple[int, float], ...]
    n_total: int | None = None
    anchors: LossAnchors | None = None
    exponent: float | None = None
    scale: float | None = None
    offset: float | None = None
    beta: float | None = None
    alpha: float | None = None
    _interp: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def m_lo(self) -> int:
        return self.points[0][0]

    @property
    def m_hi(self) -> int:
        return self.points[-1][0]

    def domain(self) -> np.ndarray:
        return np.arange(self.m_lo, self.m_hi + 1)

    def practical(self, m) -> np.ndarray:
        """Fitted practical loss (noise not subtracted), no domain check."""
        m = np.asarray(m, dtype=float)
        if self.fit_kind == "power":
            t = (m - self.m_lo) / (self.m_hi - self.m_lo)
            return np.power(t, self.exponent) * self.scale + self.offset
        return np.asarray(self._interp(m), dtype=float)

    def to_dict(self) -> dict:
        return {
            "fit_kind": self.fit_kind,
            "points": [[int(a), float(b)] for a, b in self.points],
            "n_total": self.n_total,
            "exponent": self.exponent,
            "scale": self.scale,
            "offset": self.offset,
            "beta": self.beta,
            "alpha": self.alpha,
        }


def fit_power_curve(anchors: LossAnchors, fallback: str | None = None) -> LossCurve:
    """Fit the power-law loss curve exactly through the three anchors.

    Anchors that do not increase strictly (``beta`` outside (0, 1)) raise
    :class:`AnchorError`. With ``fallback="pchip"`` they instead produce a PCHIP
    curve through the running maximum of the anchor losses, with a warning.
    """
    l0, lk, l2 = anchors.losses
    m0, mk, m2 = anchors.sizes
    scale = l2 - l0
    problem = None
    if scale == 0:
        problem = f"zero scale: l_lmo == l_loo == {l0}"
    elif scale < 0:
        problem = f"decreasing anchors: l_lmo={l2} < l_loo={l0}"
    else:
        beta = (lk - l0) / scale
        if beta <= 0:
            problem = f"beta <= 0 (non-monotone anchors: l_kref={lk} <= l_loo={l0})"
        elif beta >= 1:
            problem = f"beta >= 1 (l_kref={lk} >= l_lmo={l2})"
    if problem is not None:
        if fallback == "pchip":
            warnings.warn(f"power fit rejected ({problem}); using monotone PCHIP fallback")
            clipped = np.maximum.accumulate(np.array(anchors.losses))
            curve = fit_interpolating_curve(
                list(zip(anchors.sizes, clipped)), "pchip", anchors.n_total
            )
            return LossCurve(
                "pchip", curve.points, anchors.n_total, anchors, _interp=curve._interp
            )
        raise AnchorError(f"{problem}; anchors (l_loo, l_kref, l_lmo) = ({l0}, {lk}, {l2})")

    alpha = (mk - m0) / (m2 - m0)
    exponent = math.log(beta) / math.log(alpha)
    return LossCurve(
        "power",
        tuple(anchors.points()),
        anchors.n_total,
        anchors,
        exponent=exponent,
        scale=scale,
        offset=l0,
        beta=beta,
        alpha=alpha,
    )


def fit_interpolating_curve(
    points: Sequence[tuple[float, float]],
    kind: str = "pchip",
    n_total: int | None = None,
) -> LossCurve:
    """PCHIP or not-a-knot cubic spline through ``points`` (m strictly increasing)."""
    if kind not in ("pchip", "cubic_spline"):
        raise DomainError(f"unknown interpolating fit {kind!r}")
    pts = [(int(m), float(v)) for m, v in points]
    if len(pts) < 3:
        raise DomainError("an interpolating curve needs at least 3 points")
    ms = np.array([p[0] for p in pts], dtype=float)
    if np.any(np.diff(ms) == 0):
        raise DomainError(f"duplicate m values in {ms.tolist()}")
    if np.any(np.diff(ms) < 0):
        raise DomainError(f"m values must increase: {ms.tolist()}")
    vs = np.array([p[1] for p in pts])
    interp = PchipInterpolator(ms, vs) if kind == "pchip" else CubicSpline(ms, vs)
    return LossCurve(kind, tuple(pts), n_total, _interp=interp)


def _check_domain(curve: LossCurve, m: np.ndarray) -> None:
    if m.size and (m.min() < curve.m_lo or m.max() > curve.m_hi):
        raise DomainError(
            f"hold-out size outside the fitted domain [{curve.m_lo}, {curve.m_hi}]"
        )


def _out(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def eval_loss(curve: LossCurve, m, sigma2: float = 0.0):
    """Expected pure loss E(m; sigma2). May be negative (sigma2 too large at m)."""
    scalar = np.ndim(m) == 0
    m = np.asarray(m, dtype=float)
    _check_domain(curve, m)
    return _out(curve.practical(m) - sigma2, scalar)


def eval_variance_bound(curve: LossCurve, m, sigma2: float, mode: BoundMode = BoundMode()):
    """Variance bound C * sigma2_eff * E(m; sigma2) / m."""
    scalar = np.ndim(m) == 0
    m = np.asarray(m, dtype=float)
    E = np.asarray(eval_loss(curve, m, sigma2))
    if np.any(E < 0):
        bad = m[E < 0] if m.ndim else m
        raise DomainError(
            f"negative expected loss at m={np.min(bad):g}: sigma2={sigma2} is infeasible there"
        )
    return _out(mode.constant * mode.effective_sigma2(sigma2) * E / m, scalar)


def negative_utility(curve: LossCurve, m, sigma2: float, mode: BoundMode = BoundMode()):
    """Loss plus variance bound; its minimizer over m is the optimal hold-out size."""
    scalar = np.ndim(m) == 0
    E = np.asarray(eval_loss(curve, m, sigma2))
    V = np.asarray(eval_variance_bound(curve, m, sigma2, mode))
    return _out(E + V, scalar)


def utility_profile(curve: LossCurve, sigma2: float, mode: BoundMode = BoundMode()):
    """(m, E, V, E + V) over the whole integer domain; V and E + V are NaN where E < 0."""
    m = curve.domain()
    E = np.asarray(eval_loss(curve, m, sigma2))
    V = np.full(E.shape, np.nan)
    ok = E >= 0
    V[ok] = mode.constant * mode.effective_sigma2(sigma2) * E[ok] / m[ok]
    return m, E, V, E + V
