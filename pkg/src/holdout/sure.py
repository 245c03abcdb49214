"""Stein's unbiased risk estimate for linear smoothers (OLS), and its variance estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ModelError
from .models import PredictorSpec, _augment, _pivoted_qr


@dataclass(frozen=True)
class SureResult:
    sure: float
    sure_for_sure: float
    divergence: float
    trace_h_squared: float
    n_total: int
    sigma2: float

    @property
    def per_observation(self) -> float:
        return self.sure / self.n_total


def sure_estimate(residual_ss: float, divergence: float, sigma2: float, n_total: int) -> float:
    """||mu_hat - y||^2 + 2 sigma2 div - sigma2 N, unbiased for E||mu_hat - mu||^2."""
    return residual_ss + 2.0 * sigma2 * divergence - sigma2 * n_total


def sure_variance_estimate(
    residual_ss: float, trace_h_squared: float, sigma2: float, n_total: int
) -> float:
    """4 ||mu_hat - y||^2 + 4 sigma2 trace(H^2) - 2 N sigma2."""
    return 4.0 * residual_ss + 4.0 * sigma2 * trace_h_squared - 2.0 * n_total * sigma2


def sure_analysis(X, y, sigma2: float) -> SureResult:
    """SURE and its variance estimate for the OLS fit of ``y`` on ``X``."""
    # H = Q Q^T; traces come from Q without forming the N x N matrix.
    Q, _, _ = _pivoted_qr(_augment(X))
    y = np.asarray(y, dtype=float)
    rss = float(np.sum((Q @ (Q.T @ y) - y) ** 2))
    div = float(np.sum(Q * Q))
    tr2 = float(np.sum((Q.T @ Q) ** 2))
    return SureResult(
        sure_estimate(rss, div, sigma2, y.size),
        sure_variance_estimate(rss, tr2, sigma2, y.size),
        div,
        tr2,
        y.size,
        float(sigma2),
    )


def sure_anchor(spec: PredictorSpec, data: Dataset, sigma2: float) -> float:
    """Per-observation SURE, an estimate of the pure loss near m = 0.

    Add ``sigma2`` back to put it on the practical-loss scale of the LOOCV anchor.
    """
    if not spec.is_linear_smoother:
        raise ModelError(f"divergence unavailable for kind={spec.kind!r}; SURE needs OLS")
    return sure_analysis(data.features, data.response, sigma2).per_observation
