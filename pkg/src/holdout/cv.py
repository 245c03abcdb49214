"""Empirical cross-validation losses and the three loss anchors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Split, make_folds
from .errors import AnchorError, DomainError
from .models import PredictorSpec, fit, leverages
from .rng import coerce


def split_mse(spec: PredictorSpec, data: Dataset, split: Split) -> float:
    """Test-side mean squared error of a model trained on the train side only."""
    X, y = data.features, data.response
    model = fit(spec, X[split.train_indices], y[split.train_indices])
    resid = model.predict(X[split.test_indices]) - y[split.test_indices]
    return float(np.mean(resid**2))


def kfold_losses(spec: PredictorSpec, data: Dataset, K: int, rng) -> np.ndarray:
    """Per-fold test MSEs for one random K-fold partition."""
    plan = make_folds(data.n_rows, K, coerce(rng))
    return np.array([split_mse(spec, data, s) for s in plan.splits()])


def kfold_mse(spec: PredictorSpec, data: Dataset, K: int, rng) -> float:
    """Unweighted mean of the fold MSEs (folds may differ in size by one)."""
    losses = kfold_losses(spec, data, K, rng)
    return math.fsum(losses) / losses.size


def loocv_mse(
    spec: PredictorSpec,
    data: Dataset,
    subsample: int | None = None,
    rng=None,
) -> float:
    """Leave-one-out MSE, optionally over a uniform subsample of held-out rows.

    OLS uses the exact shortcut e_i / (1 - h_ii); other models refit per row.
    """
    N = data.n_rows
    if subsample is None or subsample >= N:
        rows = np.arange(N)
    else:
        if subsample < 1:
            raise DomainError(f"LOOCV subsample must be >= 1, got {subsample}")
        rows = np.sort(coerce(rng).choice(N, size=subsample, replace=False))

    X, y = data.features, data.response
    if spec.kind == "ols":
        model = fit(spec, X, y)
        h = leverages(X)
        if np.any(h[rows] >= 1 - 1e-12):
            raise DomainError("an observation has leverage 1; its LOO prediction is undefined")
        e = (y - model.predict(X))[rows] / (1 - h[rows])
        return float(np.mean(e**2))

    mask = np.ones(N, dtype=bool)
    sq = np.empty(rows.size)
    for t, i in enumerate(rows):
        mask[i] = False
        model = fit(spec, X[mask], y[mask])
        mask[i] = True
        sq[t] = (model.predict(X[i : i + 1])[0] - y[i]) ** 2
    return float(np.mean(sq))


@dataclass(frozen=True)
class LossAnchors:
    """Empirical losses at m = 1 (LOO), floor(N/K_ref), and floor(N/2) (leave-most-out)."""

    l_loo: float
    l_kref: float
    l_lmo: float
    n_total: int
    k_ref: int = 5
    loocv_subsample: int | None = None

    def __post_init__(self):
        losses = (self.l_loo, self.l_kref, self.l_lmo)
        if not all(np.isfinite(v) and v >= 0 for v in losses):
            raise AnchorError(f"anchor losses must be finite and >= 0, got {losses}")
        if not self.m_loo < self.m_kref < self.m_lmo:
            raise AnchorError(
                f"anchor sizes not increasing: m = {self.m_loo}, {self.m_kref}, {self.m_lmo} "
                f"(N={self.n_total}, K_ref={self.k_ref}); need N >= 2 * K_ref"
            )

    @property
    def m_loo(self) -> int:
        return 1

    @property
    def m_kref(self) -> int:
        return self.n_total // self.k_ref

    @property
    def m_lmo(self) -> int:
        return self.n_total // 2

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (self.m_loo, self.m_kref, self.m_lmo)

    @property
    def losses(self) -> tuple[float, float, float]:
        return (self.l_loo, self.l_kref, self.l_lmo)

    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.sizes, self.losses))

    def to_dict(self) -> dict:
        return {
            "l_loo": self.l_loo,
            "l_kref": self.l_kref,
            "l_lmo": self.l_lmo,
            "m_loo": self.m_loo,
            "m_kref": self.m_kref,
            "m_lmo": self.m_lmo,
            "n_total": self.n_total,
            "k_ref": self.k_ref,
            "loocv_subsample": self.loocv_subsample,
        }


def estimate_anchors(
    spec: PredictorSpec,
    data: Dataset,
    K_ref: int = 5,
    rng=None,
    loocv_subsample: int | None = None,
    loo_override: float | None = None,
) -> LossAnchors:
    """Compute LOOCV, K_ref-fold and 2-fold losses for ``data``.

    ``loo_override`` replaces the LOOCV loss (e.g. with a SURE-based estimate).
    """
    N = data.n_rows
    if N < 2 * K_ref:
        raise AnchorError(f"need N >= 2 * K_ref = {2 * K_ref} rows, got {N}")
    rng = coerce(rng)
    if loo_override is None:
        l_loo = loocv_mse(spec, data, loocv_subsample, rng)
    else:
        l_loo = float(loo_override)
        loocv_subsample = None
    l_kref = kfold_mse(spec, data, K_ref, rng)
    l_lmo = kfold_mse(spec, data, 2, rng)
    used = loocv_subsample if loocv_subsample is not None and loocv_subsample < N else None
    return LossAnchors(l_loo, l_kref, l_lmo, N, K_ref, used)


def pure_loss(predictions, f_true, y) -> float:
    """Test MSE minus the test-noise second moment; needs the true regression function."""
    pred = np.asarray(predictions, dtype=float)
    f = np.asarray(f_true, dtype=float)
    y = np.asarray(y, dtype=float)
    if not pred.shape == f.shape == y.shape:
        raise DomainError(
            f"length mismatch: predictions {pred.shape}, f_true {f.shape}, y {y.shape}"
        )
    eps = y - f
    return float(np.mean((pred - y) ** 2 - eps**2))
