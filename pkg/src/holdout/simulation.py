"""Monte-Carlo experiments on a linear data-generating process.

The design matrix (and, for heteroskedastic noise, the per-row noise level) is
drawn once per experiment from the seed; repetitions redraw only the noise and,
where relevant, the split or partition.

Two loss definitions appear. The single-split experiments use the pure loss
``mean((pred - y)^2 - eps^2)``. The K-fold experiment reports its true variance
with the oracle loss ``mean((pred - f)^2)``, and alongside it the same quantity
computed from the pure loss, so the two can be compared.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cv import kfold_mse
from .dataset import Dataset, make_folds, random_split
from .errors import DomainError
from .models import PredictorSpec, fit_ols
from .rng import coerce, spawn

NOISE_KINDS = ("gaussian", "heteroskedastic", "gamma_centered")
NOISE_ALIASES = {"hetero": "heteroskedastic", "gamma": "gamma_centered"}
GAMMA_SHAPE = 5
HETERO_SLOPE = 0.5

DEFAULT_M_GRID = (10, 20, 40, 80, 160)
DEFAULT_K_GRID = (2, 4, 5, 8, 10, 20)


def _default_beta(p: int) -> tuple[float, ...]:
    head = (0.1, 1.2, 0.8)
    return tuple(head[:p]) + (0.0,) * max(0, p - len(head))


@dataclass(frozen=True)
class DgpConfig:
    n_rows: int = 400
    n_features: int = 10
    beta: tuple[float, ...] | None = None
    noise_kind: str = "gaussian"
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        kind = NOISE_ALIASES.get(self.noise_kind, self.noise_kind)
        if kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {self.noise_kind!r}; expected one of {NOISE_KINDS}")
        object.__setattr__(self, "noise_kind", kind)
        if self.n_features < 1 or self.n_rows <= self.n_features + 1:
            raise DomainError(
                f"need n_features >= 1 and n_rows > n_features + 1, got {self.n_rows} x {self.n_features}"
            )
        beta = _default_beta(self.n_features) if self.beta is None else tuple(float(b) for b in self.beta)
        if len(beta) != self.n_features:
            raise DomainError(f"beta has length {len(beta)}, expected {self.n_features}")
        object.__setattr__(self, "beta", beta)
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def symmetric(self) -> bool:
        return self.noise_kind != "gamma_centered"

    @property
    def bound_constant(self) -> float:
        return 4.0 if self.symmetric else 16.0

    @property
    def sigma2_bound(self) -> float:
        """Noise level entering the bound: the largest per-row variance."""
        if self.noise_kind == "heteroskedastic":
            return self.sigma2 * (1.0 + HETERO_SLOPE)
        return self.sigma2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = list(self.beta)
        return d


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    f_true: np.ndarray
    noise_var: np.ndarray  # per-row noise variance

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


def make_design(config: DgpConfig, rng) -> Design:
    rng = coerce(rng)
    X = rng.standard_normal((config.n_rows, config.n_features))
    f = X @ np.asarray(config.beta)
    if config.noise_kind == "heteroskedastic":
        Z = rng.uniform(0.0, 1.0, config.n_rows)
        var = config.sigma2 * (1.0 + HETERO_SLOPE * Z)
    else:
        var = np.full(config.n_rows, config.sigma2)
    return Design(X, f, var)


def draw_noise(design: Design, config: DgpConfig, rng, rows=None, size: int | None = None) -> np.ndarray:
    """Noise for ``rows`` (all rows by default); ``size`` stacks that many draws."""
    rng = coerce(rng)
    var = design.noise_var if rows is None else design.noise_var[rows]
    shape = var.shape if size is None else (size,) + var.shape
    if config.noise_kind == "gamma_centered":
        theta = math.sqrt(config.sigma2 / GAMMA_SHAPE)
        return rng.gamma(GAMMA_SHAPE, theta, shape) - GAMMA_SHAPE * theta
    return rng.standard_normal(shape) * np.sqrt(var)


def generate(config: DgpConfig, rng=None):
    """Draw ``(X, f_true, y, eps)``; ``rng`` defaults to the config seed."""
    rng = coerce(config.seed if rng is None else rng)
    design = make_design(config, rng)
    eps = draw_noise(design, config, rng)
    return design.X, design.f_true, design.f_true + eps, eps


def variance_with_se(values) -> tuple[float, float]:
    """Unbiased sample variance and its delta-method standard error (fourth moment)."""
    x = np.asarray(values, dtype=float)
    R = x.size
    if R < 2:
        raise DomainError("need at least 2 values for a variance")
    v = float(np.var(x, ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / R)


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return math.nan if a == 0 else math.inf
    return a / b


def _check_grid(config: DgpConfig, m_grid: Sequence[int], repetitions: int) -> list[int]:
    if repetitions < 2:
        raise DomainError(f"repetitions must be >= 2, got {repetitions}")
    grid = [int(m) for m in m_grid]
    limit = config.n_rows - config.n_features - 1
    if not grid or any(not 1 <= m <= limit for m in grid):
        raise DomainError(f"every m must lie in [1, {limit}] (n_rows - n_features - 1), got {grid}")
    return grid


def _streams(config: DgpConfig, rng, n: int):
    root = coerce(config.seed if rng is None else rng)
    design_rng, *rest = spawn(root, n + 1)
    return design_rng, rest


@dataclass(frozen=True)
class SplitRow:
    m: int
    repetitions: int
    empirical_variance: float
    variance_se: float
    mean_pure_loss: float
    bound: float
    bound_se: float  # from the MC error of mean_pure_loss
    ratio: float  # bound / empirical_variance
    ratio_se: float

    @property
    def slack_se(self) -> float:
        """Standard error of empirical_variance - bound, ignoring their correlation."""
        return math.hypot(self.variance_se, self.bound_se)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SplitVarianceReport:
    config: DgpConfig
    rows: tuple[SplitRow, ...]
    constant: float
    sigma2_bound: float
    protocol: str = "refit"
    loss: str = "pure"

    def to_dict(self) -> dict:
        return {
            "experiment": "split",
            "protocol": self.protocol,
            "loss": self.loss,
            "constant": self.constant,
            "sigma2_bound": self.sigma2_bound,
            "dgp": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    def table(self) -> list[dict]:
        return [r.to_dict() for r in self.rows]


def _split_row(m: int, losses: np.ndarray, constant: float, s2: float) -> SplitRow:
    var, se = variance_with_se(losses)
    mean = float(losses.mean())
    bound = constant * s2 * mean / m
    bound_se = constant * s2 * math.sqrt(var / losses.size) / m
    ratio = _ratio(bound, var)
    if var > 0 and math.isfinite(ratio):
        ratio_se = abs(ratio) * math.hypot(se / var, bound_se / bound if bound else 0.0)
    else:
        ratio_se = math.nan
    return SplitRow(m, losses.size, var, se, mean, bound, bound_se, ratio, ratio_se)


def run_split_experiment(
    config: DgpConfig,
    m_grid: Sequence[int] = DEFAULT_M_GRID,
    repetitions: int = 500,
    rng=None,
) -> SplitVarianceReport:
    """Single-split variance versus its bound.

    Each repetition redraws all noise and a random test subset of size m, refits OLS
    on the complement and records the pure loss on the test side.
    """
    grid = _check_grid(config, m_grid, repetitions)
    design_rng, streams = _streams(config, rng, len(grid))
    design = make_design(config, design_rng)
    s2 = config.sigma2_bound
    rows = []
    for m, r in zip(grid, streams):
        losses = np.empty(repetitions)
        for t in range(repetitions):
            eps = draw_noise(design, config, r)
            y = design.f_true + eps
            sp = random_split(design.n_rows, m, r)
            tr, te = sp.train_indices, sp.test_indices
            pred = fit_ols(design.X[tr], y[tr]).predict(design.X[te])
            losses[t] = np.mean((pred - y[te]) ** 2 - eps[te] ** 2)
        rows.append(_split_row(m, losses, config.bound_constant, s2))
    return SplitVarianceReport(config, tuple(rows), config.bound_constant, s2)


@dataclass(frozen=True)
class FixedModelRow:
    m: int
    repetitions: int
    empirical_variance: float
    variance_se: float
    exact_variance: float  # 4 sum_j sigma_j^2 delta_j^2 / m^2
    mean_pure_loss: float
    model_error: float  # sum_j delta_j^2 / m
    bound: float  # C sigma2_bound model_error / m

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FixedModelReport:
    config: DgpConfig
    rows: tuple[FixedModelRow, ...]
    constant: float
    sigma2_bound: float

    def to_dict(self) -> dict:
        return {
            "experiment": "fixed",
            "protocol": "fixed_model",
            "loss": "pure",
            "constant": self.constant,
            "sigma2_bound": self.sigma2_bound,
            "dgp": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    def table(self) -> list[dict]:
        return [r.to_dict() for r in self.rows]


def fixed_model_losses(pred: np.ndarray, f_test: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Pure loss of fixed predictions under each row of test-noise draws ``eps``."""
    delta = pred - f_test
    return np.mean(delta**2 - 2 * delta * eps, axis=-1)


def run_fixed_model_experiment(
    config: DgpConfig,
    m_grid: Sequence[int] = DEFAULT_M_GRID,
    repetitions: int = 2000,
    rng=None,
) -> FixedModelReport:
    """Hold one trained OLS model fixed per m and redraw only the test noise."""
    grid = _check_grid(config, m_grid, repetitions)
    design_rng, streams = _streams(config, rng, len(grid))
    design = make_design(config, design_rng)
    C, s2 = config.bound_constant, config.sigma2_bound
    rows = []
    for m, r in zip(grid, streams):
        y = design.f_true + draw_noise(design, config, r)
        sp = random_split(design.n_rows, m, r)
        tr, te = sp.train_indices, sp.test_indices
        pred = fit_ols(design.X[tr], y[tr]).predict(design.X[te])
        delta = pred - design.f_true[te]
        eps = draw_noise(design, config, r, rows=te, size=repetitions)
        losses = fixed_model_losses(pred, design.f_true[te], eps)
        var, se = variance_with_se(losses)
        err = float(np.sum(delta**2) / m)
        exact = float(4.0 * np.sum(design.noise_var[te] * delta**2) / m**2)
        rows.append(FixedModelRow(m, repetitions, var, se, exact, float(losses.mean()), err, C * s2 * err / m))
    return FixedModelReport(config, tuple(rows), C, s2)


def clt_plugin_variance(fold_losses) -> float:
    """Sample variance (divisor K - 1) of the fold losses, divided by K."""
    x = np.asarray(fold_losses, dtype=float)
    if x.size < 2:
        raise DomainError(f"need at least 2 fold losses, got {x.size}")
    return float(np.var(x, ddof=1) / x.size)


def nested_cv_variance(data: Dataset, spec: PredictorSpec, K: int, partitions: int, rng=None) -> float:
    """Variance of the K-fold loss across partition redraws, the response held fixed."""
    if partitions < 2:
        raise DomainError(f"partitions must be >= 2, got {partitions}")
    rng = coerce(rng)
    values = [kfold_mse(spec, data, K, rng) for _ in range(partitions)]
    return float(np.var(values, ddof=1))


@dataclass(frozen=True)
class KfoldRow:
    K: int
    m: int
    repetitions: int
    true_mc_variance: float  # oracle loss
    true_mc_variance_se: float
    true_mc_variance_pure: float  # pure loss, same draws
    true_mc_variance_pure_se: float
    mean_oracle_loss: float
    max_fold_variance: float
    max_fold_variance_se: float
    nested_cv_variance: float
    clt_plugin_variance: float  # single run
    clt_plugin_mean: float  # averaged over repetitions
    bound_raw_c4: float
    bound_raw_c16: float
    bound_clt_c4: float
    bound_clt_c16: float
    ratios: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        ratios = d.pop("ratios")
        d.update({f"ratio_{k}": v for k, v in ratios.items()})
        return d


@dataclass(frozen=True)
class KfoldVarianceReport:
    config: DgpConfig
    rows: tuple[KfoldRow, ...]
    sigma2_bound: float
    partitions_per_y: int

    def to_dict(self) -> dict:
        return {
            "experiment": "kfold",
            "loss": {"true_mc_variance": "oracle", "true_mc_variance_pure": "pure",
                     "clt_plugin_variance": "practical", "nested_cv_variance": "practical"},
            "sigma2_bound": self.sigma2_bound,
            "partitions_per_y": self.partitions_per_y,
            "dgp": self.config.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    def table(self) -> list[dict]:
        return [r.to_dict() for r in self.rows]


def run_kfold_experiment(
    config: DgpConfig,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    repetitions: int = 500,
    partitions_per_y: int = 50,
    rng=None,
) -> KfoldVarianceReport:
    """K-fold estimator variances against the single-split and CLT-scaled bounds.

    Per K, every repetition draws fresh noise and a fresh partition. Bounds use the
    mean oracle loss as E and m = floor(N / K).
    """
    if repetitions < 2:
        raise DomainError(f"repetitions must be >= 2, got {repetitions}")
    grid = [int(k) for k in k_grid]
    N, p = config.n_rows, config.n_features
    for K in grid:
        if not 2 <= K or N - (N + K - 1) // K < p + 1:
            raise DomainError(f"K={K} leaves fewer than p + 1 = {p + 1} training rows or is < 2")
    design_rng, streams = _streams(config, rng, len(grid))
    design = make_design(config, design_rng)
    X, f = design.X, design.f_true
    s2 = config.sigma2_bound
    spec = PredictorSpec.ols()
    rows = []
    for K, r in zip(grid, streams):
        m = N // K
        oracle = np.empty((repetitions, K))
        pure = np.empty((repetitions, K))
        practical = np.empty((repetitions, K))
        first_y = None
        for t in range(repetitions):
            eps = draw_noise(design, config, r)
            y = f + eps
            if first_y is None:
                first_y = y
            for k, sp in enumerate(make_folds(N, K, r).splits()):
                tr, te = sp.train_indices, sp.test_indices
                pred = fit_ols(X[tr], y[tr]).predict(X[te])
                oracle[t, k] = np.mean((pred - f[te]) ** 2)
                practical[t, k] = np.mean((pred - y[te]) ** 2)
                pure[t, k] = practical[t, k] - np.mean(eps[te] ** 2)
        true_var, true_se = variance_with_se(oracle.mean(axis=1))
        pure_var, pure_se = variance_with_se(pure.mean(axis=1))
        fold_vars = [variance_with_se(oracle[:, k]) for k in range(K)]
        j = int(np.argmax([v for v, _ in fold_vars]))
        E = float(oracle.mean())
        nested = nested_cv_variance(Dataset.from_arrays(X, first_y), spec, K, partitions_per_y, r)
        clt_single = clt_plugin_variance(practical[0])
        clt_mean = float(np.mean([clt_plugin_variance(row) for row in practical]))
        raw4, raw16 = 4.0 * s2 * E / m, 16.0 * s2 * E / m
        clt4, clt16 = raw4 / K, raw16 / K
        ratios = {
            "bound_raw_c4": _ratio(raw4, true_var),
            "bound_raw_c16": _ratio(raw16, true_var),
            "bound_clt_c4": _ratio(clt4, true_var),
            "bound_clt_c16": _ratio(clt16, true_var),
            "nested_cv": _ratio(nested, true_var),
            "clt_plugin": _ratio(clt_single, true_var),
            "clt_plugin_mean": _ratio(clt_mean, true_var),
            "bound_clt_c4_pure": _ratio(clt4, pure_var),
        }
        rows.append(
            KfoldRow(
                K, m, repetitions, true_var, true_se, pure_var, pure_se, E,
                fold_vars[j][0], fold_vars[j][1], nested, clt_single, clt_mean,
                raw4, raw16, clt4, clt16, ratios,
            )
        )
    return KfoldVarianceReport(config, tuple(rows), s2, partitions_per_y)
