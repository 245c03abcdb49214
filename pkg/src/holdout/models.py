"""Predictors used for anchor estimation and simulation.

Two model kinds sit behind :func:`fit` / :func:`predict`: ordinary least squares
with an intercept, and a bagged forest of CART regression trees. OLS also exposes
its hat matrix, the linear-smoother structure SURE needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ModelError, RankDeficientError
from .rng import stream

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    min_leaf_size: int = 5
    max_depth: int | None = None
    features_per_split: int | None = None  # None -> max(1, p // 3)
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ModelError("n_trees must be >= 1")
        if self.min_leaf_size < 1:
            raise ModelError("min_leaf_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ModelError("max_depth must be >= 0 or None")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ModelError("features_per_split must be >= 1")

    def mtry(self, p: int) -> int:
        if self.features_per_split is None:
            return max(1, p // 3)
        return min(self.features_per_split, max(p, 1))


@dataclass(frozen=True)
class PredictorSpec:
    kind: str = "ols"
    forest: ForestConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ols", "random_forest"):
            raise ModelError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "random_forest" and self.forest is None:
            object.__setattr__(self, "forest", ForestConfig())
        if self.kind == "ols" and self.forest is not None:
            raise ModelError("forest_config is only valid for kind='random_forest'")

    @classmethod
    def ols(cls) -> "PredictorSpec":
        return cls("ols")

    @classmethod
    def random_forest(cls, seed: int = 0, **config) -> "PredictorSpec":
        return cls("random_forest", ForestConfig(**config), seed)

    @property
    def is_linear_smoother(self) -> bool:
        return self.kind == "ols"


def _augment(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def _pivoted_qr(A: np.ndarray):
    """Economic pivoted QR of ``A`` with a rank check against the largest pivot."""
    if A.shape[0] < A.shape[1]:
        raise RankDeficientError(
            f"design has {A.shape[0]} rows for {A.shape[1]} parameters"
        )
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size and diag[-1] <= RANK_RTOL * diag[0]:
        rank = int(np.sum(diag > RANK_RTOL * diag[0]))
        raise RankDeficientError(
            f"design is rank deficient: rank {rank} < {A.shape[1]} parameters"
        )
    return Q, R, piv


@dataclass(frozen=True)
class OLSModel:
    coef: np.ndarray  # intercept first
    training_size: int

    @property
    def n_features(self) -> int:
        return self.coef.size - 1

    def predict(self, X) -> np.ndarray:
        A = _augment(X)
        if A.shape[1] != self.coef.size:
            raise ModelError(
                f"model was trained on {self.n_features} features, got {A.shape[1] - 1}"
            )
        return A @ self.coef


def fit_ols(X, y) -> OLSModel:
    A = _augment(X)
    y = np.asarray(y, dtype=float)
    if A.shape[0] != y.shape[0]:
        raise ModelError(f"X has {A.shape[0]} rows but y has {y.shape[0]}")
    Q, R, piv = _pivoted_qr(A)
    coef = np.empty(A.shape[1])
    coef[piv] = scipy.linalg.solve_triangular(R, Q.T @ y)
    return OLSModel(coef, A.shape[0])


@dataclass(frozen=True)
class HatMatrix:
    """Projection ``H`` of the intercept-augmented design, so that fitted = H @ y."""

    H: np.ndarray
    n_parameters: int

    @property
    def trace(self) -> float:
        return float(np.trace(self.H))

    @property
    def trace_squared(self) -> float:
        """trace(H @ H), computed without forming the product."""
        return float(np.sum(self.H * self.H.T))

    @property
    def leverages(self) -> np.ndarray:
        return np.diag(self.H).copy()


def hat_matrix(X) -> HatMatrix:
    A = _augment(X)
    Q, _, _ = _pivoted_qr(A)
    return HatMatrix(Q @ Q.T, A.shape[1])


def leverages(X) -> np.ndarray:
    """Diagonal of the OLS hat matrix in O(N p^2)."""
    Q, _, _ = _pivoted_qr(_augment(X))
    return np.einsum("ij,ij->i", Q, Q)


# --- regression trees -------------------------------------------------------


@dataclass(frozen=True)
class Tree:
    """Array-encoded binary tree. ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best variance-reducing cut of one feature: (gain, threshold) or None.

    Gain is the increase in sum(left)^2/n_l + sum(right)^2/n_r, which equals the
    decrease in within-node squared error. The lowest qualifying threshold wins ties.
    """
    n = x.size
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    csum = np.cumsum(ys)
    total = csum[-1]
    nl = np.arange(min_leaf, n - min_leaf + 1)
    nl = nl[xs[nl - 1] < xs[nl]]  # cut only between distinct values
    if nl.size == 0:
        return None
    sl = csum[nl - 1]
    score = sl * sl / nl + (total - sl) ** 2 / (n - nl)
    i = int(np.argmax(score))
    gain = score[i] - total * total / n
    k = nl[i]
    return gain, 0.5 * (xs[k - 1] + xs[k])


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    min_leaf: int,
    max_depth: int | None,
    mtry: int,
    rng: np.random.Generator,
) -> Tree:
    n, p = X.shape
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.mean(y[idx])))
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if idx.size < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        yi = y[idx]
        if np.all(yi == yi[0]):
            continue
        tol = 1e-12 * max(1.0, float(np.dot(yi, yi)))
        best = None
        for f in np.sort(rng.choice(p, size=mtry, replace=False)):
            cand = _best_split(X[idx, f], yi, min_leaf)
            if cand is not None and cand[0] > tol and (best is None or cand[0] > best[0]):
                best = (cand[0], int(f), cand[1])
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        ln, rn = new_node(li), new_node(ri)
        feature[node], threshold[node], left[node], right[node] = f, thr, ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))

    return Tree(
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=float),
    )


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    training_size: int
    n_features: int
    config: ForestConfig = field(repr=False, default_factory=ForestConfig)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[1] != self.n_features:
            raise ModelError(
                f"model was trained on {self.n_features} features, got {X.shape[1]}"
            )
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def fit_forest(X, y, config: ForestConfig, seed: int = 0) -> ForestModel:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n != y.shape[0]:
        raise ModelError(f"X has {n} rows but y has {y.shape[0]}")
    if n < config.min_leaf_size:
        raise ModelError(f"{n} rows is fewer than min_leaf_size={config.min_leaf_size}")
    if p == 0:
        raise ModelError("a forest needs at least one feature")
    mtry = config.mtry(p)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(config.n_trees):
        rng = stream(child)
        if config.bootstrap:
            rows = rng.integers(0, n, size=n)
            Xb, yb = X[rows], y[rows]
        else:
            Xb, yb = X, y
        trees.append(build_tree(Xb, yb, config.min_leaf_size, config.max_depth, mtry, rng))
    return ForestModel(tuple(trees), n, p, config)


def fit(spec: PredictorSpec, X, y):
    if spec.kind == "ols":
        return fit_ols(X, y)
    return fit_forest(X, y, spec.forest, spec.seed)


def predict(model, X) -> np.ndarray:
    return model.predict(X)
