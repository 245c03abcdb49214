"""Tabular data ingestion, random hold-out splits and K-fold partitions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DomainError

MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none", "?"})
CATEGORICAL_POLICIES = ("one_hot_drop_first", "error")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    response: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise DataError("features must be 2-D and response 1-D")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"features have {X.shape[0]} rows but response has {y.shape[0]} entries"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if X.shape[0] <= X.shape[1] + 1:
            raise DataError(
                f"need more than p + 1 = {X.shape[1] + 1} rows, got {X.shape[0]}"
            )
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "response", _readonly(y))
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_arrays(cls, X, y, feature_names: Sequence[str] = ()) -> "Dataset":
        return cls(np.asarray(X, dtype=float), np.asarray(y, dtype=float), tuple(feature_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    test_indices: np.ndarray
    n_rows: int = field(default=-1)

    def __post_init__(self):
        train = np.asarray(self.train_indices, dtype=np.intp)
        test = np.asarray(self.test_indices, dtype=np.intp)
        n = self.n_rows if self.n_rows >= 0 else train.size + test.size
        if train.size < 1 or test.size < 1:
            raise DomainError("a split needs at least one train and one test index")
        covered = np.zeros(n, dtype=int)
        np.add.at(covered, train, 1)
        np.add.at(covered, test, 1)
        if train.size + test.size != n or not np.all(covered == 1):
            raise DomainError("train and test indices must partition 0..N-1")
        object.__setattr__(self, "train_indices", train)
        object.__setattr__(self, "test_indices", test)
        object.__setattr__(self, "n_rows", n)

    @property
    def m(self) -> int:
        return self.test_indices.size

    @property
    def n(self) -> int:
        return self.train_indices.size


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]

    def __post_init__(self):
        folds = tuple(np.asarray(f, dtype=np.intp) for f in self.folds)
        if len(folds) < 2:
            raise DomainError("a fold plan needs K >= 2 folds")
        sizes = [f.size for f in folds]
        if max(sizes) - min(sizes) > 1 or min(sizes) < 1:
            raise DomainError(f"fold sizes must be nonempty and within 1: {sizes}")
        allidx = np.sort(np.concatenate(folds))
        if not np.array_equal(allidx, np.arange(allidx.size)):
            raise DomainError("folds must partition 0..N-1")
        object.__setattr__(self, "folds", folds)

    @property
    def K(self) -> int:
        return len(self.folds)

    @property
    def n_rows(self) -> int:
        return sum(f.size for f in self.folds)

    def split(self, k: int) -> Split:
        """Fold ``k`` as the test side, every other fold as training."""
        # sorted so that refits do not depend on fold order
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != k]))
        return Split(train, self.folds[k], self.n_rows)

    def splits(self):
        for k in range(self.K):
            yield self.split(k)


def random_split(n_rows: int, m: int, rng: np.random.Generator) -> Split:
    """Uniformly random test subset of exactly ``m`` of ``n_rows`` indices."""
    if not 1 <= m <= n_rows - 1:
        raise DomainError(f"test size m={m} must lie in [1, {n_rows - 1}]")
    perm = rng.permutation(n_rows)
    return Split(np.sort(perm[m:]), np.sort(perm[:m]), n_rows)


def make_folds(n_rows: int, K: int, rng: np.random.Generator) -> FoldPlan:
    """Shuffle, then cut into K folds; the first ``n_rows % K`` folds get one extra row."""
    if not 2 <= K <= n_rows:
        raise DomainError(f"fold count K={K} must lie in [2, {n_rows}]")
    perm = rng.permutation(n_rows)
    base, extra = divmod(n_rows, K)
    bounds = np.cumsum([0] + [base + (1 if k < extra else 0) for k in range(K)])
    return FoldPlan(tuple(np.sort(perm[bounds[k]:bounds[k + 1]]) for k in range(K)))


def _parse_float(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def load_csv(
    path: str | Path,
    target_column: str,
    categorical_policy: str = "one_hot_drop_first",
) -> Dataset:
    """Read a headered CSV into a :class:`Dataset`.

    Non-numeric feature columns are categorical. Under ``one_hot_drop_first`` each
    becomes indicator columns for all but its lexicographically first level, named
    ``"<column>=<level>"``. Missing cells are an error, never imputed.
    """
    if categorical_policy not in CATEGORICAL_POLICIES:
        raise DataError(f"unknown categorical policy {categorical_policy!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if target_column not in header:
        raise DataError(f"unknown column {target_column!r}; header is {header}")
    if not body:
        raise DataError(f"{path} has a header but no data rows")

    ncol = len(header)
    columns: list[list[str]] = [[] for _ in range(ncol)]
    for i, row in enumerate(body):
        if len(row) != ncol:
            raise DataError(f"row {i} has {len(row)} cells, header has {ncol}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in MISSING_TOKENS:
                raise DataError(f"missing value at ({i}, {header[j]})")
            columns[j].append(cell)

    names: list[str] = []
    blocks: list[np.ndarray] = []
    y = None
    for j, name in enumerate(header):
        parsed = [_parse_float(c) for c in columns[j]]
        numeric = all(v is not None for v in parsed)
        if numeric:
            bad = [i for i, v in enumerate(parsed) if not math.isfinite(v)]
            if bad:
                raise DataError(f"non-finite value at ({bad[0]}, {name})")
        if name == target_column:
            if not numeric:
                raise DataError(f"target column {name!r} is not numeric")
            y = np.array(parsed, dtype=float)
            continue
        if numeric:
            names.append(name)
            blocks.append(np.array(parsed, dtype=float)[:, None])
            continue
        if categorical_policy == "error":
            raise DataError(f"column {name!r} is categorical and policy is 'error'")
        levels = sorted(set(columns[j]))
        values = np.array(columns[j])
        for level in levels[1:]:
            names.append(f"{name}={level}")
            blocks.append((values == level).astype(float)[:, None])

    X = np.hstack(blocks) if blocks else np.empty((len(body), 0))
    return Dataset(X, y, tuple(names))
