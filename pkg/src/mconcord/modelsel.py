"""Penalty grids, warm-started paths and K-fold cross-validation."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .core import Dataset, EdgeGraph, NodePartition, center_columns
from .metrics import aggregate_univariate_blocks
from .objective import gram_loss
from .optimizer import FitConfig, FitResult, empty_solution_threshold, fit


def lambda_max(data: Dataset) -> float:
    """Smallest penalty at which the empty graph solves the problem.

    Evaluated at the stationary diagonal of the empty model (see
    :func:`~mconcord.optimizer.empty_solution_threshold`). Data that is not
    centered is centered first.
    """
    data = center_columns(data)
    return empty_solution_threshold(data.gram, data.partition)


@dataclass(frozen=True)
class LambdaGrid:
    values: tuple
    lambda_max: float
    ratio: float = 0.01
    count: int = 30

    @classmethod
    def build(cls, lam_max: float, count: int = 30, ratio: float = 0.01) -> "LambdaGrid":
        if count < 1:
            raise ValueError("grid needs at least one point")
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if not lam_max > 0:
            raise ValueError("lambda_max must be positive")
        values = np.geomspace(lam_max, lam_max * ratio, count) if count > 1 else np.array([lam_max])
        return cls(tuple(float(v) for v in values), float(lam_max), float(ratio), int(count))

    @classmethod
    def for_data(cls, data: Dataset, count: int = 30, ratio: float = 0.01) -> "LambdaGrid":
        return cls.build(lambda_max(data), count, ratio)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def parse_grid_spec(spec: str):
    """``"count:ratio"`` -> ``(count, ratio)``."""
    try:
        count, ratio = spec.split(":")
        return int(count), float(ratio)
    except ValueError:
        raise ValueError(f"grid spec must look like COUNT:RATIO, got {spec!r}") from None


def regularization_path(
    data: Dataset, lambdas: Sequence[float], base: Optional[FitConfig] = None
) -> List[FitResult]:
    """Fit along ``lambdas`` in the given order, warm-starting each fit from the previous."""
    base = base or FitConfig(lam=0.0)
    data = center_columns(data)
    results = []
    init = None
    for lam in lambdas:
        res = fit(data, replace(base, lam=float(lam)), init=init)
        results.append(res)
        init = res.estimate
    return results


@dataclass(frozen=True)
class CvConfig:
    """Cross-validation settings.

    ``patience`` stops the descent along the grid once the fold-mean loss has
    not improved for that many consecutive penalties; the remaining grid
    points are reported as NaN. ``None`` evaluates the whole grid.
    """

    folds: int = 5
    seed: int = 0
    grid: Optional[LambdaGrid] = None
    count: int = 30
    ratio: float = 0.01
    patience: Optional[int] = None

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be a positive integer")


@dataclass
class CvResult:
    best_lambda: float
    grid: LambdaGrid
    mean_loss: np.ndarray
    sd_loss: np.ndarray
    fold_losses: np.ndarray = field(repr=False)
    folds: int = 5
    seed: int = 0

    @property
    def best_index(self) -> int:
        return self.grid.values.index(self.best_lambda)


def fold_assignment(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold label per row; a seeded permutation dealt round-robin into ``folds`` groups."""
    if folds < 2 or n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[perm] = np.arange(n) % folds
    return labels


class _Fold:
    """Training data, held-out second moments and the current warm start of one fold."""

    def __init__(self, data: Dataset, train_rows, val_rows):
        train_raw = data.values[train_rows]
        mean = train_raw.mean(axis=0)
        self.train = Dataset(train_raw - mean, data.partition, centered=True)
        val = data.values[val_rows] - mean
        self.val_gram = val.T @ val / val.shape[0]
        self.init = None

    def step(self, cfg: FitConfig) -> float:
        res = fit(self.train, cfg, init=self.init)
        self.init = res.estimate
        return gram_loss(res.estimate.sigma, res.estimate.to_dense(), self.val_gram)


def cross_validate(
    data: Dataset,
    cfg: CvConfig = CvConfig(),
    base: Optional[FitConfig] = None,
    jobs: int = 1,
) -> CvResult:
    """Pick the penalty minimising the held-out pseudo-likelihood loss.

    Every fold follows the grid from the largest penalty down, fitting on the
    remaining rows (re-centered with the training means) with warm starts,
    and is scored by the unpenalized loss on its held-out rows. Ties go to the
    larger penalty. Folds of one grid point run on ``jobs`` threads; results
    do not depend on ``jobs``.
    """
    base = base or FitConfig(lam=0.0)
    data = center_columns(data)
    grid = cfg.grid or LambdaGrid.for_data(data, cfg.count, cfg.ratio)
    labels = fold_assignment(data.n, cfg.folds, cfg.seed)
    sizes = np.bincount(labels, minlength=cfg.folds)
    if sizes.min() < 2:
        raise ValueError(f"every fold needs at least 2 rows, got sizes {sizes.tolist()}")
    folds = [
        _Fold(data, np.flatnonzero(labels != f), np.flatnonzero(labels == f))
        for f in range(cfg.folds)
    ]
    lambdas = list(grid.values)
    losses = np.full((cfg.folds, len(lambdas)), np.nan)
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        best_t, stale = 0, 0
        for t, lam in enumerate(lambdas):
            fcfg = replace(base, lam=float(lam))
            if pool is None:
                col = [f.step(fcfg) for f in folds]
            else:
                col = list(pool.map(lambda f: f.step(fcfg), folds))
            losses[:, t] = col
            mean_t = losses[:, t].mean()
            if t == 0 or mean_t < losses[:, best_t].mean():
                best_t, stale = t, 0
            else:
                stale += 1
                if cfg.patience is not None and stale >= cfg.patience:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    mean = losses.mean(axis=0)
    sd = losses.std(axis=0, ddof=1)
    return CvResult(lambdas[best_t], grid, mean, sd, losses, cfg.folds, cfg.seed)


def bic(result: FitResult, data: Dataset) -> float:
    """``2 n loss + log(n) * (#entries in active blocks)``.

    Reporting only. On multi-attribute graphs this criterion tends to pick the
    empty model, so it is never used for selection here.
    """
    warnings.warn("BIC is unreliable for block-structured graphs; use cross_validate", stacklevel=2)
    data = center_columns(data)
    est = result.estimate
    dims = est.partition.dims
    free = sum(dims[i] * dims[j] for i, j in est.blocks)
    loss = gram_loss(est.sigma, est.to_dense(), data.gram)
    return 2 * data.n * loss + np.log(data.n) * free


def univariate_view(data: Dataset) -> Dataset:
    """Same samples with every column as its own node (the concord-mode baseline)."""
    return Dataset(data.values, NodePartition.singletons(data.total_dim), centered=data.centered)


def node_edges(result: FitResult, partition: NodePartition) -> EdgeGraph:
    """Node-level edges of a fit; univariate fits are aggregated onto ``partition``."""
    graph = result.edge_graph()
    if result.estimate.partition == partition:
        return graph
    return aggregate_univariate_blocks(graph, partition)
