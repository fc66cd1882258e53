"""Random block precision matrices and Gaussian samples from them.

Randomness is drawn from numpy's PCG64 with :class:`numpy.random.SeedSequence`
stream splitting: the edge set, each diagonal block and each off-diagonal
block get their own child stream keyed by ``(purpose, i[, j])``. A truth is
therefore a pure function of the config, independent of draw order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Tuple

import numpy as np

from .core import Dataset, EdgeGraph, NodePartition

OFFDIAG_VALUES = (0.0, 0.05, -0.05, -0.2, 0.2)

_EDGES, _DIAG, _OFFDIAG, _SAMPLE = 0, 1, 2, 3


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class GeneratorConfig:
    p: int
    k: int
    density: float
    n: int = 50
    seed: int = 0
    diag_range: Tuple[float, float] = (0.5, 1.0)
    offdiag_values: Tuple[float, ...] = OFFDIAG_VALUES
    shift_margin: float = 0.5
    within_node: str = "dense"

    def __post_init__(self):
        if self.p < 2 or self.k < 1:
            raise ValueError("need p >= 2 and k >= 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if self.n_edges < 1:
            raise ValueError("density * C(p, 2) must round to at least one edge")
        if not any(v != 0 for v in self.offdiag_values):
            raise ValueError("offdiag_values needs a non-zero value")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.within_node not in ("dense", "diagonal"):
            raise ValueError("within_node must be 'dense' or 'diagonal'")

    @property
    def n_edges(self) -> int:
        return int(round(self.density * comb(self.p, 2)))

    @property
    def partition(self) -> NodePartition:
        return NodePartition.uniform(self.p, self.k)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    omega: np.ndarray
    graph: EdgeGraph
    partition: NodePartition
    shift: float
    config: GeneratorConfig = field(default=None)

    @property
    def sigma_true(self) -> np.ndarray:
        return np.diag(self.omega).copy()

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.omega)


def random_edges(p: int, m: int, rng: np.random.Generator) -> list:
    """``m`` distinct pairs ``i < j`` drawn uniformly (an Erdos-Renyi graph with fixed size)."""
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    idx = rng.choice(len(pairs), size=m, replace=False)
    return sorted(pairs[t] for t in idx)


def generate_truth(cfg: GeneratorConfig) -> GroundTruth:
    """Build a positive definite block precision matrix on a random graph.

    Diagonal blocks hold uniform draws symmetrized as ``(B + B^T) / 2``
    (with ``within_node="diagonal"`` only their diagonal is kept, which puts
    the truth inside the estimator's parameter space); each edge block takes values from ``cfg.offdiag_values`` uniformly,
    redrawn until not all zero. The result is shifted by ``rho * I`` with
    ``rho = |lambda_min| + shift_margin``.
    """
    part = cfg.partition
    k = cfg.k
    d = part.total_dim
    omega = np.zeros((d, d))
    lo, hi = cfg.diag_range
    for i in range(cfg.p):
        b = _stream(cfg.seed, _DIAG, i).uniform(lo, hi, size=(k, k))
        b = (b + b.T) / 2
        if cfg.within_node == "diagonal":
            b = np.diag(np.diag(b))
        omega[part.columns(i), part.columns(i)] = b
    values = np.asarray(cfg.offdiag_values, dtype=float)
    edges = random_edges(cfg.p, cfg.n_edges, _stream(cfg.seed, _EDGES))
    for i, j in edges:
        rng = _stream(cfg.seed, _OFFDIAG, i, j)
        block = np.zeros((k, k))
        while not block.any():
            block = rng.choice(values, size=(k, k))
        omega[part.columns(i), part.columns(j)] = block
        omega[part.columns(j), part.columns(i)] = block.T
    lam_min = float(np.linalg.eigvalsh(omega)[0])
    rho = abs(lam_min) + cfg.shift_margin
    omega[np.diag_indices(d)] += rho
    return GroundTruth(omega, EdgeGraph.from_pairs(cfg.p, edges), part, rho, cfg)


def sample(truth: GroundTruth, n: int, seed: int) -> Dataset:
    """Draw ``n`` rows from ``N(0, omega^{-1})`` via the Cholesky factor of the covariance.

    The returned dataset is not centered.
    """
    cov = truth.covariance
    cov = (cov + cov.T) / 2
    chol = np.linalg.cholesky(cov)
    z = _stream(seed, _SAMPLE).standard_normal((n, cov.shape[0]))
    return Dataset(z @ chol.T, truth.partition)
