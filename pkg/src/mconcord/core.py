"""Domain types for block-structured Gaussian graphical models.

Nodes are 0-based throughout the Python API. Flat columns are laid out node
by node, components within a node contiguous, so node ``i`` owns columns
``offsets[i]:offsets[i + 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

Pair = Tuple[int, int]


class PartitionError(ValueError):
    """Raised when arrays disagree with a node partition."""


class DataError(ValueError):
    """Raised when a data matrix violates ingestion rules."""


@dataclass(frozen=True)
class NodePartition:
    """Layout of ``p`` nodes carrying ``K_1 .. K_p`` components each."""

    dims: Tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(k) for k in dims)
        if not dims:
            raise PartitionError("partition needs at least one node")
        if any(k < 1 for k in dims):
            raise PartitionError(f"all block dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, p: int, k: int) -> "NodePartition":
        return cls([k] * p)

    @classmethod
    def singletons(cls, d: int) -> "NodePartition":
        return cls([1] * d)

    @property
    def p(self) -> int:
        return len(self.dims)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(np.int64)

    @property
    def total_dim(self) -> int:
        return int(self.offsets[-1])

    @property
    def k_max(self) -> int:
        return max(self.dims)

    def columns(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def flat_index(self, i: int, k: int) -> int:
        if not 0 <= k < self.dims[i]:
            raise PartitionError(f"component {k} out of range for node {i}")
        return int(self.offsets[i]) + k

    def node_of(self, column: int) -> int:
        if not 0 <= column < self.total_dim:
            raise PartitionError(f"column {column} outside 0..{self.total_dim - 1}")
        return int(np.searchsorted(self.offsets, column, side="right") - 1)

    @cached_property
    def column_nodes(self) -> np.ndarray:
        return np.repeat(np.arange(self.p), self.dims)

    def pairs(self) -> Iterator[Pair]:
        """Node pairs ``(i, j)``, ``i < j``, in lexicographic order."""
        for i in range(self.p):
            for j in range(i + 1, self.p):
                yield i, j

    def column_labels(self) -> list:
        return [f"v{i + 1}.{k + 1}" for i, kk in enumerate(self.dims) for k in range(kk)]


def vectorize_block(block: np.ndarray, shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """Row-major ``vec``: entry ``(k, l)`` of a ``K_i x K_j`` block lands at ``k*K_j + l``."""
    block = np.asarray(block, dtype=float)
    if block.ndim != 2:
        raise PartitionError(f"block must be 2-D, got shape {block.shape}")
    if shape is not None and block.shape != tuple(shape):
        raise PartitionError(f"block shape {block.shape} does not match {tuple(shape)}")
    return block.reshape(-1).copy()


def unvectorize_block(vec: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.size != shape[0] * shape[1]:
        raise PartitionError(f"vector of size {vec.size} cannot fill a {shape} block")
    return vec.reshape(shape).copy()


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n x D`` sample matrix whose columns follow ``partition``.

    Rejects non-finite cells and constant columns on construction. Arrays are
    copied and made read-only, so instances can be shared between threads.
    """

    values: np.ndarray
    partition: NodePartition
    centered: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            raise DataError(f"data must be a 2-D array, got shape {values.shape}")
        n, d = values.shape
        if d != self.partition.total_dim:
            raise PartitionError(
                f"data has {d} columns but the partition describes {self.partition.total_dim}"
            )
        if n < 2:
            raise DataError(f"need at least 2 samples, got {n}")
        bad = ~np.isfinite(values)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"non-finite value at row {r + 1}, column {c + 1}")
        var = values.var(axis=0)
        scale = np.abs(values).max(axis=0)
        flat = var <= (1e-14 * np.maximum(scale, 1.0)) ** 2
        if flat.any():
            c = int(np.flatnonzero(flat)[0])
            raise DataError(f"column {self.partition.column_labels()[c]} has zero variance")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, partition: NodePartition, center: bool = True) -> "Dataset":
        data = cls(values, partition)
        return center_columns(data) if center else data

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def total_dim(self) -> int:
        return self.values.shape[1]

    def node(self, i: int) -> np.ndarray:
        return self.values[:, self.partition.columns(i)]

    def column(self, i: int, k: int) -> np.ndarray:
        return self.values[:, self.partition.flat_index(i, k)]

    @cached_property
    def gram(self) -> np.ndarray:
        """``Y^T Y / n`` (uncentered second moments of the stored values)."""
        g = self.values.T @ self.values / self.n
        g = (g + g.T) / 2
        g.setflags(write=False)
        return g

    def subset(self, rows) -> "Dataset":
        return Dataset(self.values[rows], self.partition, centered=False)

    def standardized(self) -> "Dataset":
        centered = center_columns(self)
        sd = centered.values.std(axis=0)
        return Dataset(centered.values / sd, self.partition, centered=True)


def center_columns(data: Dataset) -> Dataset:
    """Subtract column means; idempotent on already centered data."""
    if data.centered:
        return data
    values = data.values - data.values.mean(axis=0)
    return Dataset(values, data.partition, centered=True)


@dataclass(frozen=True, eq=False)
class BlockPrecision:
    """Sparse block estimate of a precision matrix.

    Only the diagonal entries ``sigma`` and the upper off-diagonal blocks
    ``(i, j)``, ``i < j``, are parameters. A missing key means an exact zero
    block; within-node off-diagonal entries are not modelled.
    """

    sigma: np.ndarray
    blocks: Mapping[Pair, np.ndarray]
    partition: NodePartition

    def __post_init__(self):
        part = self.partition
        sigma = np.array(self.sigma, dtype=float, copy=True)
        if sigma.shape != (part.total_dim,):
            raise PartitionError(f"sigma must have length {part.total_dim}, got {sigma.shape}")
        if not np.all(sigma > 0):
            raise ValueError("all diagonal entries sigma must be strictly positive")
        clean: Dict[Pair, np.ndarray] = {}
        for (i, j), block in self.blocks.items():
            i, j = int(i), int(j)
            if not 0 <= i < j < part.p:
                raise PartitionError(f"block key {(i, j)} must satisfy 0 <= i < j < p")
            block = np.array(block, dtype=float, copy=True)
            if block.shape != (part.dims[i], part.dims[j]):
                raise PartitionError(
                    f"block {(i, j)} has shape {block.shape}, expected {(part.dims[i], part.dims[j])}"
                )
            if np.any(block != 0):
                block.setflags(write=False)
                clean[(i, j)] = block
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "blocks", dict(sorted(clean.items())))

    @classmethod
    def diagonal(cls, sigma, partition: NodePartition) -> "BlockPrecision":
        return cls(sigma, {}, partition)

    @classmethod
    def from_dense(cls, omega: np.ndarray, partition: NodePartition) -> "BlockPrecision":
        """Read the parameters out of a dense ``D x D`` matrix (upper blocks are used)."""
        omega = np.asarray(omega, dtype=float)
        blocks = {
            (i, j): omega[partition.columns(i), partition.columns(j)]
            for i, j in partition.pairs()
        }
        return cls(np.diag(omega), blocks, partition)

    def block(self, i: int, j: int) -> np.ndarray:
        """``Omega_ij`` for any ``i != j``, zeros when absent; ``Omega_ji = Omega_ij^T``."""
        if i == j:
            raise PartitionError("diagonal blocks are not parameters")
        if i > j:
            return self.block(j, i).T
        b = self.blocks.get((i, j))
        if b is None:
            return np.zeros((self.partition.dims[i], self.partition.dims[j]))
        return b.copy()

    def to_dense(self) -> np.ndarray:
        """Assemble the ``D x D`` matrix; within-node off-diagonal entries are 0."""
        part = self.partition
        omega = np.diag(self.sigma).astype(float)
        for (i, j), b in self.blocks.items():
            omega[part.columns(i), part.columns(j)] = b
            omega[part.columns(j), part.columns(i)] = b.T
        return omega

    def active_pairs(self) -> list:
        return list(self.blocks)

    def edge_graph(self) -> "EdgeGraph":
        return EdgeGraph.from_weights(
            self.partition.p,
            {pair: float(np.linalg.norm(b)) for pair, b in self.blocks.items()},
        )


@dataclass(frozen=True)
class EdgeGraph:
    """Undirected node graph with Frobenius-norm edge weights."""

    p: int
    edges: frozenset = field(default_factory=frozenset)
    weights: Mapping[Pair, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            i, j = sorted(int(x) for x in e)
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not 0 <= i < j < self.p:
                raise PartitionError(f"edge {(i, j)} outside 0..{self.p - 1}")
            norm.add((i, j))
        weights = {}
        for e, w in self.weights.items():
            key = tuple(sorted(int(x) for x in e))
            if key not in norm:
                raise ValueError(f"weight given for non-edge {key}")
            if not w > 0:
                raise ValueError(f"edge {key} must have a positive weight")
            weights[key] = float(w)
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_weights(cls, p: int, weights: Mapping[Pair, float]) -> "EdgeGraph":
        return cls(p, frozenset(weights), weights)

    @classmethod
    def from_pairs(cls, p: int, pairs: Iterable[Sequence[int]]) -> "EdgeGraph":
        return cls(p, frozenset(tuple(sorted(e)) for e in pairs))

    def __len__(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a


def residual_sigma_estimate(data: Dataset) -> np.ndarray:
    """Residual-variance estimate of every diagonal precision entry.

    Each column ``(i, k)`` is regressed by least squares on all columns of the
    other nodes; the returned value is the reciprocal of the residual sum of
    squares divided by ``n - sum_{j != i} K_j``.

    Raises
    ------
    DataError
        If ``n`` does not exceed the number of regressors, or the regressors
        of some node are rank deficient.
    """
    part = data.partition
    y = data.values
    n, d = y.shape
    out = np.empty(d)
    for i in range(part.p):
        cols = part.columns(i)
        others = np.ones(d, dtype=bool)
        others[cols] = False
        n_reg = int(others.sum())
        dof = n - n_reg
        if dof <= 0:
            raise DataError(
                f"node {i}: n={n} must exceed the {n_reg} regressors from the other nodes"
            )
        x = y[:, others]
        target = y[:, cols]
        if n_reg:
            coef, _, rank, _ = np.linalg.lstsq(x, target, rcond=None)
            if rank < n_reg:
                raise DataError(f"node {i}: regression design is rank deficient ({rank} < {n_reg})")
            resid = target - x @ coef
        else:
            resid = target
        out[cols] = dof / np.einsum("ij,ij->j", resid, resid)
    return out
