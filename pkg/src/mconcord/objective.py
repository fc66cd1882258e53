"""Pseudo-likelihood loss, group penalty and their derivatives.

With ``W`` the dense parameter matrix (``sigma`` on the diagonal, the
off-diagonal blocks elsewhere, zeros inside diagonal blocks) the residual of
column ``(i, k)`` is column ``ik`` of ``R = Y W`` and

    loss = 1/2 * sum_ik ( -log sigma_ik + ||R_ik||^2 / n ).

Everything here evaluates on the rows of a :class:`~mconcord.core.Dataset`
as given; centering is the caller's business.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BlockPrecision, Dataset, PartitionError


@dataclass(frozen=True)
class ObjectiveValue:
    loss: float
    penalty: float

    @property
    def total(self) -> float:
        return self.loss + self.penalty


def _check(est: BlockPrecision, data: Dataset) -> None:
    if est.partition != data.partition:
        raise PartitionError("estimate and data use different partitions")


def residuals(est: BlockPrecision, data: Dataset) -> np.ndarray:
    """``n x D`` matrix whose column ``ik`` is ``sigma_ik Y_ik + sum_{j != i, l} omega_ijkl Y_jl``."""
    _check(est, data)
    return data.values @ est.to_dense()


def smooth_loss(est: BlockPrecision, data: Dataset) -> float:
    _check(est, data)
    r = residuals(est, data)
    quad = np.einsum("ij,ij->", r, r) / data.n
    return 0.5 * (quad - np.log(est.sigma).sum())


def group_penalty(est: BlockPrecision, lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return lam * sum(float(np.linalg.norm(b)) for b in est.blocks.values())


def objective(est: BlockPrecision, data: Dataset, lam: float) -> ObjectiveValue:
    return ObjectiveValue(smooth_loss(est, data), group_penalty(est, lam))


def gram_loss(sigma: np.ndarray, omega: np.ndarray, gram: np.ndarray) -> float:
    """Same value as :func:`smooth_loss`, from the dense parameter and ``Y^T Y / n``."""
    return 0.5 * (float(np.einsum("ij,jk,ki->", omega, gram, omega)) - np.log(sigma).sum())


def block_gradient(est: BlockPrecision, data: Dataset, i: int, j: int) -> np.ndarray:
    """Gradient of the smooth loss with respect to ``vec(Omega_ij)`` (row-major).

    Entry ``(k, l)`` is ``(R_ik . Y_jl + R_jl . Y_ik) / n``: ``omega_ijkl``
    enters the residual of ``(i, k)`` through ``Y_jl`` and, by symmetry, the
    residual of ``(j, l)`` through ``Y_ik``.
    """
    if i == j:
        raise ValueError("diagonal blocks are not penalized parameters")
    if i > j:
        return block_gradient(est, data, j, i).reshape(
            est.partition.dims[j], est.partition.dims[i]
        ).T.reshape(-1)
    part = est.partition
    r = residuals(est, data)
    ci, cj = part.columns(i), part.columns(j)
    y = data.values
    g = (r[:, ci].T @ y[:, cj] + y[:, ci].T @ r[:, cj]) / data.n
    return g.reshape(-1)


def sigma_gradient(est: BlockPrecision, data: Dataset, i: int, k: int) -> float:
    """``d loss / d sigma_ik = -1/(2 sigma_ik) + R_ik . Y_ik / n``."""
    _check(est, data)
    c = est.partition.flat_index(i, k)
    s = est.sigma[c]
    if s <= 0:
        raise ValueError("sigma must be positive")
    r = data.values @ est.to_dense()[:, c]
    return float(-0.5 / s + r @ data.values[:, c] / data.n)


def weighted_pseudo_loss(est: BlockPrecision, data: Dataset, weights: np.ndarray) -> float:
    """General-weight loss ``1/2 sum (-log sigma + w/n ||Y_ik + sum omega/sigma Y_jl||^2)``.

    With ``weights = sigma**2`` this coincides with :func:`smooth_loss`. Not
    used by the solver; kept for population-level checks of other weightings.
    """
    _check(est, data)
    w = np.asarray(weights, dtype=float)
    omega = est.to_dense()
    off = omega - np.diag(np.diag(omega))
    r = data.values + data.values @ off / est.sigma
    quad = (w * np.einsum("ij,ij->j", r, r)).sum() / data.n
    return 0.5 * (quad - np.log(est.sigma).sum())
