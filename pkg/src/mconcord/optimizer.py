"""Block coordinate descent for the group-penalized pseudo-likelihood.

The solver works on the second-moment matrix ``S = Y^T Y / n`` rather than on
the ``n x D`` residuals. With ``W`` the dense parameter matrix it maintains
``M = S W`` (column ``ik`` of ``M`` is ``Y^T r_ik / n``), so the gradient of a
block is ``M[ci, cj] + M[cj, ci]^T`` and every update is a rank-``K`` change
to ``M``. ``M`` is rebuilt from scratch every ``refresh_every`` sweeps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
from numba import njit

from .core import BlockPrecision, Dataset, PartitionError, center_columns

log = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """A non-finite value appeared while updating a block."""


@dataclass(frozen=True)
class FitConfig:
    lam: float
    tol: float = 1e-6
    max_sweeps: int = 500
    max_prox_iters: int = 100
    sigma_floor: float = 1e-8
    refresh_every: int = 50

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        for name in ("tol", "sigma_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_sweeps", "max_prox_iters", "refresh_every"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class KktReport:
    max_inactive_violation: float
    max_active_residual: float
    max_sigma_residual: float
    tol: float

    @property
    def satisfied(self) -> bool:
        return (
            self.max_inactive_violation <= self.tol
            and self.max_active_residual <= self.tol
            and self.max_sigma_residual <= self.tol
        )


@dataclass
class FitResult:
    """Output of :func:`fit`.

    ``objective_trace[0]`` is the objective at the starting point; entry
    ``t`` is the value after sweep ``t``.
    """

    estimate: BlockPrecision
    lam: float
    objective_trace: List[float]
    sweeps: int
    converged: bool
    kkt: KktReport
    config: FitConfig = field(repr=False, default=None)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def edge_graph(self):
        return self.estimate.edge_graph()


# ----------------------------------------------------------------------------
# kernels


@njit(cache=True, nogil=True)
def _soft_threshold(z, t):
    nz = np.sqrt(np.sum(z * z))
    if nz <= t:
        return np.zeros_like(z)
    return (1.0 - t / nz) * z


@njit(cache=True, nogil=True)
def _block_hess(d, sii, sjj, out):
    # out = d @ sjj + sii @ d, written out: blocks are tiny and slices non-contiguous
    ki, kj = d.shape
    for k in range(ki):
        for l in range(kj):
            acc = 0.0
            for t in range(kj):
                acc += d[k, t] * sjj[t, l]
            for t in range(ki):
                acc += sii[k, t] * d[t, l]
            out[k, l] = acc


@njit(cache=True, nogil=True)
def _prox_block(g0, w0, sii, sjj, lam, tol, max_iter):
    """Backtracking proximal gradient on one block subproblem.

    Minimises ``<g0, X - w0> + q(X - w0) / 2 + lam ||X||_F`` where
    ``q(D) = <D, D sjj + sii D>``. Returns the final iterate, or exactly
    zero when the smooth gradient at zero lies in the penalty's subdifferential.
    """
    ki, kj = w0.shape
    x = w0.copy()
    g = np.empty((ki, kj))
    z = np.empty((ki, kj))
    step = np.empty((ki, kj))
    hs = np.empty((ki, kj))
    _block_hess(w0, sii, sjj, hs)
    gz = 0.0
    for k in range(ki):
        for l in range(kj):
            t = g0[k, l] - hs[k, l]
            gz += t * t
    if np.sqrt(gz) <= lam:
        return np.zeros((ki, kj))
    for _ in range(max_iter):
        for k in range(ki):
            for l in range(kj):
                step[k, l] = x[k, l] - w0[k, l]
        _block_hess(step, sii, sjj, g)
        for k in range(ki):
            for l in range(kj):
                g[k, l] += g0[k, l]
        s = 1.0
        while True:
            nz = 0.0
            for k in range(ki):
                for l in range(kj):
                    z[k, l] = x[k, l] - s * g[k, l]
                    nz += z[k, l] * z[k, l]
            nz = np.sqrt(nz)
            shrink = 1.0 - lam * s / nz if nz > lam * s else 0.0
            sq = 0.0
            for k in range(ki):
                for l in range(kj):
                    step[k, l] = shrink * z[k, l] - x[k, l]
                    sq += step[k, l] * step[k, l]
            if sq == 0.0:
                break
            # f is quadratic, so f(x + step) - f(x) - <g, step> is exactly q(step) / 2
            _block_hess(step, sii, sjj, hs)
            curv = 0.0
            for k in range(ki):
                for l in range(kj):
                    curv += step[k, l] * hs[k, l]
            if curv <= sq / s:
                break
            s *= 0.5
        for k in range(ki):
            for l in range(kj):
                x[k, l] += step[k, l]
        # gradient mapping, which bounds the subproblem optimality residual
        if np.sqrt(sq) / s < 0.5 * tol:
            break
    return x


@njit(cache=True, nogil=True)
def _sigma_root(s_cc, cross):
    # positive root of s_cc * x^2 + cross * x - 1/2 = 0
    return (-cross + np.sqrt(cross * cross + 2.0 * s_cc)) / (2.0 * s_cc)


@njit(cache=True, nogil=True)
def _sweep(w, m, s, offsets, lam, tol, max_prox_iters, sigma_floor):
    """One pass over all pairs ``i < j`` then over all diagonal entries.

    Updates ``w`` and ``m = s @ w`` in place. Returns the largest absolute
    parameter change and, on a non-finite block, its node indices.
    """
    p = offsets.shape[0] - 1
    d = w.shape[0]
    max_change = 0.0
    for i in range(p):
        a0, a1 = offsets[i], offsets[i + 1]
        for j in range(i + 1, p):
            b0, b1 = offsets[j], offsets[j + 1]
            zero = True
            gn = 0.0
            for k in range(a1 - a0):
                for l in range(b1 - b0):
                    gkl = m[a0 + k, b0 + l] + m[b0 + l, a0 + k]
                    gn += gkl * gkl
                    if w[a0 + k, b0 + l] != 0.0:
                        zero = False
            if zero and np.sqrt(gn) <= lam:
                continue
            g0 = m[a0:a1, b0:b1] + m[b0:b1, a0:a1].T
            w0 = w[a0:a1, b0:b1].copy()
            x = _prox_block(
                g0, w0, s[a0:a1, a0:a1], s[b0:b1, b0:b1], lam, tol, max_prox_iters
            )
            if not np.all(np.isfinite(x)):
                return np.inf, i, j
            delta = x - w0
            change = np.max(np.abs(delta))
            if change == 0.0:
                continue
            max_change = max(max_change, change)
            w[a0:a1, b0:b1] = x
            w[b0:b1, a0:a1] = x.T
            for r in range(d):
                for k in range(a1 - a0):
                    srk = s[r, a0 + k]
                    for l in range(b1 - b0):
                        m[r, b0 + l] += srk * delta[k, l]
                for l in range(b1 - b0):
                    srl = s[r, b0 + l]
                    for k in range(a1 - a0):
                        m[r, a0 + k] += srl * delta[k, l]
    for c in range(d):
        cross = m[c, c] - s[c, c] * w[c, c]
        new = max(_sigma_root(s[c, c], cross), sigma_floor)
        delta = new - w[c, c]
        if delta != 0.0:
            max_change = max(max_change, abs(delta))
            w[c, c] = new
            for r in range(d):
                m[r, c] += s[r, c] * delta
    return max_change, -1, -1


@njit(cache=True, nogil=True)
def _objective(w, m, offsets, lam):
    d = w.shape[0]
    quad = 0.0
    logs = 0.0
    for a in range(d):
        logs += np.log(w[a, a])
        for b in range(d):
            quad += w[a, b] * m[b, a]
    pen = 0.0
    p = offsets.shape[0] - 1
    for i in range(p):
        for j in range(i + 1, p):
            blk = w[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]]
            pen += np.sqrt(np.sum(blk * blk))
    return 0.5 * (quad - logs) + lam * pen


# ----------------------------------------------------------------------------
# public operations


def group_soft_threshold(z, t: float) -> np.ndarray:
    """Proximal map of ``t * ||.||_2``: radial shrinkage, exactly zero when ``||z|| <= t``."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    z = np.asarray(z, dtype=float)
    return _soft_threshold(z, float(t))


def _prepared(data: Dataset) -> Dataset:
    return data if data.centered else center_columns(data)


def _dense_state(est: BlockPrecision, gram: np.ndarray):
    w = np.ascontiguousarray(est.to_dense())
    return w, gram @ w


def block_prox_step(
    i: int, j: int, est: BlockPrecision, data: Dataset, cfg: FitConfig
) -> np.ndarray:
    """Solve the subproblem for ``Omega_ij`` with all other parameters fixed.

    Uses the rows of ``data`` as given. Returns the new ``K_i x K_j`` block.
    """
    if not i < j:
        raise PartitionError("block_prox_step needs i < j")
    part = est.partition
    s = np.ascontiguousarray(data.gram)
    w, m = _dense_state(est, s)
    ci, cj = part.columns(i), part.columns(j)
    g0 = np.ascontiguousarray(m[ci, cj] + m[cj, ci].T)
    x = _prox_block(
        g0,
        np.ascontiguousarray(w[ci, cj]),
        np.ascontiguousarray(s[ci, ci]),
        np.ascontiguousarray(s[cj, cj]),
        float(cfg.lam),
        float(cfg.tol),
        int(cfg.max_prox_iters),
    )
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values in block ({i}, {j})")
    return x


def sigma_update(i: int, k: int, est: BlockPrecision, data: Dataset, sigma_floor: float = 1e-8) -> float:
    """Exact minimiser of the loss in ``sigma_ik`` with everything else fixed.

    ``[-c + sqrt(c^2 + 2 n q)] / (2 q)`` with ``q = Y_ik.Y_ik`` and
    ``c = Y_ik . sum_{j != i, l} omega_ijkl Y_jl``, on the rows as given.
    """
    col = est.partition.flat_index(i, k)
    y = data.values
    q = float(y[:, col] @ y[:, col])
    if q <= 0:
        raise ValueError(f"column ({i}, {k}) has zero norm")
    w = est.to_dense()[:, col].copy()
    w[col] = 0.0
    c = float(y[:, col] @ (y @ w))
    n = data.n
    return max((-c + np.sqrt(c * c + 2 * n * q)) / (2 * q), sigma_floor)


def initial_estimate(data: Dataset) -> BlockPrecision:
    """Zero blocks and ``sigma_ik = 1 / var(Y_ik)``."""
    return BlockPrecision.diagonal(1.0 / data.values.var(axis=0), data.partition)


def empty_solution_threshold(gram: np.ndarray, part) -> float:
    """Largest block-gradient norm at the empty graph with stationary ``sigma``.

    With every block at zero the diagonal settles at ``1 / sqrt(2 s_cc)`` and
    the gradient of block ``(i, j)`` is ``S_ij[k, l] (sigma_ik + sigma_jl)``.
    At any penalty at or above the returned value the empty graph satisfies
    the optimality conditions, so it is the unique solution.
    """
    sig = 1.0 / np.sqrt(2.0 * np.diag(gram))
    best = 0.0
    for i, j in part.pairs():
        ci, cj = part.columns(i), part.columns(j)
        g = gram[ci, cj] * (sig[ci][:, None] + sig[cj][None, :])
        best = max(best, float(np.linalg.norm(g)))
    return best


def _to_estimate(w: np.ndarray, part) -> BlockPrecision:
    return BlockPrecision.from_dense(w, part)


def kkt_report_dense(w, gram, part, lam, kkt_tol) -> KktReport:
    m = gram @ w
    inactive, active = [], []
    for i, j in part.pairs():
        ci, cj = part.columns(i), part.columns(j)
        g = m[ci, cj] + m[cj, ci].T
        blk = w[ci, cj]
        nb = np.linalg.norm(blk)
        if nb == 0:
            inactive.append(np.linalg.norm(g) - lam)
        else:
            active.append(np.abs(g + lam * blk / nb).max())
    sig = np.abs(-0.5 / np.diag(w) + np.diag(m))
    return KktReport(
        max_inactive_violation=float(max(inactive, default=0.0)),
        max_active_residual=float(max(active, default=0.0)),
        max_sigma_residual=float(sig.max()),
        tol=float(kkt_tol),
    )


def kkt_certificate(est: BlockPrecision, data: Dataset, lam: float, kkt_tol: float = 1e-4) -> KktReport:
    """Check first-order optimality of ``est`` (data is centered first if needed).

    Zero blocks need ``||grad_ij||_2 <= lam``; non-zero blocks need
    ``grad_ij + lam * Omega_ij / ||Omega_ij||_F = 0``; every ``sigma`` must
    be stationary.
    """
    data = _prepared(data)
    if est.partition != data.partition:
        raise PartitionError("estimate and data use different partitions")
    return kkt_report_dense(est.to_dense(), np.asarray(data.gram), est.partition, lam, kkt_tol)


def fit(
    data: Dataset,
    cfg: FitConfig,
    init: Optional[BlockPrecision] = None,
    kkt_tol: float = 1e-4,
) -> FitResult:
    """Minimise the penalized pseudo-likelihood at ``cfg.lam``.

    Data that is not yet centered is centered first. Each outer iteration
    sweeps every pair ``i < j`` in lexicographic order and then every
    ``sigma_ik``. Stops once both the relative objective change and the
    largest parameter change over a sweep fall below ``cfg.tol``.
    Non-convergence is reported through ``converged``, not raised. At or
    above :func:`empty_solution_threshold` the closed-form empty solution is
    returned after a single step.
    """
    data = _prepared(data)
    part = data.partition
    if init is None:
        init = initial_estimate(data)
    elif init.partition != part:
        raise PartitionError("warm start uses a different partition")
    s = np.ascontiguousarray(data.gram, dtype=float)
    offsets = np.ascontiguousarray(part.offsets, dtype=np.int64)
    w, m = _dense_state(init, s)
    lam = float(cfg.lam)

    trace = [float(_objective(w, m, offsets, lam))]
    converged = False
    sweeps = 0
    if lam >= empty_solution_threshold(s, part):
        # screening: the solution is known in closed form, and iterating
        # at the boundary would only approach zero blocks asymptotically
        w = np.diag(1.0 / np.sqrt(2.0 * np.diag(s)))
        m = s @ w
        trace.append(float(_objective(w, m, offsets, lam)))
        sweeps, converged = 1, True
    else:
        for sweeps in range(1, cfg.max_sweeps + 1):
            change, bi, bj = _sweep(
                w, m, s, offsets, lam, float(cfg.tol), int(cfg.max_prox_iters), float(cfg.sigma_floor)
            )
            if bi >= 0:
                raise NumericalError(f"non-finite values in block ({bi}, {bj})")
            if sweeps % cfg.refresh_every == 0:
                m = s @ w
            obj = float(_objective(w, m, offsets, lam))
            if not np.isfinite(obj):
                raise NumericalError(f"objective became non-finite at sweep {sweeps}")
            prev = trace[-1]
            trace.append(obj)
            if abs(prev - obj) <= cfg.tol * max(1.0, abs(obj)) and change < cfg.tol:
                converged = True
                break
    if not converged:
        log.warning("no convergence after %d sweeps at lambda=%g", sweeps, lam)

    estimate = _to_estimate(w, part)
    kkt = kkt_report_dense(estimate.to_dense(), s, part, lam, kkt_tol)
    return FitResult(estimate, lam, trace, sweeps, converged, kkt, cfg)


def config_dict(cfg: FitConfig) -> dict:
    return asdict(cfg)
