"""Edge recovery scores and the component-to-node aggregation rule."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt
from typing import Tuple

from .core import EdgeGraph, NodePartition, PartitionError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n_total(self) -> int:
        """Number of selected edges (``N_t``)."""
        return self.tp + self.fp

    @property
    def n_correct(self) -> int:
        """Number of correctly selected edges (``N_c``)."""
        return self.tp


def confusion(est: EdgeGraph, truth: EdgeGraph) -> ConfusionCounts:
    if est.p != truth.p:
        raise PartitionError(f"graphs have different node counts ({est.p} vs {truth.p})")
    tp = len(est.edges & truth.edges)
    fp = len(est.edges - truth.edges)
    fn = len(truth.edges - est.edges)
    tn = comb(est.p, 2) - tp - fp - fn
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def scores(c: ConfusionCounts) -> Tuple[float, float, float]:
    """``(TPR, PPV, MCC)``; any ratio with a zero denominator is reported as 0."""
    tpr = _ratio(c.tp, c.tp + c.fn)
    ppv = _ratio(c.tp, c.tp + c.fp)
    den = sqrt((c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn))
    mcc = _ratio(c.tp * c.tn - c.fp * c.fn, den)
    return tpr, ppv, mcc


def f1_score(c: ConfusionCounts) -> float:
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def aggregate_univariate_blocks(flat_graph: EdgeGraph, partition: NodePartition) -> EdgeGraph:
    """Collapse a graph over flat columns to a node graph.

    Nodes ``i`` and ``j`` are joined when any component of ``i`` is joined to
    any component of ``j``. Edges inside a node are dropped. Node weights are
    the Frobenius norm of the component weights crossing the pair.
    """
    if flat_graph.p != partition.total_dim:
        raise PartitionError(
            f"flat graph has {flat_graph.p} vertices, partition has {partition.total_dim} columns"
        )
    acc = {}
    for a, b in flat_graph.edges:
        i, j = partition.node_of(a), partition.node_of(b)
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        w = flat_graph.weights.get((a, b), 0.0)
        acc[key] = acc.get(key, 0.0) + w * w
    if all(v > 0 for v in acc.values()):
        return EdgeGraph.from_weights(partition.p, {e: sqrt(v) for e, v in acc.items()})
    return EdgeGraph.from_pairs(partition.p, acc)


def eval_report(est: EdgeGraph, truth: EdgeGraph) -> dict:
    c = confusion(est, truth)
    tpr, ppv, mcc = scores(c)
    return {
        "tp": c.tp,
        "tn": c.tn,
        "fp": c.fp,
        "fn": c.fn,
        "N_t": c.n_total,
        "N_c": c.n_correct,
        "TPR": tpr,
        "PPV": ppv,
        "MCC": mcc,
        "F1": f1_score(c),
    }
