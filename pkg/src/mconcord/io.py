"""Readers and writers for the on-disk formats.

Node and component numbers are 1-based in every file. Floats are written
with ``repr`` so that reading a file back reproduces the values exactly.
"""
from __future__ import annotations

import csv
import json
import re
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import BlockPrecision, Dataset, EdgeGraph, NodePartition
from .optimizer import FitConfig, FitResult, KktReport

_LABEL = re.compile(r"^v(\d+)\.(\d+)$")


class FormatError(ValueError):
    """A file does not follow the expected layout."""


def example_path(name: str) -> Path:
    """Path of a bundled example file (``tiny.csv``, ``tiny_partition.json``, ``tiny_truth.json``)."""
    path = Path(str(resources.files("mconcord") / "data" / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled file named {name!r}")
    return path


def provenance(config: dict) -> dict:
    return {"tool": "mconcord", "version": __version__, "config": config}


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


# -- partition ---------------------------------------------------------------

def write_partition(part: NodePartition, path) -> None:
    dump_json({"dims": list(part.dims)}, path)


def read_partition(path) -> NodePartition:
    obj = load_json(path)
    dims = obj.get("dims") if isinstance(obj, dict) else None
    if not isinstance(dims, list) or not all(isinstance(k, int) for k in dims):
        raise FormatError(f"{path}: expected {{\"dims\": [K_1, ..., K_p]}}")
    try:
        return NodePartition(dims)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def partition_from_header(header) -> NodePartition:
    dims = []
    for c, label in enumerate(header, start=1):
        m = _LABEL.match(label.strip())
        if not m:
            raise FormatError(f"header column {c}: {label!r} is not of the form v<i>.<k>")
        i, k = int(m.group(1)), int(m.group(2))
        if i == len(dims) + 1 and k == 1:
            dims.append(1)
        elif dims and i == len(dims) and k == dims[-1] + 1:
            dims[-1] += 1
        else:
            raise FormatError(f"header column {c}: {label!r} is out of order")
    if not dims:
        raise FormatError("empty header")
    return NodePartition(dims)


# -- dataset -----------------------------------------------------------------

def write_dataset(data: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.partition.column_labels())
        for row in data.values:
            w.writerow([repr(float(x)) for x in row])


def read_dataset(path, partition: Optional[NodePartition] = None, center: bool = True) -> Dataset:
    """Read a ``v<i>.<k>``-headed CSV; the partition defaults to the one the header implies."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header_part = partition_from_header(rows[0])
    if partition is not None and partition != header_part:
        raise FormatError(
            f"{path}: header implies dims {list(header_part.dims)}, partition says {list(partition.dims)}"
        )
    d = header_part.total_dim
    values = np.empty((len(rows) - 1, d))
    labels = rows[0]
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != d:
            raise FormatError(f"{path}: row {r} has {len(row)} cells, expected {d}")
        for c, cell in enumerate(row):
            try:
                x = float(cell)
            except ValueError:
                raise FormatError(
                    f"{path}: row {r}, column {c + 1} ({labels[c]}): cannot parse {cell!r}"
                ) from None
            if not np.isfinite(x):
                raise FormatError(f"{path}: row {r}, column {c + 1} ({labels[c]}): non-finite value")
            values[r - 1, c] = x
    try:
        return Dataset.from_array(values, header_part, center=center)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- graphs --------------------------------------------------------------------

def edge_graph_to_dict(g: EdgeGraph) -> dict:
    return {
        "p": g.p,
        "edges": [
            {"i": i + 1, "j": j + 1, "frobenius": g.weights.get((i, j))}
            for i, j in g.sorted_edges()
        ],
    }


def edge_graph_from_dict(obj: dict, source="edge graph") -> EdgeGraph:
    try:
        p = int(obj["p"])
        pairs, weights = [], {}
        for e in obj["edges"]:
            pair = (int(e["i"]) - 1, int(e["j"]) - 1)
            pairs.append(pair)
            if e.get("frobenius") is not None:
                weights[tuple(sorted(pair))] = float(e["frobenius"])
        g = EdgeGraph.from_pairs(p, pairs)
        return EdgeGraph(p, g.edges, weights) if len(weights) == len(g.edges) else g
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed edge list ({exc})") from None


def write_edge_graph(g: EdgeGraph, path, extra: Optional[dict] = None) -> None:
    obj = dict(extra or {})
    obj.update(edge_graph_to_dict(g))
    dump_json(obj, path)


def read_edge_graph(path) -> EdgeGraph:
    return edge_graph_from_dict(load_json(path), str(path))


# -- fit results -----------------------------------------------------------------

def fit_result_to_dict(res: FitResult) -> dict:
    est = res.estimate
    cfg = res.config or FitConfig(lam=res.lam)
    fit_config = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    return {
        **provenance(fit_config),
        "fit_config": fit_config,
        "lambda": res.lam,
        "converged": res.converged,
        "sweeps": res.sweeps,
        "objective": res.objective,
        "objective_trace": list(res.objective_trace),
        "dims": list(est.partition.dims),
        "sigma": [float(x) for x in est.sigma],
        "blocks": {f"{i + 1},{j + 1}": b.tolist() for (i, j), b in est.blocks.items()},
        "kkt": {
            "max_inactive_violation": res.kkt.max_inactive_violation,
            "max_active_residual": res.kkt.max_active_residual,
            "max_sigma_residual": res.kkt.max_sigma_residual,
            "tol": res.kkt.tol,
            "satisfied": res.kkt.satisfied,
        },
    }


def fit_result_from_dict(obj: dict) -> FitResult:
    try:
        part = NodePartition(obj["dims"])
        blocks = {}
        for key, b in obj["blocks"].items():
            i, j = (int(x) - 1 for x in key.split(","))
            blocks[(i, j)] = np.array(b, dtype=float)
        est = BlockPrecision(np.array(obj["sigma"], dtype=float), blocks, part)
        k = obj["kkt"]
        kkt = KktReport(
            k["max_inactive_violation"], k["max_active_residual"], k["max_sigma_residual"], k["tol"]
        )
        cfg = FitConfig(**obj["fit_config"]) if "fit_config" in obj else None
        return FitResult(
            est, obj["lambda"], list(obj["objective_trace"]), obj["sweeps"], obj["converged"], kkt, cfg
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed fit result ({exc})") from None


def write_fit_result(res: FitResult, path) -> None:
    dump_json(fit_result_to_dict(res), path)


def read_fit_result(path) -> FitResult:
    return fit_result_from_dict(load_json(path))


# -- ground truth ------------------------------------------------------------

def write_truth(truth, path) -> None:
    cfg = truth.config
    config = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__} if cfg is not None else {}
    config = {k: list(v) if isinstance(v, tuple) else v for k, v in config.items()}
    obj = provenance(config)
    obj.update(
        {
            "dims": list(truth.partition.dims),
            "shift": truth.shift,
            "omega": truth.omega.tolist(),
        }
    )
    obj.update(edge_graph_to_dict(truth.graph))
    dump_json(obj, path)
