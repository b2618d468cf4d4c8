"""File formats: feature CSV, vector files, design CSV, results CSV/JSON.

Feature CSV::

    item_id,list_id,f_0,f_1,...,f_{d-1}

``list_id`` is optional. Rows are grouped by list in order of each list's
first appearance; items keep their file order within a list.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..combinatorics import unrank_many
from ..design import DesignDistribution, ItemFeatureMatrix
from ..errors import ParseError

RESULT_COLUMNS = ("policy", "K", "T", "trial", "ranking_loss", "ndcg", "solve_seconds", "fit_seconds")
AGGREGATE_COLUMNS = ("policy", "K", "T", "mean_loss", "se_loss", "mean_ndcg", "se_ndcg")


def load_features(path, normalize: bool = False, list_column: str | None = None) -> ItemFeatureMatrix:
    """Read an item feature CSV.

    Args:
        path: CSV file.
        normalize: rescale all rows so the largest norm is 1.
        list_column: name of the list column; ``list_id`` is used when present.

    Raises:
        ParseError: malformed header or row, non-finite value, inconsistent
            width or duplicate ``item_id``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        if not header or header[0] != "item_id":
            raise ParseError(f"{path}: first column must be item_id", line=1)
        list_col = list_column or ("list_id" if "list_id" in header else None)
        if list_col is not None and list_col not in header:
            raise ParseError(f"{path}: list column {list_col!r} not in header", line=1)
        feat_cols = [i for i, h in enumerate(header) if h not in ("item_id", list_col)]
        names = [header[i] for i in feat_cols]
        if not names or names != [f"f_{i}" for i in range(len(names))]:
            raise ParseError(f"{path}: feature columns must be f_0..f_(d-1), got {names}", line=1)
        list_idx = header.index(list_col) if list_col else None

        ids, lists, rows = [], [], []
        seen = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(rec)}", line=lineno)
            item = rec[0].strip()
            if item in seen:
                raise ParseError(f"{path}: duplicate item_id {item!r} (first on line {seen[item]})", line=lineno)
            seen[item] = lineno
            try:
                values = [float(rec[i]) for i in feat_cols]
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(f"{path}: non-finite feature value", line=lineno)
            ids.append(item)
            lists.append(rec[list_idx].strip() if list_idx is not None else "0")
            rows.append(values)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two items")

    order = {}
    for lid in lists:
        order.setdefault(lid, len(order))
    perm = sorted(range(len(rows)), key=lambda i: order[lists[i]])
    sizes = [0] * len(order)
    for lid in lists:
        sizes[order[lid]] += 1
    feats = ItemFeatureMatrix(np.array(rows)[perm], tuple(sizes), tuple(ids[i] for i in perm))
    return feats.normalize() if normalize else feats


def write_features(path, features: ItemFeatureMatrix) -> None:
    ids = features.item_ids or tuple(str(i) for i in range(features.N))
    multi = len(features.list_sizes) > 1
    starts = features.list_starts
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id"] + (["list_id"] if multi else []) + [f"f_{i}" for i in range(features.d)])
        for m in range(len(features.list_sizes)):
            for row in range(starts[m], starts[m + 1]):
                w.writerow([ids[row]] + ([m] if multi else []) + [repr(float(v)) for v in features.X[row]])


def load_vector(path) -> np.ndarray:
    """One float per line; blank lines and ``#`` comments are skipped."""
    values = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                v = float(line)
            except ValueError:
                raise ParseError(f"{path}: not a number: {line!r}", line=lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: non-finite value", line=lineno)
            values.append(v)
    if not values:
        raise ParseError(f"{path}: no values")
    return np.array(values)


def save_vector(path, values) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def design_rows(pi: DesignDistribution, features: ItemFeatureMatrix) -> list[tuple[int, str, float]]:
    """``(subset_index, item_ids, weight)`` by descending weight, ties by index."""
    weights = pi.weights()
    order = pi.top(len(weights))
    items, lists = unrank_many(order, pi.collection)
    rows = features.rows(items, lists)
    ids = features.item_ids or tuple(str(i) for i in range(features.N))
    return [(i, ";".join(ids[r] for r in rr), weights[i]) for i, rr in zip(order, rows)]


def write_design(path, pi: DesignDistribution, features: ItemFeatureMatrix) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subset_index", "item_ids", "weight"])
        for index, item_ids, weight in design_rows(pi, features):
            w.writerow([index, item_ids, repr(weight)])


def read_design(path) -> dict[int, float]:
    with Path(path).open(newline="") as fh:
        return {int(r["subset_index"]): float(r["weight"]) for r in csv.DictReader(fh)}


def aggregate_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".agg")


def emit_results(table, fmt: str, path) -> None:
    """Write trial rows to ``path`` and aggregates to ``path`` + ``.agg``."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    trial = [dict(zip(RESULT_COLUMNS, r.as_tuple())) for r in table.sorted_rows()]
    agg = [dict(zip(AGGREGATE_COLUMNS, a.as_tuple())) for a in table.aggregate()]
    for target, columns, records in ((Path(path), RESULT_COLUMNS, trial),
                                     (aggregate_path(path), AGGREGATE_COLUMNS, agg)):
        try:
            with target.open("w", newline="") as fh:
                if fmt == "json":
                    json.dump(records, fh, indent=1)
                    fh.write("\n")
                else:
                    w = csv.DictWriter(fh, fieldnames=columns)
                    w.writeheader()
                    w.writerows(records)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write results to {target}: {exc.strerror}") from exc
