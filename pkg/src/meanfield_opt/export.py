"""Tabular and JSON artifacts.

CSV files use ``.`` decimals and 17 significant digits so that every float
round-trips exactly.  Run metadata (configuration, seed, optional timestamp)
goes in a JSON sidecar next to the CSV, ``<name>.csv.json``, or in a leading
``#`` comment line when the table is written to a stream.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from typing import IO, Iterable, Sequence

import numpy as np

from .cavity import OrderParameterCurve
from .oracle import EnsembleSummary
from .popdyn import Population, atom_fraction, ks_distance
from .recursion import GridDistribution, IterationTrace

__all__ = [
    "format_value",
    "write_table",
    "write_json",
    "sidecar_path",
    "metadata",
    "curve_table",
    "trace_table",
    "distribution_table",
    "histogram_table",
    "popdyn_summary",
    "ensemble_table",
    "participation_table",
    "CURVE_HEADER",
    "SWEEP_HEADER",
    "H_HEADER",
    "TRACE_HEADER",
    "DISTRIBUTION_HEADER",
    "HISTOGRAM_HEADER",
    "ENSEMBLE_HEADER",
    "PARTICIPATION_HEADER",
    "TSP_C_HEADER",
]

CURVE_HEADER = ("x", "G", "W_residual")
SWEEP_HEADER = ("lambda", "q", "edge_cost", "penalty_cost", "total_cost", "longest_edge")
H_HEADER = ("x", "q", "h")
TRACE_HEADER = ("k", "sup_gap", "terminal_gap", "expectation_gap", "bound")
DISTRIBUTION_HEADER = ("x", "survival")
HISTOGRAM_HEADER = ("x", "empirical_survival", "reference_survival")
ENSEMBLE_HEADER = ("replica", "cost", "unmatched", "longest_edge")
PARTICIPATION_HEADER = ("length_bin", "participated", "total", "h_predicted")
TSP_C_HEADER = ("lambda", "C", "roundtrip_residual", "grid_cost", "area_cost")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def sidecar_path(path: str | os.PathLike) -> str:
    return os.fspath(path) + ".json"


def metadata(config: dict, *, timestamp: bool = True, **extra) -> dict:
    """Sidecar record: the run configuration plus any result fields."""
    meta = {"config": config}
    meta.update(extra)
    if timestamp:
        meta["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path: str | os.PathLike | None, obj, stream: IO[str] | None = None) -> None:
    text = dumps(obj)
    if path is None:
        (stream or sys.stdout).write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _render(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(
    path: str | os.PathLike | None,
    header: Sequence[str],
    rows: Iterable[Sequence],
    meta: dict | None = None,
    stream: IO[str] | None = None,
) -> None:
    """Write a CSV table with an optional metadata sidecar.

    With ``path=None`` the table goes to ``stream`` and the metadata, if
    any, is emitted first as a single ``# {...}`` comment line.
    """
    body = _render(header, rows)
    if path is None:
        stream = stream or sys.stdout
        if meta is not None:
            stream.write("# " + json.dumps(_jsonable(meta), sort_keys=True) + "\n")
        stream.write(body)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)
    if meta is not None:
        write_json(sidecar_path(path), meta)


# ---------------------------------------------------------------------------
# per-module tables


def curve_table(curve: OrderParameterCurve) -> list[tuple]:
    resid = curve.conservation_residual()
    return list(zip(curve.x, curve.G, resid))


def trace_table(trace: IterationTrace) -> list[tuple]:
    """Rows of the iteration trace; ``bound`` is the bound on the expectation gap."""
    return [tuple(r) for r in trace.rows()]


def distribution_table(dist: GridDistribution) -> list[tuple]:
    return list(zip(dist.x, dist.values))


def histogram_table(pop: Population, reference: GridDistribution, points: int = 201) -> list[tuple]:
    """Empirical vs reference survival ``P(f >= x)`` on an even grid of ``points`` nodes."""
    half = 0.5 * pop.lam
    x = np.linspace(-half, half, points)
    s = np.sort(pop.samples)
    emp = (len(s) - np.searchsorted(s, x, "left")) / len(s)
    ref = reference.survival(x)
    # the left node carries the right limit, matching the grid convention
    emp[0] = float(np.mean(s > -half))
    ref[0] = reference.values[0]
    return list(zip(x, emp, ref))


def popdyn_summary(pop: Population, reference: GridDistribution, generations: int, pop_size: int) -> dict:
    return {
        "lambda": pop.lam,
        "mode": pop.mode.value,
        "generations": int(generations),
        "pop_size": int(pop_size),
        "seed": pop.seed,
        "ks": ks_distance(pop, reference),
        "atom_fraction": atom_fraction(pop),
        "mean": pop.mean(),
    }


def ensemble_table(summary: EnsembleSummary) -> list[tuple]:
    return [
        (r, summary.costs[r], int(summary.unmatched[r]), summary.longest[r]) for r in range(summary.replicas)
    ]


def participation_table(summary: EnsembleSummary) -> list[tuple]:
    """One row per length bin, labelled by the bin midpoint."""
    mids = 0.5 * (summary.bin_edges[1:] + summary.bin_edges[:-1])
    pred = summary.h_predicted()
    return [
        (mids[b], int(round(summary.participated[b])), int(summary.totals[b]), pred[b]) for b in range(len(mids))
    ]
