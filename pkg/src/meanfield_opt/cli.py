"""Batch front end: every computation as a reproducible run writing CSV/JSON.

Exit status: 0 on success, 1 on a domain error (bad parameter values),
2 on a numeric, capacity or contract failure, 64 on a usage error
(unknown flag, malformed value).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import cavity, diluted, export, oracle, popdyn, recursion
from .errors import CapacityError, ContractError, DomainError, NumericError

__all__ = ["RunConfig", "build_parser", "dispatch", "main", "EXIT_OK", "EXIT_DOMAIN", "EXIT_NUMERIC", "EXIT_USAGE"]

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("constants", "curve", "finite-lambda", "iterate", "popdyn", "simulate", "tsp-c")

# per-subcommand defaults, applied after flags and config file
DEFAULTS = {
    "constants": {"grid": 1001, "x_limit": 10.0},
    "curve": {"kernel": "matching", "grid": 1001, "x_limit": 10.0},
    "finite-lambda": {"lam": [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0], "grid": 101},
    "iterate": {"mode": "min", "lam": [3.0], "grid": 2000, "k": 200, "tol": 1e-6},
    "popdyn": {"mode": "min", "lam": [3.0], "grid": 2000, "k": 100, "pop": 100_000, "seed": 0},
    "simulate": {"lam": [3.0], "n": 16, "replicas": 200, "seed": 0},
    "tsp-c": {"lam": [1.0, 2.0, 4.0, 8.0], "grid": 2000, "k": 400, "tol": 1e-6},
}


@dataclass
class RunConfig:
    subcommand: str
    kernel: str | None = None
    mode: str | None = None
    lam: list[float] | None = None
    grid: int | None = None
    k: int | None = None
    pop: int | None = None
    seed: int | None = None
    n: int | None = None
    replicas: int | None = None
    out: str | None = None
    threads: int | None = None
    tol: float | None = None
    x_limit: float | None = None
    no_timestamp: bool = False

    def with_defaults(self) -> "RunConfig":
        cfg = dataclasses.replace(self)
        for key, value in DEFAULTS.get(self.subcommand, {}).items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, value)
        if cfg.threads is None:
            cfg.threads = popdyn.default_threads()
        return cfg

    def record(self) -> dict:
        """Configuration as stored in artifacts (output path and timestamp flag excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("no_timestamp")
        d["lambda"] = d.pop("lam")
        return {k: v for k, v in d.items() if v is not None}

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise DomainError(f"unknown subcommand {self.subcommand!r}")
        if self.kernel is not None:
            cavity.get_kernel(self.kernel)
        if self.mode is not None:
            recursion.Mode.parse(self.mode)
        for lam in self.lam or []:
            if not (lam > 0 and math.isfinite(lam)):
                raise DomainError(f"--lambda must be positive and finite; got {lam!r}")
        if self.subcommand in ("iterate", "popdyn", "simulate") and self.lam and len(self.lam) != 1:
            raise DomainError(f"{self.subcommand} takes a single --lambda value")
        if self.grid is not None:
            least = 2 if self.subcommand in ("constants", "curve", "finite-lambda") else 16
            if self.grid < least:
                raise DomainError(f"--grid must be >= {least}")
        if self.k is not None and self.k < (0 if self.subcommand == "popdyn" else 1):
            raise DomainError("--k is too small")
        if self.pop is not None and self.pop < 1:
            raise DomainError("--pop must be >= 1")
        if self.seed is not None and self.seed < 0:
            raise DomainError("--seed must be >= 0")
        if self.replicas is not None and self.replicas < 1:
            raise DomainError("--replicas must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise DomainError("--threads must be >= 1")
        if self.tol is not None and not self.tol >= 0:
            raise DomainError("--tol must be >= 0")
        if self.x_limit is not None and not self.x_limit > 0:
            raise DomainError("--x-limit must be positive")
        if self.n is not None:
            if self.n < 2:
                raise DomainError("--n must be >= 2")
            if self.n > oracle.MAX_MATCHING_N:
                raise CapacityError(f"--n must be <= {oracle.MAX_MATCHING_N}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _lambda_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or comma-separated numbers, got {text!r}") from None


EPILOG = (
    "exit status: 0 success, 1 domain error, 2 numeric/capacity error, 64 usage error. "
    "MEANFIELD_OPT_THREADS sets the thread bound when --threads is absent."
)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="meanfield-opt", description=__doc__.splitlines()[0], epilog=EPILOG)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    helps = {
        "constants": "ground-state energies and consistency residuals (JSON)",
        "curve": "tabulated order-parameter curve (CSV x,G,W_residual)",
        "finite-lambda": "diluted matching sweep: q, costs, longest edge, and h curves",
        "iterate": "grid iteration of the A/B recursions with gap diagnostics",
        "popdyn": "population dynamics on the PWIT compared against the grid fixed point",
        "simulate": "exact solutions of seeded random instances (ensemble statistics)",
        "tsp-c": "finite-penalty TSP constant C(lambda) with a cost cross-check",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name], epilog=EPILOG)
        p.add_argument("--kernel", choices=["matching", "tsp"])
        p.add_argument("--mode", choices=["min", "min2"])
        p.add_argument("--lambda", dest="lam", type=_lambda_list, metavar="F[,F...]")
        p.add_argument("--grid", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--pop", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--threads", type=int)
        p.add_argument("--tol", type=float, help="convergence tolerance override")
        p.add_argument("--x-limit", dest="x_limit", type=float, help="half-width of tabulated curves")
        p.add_argument("--config", metavar="FILE", help="JSON file of option values; flags take precedence")
        p.add_argument("--no-timestamp", action="store_true", help="omit the creation time from artifacts")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        with open(ns.config, encoding="utf-8") as fh:
            values = json.load(fh)
        if "lambda" in values:
            values["lam"] = values.pop("lambda")
        if isinstance(values.get("lam"), (int, float)):
            values["lam"] = [values["lam"]]
        unknown = set(values) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise DomainError(f"unknown keys in config file: {sorted(unknown)}")
    for f in dataclasses.fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None and v is not False:
            values[f.name] = v
    values["subcommand"] = ns.subcommand
    if isinstance(values.get("lam"), list):
        values["lam"] = [float(v) for v in values["lam"]]
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# subcommands


def _sibling(out: str | None, suffix: str) -> str | None:
    if out is None:
        return None
    stem, ext = os.path.splitext(out)
    return f"{stem}_{suffix}{ext or '.csv'}"


def _meta(cfg: RunConfig, **extra) -> dict:
    return export.metadata(cfg.record(), timestamp=not cfg.no_timestamp, **extra)


def _constants(cfg: RunConfig, stream) -> None:
    records = []
    for name in [cfg.kernel] if cfg.kernel else ["matching", "tsp"]:
        k = cavity.get_kernel(name)
        curve = cavity.solve_order_parameter(k, k.c_star, cfg.x_limit, cfg.grid)
        records.append(
            {
                "kernel": k.name,
                "c": k.c_star,
                "g0": curve.g0,
                "ground_state": cavity.ground_state_energy(k),
                "consistency_residual": cavity.verify_consistency(k, curve),
            }
        )
    body = records[0] if cfg.kernel else {"records": records}
    export.write_json(cfg.out, _meta(cfg, **body), stream)


def _curve(cfg: RunConfig, stream) -> None:
    k = cavity.get_kernel(cfg.kernel)
    if cfg.lam:
        lam = cfg.lam[0]
        if k is cavity.TSP:
            curve = cavity.tsp_finite_lambda_curve(lam, cfg.grid)
        else:
            q = diluted.q_from_lambda(lam)
            curve = cavity.solve_order_parameter(k, 1.0 - q, math.inf, cfg.grid)
    else:
        curve = cavity.solve_order_parameter(k, k.c_star, cfg.x_limit, cfg.grid)
    meta = _meta(
        cfg,
        kernel=k.name,
        c=curve.c,
        tail_constant=curve.tail_constant,
        g0=curve.g0,
        g_max=curve.g_max,
        x_half_width=curve.x_half_width,
        max_abs_residual=float(np.max(np.abs(curve.conservation_residual()))),
    )
    export.write_table(cfg.out, export.CURVE_HEADER, export.curve_table(curve), meta, stream)


def _finite_lambda(cfg: RunConfig, stream) -> None:
    rows, h_rows = [], []
    for lam in cfg.lam:
        q = diluted.q_from_lambda(lam)
        edge = diluted.matching_edge_cost(q)
        penalty = 0.5 * lam * q
        rows.append((lam, q, edge, penalty, edge + penalty, diluted.longest_edge_limit(q)))
        xs = np.linspace(0.0, diluted.lambda_from_q(q), cfg.grid)
        h_rows.extend((x, q, h) for x, h in zip(xs, diluted.h_matching(xs, q)))
    export.write_table(cfg.out, export.SWEEP_HEADER, rows, _meta(cfg), stream)
    if cfg.out is not None:
        export.write_table(_sibling(cfg.out, "h"), export.H_HEADER, h_rows, _meta(cfg))


def _iterate(cfg: RunConfig, stream) -> None:
    mode = recursion.Mode.parse(cfg.mode)
    lam = cfg.lam[0]
    res = recursion.run_iteration(mode, lam, cfg.grid, cfg.k, tol=cfg.tol)
    tr = res.trace
    meta = _meta(
        cfg,
        steps=int(tr.k[-1]),
        converged=tr.converged,
        bounds_hold=tr.bounds_hold,
        bound="expectation gap bound: lambda e^lambda/(k+1) for min, e^lambda/(k+1) for min2",
    )
    export.write_table(cfg.out, export.TRACE_HEADER, export.trace_table(tr), meta, stream)
    if cfg.out is not None:
        for side, dist in (("A", res.A), ("B", res.B)):
            info = {"lambda": lam, "mode": mode.value, "n_cells": dist.n_cells, "atom": dist.atom, "side": side}
            export.write_table(
                _sibling(cfg.out, side), export.DISTRIBUTION_HEADER, export.distribution_table(dist), _meta(cfg, **info)
            )


def _reference(mode: recursion.Mode, lam: float, n_cells: int, tol: float | None) -> recursion.GridDistribution:
    if mode is recursion.Mode.MIN:
        return diluted.limit_distribution(diluted.DilutedMatchingModel.from_lambda(lam), n_cells)
    res = recursion.run_iteration(mode, lam, n_cells, 100_000, tol=1e-9 if tol is None else tol)
    return res.B


def _popdyn(cfg: RunConfig, stream) -> None:
    mode = recursion.Mode.parse(cfg.mode)
    lam = cfg.lam[0]
    pop = popdyn.run_chain(lam, mode, cfg.k, cfg.pop, cfg.seed, threads=cfg.threads)
    ref = _reference(mode, lam, cfg.grid, cfg.tol)
    summary = export.popdyn_summary(pop, ref, cfg.k, cfg.pop)
    meta = _meta(cfg, **summary)
    export.write_table(cfg.out, export.HISTOGRAM_HEADER, export.histogram_table(pop, ref), meta, stream)


def _simulate(cfg: RunConfig, stream) -> None:
    lam = cfg.lam[0]
    s = oracle.ensemble_stats(cfg.n, lam, cfg.replicas, cfg.seed, threads=cfg.threads)
    q = diluted.q_from_lambda(lam)
    meta = _meta(
        cfg,
        unmatched_fraction=s.unmatched_fraction,
        cost_per_vertex=s.cost_per_vertex,
        q_limit=q,
        total_cost_limit=diluted.total_diluted_cost(lam),
        longest_edge_limit=diluted.longest_edge_limit(q),
        longest_edge_mean=float(np.mean(s.longest)),
    )
    export.write_table(cfg.out, export.ENSEMBLE_HEADER, export.ensemble_table(s), meta, stream)
    if cfg.out is not None:
        bins = {"bin_edges": s.bin_edges}
        export.write_table(
            _sibling(cfg.out, "participation"), export.PARTICIPATION_HEADER, export.participation_table(s),
            _meta(cfg, **bins),
        )


def _tsp_c(cfg: RunConfig, stream) -> None:
    rows = []
    for lam in cfg.lam:
        C = cavity.tsp_constant_from_lambda(lam)
        resid = abs(cavity.tsp_domain_length(C) - lam) if C > 2.0 + 1e-15 else float("nan")
        res = recursion.run_iteration("min2", lam, cfg.grid, cfg.k, tol=cfg.tol)
        grid_cost = recursion.cost_from_F(res.B, "min2")
        area_cost = 0.5 * cavity.curve_area(cavity.TSP, 4.0 - C)
        rows.append((lam, C, resid, grid_cost, area_cost))
    export.write_table(cfg.out, export.TSP_C_HEADER, rows, _meta(cfg), stream)


HANDLERS = {
    "constants": _constants,
    "curve": _curve,
    "finite-lambda": _finite_lambda,
    "iterate": _iterate,
    "popdyn": _popdyn,
    "simulate": _simulate,
    "tsp-c": _tsp_c,
}


def dispatch(config: RunConfig, stream=None) -> int:
    """Validate ``config``, run it, and return the exit status."""
    stream = stream or sys.stdout
    try:
        cfg = config.with_defaults()
        cfg.validate()
        HANDLERS[cfg.subcommand](cfg, stream)
    except DomainError as exc:
        print(f"meanfield-opt: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericError, CapacityError, ContractError) as exc:
        print(f"meanfield-opt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (OSError, ValueError, TypeError) as exc:
        # DomainError is a ValueError; a broken config file counts as a usage problem otherwise
        if isinstance(exc, DomainError):
            print(f"meanfield-opt: domain error: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        print(f"meanfield-opt: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return dispatch(cfg)


if __name__ == "__main__":
    sys.exit(main())
