"""Batch front end: fit estimators, analyze penalty groups, run verification.

Exit codes: 0 success, 1 IO or parse errors, 2 invariance refusal,
3 boundary solution.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import _jsonio
from .dual import SolveOptions, solve_min_norm, trace_to_csv
from .families import (
    BoundarySolution,
    InvarianceError,
    get_family,
    fit as run_fit,
)
from .fast import pava, soft_threshold, taut_string
from .groups import generate_group, report_to_json_dict
from .oracle import lemma_suite
from .penalty import PenaltySpec, build_penalty, chain_edges

# Inline penalty names accepted by --penalty, besides a JSON file path.
_CHAIN_ALIASES = {
    "fused-chain": "fused-graph",
    "isotonic-chain": "isotonic-graph",
    "nearly-isotonic-chain": "nearly-isotonic-graph",
}
_INLINE_KINDS = (
    "lasso", "nonneg", "fused-graph", "isotonic-graph",
    "nearly-isotonic-graph", "trend-filter", "sparse-fused",
) + tuple(_CHAIN_ALIASES)


@dataclass
class RunConfig:
    command: str
    data_path: str | None = None
    penalty: str | None = None
    family: str | None = None
    lambdas: tuple[float, ...] = ()
    edges_path: str | None = None
    output: str | None = None
    trace: str | None = None
    seed: int = 0
    n: int | None = None
    cap: int = 100_000
    method: str = "auto"
    zero_pattern: bool = False
    seeds: tuple[int, ...] = (1, 2, 3)
    inject_failure: bool = False


class _Parser(argparse.ArgumentParser):
    # Treat command-line parse problems as IO/parse errors (exit 1).
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="solarpen")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", help="write the JSON result here instead of stdout")
        p.add_argument("--seed", type=int, default=0)

    p_fit = sub.add_parser("fit", help="fit an estimator through the least-squares reduction")
    p_fit.add_argument("--data", required=True, help="headerless single-column CSV")
    p_fit.add_argument("--family", required=True,
                       choices=["gaussian", "bernoulli", "poisson", "spherical-power"])
    p_fit.add_argument("--penalty", required=True,
                       help=f"penalty JSON path or one of {', '.join(_INLINE_KINDS)}")
    p_fit.add_argument("--lambda", dest="lambdas", type=float, action="append", default=[],
                       help="penalty weight (repeat for sparse-fused)")
    p_fit.add_argument("--edges", help="two-column 1-based edge CSV for graph penalties")
    p_fit.add_argument("--trace", help="write the dual-solver trace CSV here")
    p_fit.add_argument("--method", default="auto",
                       choices=["auto", "taut-string", "pava", "soft-threshold", "dual-cd"],
                       help="solver route; auto picks the direct solver when one fits")
    p_fit.add_argument("--zero-pattern", action="store_true",
                       help="report base rows inactive at the reduced fit")
    common(p_fit)

    p_group = sub.add_parser("analyze-group", help="generate and classify a penalty's reflection group")
    p_group.add_argument("--penalty", required=True)
    p_group.add_argument("--n", type=int, help="ambient dimension for inline penalties")
    p_group.add_argument("--lambda", dest="lambdas", type=float, action="append", default=[])
    p_group.add_argument("--edges")
    p_group.add_argument("--cap", type=int, default=100_000)
    common(p_group)

    p_prox = sub.add_parser("prox", help="penalized least-squares fit only")
    p_prox.add_argument("--data", required=True)
    p_prox.add_argument("--penalty", required=True)
    p_prox.add_argument("--lambda", dest="lambdas", type=float, action="append", default=[])
    p_prox.add_argument("--edges")
    p_prox.add_argument("--method", default="dual-cd",
                        choices=["taut-string", "pava", "soft-threshold", "dual-cd"])
    common(p_prox)

    p_verify = sub.add_parser("verify", help="run the property-check suite")
    p_verify.add_argument("--seeds", default="1,2,3")
    p_verify.add_argument("--inject-failure", action="store_true")
    common(p_verify)
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    cfg.output = getattr(args, "output", None)
    cfg.seed = getattr(args, "seed", 0)
    cfg.data_path = getattr(args, "data", None)
    cfg.penalty = getattr(args, "penalty", None)
    cfg.family = getattr(args, "family", None)
    cfg.lambdas = tuple(getattr(args, "lambdas", []) or [])
    cfg.edges_path = getattr(args, "edges", None)
    cfg.trace = getattr(args, "trace", None)
    cfg.n = getattr(args, "n", None)
    cfg.cap = getattr(args, "cap", 100_000)
    cfg.method = getattr(args, "method", "auto")
    cfg.zero_pattern = getattr(args, "zero_pattern", False)
    cfg.inject_failure = getattr(args, "inject_failure", False)
    seeds = getattr(args, "seeds", None)
    if seeds:
        cfg.seeds = tuple(int(s) for s in str(seeds).split(","))
    return cfg


def _read_signal(path) -> np.ndarray:
    data = np.loadtxt(path, ndmin=1, dtype=float)
    if data.ndim != 1:
        raise ValueError(f"{path}: expected a single column of numbers")
    return data


def _read_edges(path) -> tuple[tuple[int, int], ...]:
    raw = np.loadtxt(path, ndmin=2, dtype=int, delimiter=",")
    if raw.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns of 1-based vertex indices")
    return tuple((int(i) - 1, int(j) - 1) for i, j in raw)


def _resolve_penalty(cfg: RunConfig, n: int | None) -> PenaltySpec:
    name = cfg.penalty
    if name is None:
        raise ValueError("a penalty is required")
    if name not in _INLINE_KINDS:
        if not os.path.exists(name):
            raise FileNotFoundError(f"penalty spec file not found: {name}")
        return PenaltySpec.from_json_file(name)
    kind = _CHAIN_ALIASES.get(name, name)
    if n is None:
        raise ValueError("inline penalties need data (or --n) to fix the dimension")
    edges = None
    if name in _CHAIN_ALIASES:
        edges = chain_edges(n)
    elif cfg.edges_path:
        edges = _read_edges(cfg.edges_path)
    elif kind.endswith("graph"):
        raise ValueError(f"{name} needs --edges")
    lambdas = cfg.lambdas
    if kind == "sparse-fused" and len(lambdas) == 1:
        lambdas = (lambdas[0], lambdas[0])
    if not lambdas and kind not in ("nonneg", "isotonic-graph"):
        raise ValueError(f"{name} needs --lambda")
    return PenaltySpec(kind, n, lambdas, edges=edges)


def _write_result(cfg: RunConfig, payload: dict) -> None:
    if cfg.output:
        _jsonio.dump_file(payload, cfg.output)
    else:
        print(_jsonio.dumps(payload))


def cmd_fit(cfg: RunConfig) -> int:
    x = _read_signal(cfg.data_path)
    spec = _resolve_penalty(cfg, x.size)
    family = get_family(cfg.family)
    report, solve_result = run_fit(family, spec, x, zero_pattern=cfg.zero_pattern,
                                   group_cap=cfg.cap, method=cfg.method)
    if cfg.trace:
        records = []
        if report.method == "dual-cd":
            traced = solve_min_norm(
                x, build_penalty(spec),
                SolveOptions(tol=1e-14, max_sweeps=200_000, trace_enabled=True),
            )
            records = traced.state.trace or []
        with open(cfg.trace, "w", newline="") as fh:
            trace_to_csv(records, fh)
    payload = report.to_json_dict()
    payload["command"] = "fit"
    payload["seed"] = cfg.seed
    _write_result(cfg, payload)
    return 3 if report.boundary_coordinates is not None else 0


def cmd_analyze_group(cfg: RunConfig) -> int:
    n = cfg.n
    if n is None and cfg.data_path:
        n = _read_signal(cfg.data_path).size
    if not cfg.lambdas:
        cfg.lambdas = (1.0,)
    spec = _resolve_penalty(cfg, n)
    base = build_penalty(spec)
    report = generate_group(base, cap=cfg.cap)
    payload = report_to_json_dict(report)
    payload["command"] = "analyze-group"
    payload["penalty"] = spec.to_json_dict()
    _write_result(cfg, payload)
    return 0


def cmd_prox(cfg: RunConfig) -> int:
    x = _read_signal(cfg.data_path)
    spec = _resolve_penalty(cfg, x.size)
    method = cfg.method
    payload: dict = {"command": "prox", "method": method}
    if method == "taut-string":
        fitted = taut_string(x, spec.lam())
    elif method == "pava":
        fitted = pava(x)
    elif method == "soft-threshold":
        fitted = soft_threshold(x, spec.lam())
    else:
        result = solve_min_norm(x, build_penalty(spec),
                                SolveOptions(tol=1e-14, max_sweeps=500_000))
        fitted = result.y
        payload["kkt_residual"] = result.kkt_residual
        payload["sweeps"] = result.sweeps
        payload["converged"] = result.converged
    payload["fit"] = [float(v) for v in fitted]
    _write_result(cfg, payload)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    threads = int(os.environ.get("SOLAR_OPT_THREADS", "1") or "1")
    report = lemma_suite(seeds=cfg.seeds, inject_failure=cfg.inject_failure,
                         threads=max(1, threads))
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
    payload = report.to_json_dict()
    payload["command"] = "verify"
    payload["seeds"] = list(cfg.seeds)
    if cfg.output:
        _jsonio.dump_file(payload, cfg.output)
    return 0 if report.all_passed else 1


_COMMANDS = {
    "fit": cmd_fit,
    "analyze-group": cmd_analyze_group,
    "prox": cmd_prox,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 1
    cfg = _config_from_args(args)
    try:
        return _COMMANDS[cfg.command](cfg)
    except InvarianceError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except BoundarySolution as exc:
        print(f"boundary solution: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
