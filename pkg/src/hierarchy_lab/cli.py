"""Command line entry point: ``hierarchy-lab {verify,solve,expand,report}``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
Every JSON document written here carries ``"schema": 1``, the hash of the
effective configuration and the seed; key order and float formatting are
fixed so that the same configuration and seed give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import re
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .combinatorics import Atom, Cluster, ClusterTuple, InvariantViolation, ResourceLimitError
from .config import ConfigError, RunConfig, load_config
from .cumulants import cumulant
from .dynamics import OBSERVABLE, STATE
from .sequence_algebra import GradedSequence, exp_star, from_json, ln_star
from .solvers import (
    Chaos,
    ClosedSystem,
    GrandCanonical,
    TruncationSpec,
    grand_canonical_marginals,
    marginal_observables_init,
    solve_correlations,
    solve_marginal_correlations,
    solve_marginal_distributions,
    solve_marginal_observables,
)
from .spaces import PhaseFunction
from .verification.suites import SUITES, SuiteOptions, continuous_model, finite_model, gaussian_closed_system, run_suite, thread_cap

__all__ = ["main", "run", "build_parser", "parse_ground", "build_model"]

SCHEMA = 1
HIERARCHIES = ("bbgky", "dual", "liouville", "nonlinear")


class UsageError(Exception):
    """Bad arguments or input files; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hierarchy-lab", description="Cluster-expansion solutions of particle hierarchies and their checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--model", choices=("finite", "continuous"), help="model (overrides the config)")
    common.add_argument("--seed", type=int, help="random seed (overrides the config)")

    v = sub.add_parser("verify", parents=[common], help="run identity and residual suites")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--t", type=float, help="time used by the checks (overrides the config)")
    v.add_argument("--report", help="write the JSON report here (default: stdout)")
    v.add_argument("--csv", help="also write a CSV table of the reports")

    s = sub.add_parser("solve", parents=[common], help="evaluate one solution component")
    s.add_argument("--hierarchy", choices=HIERARCHIES, required=True)
    s.add_argument("--s", type=int, required=True, help="number of particles of the component")
    s.add_argument("--t", type=float, help="time (overrides the config)")
    s.add_argument("--trunc", type=int, help="series truncation order n_term")
    s.add_argument("--init", help="JSON file describing the initial data")
    s.add_argument("--eval", dest="eval_points", help="JSON file of phase points (required for the continuous model)")
    s.add_argument("--out", help="write the JSON result here (default: stdout)")

    e = sub.add_parser("expand", help="list the partition terms of a cumulant")
    e.add_argument("--ground", required=True, help='ground tuple, e.g. "{Y:2}+2" (a 2-cluster and two atoms)')
    e.add_argument("--order", type=int, help="expected number of ground elements")
    e.add_argument("--direction", choices=(STATE, OBSERVABLE), default=STATE)
    e.add_argument("--latex", action="store_true", help="add a LaTeX rendering of each term")
    e.add_argument("--out", help="write the JSON result here (default: stdout)")

    r = sub.add_parser("report", help="summarize report files written by verify")
    r.add_argument("paths", nargs="+")
    r.add_argument("--csv", help="write a CSV table of all reports")
    return p


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _plain(x: Any) -> Any:
    """Convert numpy scalars, arrays and tuples to JSON-native values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path} is not valid JSON: {exc}") from None


def _load_run_config(args, **overrides) -> RunConfig:
    cfg = load_config(_read_json(args.config, "config") if args.config else None)
    return cfg.with_overrides(model=args.model, seed=args.seed, **overrides)


def build_model(cfg: RunConfig):
    if cfg.model == "finite":
        f = cfg.finite
        return finite_model(cfg.seed, f.M, f.k_max, None if f.weights is None else np.asarray(f.weights), f.interaction_scale)
    c = cfg.continuous
    return continuous_model(c.kappa, c.mass, c.nodes, c.dt)


def _header(command: str, cfg: RunConfig) -> dict:
    return {"schema": SCHEMA, "command": command, "config_hash": cfg.hash(), "seed": cfg.seed, "model": cfg.model}


# ---------------------------------------------------------------------------
# verify / report
# ---------------------------------------------------------------------------


CSV_FIELDS = ("check", "passed", "residual", "tolerance", "check_id", "params")


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow(
            [r["check"], r["passed"], repr(float(r["residual"])), repr(float(r["tolerance"])), r.get("meta", {}).get("check_id", ""), json.dumps(r["params"], sort_keys=True)]
        )
    return buf.getvalue()


def _cmd_verify(args) -> int:
    cfg = _load_run_config(args, t=args.t, report=args.report, csv=args.csv)
    model = build_model(cfg)
    tr = cfg.truncation
    opt = SuiteOptions(seed=cfg.seed, t=cfg.t, n_max=tr.n_max, s_max=tr.s_max, tolerances=dict(cfg.tolerances))
    reports = run_suite(args.suite, model, opt, thread_cap())
    rows = [r.to_dict() for r in reports]
    failed = sum(not r.passed for r in reports)
    doc = _header("verify", cfg) | {
        "suite": args.suite,
        "config": cfg.to_dict() | {"output": None},
        "summary": {"total": len(rows), "failed": failed, "passed": failed == 0},
        "reports": rows,
    }
    out = cfg.output
    # output is written from this thread only, after every check has finished
    _emit(_dumps(doc), out.report)
    if out.csv:
        Path(out.csv).write_text(_csv_text(rows))
    log = sys.stdout if out.report else sys.stderr
    for r in reports:
        print(r.line(), file=log)
    print(f"{len(rows) - failed}/{len(rows)} checks passed", file=log)
    return 1 if failed else 0


def _cmd_report(args) -> int:
    rows: list[dict] = []
    for path in args.paths:
        doc = _read_json(path, "report")
        if not isinstance(doc, dict) or doc.get("schema") != SCHEMA or "reports" not in doc:
            raise UsageError(f"{path} is not a schema-{SCHEMA} report")
        print(f"{path}: suite={doc.get('suite')} model={doc.get('model')} seed={doc.get('seed')} config={doc.get('config_hash')}")
        for r in doc["reports"]:
            status = "PASS" if r["passed"] else "FAIL"
            print(f"  {status} {r['check']} residual={r['residual']:.3e} tol={r['tolerance']:.1e}")
        rows.extend(doc["reports"])
    failed = sum(not r["passed"] for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} checks passed")
    if args.csv:
        Path(args.csv).write_text(_csv_text(rows))
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# expand
# ---------------------------------------------------------------------------


_GROUND_TERM = re.compile(r"^\{(?:[A-Za-z]\w*:)?(\d+)\}$|^(\d+)$|^x$")


def parse_ground(text: str) -> ClusterTuple:
    """Parse ``"{Y:2}+2"``: ``{name:k}`` (or ``{k}``) is a cluster of ``k`` labels,
    an integer ``n`` is ``n`` atoms and ``x`` is one atom.  Labels are
    assigned left to right starting at 0."""
    elems = []
    label = 0
    for raw in text.replace(" ", "").split("+"):
        m = _GROUND_TERM.match(raw)
        if not raw or m is None:
            raise UsageError(f"cannot parse ground term {raw!r} in {text!r}")
        if m.group(1) is not None:
            k = int(m.group(1))
            if k < 1:
                raise UsageError(f"cluster in {text!r} must hold at least one label")
            elems.append(Cluster(tuple(range(label, label + k))) if k > 1 else Atom(label))
            label += k
        else:
            n = 1 if m.group(2) is None else int(m.group(2))
            elems.extend(Atom(label + i) for i in range(n))
            label += n
    if not elems:
        raise UsageError(f"ground {text!r} is empty")
    return ClusterTuple(tuple(elems))


def _latex_term(coefficient: float, blocks, direction: str) -> str:
    sign = "-t" if direction == STATE else "t"
    c = int(coefficient) if float(coefficient).is_integer() else coefficient
    factors = " ".join(
        rf"S_{{{sum(len(e.labels) for e in b)}}}({sign}, " + ", ".join(_latex_element(e) for e in b) + ")" for b in blocks
    )
    return f"{c} \\, {factors}"


def _latex_element(e) -> str:
    if isinstance(e, Atom):
        return f"x_{{{e.label + 1}}}"
    return r"\{" + ", ".join(f"x_{{{i + 1}}}" for i in e.members) + r"\}"


def _cmd_expand(args) -> int:
    ground = parse_ground(args.ground)
    if args.order is not None and args.order != len(ground):
        raise UsageError(f"--order {args.order} does not match the {len(ground)} elements of ground {args.ground!r}")
    op = cumulant(ground, 0.0, args.direction)
    doc = {"schema": SCHEMA, "command": "expand", "ground_spec": args.ground} | op.to_dict()
    doc.pop("t", None)
    doc["n_terms"] = len(op.terms)
    if args.latex:
        for d, term in zip(doc["terms"], op.terms):
            d["latex"] = _latex_term(term.coefficient, term.partition.blocks, args.direction)
    _emit(_dumps(doc), args.out)
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _finite_table(sp, values, arity: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != sp.M**arity:
        raise UsageError(f"{what} needs {sp.M ** arity} values, got {arr.size}")
    return arr.reshape((sp.M,) * arity)


def _gaussian_profile(arity: int, amplitude: float, center) -> PhaseFunction:
    c = np.asarray(center, dtype=float).reshape(1, 2)

    def fn(X):
        return amplitude * np.exp(-0.5 * np.sum((X - c) ** 2, axis=(-1, -2)))

    return PhaseFunction(arity, fn, f"gauss{arity}")


def _init_data(doc: dict, model, rng: np.random.Generator, hierarchy: str, s: int, depth: int):
    """Return ``(kind, sequence)``: the initial sequence the chosen hierarchy starts from."""
    sp = model.space
    finite = model.kind == "finite"
    allowed = {
        "closed": {"N", "D_N", "shift", "coupling"},
        "grand_canonical": {"z", "profile", "n_max", "amplitude", "center"},
        "chaos": {"G1", "amplitude", "center"},
        "explicit": {"sequence"},
        "observable": {"a1", "amplitude", "center"},
    }
    kind = doc.get("kind")
    if kind not in allowed:
        raise UsageError(f"init key 'kind' must be one of {sorted(allowed)}, got {kind!r}")
    for key in doc:
        if key != "kind" and key not in allowed[kind]:
            raise UsageError(f"unknown init key '{key}' for kind {kind!r}")
    if hierarchy == "dual" and kind not in ("explicit", "observable"):
        raise UsageError("the dual hierarchy starts from observables: use kind 'observable' or 'explicit'")
    if hierarchy != "dual" and kind == "observable":
        raise UsageError(f"kind 'observable' only applies to the dual hierarchy, not {hierarchy!r}")

    if kind == "explicit":
        if not finite:
            raise UsageError("explicit sequences are only available on the finite model")
        seq = from_json(doc["sequence"])
        if seq.space.M != sp.M or not np.allclose(seq.space.weights, sp.weights):
            raise UsageError("explicit sequence does not live on the configured finite space")
        seq = GradedSequence(sp, seq.components, closed=seq.closed)
        return kind, marginal_observables_init(seq) if hierarchy == "dual" else seq

    if kind == "observable":
        if finite:
            a1 = _finite_table(sp, doc["a1"], 1, "a1") if "a1" in doc else sp.random_symmetric(1, rng)
        else:
            a1 = _gaussian_profile(1, doc.get("amplitude", 1.0), doc.get("center", [0.0, 0.0]))
        return kind, GradedSequence(sp, (sp.zeros(0), a1), closed=True)

    if kind == "chaos":
        if finite:
            G1 = _finite_table(sp, doc["G1"], 1, "G1") if "G1" in doc else np.abs(sp.random_symmetric(1, rng, 0.5))
        else:
            G1 = _gaussian_profile(1, doc.get("amplitude", 0.8), doc.get("center", [0.3, 0.0]))
        G0 = Chaos(G1).sequence(sp)
        if hierarchy in ("nonlinear", "liouville"):
            # a product state: both correlation sequences reduce to (0, G_1)
            return kind, G0
        return kind, exp_star(GradedSequence(sp, G0.components + tuple(sp.zeros(n) for n in range(2, depth + 1)), closed=True))

    if kind == "closed":
        N = int(doc.get("N", s + 2))
        if N < s:
            raise UsageError(f"closed system with N = {N} has no {s}-particle component")
        if finite:
            D_N = _finite_table(sp, doc["D_N"], N, "D_N") if "D_N" in doc else np.abs(sp.random_symmetric(N, rng)) + 0.05
            D = ClosedSystem(N, D_N).sequence(sp)
        else:
            D = gaussian_closed_system(N, doc.get("shift", 0.3), doc.get("coupling", 0.25)).sequence(sp)
        if hierarchy == "liouville":
            raise UsageError("a closed system has D_0 = 0, so its correlation functions are undefined; use grand_canonical")
        F0 = grand_canonical_marginals(D)
        return kind, F0 if hierarchy == "bbgky" else ln_star(F0)

    # grand canonical
    n_max = int(doc.get("n_max", s + 3))
    if finite:
        rho = _finite_table(sp, doc["profile"], 1, "profile") if "profile" in doc else np.abs(sp.random_symmetric(1, rng)) + 0.05
    else:
        rho = _gaussian_profile(1, doc.get("amplitude", 1.0), doc.get("center", [0.0, 0.0]))
    D = GrandCanonical(float(doc.get("z", 0.3)), rho, n_max).sequence(sp)
    if hierarchy == "liouville":
        return kind, ln_star(D)
    F0 = grand_canonical_marginals(D)
    return kind, F0 if hierarchy == "bbgky" else ln_star(F0)


_DEFAULT_INIT = {"bbgky": "closed", "liouville": "grand_canonical", "nonlinear": "chaos", "dual": "observable"}


def _solve_component(hierarchy: str, seq: GradedSequence, s: int, t: float, model, trunc: int | None):
    if hierarchy == "bbgky":
        spec = TruncationSpec.resolve(seq, s, trunc)
        return solve_marginal_distributions(seq, s, t, model, n_term=spec.n_term), {"n_term": spec.n_term, "exact": spec.exact}
    if hierarchy == "liouville":
        return solve_correlations(seq, s, t, model), {"n_term": None, "exact": True}
    if hierarchy == "nonlinear":
        n_term = 2 if trunc is None else trunc
        return solve_marginal_correlations(seq, s, t, model, n_term=n_term), {"n_term": n_term, "exact": False}
    return solve_marginal_observables(seq, s, t, model), {"n_term": None, "exact": True}


def _eval_points(path: str, s: int) -> np.ndarray:
    doc = _read_json(path, "points")
    if isinstance(doc, dict):
        doc = doc.get("points")
    try:
        X = np.asarray(doc, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"points in {path} must be a numeric array") from None
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1:] != (s, 2):
        raise UsageError(f"points in {path} must have shape (count, {s}, 2), got {X.shape}")
    return X


def _cmd_solve(args) -> int:
    cfg = _load_run_config(args, t=args.t)
    if args.s < 1:
        raise UsageError("--s must be at least 1")
    if args.trunc is not None and args.trunc < 0:
        raise UsageError("--trunc must be nonnegative")
    model = build_model(cfg)
    init_doc = _read_json(args.init, "init") if args.init else {"kind": _DEFAULT_INIT[args.hierarchy]}
    if not isinstance(init_doc, dict):
        raise UsageError("init file must hold a JSON object")
    rng = np.random.default_rng([cfg.seed, 2])
    kind, seq = _init_data(init_doc, model, rng, args.hierarchy, args.s, args.s + (2 if args.trunc is None else args.trunc))
    value, trunc = _solve_component(args.hierarchy, seq, args.s, cfg.t, model, args.trunc)
    init_hash = hashlib.sha256(json.dumps(init_doc, sort_keys=True).encode()).hexdigest()[:16]
    doc = _header("solve", cfg) | {
        "hierarchy": args.hierarchy,
        "s": args.s,
        "t": cfg.t,
        "init_kind": kind,
        "init_hash": init_hash,
        "truncation": trunc,
    }
    if model.kind == "finite":
        doc["M"] = model.space.M
        doc["component"] = np.asarray(value, dtype=float)
        if args.eval_points:
            raise UsageError("--eval applies to the continuous model; the finite model returns the whole table")
    else:
        if not args.eval_points:
            raise UsageError("the continuous model needs --eval with a points file")
        X = _eval_points(args.eval_points, args.s)
        doc["points"] = X
        doc["values"] = np.asarray(value(X), dtype=float)
    _emit(_dumps(doc), args.out)
    return 0


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


_COMMANDS = {"verify": _cmd_verify, "solve": _cmd_solve, "expand": _cmd_expand, "report": _cmd_report}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run the subcommand; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError, InvariantViolation, ResourceLimitError, NotImplementedError) as exc:
        print(f"hierarchy-lab: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
