"""Command-line interface.

Subcommands::

    optimize   optimal structured padding PMF for one target pair
    sweep      optimal leakage along a grid of average sparsities
    generate   random sparse matrix (Matrix Market) from the source model
    encode     share a matrix and write one directory per storage node
    decode     rebuild the matrix from node directories
    simulate   drop some nodes and try to rebuild
    cost       storage cost of the sparse scheme vs a dense baseline
    selftest   built-in invariant checks

Errors exit nonzero with a single ``error: ...`` line on stderr.
``SPARSESHARE_JOBS`` sets the default worker count for ``sweep`` and
``encode``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, kernels
from .codec import encode_sub_share, measured_size_bits, read_sub_share
from .field import FieldOrder
from .frscheme import (
    AssignmentPlan,
    InsufficientNodesError,
    assignment_plan,
    break_even_s_avg,
    cost_report,
    node_contents,
    per_node_leakage,
    reconstruct_from_stores,
    reference_rows,
    split_pair,
)
from .leakage import SourceModel, SparsityTargets
from .optimizer import SWEEP_FIELDS, default_jobs, solve_optimal_pmf, sweep_leakage
from .report import render_report
from .selftest import run_selftest
from .sharing import SourceFitWarning, check_source_fit, generate_source, make_shares
from .sparse import matrix_market_text, read_matrix_market, write_matrix_market

EXIT_ERROR = 2
EXIT_RECONSTRUCT_FAILED = 3
PLAN_FILE = "plan.txt"
MANIFEST_FILE = "manifest.json"


class CliError(Exception):
    """User-facing failure; the message is printed as one line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage: {message}")


# -- helpers ---------------------------------------------------------------------

def _field(args) -> FieldOrder:
    return FieldOrder.from_q(args.q)


def _base(value: str):
    return 2 if value == "2" else value


def _targets(args, q: int, required=True) -> SparsityTargets | None:
    pair = (args.s_r, args.s_ar)
    if args.s_avg is not None and any(v is not None for v in pair):
        raise CliError("give targets either as --s-avg/--s-delta or as --s-r/--s-ar, not both")
    if any(v is not None for v in pair):
        if None in pair:
            raise CliError("--s-r and --s-ar must be given together")
        return SparsityTargets(args.s_r, args.s_ar, q)
    if args.s_avg is None:
        if required:
            raise CliError("missing targets: give --s-avg (with optional --s-delta) or --s-r and --s-ar")
        return None
    return SparsityTargets.from_average(args.s_avg, args.s_delta, q)


def _config(args, **resolved) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    cfg.update(resolved)
    cfg["version"] = __version__
    return cfg


def _emit(data: bytes, output):
    if output in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(output).write_bytes(data)


def _field_dict(f: FieldOrder) -> dict:
    d = {"q": f.q, "kind": f.kind}
    if f.is_binary:
        d["m"] = f.m
        d["poly"] = hex(f.poly)
    return d


def _parse_grid(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise CliError(f"--grid expects start:stop:step, got {text!r}") from None
    if step <= 0:
        raise CliError("--grid step must be positive")
    if b < a:
        return []
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + k * step, 12) for k in range(count)]


def _parse_nodes(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise CliError(f"node list must be comma-separated integers, got {text!r}") from None


def _canonical_bytes(m) -> bytes:
    return matrix_market_text(m).encode("ascii")


# -- subcommands -------------------------------------------------------------------

def cmd_optimize(args) -> int:
    f = _field(args)
    src = SourceModel(f, args.s)
    t = _targets(args, f.q)
    res = solve_optimal_pmf(src, t, _base(args.base))
    row = {"s_R": t.s_R, "s_AR": t.s_AR, "s_avg": t.s_avg, "s_delta": t.s_delta}
    row.update(res.as_dict())
    row["relative_leakage"] = res.leakage.relative
    fields = list(row) if args.format == "json" else [k for k in row if k != "roots"]
    cfg = _config(args, field=_field_dict(f))
    _emit(render_report([row], args.format, fields, cfg), args.output)
    return 0


def cmd_sweep(args) -> int:
    f = _field(args)
    src = SourceModel(f, args.s)
    grid = _parse_grid(args.grid)
    jobs = args.jobs or default_jobs()
    rows = sweep_leakage(src, grid, args.s_delta, _base(args.base), jobs)
    base = _base(args.base)
    unit = {"2": "bits", "e": "nats", "q": f"log base q={f.q}"}[str(base)]
    cfg = _config(args, jobs=jobs, field=_field_dict(f), grid_points=len(grid),
                  leakage_unit=unit, split="s_R = s_avg - s_delta/2, s_AR = s_avg + s_delta/2")
    _emit(render_report(rows, args.format, SWEEP_FIELDS, cfg), args.output)
    return 0


def cmd_generate(args) -> int:
    f = _field(args)
    m = generate_source(args.rows, args.cols, SourceModel(f, args.s), args.seed)
    write_matrix_market(args.output, m)
    info = {"rows": m.rows, "cols": m.cols, "nnz": m.nnz, "zero_fraction": m.zero_fraction,
            "sha256": hashlib.sha256(_canonical_bytes(m)).hexdigest()}
    sys.stdout.write(json.dumps(info) + "\n")
    return 0


def _load_plan(args, n, xi) -> AssignmentPlan:
    if args.plan:
        plan = AssignmentPlan.from_text(Path(args.plan).read_text())
        if plan.n != n:
            raise CliError(f"plan file has n={plan.n}, but --n is {n}")
        return plan
    return assignment_plan(n, xi)


def cmd_encode(args) -> int:
    a = read_matrix_market(args.input)
    f = a.field
    if args.q is not None and FieldOrder.from_q(args.q) != f:
        raise CliError(f"--q {args.q} disagrees with the input file's field {f}")
    src = SourceModel(f, args.s)
    t = _targets(args, f.q)
    base = _base(args.base)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SourceFitWarning)
        check_source_fit(a, src)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")

    res = solve_optimal_pmf(src, t, base)
    pair = make_shares(a, res.pmf, args.seed)
    plan = _load_plan(args, args.n, args.xi)
    ar, r = split_pair(pair, plan.n)
    contents = node_contents(plan, ar, r)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "sparseshare-nodes", "version": __version__,
        "field": _field_dict(f), "rows": a.rows, "cols": a.cols,
        "n": plan.n, "xi": plan.xi, "seed": args.seed, "s": args.s,
        "targets": {"s_R": t.s_R, "s_AR": t.s_AR},
        "pmf": res.pmf.as_dict(),
        "leakage": res.leakage.as_dict(),
        "input_sha256": hashlib.sha256(_canonical_bytes(a)).hexdigest(),
    }
    manifest_bytes = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    plan_text = plan.to_text()

    def write_node(i):
        d = out / f"node_{i}"
        d.mkdir(exist_ok=True)
        (d / PLAN_FILE).write_text(plan_text)
        (d / MANIFEST_FILE).write_bytes(manifest_bytes)
        bits = 0
        for sub in contents[i]:
            blob = encode_sub_share(sub)
            (d / f"{sub.name}.spsh").write_bytes(blob)
            bits += measured_size_bits(blob)
        return bits

    jobs = args.jobs or default_jobs()
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as ex:
        bits = list(ex.map(write_node, range(plan.n)))

    node_leak = per_node_leakage(res.leakage.total, a.rows, a.cols, plan.n, plan.xi)
    rows = [{"node": i, "files": len(contents[i]), "measured_bits": bits[i],
             "leakage_bound": node_leak} for i in range(plan.n)]
    cfg = _config(args, jobs=jobs, field=_field_dict(f), s_R=t.s_R, s_AR=t.s_AR)
    extra = {"pmf": res.pmf.as_dict(), "leakage": res.leakage.as_dict(),
             "zero_fraction_R": pair.padding.zero_fraction,
             "zero_fraction_AR": pair.padded.zero_fraction}
    _emit(render_report(rows, args.format, None, cfg, extra), args.output)
    return 0


def _node_dirs(root: Path) -> dict[int, Path]:
    if not root.is_dir():
        raise CliError(f"node directory {root} does not exist")
    found = {}
    for d in root.iterdir():
        if d.is_dir() and d.name.startswith("node_"):
            try:
                found[int(d.name[5:])] = d
            except ValueError:
                continue
    if not found:
        raise CliError(f"no node_* directories under {root}")
    return found


def _rebuild(root: Path, available: list[int], output):
    dirs = _node_dirs(root)
    missing_dirs = [i for i in available if i not in dirs]
    if missing_dirs:
        raise CliError(f"no directory for nodes {missing_dirs}")
    first = dirs[available[0]] if available else next(iter(dirs.values()))
    plan = AssignmentPlan.from_text((first / PLAN_FILE).read_text())
    manifest = json.loads((first / MANIFEST_FILE).read_text())
    stores = {i: [read_sub_share(p) for p in sorted(dirs[i].glob("*.spsh"))] for i in available}
    result = {"n": plan.n, "xi": plan.xi, "available": available}
    try:
        a = reconstruct_from_stores(plan, stores)
    except InsufficientNodesError as e:
        result.update(success=False, reason=str(e),
                      missing_AR=e.missing_ar, missing_R=e.missing_r)
        return result
    data = _canonical_bytes(a)
    digest = hashlib.sha256(data).hexdigest()
    if output:
        Path(output).write_bytes(data)
    result.update(success=True, rows=a.rows, cols=a.cols, nnz=a.nnz, sha256=digest,
                  matches_input=digest == manifest.get("input_sha256"))
    return result


def _report_json(result: dict, cfg: dict, output):
    doc = {"config": cfg, "result": result}
    _emit((json.dumps(doc, indent=2) + "\n").encode(), output)


def cmd_decode(args) -> int:
    root = Path(args.nodes_dir)
    available = _parse_nodes(args.nodes) or sorted(_node_dirs(root))
    result = _rebuild(root, available, args.output)
    _report_json(result, _config(args), args.report)
    if not result["success"]:
        raise CliError(result["reason"])
    return 0


def cmd_simulate(args) -> int:
    root = Path(args.nodes_dir)
    dirs = _node_dirs(root)
    failed = _parse_nodes(args.fail_nodes)
    unknown = [i for i in failed if i not in dirs]
    if unknown:
        raise CliError(f"--fail-nodes names unknown nodes {unknown}")
    available = [i for i in sorted(dirs) if i not in failed]
    result = _rebuild(root, available, args.output)
    result["failed"] = failed
    _report_json(result, _config(args), args.report)
    if not result["success"]:
        sys.stderr.write(f"error: {result['reason']}\n")
        return EXIT_RECONSTRUCT_FAILED
    return 0


def _measured_node_bits(root: Path) -> dict[int, int]:
    return {i: sum(measured_size_bits(p.read_bytes()) for p in sorted(d.glob("*.spsh")))
            for i, d in sorted(_node_dirs(root).items())}


def cmd_cost(args) -> int:
    if args.table:
        rows = reference_rows(_base(args.base))
        _emit(render_report(rows, args.format, None, _config(args)), args.output)
        return 0
    need = {"--n": args.n, "--xi": args.xi, "--rows": args.rows, "--cols": args.cols,
            "--s-avg": args.s_avg}
    absent = [k for k, v in need.items() if v is None]
    if absent:
        raise CliError(f"cost needs {', '.join(absent)} (or --table)")
    f = _field(args)
    measured = None
    if args.nodes_dir:
        per_node = _measured_node_bits(Path(args.nodes_dir))
        measured = max(per_node.values())
    rep = cost_report(args.s_avg, args.rows, args.cols, args.n, args.xi, f.q, measured)
    row = rep.as_dict()
    row["break_even_s_avg"] = break_even_s_avg(args.n, args.xi, f.q, args.rows, args.cols)
    _emit(render_report([row], args.format, None, _config(args, field=_field_dict(f))),
          args.output)
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest()
    for r in results:
        flag = "PASS" if r["passed"] else "FAIL"
        sys.stdout.write(f"{flag} {r['name']}: {r['detail']} ({r['seconds']}s)\n")
    sys.stdout.write(f"backend: {kernels.BACKEND}\n")
    return 0 if all(r["passed"] for r in results) else 1


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sparseshare", description="Sparse two-share secret sharing toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="json", q_default="256"):
        sp.add_argument("--q", default=q_default,
                        help="field order: a prime, 2^m, or a power of two (default %(default)s)")
        sp.add_argument("--s", type=float, default=0.95,
                        help="source zero probability (default %(default)s)")
        sp.add_argument("--base", choices=["2", "e", "q"], default="2",
                        help="log base for leakage (default bits)")
        sp.add_argument("--format", choices=["csv", "json"], default=fmt)
        sp.add_argument("-o", "--output", help="report path (default stdout)")

    def targets(sp, delta_default=0.0):
        sp.add_argument("--s-avg", type=float, help="average share sparsity")
        sp.add_argument("--s-delta", type=float, default=delta_default,
                        help="S(A+R) - S(R) (default %(default)s)")
        sp.add_argument("--s-r", type=float, help="target sparsity of R")
        sp.add_argument("--s-ar", type=float, help="target sparsity of A+R")

    sp = sub.add_parser("optimize", help="optimal padding PMF for one target pair")
    common(sp)
    targets(sp)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("sweep", help="optimal leakage over an s_avg grid")
    common(sp, fmt="csv")
    sp.add_argument("--s-delta", type=float, default=0.0)
    sp.add_argument("--grid", required=True, help="start:stop:step (inclusive)")
    sp.add_argument("--jobs", type=int, help="worker processes (default $SPARSESHARE_JOBS or 1)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("generate", help="random sparse matrix from the source model")
    sp.add_argument("--q", default="256")
    sp.add_argument("--s", type=float, default=0.95)
    sp.add_argument("--rows", type=int, required=True)
    sp.add_argument("--cols", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", "-o", required=True, help="Matrix Market output path")
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("encode", help="share a matrix into node directories")
    common(sp, q_default=None)
    targets(sp)
    sp.add_argument("--input", "-i", required=True, help="Matrix Market input")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--n", type=int, required=True, help="number of nodes (even)")
    sp.add_argument("--xi", type=int, default=0, help="straggler tolerance")
    sp.add_argument("--plan", help="custom assignment table (overrides the cyclic plan)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="rebuild the matrix from node directories")
    sp.add_argument("--nodes-dir", required=True)
    sp.add_argument("--nodes", help="comma-separated node ids to use (default all present)")
    sp.add_argument("--output", "-o", help="Matrix Market output path")
    sp.add_argument("--report", help="JSON report path (default stdout)")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("simulate", help="fail some nodes and try to rebuild")
    sp.add_argument("--nodes-dir", required=True)
    sp.add_argument("--fail-nodes", default="", help="comma-separated node ids to drop")
    sp.add_argument("--output", "-o", help="Matrix Market output path for the rebuilt matrix")
    sp.add_argument("--report", help="JSON report path (default stdout)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("cost", help="storage cost vs a dense baseline")
    common(sp)
    sp.add_argument("--table", action="store_true", help="evaluate the built-in reference rows")
    sp.add_argument("--n", type=int)
    sp.add_argument("--xi", type=int)
    sp.add_argument("--rows", type=int)
    sp.add_argument("--cols", type=int)
    sp.add_argument("--s-avg", type=float)
    sp.add_argument("--nodes-dir", help="measure the largest node store in this directory")
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("selftest", help="run the built-in invariant checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as e:
        msg = str(e)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        msg = f"{type(e).__name__}: {e}"
    sys.stderr.write("error: " + " ".join(msg.split()) + "\n")
    return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
