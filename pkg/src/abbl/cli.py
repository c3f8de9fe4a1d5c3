"""Command-line front end: ``abbl solve|check|contract|expand|fuzz|bounds``.

Exit codes: 0 for SAT or a passed check, 1 for UNSAT / UNSAT_AT_BOUND or a
failed check, 2 for usage and input errors.  Results go to stdout,
diagnostics to stderr; ``ABBL_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from abbl.atoms import CapacityError
from abbl.formula import FormulaSyntaxError, closure, parse, pretty
from abbl.harness import FuzzConfig, differential_run, report_lines
from abbl.rows import (
    CompassGenerator, ExpansionError, check_expandable, check_generator,
    check_partially_fulfilling, contract, contract_fully, expand_generator, rows_compatible,
)
from abbl.solver import (
    SAT, VerificationError, sat_finite_explicit, sat_finite_symbolic, sat_integers,
    theoretical_bounds,
)
from abbl.structures import (
    CompassStructure, IntervalStructure, InvalidStructure, compass_from_interval, dump_json,
    verify_model,
)

log = logging.getLogger("abbl")

EXIT_OK, EXIT_NO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input that should end the run with exit code 2."""


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="abbl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, fmt=("json", "text")):
        p.add_argument("--format", choices=fmt, default="json")
        p.add_argument("--output", "-o", help="write the result here instead of stdout")

    p = sub.add_parser("solve", help="decide satisfiability of a formula")
    p.add_argument("formula")
    p.add_argument("--domain", choices=("finite", "int"), default="finite")
    p.add_argument("--engine", choices=("explicit", "symbolic"), default=None,
                   help="finite engine (default explicit); not allowed with --domain int")
    p.add_argument("--max-n", type=int, default=6, help="largest order size for the explicit engine")
    p.add_argument("--max-rows", type=int, default=None,
                   help="row bound for the symbolic and integer engines")
    p.add_argument("--budget", type=int, default=None, help="search node budget")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; searches are sequential")
    common(p, ("json", "dot", "text"))

    p = sub.add_parser("check", help="verify a model or generator file")
    p.add_argument("model", help="JSON file: interval structure, compass structure or generator")
    p.add_argument("--formula", help="formula that must be featured (default: the file's own)")
    p.add_argument("--at", help="point x,y where the formula must hold")
    common(p)

    p = sub.add_parser("contract", help="contract a compass structure between two rows")
    p.add_argument("model")
    p.add_argument("--y0", type=int)
    p.add_argument("--y1", type=int)
    common(p, ("json", "dot", "text"))

    p = sub.add_parser("expand", help="unfold a compass generator")
    p.add_argument("model")
    p.add_argument("--k", type=int, default=2, help="number of unfolding rounds")
    common(p, ("json", "dot", "text"))

    p = sub.add_parser("fuzz", help="differential run of all finite engines")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--max-n", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--max-vars", type=int, default=2)
    p.add_argument("--budget", type=int, default=FuzzConfig.node_budget)
    p.add_argument("--jobs", type=int, default=1)
    common(p)

    p = sub.add_parser("bounds", help="print the small-model bounds for a formula")
    p.add_argument("formula")
    common(p)
    return ap


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}") from None
    if isinstance(data, dict) and "status" in data and "model" in data:
        # the output of ``abbl solve``: use the model it carries
        if data["model"] is None:
            raise UsageError(f"{path} holds a {data['status']} verdict without a model")
        data = data["model"]
    if not isinstance(data, dict):
        raise UsageError(f"{path} does not hold a JSON object")
    return data


def _formula(text: str):
    try:
        return parse(text)
    except FormulaSyntaxError as e:
        raise UsageError(str(e)) from None


def _compass(data: dict) -> CompassStructure:
    try:
        return CompassStructure.from_json(data)
    except (KeyError, ValueError) as e:
        raise UsageError(f"not a compass structure: {e}") from None


def _point(text: str) -> tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--at expects x,y, got {text!r}") from None
    return x, y


def _render(obj, fmt: str) -> str:
    if fmt == "dot":
        if isinstance(obj, CompassGenerator):
            obj = obj.structure
        if not isinstance(obj, CompassStructure):
            raise UsageError("nothing to draw: the result carries no structure")
        return obj.to_dot()
    if fmt == "text":
        return _text(obj)
    return dump_json(obj if isinstance(obj, dict) else obj.to_json()) + "\n"


def _text(obj) -> str:
    if isinstance(obj, CompassGenerator):
        obj = obj.structure
    if isinstance(obj, CompassStructure):
        t = obj.table
        names = {}
        lines = []
        for y in range(obj.n - 1, 0, -1):
            cells = []
            for x in range(y):
                m = obj.labels[(x, y)]
                cells.append(f"F{names.setdefault(m, len(names))}")
            lines.append(f"{y:3d} | " + " ".join(cells))
        lines.append("")
        for m, i in sorted(names.items(), key=lambda kv: kv[1]):
            shown = [s for s in t.decode_str(m & t.cl_mask) if not s.startswith("~")]
            lines.append(f"F{i} = {{{', '.join(shown)}}}")
        return "\n".join(lines) + "\n"
    if isinstance(obj, dict):
        return "\n".join(f"{k}: {v}" for k, v in obj.items()) + "\n"
    return str(obj) + "\n"


def _emit(args, text: str) -> None:
    if args.output:
        try:
            with open(args.output, "w") as fh:
                fh.write(text)
        except OSError as e:
            raise UsageError(f"cannot write {args.output}: {e.strerror}") from None
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------

def cmd_solve(args) -> int:
    f = _formula(args.formula)
    if args.domain == "int":
        if args.engine is not None:
            raise UsageError("--engine applies only to --domain finite")
        verdict = sat_integers(f, args.max_rows or 8, args.budget)
    elif args.engine == "symbolic":
        verdict = sat_finite_symbolic(f, args.max_rows or args.max_n - 1, args.budget)
    else:
        verdict = sat_finite_explicit(f, args.max_n, args.budget)
    log.info("solve %s: %s %s", pretty(f), verdict.status, verdict.stats)
    if args.format == "json":
        _emit(args, _render(verdict.to_json(), "json"))
    elif args.format == "dot":
        _emit(args, _render(verdict.model, "dot"))
    else:
        head = f"{verdict.status} " + json.dumps(verdict.stats, sort_keys=True) + "\n"
        _emit(args, head + (_text(verdict.model) if verdict.model is not None else ""))
    return EXIT_OK if verdict.status == SAT else EXIT_NO


def cmd_check(args) -> int:
    data = _load(args.model)
    if "y0" in data:
        gen = _generator(data)
        problems = check_generator(gen) + check_expandable(gen)
        if not problems:
            try:
                window = expand_generator(gen, 2)
            except (ExpansionError, InvalidStructure) as e:
                problems.append(f"expansion: {e}")
            else:
                problems += [f"partial fulfillment: {v}" for v in check_partially_fulfilling(window)]
        kind = "generator"
    else:
        if "sigma" in data or "labels" not in data:
            f = _formula(args.formula) if args.formula else None
            if f is None:
                raise UsageError("interval structures need --formula")
            try:
                G = compass_from_interval(IntervalStructure.from_json(data), closure(f))
            except (KeyError, ValueError) as e:
                raise UsageError(f"not an interval structure: {e}") from None
            kind = "interval structure"
        else:
            G = _compass(data)
            kind = "compass structure"
            f = _formula(args.formula) if args.formula else G.table.formula
        at = _point(args.at) if args.at else None
        if at is not None and at not in G.labels:
            raise UsageError(f"point {at} is outside the structure")
        try:
            problems = verify_model(G, f, at)
        except KeyError:
            raise UsageError("the formula is not in the structure's closure") from None
    result = {"kind": kind, "ok": not problems, "violations": problems}
    _emit(args, _render(result, args.format))
    for p in problems:
        print(p, file=sys.stderr)
    return EXIT_OK if not problems else EXIT_NO


def _generator(data: dict) -> CompassGenerator:
    try:
        return CompassGenerator.from_json(data)
    except (KeyError, ValueError) as e:
        raise UsageError(f"not a compass generator: {e}") from None


def cmd_contract(args) -> int:
    G = _compass(_load(args.model))
    if (args.y0 is None) != (args.y1 is None):
        raise UsageError("give both --y0 and --y1, or neither")
    try:
        if args.y0 is None:
            H, steps = contract_fully(G)
            log.info("contracted %d times: %s", len(steps), steps)
        else:
            if rows_compatible(G, args.y0, args.y1) is None:
                print(f"rows {args.y0} and {args.y1} are not compatible", file=sys.stderr)
                return EXIT_NO
            H = contract(G, args.y0, args.y1)
    except InvalidStructure as e:
        print(str(e), file=sys.stderr)
        return EXIT_NO
    except (IndexError, ValueError) as e:
        raise UsageError(str(e)) from None
    _emit(args, _render(H, args.format))
    return EXIT_OK


def cmd_expand(args) -> int:
    gen = _generator(_load(args.model))
    if args.k < 0:
        raise UsageError("--k must be non-negative")
    try:
        window = expand_generator(gen, args.k)
    except (ExpansionError, InvalidStructure) as e:
        print(str(e), file=sys.stderr)
        return EXIT_NO
    _emit(args, _render(window, args.format))
    return EXIT_OK


def cmd_fuzz(args) -> int:
    try:
        cfg = FuzzConfig(seed=args.seed, count=args.count, max_depth=args.max_depth,
                         max_vars=args.max_vars, max_n=args.max_n, node_budget=args.budget)
    except ValueError as e:
        raise UsageError(str(e)) from None
    report = differential_run(cfg, jobs=max(args.jobs, 1))
    if args.format == "json":
        _emit(args, "\n".join(report_lines(report)) + "\n")
    else:
        _emit(args, _render({
            "formulas": len(report["records"]),
            "disagreements": len(report["disagreements"]),
            "seconds": round(report["seconds"], 2),
        }, "text"))
    return EXIT_OK if not report["disagreements"] else EXIT_NO


def cmd_bounds(args) -> int:
    report = theoretical_bounds(_formula(args.formula))
    if args.format == "json":
        _emit(args, _render(report.to_json(), "json"))
    else:
        lines = [f"size: {report.size}", f"count cap: {report.count_cap}"]
        for name, b in (("finite", report.finite), ("integers", report.integers)):
            form = f"{b.base}^(2^{b.tower}) * 2^{b.linear}"
            if b.value is not None and b.digits <= 200:
                lines.append(f"{name}: {form} = {b.value}")
            else:
                lines.append(f"{name}: {form} ({b.digits} decimal digits)")
        _emit(args, "\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve, "check": cmd_check, "contract": cmd_contract,
    "expand": cmd_expand, "fuzz": cmd_fuzz, "bounds": cmd_bounds,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("ABBL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"abbl: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CapacityError, VerificationError) as e:
        print(f"abbl: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
