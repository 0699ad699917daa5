"""Command-line front end: ``scone <command> ...``.

Tables go to stderr, JSON to stdout under ``--json``.  ``build`` writes the
exported problem to stdout or ``-o FILE``.  Inputs are inline strings or
``@path`` to read UTF-8 text from a file.

Exit codes: 0 success or member, 1 non-member or infeasible, 2 undetermined,
64 usage error, 65 malformed input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .certify import (CircuitCoefficients, check_dual_circuit, check_primal_circuit,
                      circuit_number)
from .circuits import enumerate_circuits, enumerate_reduced, is_reduced
from .conic import (DEFAULT_MAX_ITER, DEFAULT_TOL, FEASIBLE, INFEASIBLE_HINT, assemble_dual,
                    assemble_primal, circuit_problem, export_problem, feasibility,
                    verify_problem)
from .core import AGForm, ParseError, Support, as_fraction, parse_form, parse_support, print_form
from .liftrep import primal_circuit_matrix
from .witness import assignment_to_json, complete_primal_witness, verify_assignment

EXIT_OK = 0
EXIT_NO = 1
EXIT_UNDETERMINED = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65

log = logging.getLogger("scone")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    command: str
    source: str
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    max_outer: int | None = None
    workers: int = 1
    json: bool = False
    reduced: bool = False
    side: str = "primal"
    fmt: str = "json"
    output: str | None = None
    circuit: int | None = None
    point: str | None = None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    common.add_argument("--max-outer", type=int, default=None, metavar="K",
                        help="largest outer set size to enumerate")
    common.add_argument("--workers", type=int, default=1, help="threads for circuit enumeration")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="scone", description="Second-order representations of S-cones.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("circuits", parents=[common], help="list circuits of a support")
    p.add_argument("source")
    p.add_argument("--reduced", action="store_true", help="only reduced circuits")

    p = sub.add_parser("check", parents=[common], help="decide membership of a form")
    p.add_argument("source")

    p = sub.add_parser("check-dual", parents=[common], help="decide membership in the dual cone")
    p.add_argument("source")
    p.add_argument("--point", required=True, help="values in support order, comma separated")

    p = sub.add_parser("build", parents=[common], help="export the assembled problem")
    p.add_argument("source")
    p.add_argument("--side", choices=("primal", "dual"), default="primal")
    p.add_argument("--format", dest="fmt", choices=("json", "socptext"), default="json")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--circuit", type=int, default=None,
                   help="export only this reduced circuit's matrix (index as in 'circuits --reduced')")
    p.add_argument("--point", default=None, help="pin the dual point")

    p = sub.add_parser("witness", parents=[common], help="complete a primal witness for one circuit")
    p.add_argument("source")
    p.add_argument("--circuit", type=int, required=True)
    return parser


def parse_args(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    if ns.verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    fields = {k: v for k, v in vars(ns).items() if k in CliConfig.__dataclass_fields__}
    return CliConfig(**fields)


def _read_source(text: str) -> str:
    if text.startswith("@"):
        try:
            return Path(text[1:]).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise UsageError(f"cannot read {text[1:]}: {exc.strerror}") from exc
    return text


def _form_or_support(text: str):
    """A form when every term has a coefficient, else just a support."""
    try:
        f = parse_form(text)
        return f, f.support
    except ParseError:
        return None, parse_support(text)


def _parse_point(text: str, support: Support) -> list:
    raw = text.strip().strip("()[]")
    try:
        values = [as_fraction(x) for x in raw.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad point {text!r}") from exc
    if len(values) != len(support.points):
        raise ParseError(f"point has {len(values)} entries, support has {len(support.points)} points")
    return values


def _reduced(support: Support, cfg: CliConfig) -> list:
    even, odd = enumerate_reduced(support, cfg.max_outer, cfg.workers)
    return even + odd


def _pick_circuit(circuits: list, index: int):
    if not 0 <= index < len(circuits):
        raise UsageError(f"--circuit {index} out of range (support has {len(circuits)} reduced circuits)")
    return circuits[index]


def _table(header, rows) -> str:
    rows = [[str(x) for x in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda r: "  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip()
    return "\n".join([line(header)] + [line(r) for r in rows])


def _frac(q) -> str:
    return str(q)


# -- commands ---------------------------------------------------------------------


def cmd_circuits(cfg: CliConfig, out, err) -> int:
    _, support = _form_or_support(cfg.source)
    if cfg.reduced:
        found = _reduced(support, cfg)
    else:
        found = enumerate_circuits(support, support.A, None, cfg.max_outer, cfg.workers)
    records = []
    for i, circ in enumerate(found):
        flag = is_reduced(circ, support)
        records.append({
            "index": i,
            "circuit": str(circ),
            "id": circ.id,
            "outer": [str(a) for a in circ.outer],
            "inner": str(circ.inner),
            "lambda": [_frac(l) for l in circ.lam],
            "p": circ.p,
            "p_alpha": list(circ.p_alpha),
            "m": circ.m,
            "parity": circ.parity.value,
            "reduced": bool(flag),
            "blockers": [str(b) for b in flag.blockers],
        })
    print(_table(["#", "circuit", "lambda", "p", "p_alpha", "parity", "reduced"],
                 [[r["index"], r["circuit"], ",".join(r["lambda"]), r["p"],
                   ",".join(map(str, r["p_alpha"])), r["parity"], str(r["reduced"]).lower()]
                  for r in records]), file=err)
    if cfg.json:
        json.dump({"support": str(support), "circuits": records}, out, indent=2)
        out.write("\n")
    return EXIT_OK


def _exact_primal_decision(f: AGForm, circuits: list):
    """Decide membership exactly where circuits alone settle it, else None."""
    support = f.support
    bad_even = [a for a in support.A if f[a] < 0]
    bad_odd = [b for b in support.B if f[b] != 0]
    if not bad_even and not bad_odd:
        return True, "all coefficients nonnegative"
    inner_even = {c.inner for c in circuits if not c.odd}
    inner_odd = {c.inner for c in circuits if c.odd}
    for a in bad_even:
        if a not in inner_even:
            return False, f"negative coefficient at {a} is not the inner point of any reduced circuit"
    for b in bad_odd:
        if b not in inner_odd:
            return False, f"nonzero coefficient at {b} is not the inner point of any odd reduced circuit"
    if len(circuits) == 1:
        circ = circuits[0]
        if any(f[a] < 0 for a in circ.outer):
            return False, "negative coefficient on an outer point"
        c = CircuitCoefficients.from_form(f, circ)
        return check_primal_circuit(c, circ), "single reduced circuit, exact test"
    return None, ""


def cmd_check(cfg: CliConfig, out, err) -> int:
    f = parse_form(cfg.source)
    circuits = _reduced(f.support, cfg)
    rows, records = [], []
    for i, circ in enumerate(circuits):
        c = CircuitCoefficients.from_form(f, circ)
        if any(x < 0 for x in c.outer):
            n, ok = None, None
        else:
            n, ok = circuit_number(c, circ), check_primal_circuit(c, circ)
        records.append({"index": i, "circuit": str(circ), "parity": circ.parity.value,
                        "circuit_number": n, "inner_coeff": _frac(c.inner), "accepted": ok})
        verdict = "n/a" if ok is None else ("accepted" if ok else "rejected")
        rows.append([i, circ, circ.parity.value, "n/a" if n is None else f"{n:.10g}", c.inner, verdict])
    print(_table(["#", "circuit", "parity", "circuit_number", "c_inner", "exact"], rows), file=err)

    member, reason = _exact_primal_decision(f, circuits)
    result = {"form": print_form(f), "circuits": records}
    if member is not None:
        result.update(method="exact", member=member, reason=reason)
        code = EXIT_OK if member else EXIT_NO
    else:
        prob = assemble_primal(f.support, f, cfg.max_outer, cfg.workers)
        res = feasibility(prob, max_iter=cfg.max_iter, tol=cfg.tol)
        status = res.status
        if res.feasible and not verify_problem(prob, res.assignment, cfg.tol):
            status = "undetermined"
        member = True if status == FEASIBLE else (False if status == INFEASIBLE_HINT else None)
        result.update(method="numerical", member=member, status=status,
                      iterations=res.iterations, residual=res.residual)
        code = {FEASIBLE: EXIT_OK, INFEASIBLE_HINT: EXIT_NO}.get(status, EXIT_UNDETERMINED)
    word = {True: "member", False: "not a member", None: "undetermined"}[member]
    print(f"{result['method']}: {word}" + (f" ({reason})" if reason else ""), file=err)
    if cfg.json:
        json.dump(result, out, indent=2)
        out.write("\n")
    return code


def cmd_check_dual(cfg: CliConfig, out, err) -> int:
    _, support = _form_or_support(cfg.source)
    point = _parse_point(cfg.point, support)
    values = dict(zip(support.points, point))
    circuits = _reduced(support, cfg)
    rows, records = [], []
    exact = all(values[a] >= 0 for a in support.A)
    for i, circ in enumerate(circuits):
        ok = check_dual_circuit(CircuitCoefficients.from_mapping(circ, values), circ)
        exact = exact and ok
        records.append({"index": i, "circuit": str(circ), "parity": circ.parity.value, "accepted": ok})
        rows.append([i, circ, circ.parity.value, "accepted" if ok else "rejected"])
    print(_table(["#", "circuit", "parity", "exact"], rows), file=err)
    prob = assemble_dual(support, point, cfg.max_outer, cfg.workers)
    res = feasibility(prob, max_iter=cfg.max_iter, tol=cfg.tol)
    print(f"exact: {'member' if exact else 'not a member'}; numerical: {res.status}", file=err)
    if cfg.json:
        json.dump({"support": str(support), "point": [_frac(x) for x in point], "circuits": records,
                   "member": exact, "numerical": res.status}, out, indent=2)
        out.write("\n")
    return EXIT_OK if exact else EXIT_NO


def cmd_build(cfg: CliConfig, out, err) -> int:
    f, support = _form_or_support(cfg.source)
    point = None if cfg.point is None else _parse_point(cfg.point, support)
    if cfg.circuit is not None:
        circ = _pick_circuit(_reduced(support, cfg), cfg.circuit)
        if cfg.side == "primal":
            values = None if f is None else {g: f[g] for g in circ.points}
        else:
            values = None if point is None else dict(zip(support.points, point))
        prob = circuit_problem(circ, cfg.side, values)
    elif cfg.side == "primal":
        prob = assemble_primal(support, f, cfg.max_outer, cfg.workers)
    else:
        prob = assemble_dual(support, point, cfg.max_outer, cfg.workers)
    data = export_problem(prob, cfg.fmt)
    if cfg.output:
        Path(cfg.output).write_bytes(data)
    else:
        out.flush()
        stream = getattr(out, "buffer", None)
        if stream is not None:
            stream.write(data)
            stream.flush()
        else:
            out.write(data.decode())
    print(f"{len(prob.vars)} vars, {len(prob.equalities)} eq, {len(prob.nonneg)} nonneg, "
          f"{len(prob.socs)} soc", file=err)
    return EXIT_OK


def cmd_witness(cfg: CliConfig, out, err) -> int:
    f = parse_form(cfg.source)
    circ = _pick_circuit(_reduced(f.support, cfg), cfg.circuit)
    if any(f[a] < 0 for a in circ.outer):
        print(f"{circ}: negative outer coefficient, no witness", file=err)
        return EXIT_NO
    values = complete_primal_witness(CircuitCoefficients.from_form(f, circ), circ)
    if values is None:
        print(f"{circ}: circuit function is not nonnegative, no witness", file=err)
        return EXIT_NO
    report = verify_assignment(primal_circuit_matrix(circ), values)
    rows = [[str(k), f"{v:.17g}"] for k, v in sorted(values.items(), key=lambda kv: kv[0].id)]
    print(_table(["variable", "value"], rows), file=err)
    print(f"verify: ok={report.ok} worst={report.worst_block} margin={report.worst_margin:.3g}", file=err)
    if cfg.json:
        out.write(assignment_to_json(values, report) + "\n")
    return EXIT_OK if report.ok else EXIT_UNDETERMINED


COMMANDS = {
    "circuits": cmd_circuits,
    "check": cmd_check,
    "check-dual": cmd_check_dual,
    "build": cmd_build,
    "witness": cmd_witness,
}


def run(argv, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        cfg = parse_args(argv)
        cfg.source = _read_source(cfg.source)
        return COMMANDS[cfg.command](cfg, out, err)
    except UsageError as exc:
        print(f"scone: usage error: {exc}", file=err)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"scone: parse error: {exc}", file=err)
        return EXIT_DATAERR
    except ValueError as exc:
        print(f"scone: invalid input: {exc}", file=err)
        return EXIT_DATAERR


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
