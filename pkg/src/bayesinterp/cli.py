"""Command-line entry point: ``bayesinterp <command> ...``.

Exit codes: 0 consistent or success, 1 inconsistent or conflict, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from . import __version__
from .filtering_verify import DEFAULT_MAX_DEPTH, verify_filtering_conditional
from .finstoch import (
    UNIT,
    Kernel,
    SpaceMismatchError,
    compose,
    format_rational,
    label,
    parse_rational,
    point,
    power,
    split,
)
from .interpretation import (
    BeliefConflict,
    ConsistencyReport,
    InferenceModel,
    NondeterministicMachineError,
    check_conjugate_form,
    check_filtering,
    check_inference,
    predictives,
    propagate,
)
from .laws import check_laws
from .machine import simulate_coupled, step
from .parametric import (
    OUTSIDE,
    check_counting_consistency,
    check_diff_consistency,
    counting_machine,
    difference_interpretation,
    difference_machine,
    pullback_interpretation,
    pulled_back_interpretation,
)
from .specfile import SpecDocument, SpecError, document_from, dump_spec, load_spec, report_to_json, report_to_text

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; reported on stderr with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.format_usage()}{self.prog}: {message}")


def _emit(obj: dict, out) -> None:
    out.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def _dist_json(k: Kernel) -> dict:
    return {label(b): format_rational(p) for b, p in zip(k.dst.elements, k.cols[0]) if p}


def _dist_text(k: Kernel) -> str:
    return " ".join(f"{b}:{p}" for b, p in _dist_json(k).items())


def _load(args) -> SpecDocument:
    doc = load_spec(args.spec)
    if getattr(args, "interpretation", None):
        doc = load_spec(args.interpretation, base=doc)
    if doc.machine is None:
        raise InputError(f"{args.spec}: no machine in spec")
    return doc


def _need_interpretation(doc: SpecDocument, args):
    if doc.interpretation is None:
        raise InputError(f"{args.spec}: no interpretation with psi; pass --interpretation FILE")
    return doc.interpretation


def _report_out(report: ConsistencyReport, args, out, extra: dict | None = None) -> int:
    if args.json:
        _emit(report_to_json(report, extra), out)
    else:
        out.write(report_to_text(report))
    return EXIT_OK if report.consistent else EXIT_FAIL


# -- commands -------------------------------------------------------------------


def cmd_check(args, out) -> int:
    doc = _load(args)
    interp = _need_interpretation(doc, args)
    try:
        if args.conjugate:
            if doc.kind != "inference":
                raise InputError("--conjugate needs an inference interpretation (phi)")
            report = check_conjugate_form(doc.machine, interp)
        elif doc.kind == "inference":
            report = check_inference(doc.machine, interp, ignore=doc.unchecked)
        else:
            report = check_filtering(doc.machine, interp, ignore=doc.unchecked)
    except NondeterministicMachineError as exc:
        raise InputError(str(exc)) from None
    return _report_out(report, args, out)


def cmd_filter(args, out) -> int:
    doc = _load(args)
    interp = _need_interpretation(doc, args)
    m = doc.machine
    start = args.start or m.states.elements[0]
    if start not in m.states:
        raise InputError(f"unknown start state {start!r}")
    inputs = [s for s in args.inputs.split(",") if s] if args.inputs else []
    for s in inputs:
        if s not in m.inputs:
            raise InputError(f"unknown input {s!r}")
    psi_S = predictives(interp).psi_S
    state = point(m.states, start)
    rows = [{"step": 0, "input": None, "state": _dist_json(state),
             "belief": _dist_json(compose(state, interp.psi)), "impossible": False}]
    for t, s in enumerate(inputs, 1):
        impossible = compose(state, psi_S)(s) == 0
        state = step(m, state, s)
        rows.append({"step": t, "input": s, "state": _dist_json(state),
                     "belief": _dist_json(compose(state, interp.psi)), "impossible": impossible})
    if args.json:
        _emit({"trajectory": rows, "tool_version": __version__}, out)
        return EXIT_OK
    table = [("step", "input", "state", "belief", "note")]
    for r in rows:
        table.append((
            str(r["step"]),
            r["input"] or "-",
            " ".join(f"{k}:{v}" for k, v in r["state"].items()),
            " ".join(f"{k}:{v}" for k, v in r["belief"].items()),
            "subjectively impossible input" if r["impossible"] else "",
        ))
    widths = [max(len(r[c]) for r in table) for c in range(5)]
    for r in table:
        out.write("  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip() + "\n")
    return EXIT_OK


def _parse_seed(doc: SpecDocument, text: str):
    if "=" not in text:
        raise InputError(f"seed {text!r} should look like state=h1:1/2,h2:1/2")
    y, spec = text.split("=", 1)
    H = doc.model.hidden
    if y not in doc.machine.states:
        raise InputError(f"unknown state {y!r} in seed")
    if spec == "uniform":
        return y, {h: Fraction(1, len(H)) for h in H}
    belief = {}
    for part in spec.split(","):
        h, _, p = part.partition(":")
        if h not in H:
            raise InputError(f"unknown hidden value {h!r} in seed")
        try:
            belief[h] = parse_rational(p) if p else Fraction(1)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    if sum(belief.values()) != 1:
        raise InputError(f"seed belief for {y} sums to {format_rational(sum(belief.values()))}, not 1")
    return y, belief


def cmd_propagate(args, out) -> int:
    doc = _load(args)
    if not isinstance(doc.model, InferenceModel):
        raise InputError("propagate needs an inference model (phi)")
    seeds = dict(_parse_seed(doc, s) for s in args.seed)
    try:
        result = propagate(doc.machine, doc.model, seeds)
    except BeliefConflict as exc:
        H = doc.model.hidden
        a, b = (Kernel(UNIT, H, (col,)) for col in (exc.belief_a, exc.belief_b))
        witnesses = [[label(x) for x in w] for w in exc.witnesses]
        if args.json:
            _emit({"result": "conflict", "state": label(exc.state), "belief_a": _dist_json(a),
                   "belief_b": _dist_json(b), "witnesses": witnesses, "tool_version": __version__}, out)
        else:
            out.write(f"result:     conflict at {label(exc.state)}\n")
            out.write(f"belief a:   {_dist_text(a)}  (from {' '.join(witnesses[0])})\n")
            out.write(f"belief b:   {_dist_text(b)}  (from {' '.join(witnesses[1])})\n")
        return EXIT_FAIL
    psi = {label(y): {label(h): format_rational(p) for h, p in zip(result.psi.dst, col) if p}
           for y, col in zip(result.psi.src, result.psi.cols)}
    unconstrained = [label(y) for y in result.unconstrained]
    if args.json:
        _emit({"result": "success", "psi": psi, "unconstrained_states": unconstrained,
               "tool_version": __version__}, out)
    else:
        out.write("result:     success\n")
        width = max(len(y) for y in psi)
        for y, col in psi.items():
            note = "  (unconstrained)" if y in unconstrained else ""
            out.write(f"  {y.ljust(width)}  {' '.join(f'{h}:{p}' for h, p in col.items())}{note}\n")
    return EXIT_OK


def cmd_verify_filtering(args, out) -> int:
    doc = _load(args)
    interp = _need_interpretation(doc, args)
    try:
        report = verify_filtering_conditional(
            doc.machine, interp, args.depth, strict=not args.informational, max_depth=args.max_depth
        )
    except NondeterministicMachineError as exc:
        raise InputError(f"{exc}; pass --informational to evaluate it anyway") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    unconstrained = set(report.unconstrained)
    sequences = []
    S, n = doc.machine.inputs, args.depth
    for y in doc.machine.states:
        for e in power(S, n):
            seq = split(e, [S] * n)
            sequences.append({"y": label(y), "sequence": [label(s) for s in seq],
                              "status": "unconstrained" if (y, seq) in unconstrained else "checked"})
    # unconstrained (y, seq) pairs are reported per sequence, not as states
    report.unconstrained = []
    extra = {"depth": n, "sequences": sequences}
    if args.informational:
        extra["informational"] = True
    if args.json:
        _emit(report_to_json(report, extra), out)
    else:
        out.write(report_to_text(report))
        checked = sum(1 for s in sequences if s["status"] == "checked")
        out.write(f"sequences:            {checked} checked, {len(sequences) - checked} unconstrained\n")
    if args.informational:
        return EXIT_OK
    return EXIT_OK if report.consistent else EXIT_FAIL


def cmd_simulate(args, out) -> int:
    doc = _load(args)
    if doc.environment is None:
        raise InputError(f"{args.spec}: no environment in spec")
    m = doc.machine
    start = args.start or m.states.elements[0]
    if start not in m.states:
        raise InputError(f"unknown start state {start!r}")
    try:
        traj = simulate_coupled(m, doc.environment, point(m.states, start), args.steps, args.seed)
    except SpaceMismatchError as exc:
        raise InputError(str(exc)) from None
    if args.json:
        header = {"generator": traj.algorithm, "seed": traj.seed, "x0": label(traj.x0), "y0": label(traj.y0)}
        out.write(json.dumps(header) + "\n")
        for st in traj:
            out.write(json.dumps({"step": st.t, "x": label(st.x), "s": label(st.s), "y": label(st.y)}) + "\n")
    else:
        out.write(f"# generator {traj.algorithm} seed {traj.seed} x0 {label(traj.x0)} y0 {label(traj.y0)}\n")
        out.write("step\tx\ts\ty\n")
        for st in traj:
            out.write(f"{st.t}\t{label(st.x)}\t{label(st.s)}\t{label(st.y)}\n")
    return EXIT_OK


def cmd_example(args, out) -> int:
    if args.window < 1:
        raise InputError("--window must be at least 1")
    if args.emit_spec:
        if args.name == "difference":
            m = difference_machine(args.window)
            doc = document_from(m, difference_interpretation(m, args.paper_convention), unchecked=[OUTSIDE])
        elif args.name == "pullback":
            doc = document_from(counting_machine(args.window), pulled_back_interpretation(args.window), [OUTSIDE])
        else:
            raise InputError("the counting example has a continuous hidden space and no spec file form")
        out.write(dump_spec(doc))
        return EXIT_OK
    if args.name == "counting":
        report = check_counting_consistency(args.window, "literal" if args.paper_convention else "adopted")
    elif args.name == "difference":
        report = check_diff_consistency(args.window, printed=args.paper_convention)
    else:
        if args.paper_convention:
            raise InputError("--paper-convention applies to the counting and difference examples only")
        report = pullback_interpretation(args.window)
    return _report_out(report, args, out)


def cmd_axioms(args, out) -> int:
    results = check_laws(args.trials, args.seed, workers=args.workers)
    if args.json:
        _emit({"trials": args.trials, "seed": args.seed,
               "laws": [{"name": r.name, "passed": r.passed, "failures": r.failures} for r in results],
               "tool_version": __version__}, out)
    else:
        width = max(len(r.name) for r in results)
        for r in results:
            status = "pass" if r.passed else f"FAIL ({len(r.failures)} of {r.trials})"
            out.write(f"{r.name.ljust(width)}  {status}\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit a JSON document instead of text")

    parser = _Parser(prog="bayesinterp", description="Exact consistency checks for Bayesian interpretations of machines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def spec_cmd(name, help_, func):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.add_argument("spec", help="spec file path or bundled spec name")
        p.add_argument("--interpretation", metavar="FILE", help="take the interpretation from another spec file")
        p.set_defaults(func=func)
        return p

    p = spec_cmd("check", "check an interpretation for consistency", cmd_check)
    p.add_argument("--conjugate", action="store_true", help="check the conjugate-prior form (deterministic machines)")

    p = spec_cmd("filter", "print the belief trajectory along an input sequence", cmd_filter)
    p.add_argument("--inputs", required=True, help="comma-separated inputs, e.g. s1,s2")
    p.add_argument("--start", help="initial state (default: first declared state)")

    p = spec_cmd("propagate", "build a consistent belief map from seed beliefs", cmd_propagate)
    p.add_argument("--seed", action="append", required=True, metavar="STATE=DIST",
                   help="seed belief, e.g. y0=h1:1/2,h2:1/2 or y0=uniform (repeatable)")

    p = spec_cmd("verify-filtering", "check n-step joint beliefs against the machine", cmd_verify_filtering)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH)
    p.add_argument("--informational", action="store_true", help="also evaluate stochastic machines; never fails")

    p = spec_cmd("simulate", "sample the machine coupled to the spec's environment", cmd_simulate)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--start", help="initial state (default: first declared state)")

    p = sub.add_parser("example", help="check a windowed coin machine", parents=[common])
    p.add_argument("name", choices=["counting", "difference", "pullback"])
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--paper-convention", action="store_true",
                   help="counting: literal hyperparameter pairing; difference: alternative closed form")
    p.add_argument("--emit-spec", action="store_true", help="print the windowed machine as a spec file")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("axioms", help="run the randomised Markov-category law suite", parents=[common])
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $BAYESINTERP_WORKERS or 1)")
    p.set_defaults(func=cmd_axioms)
    return parser


def run_command(argv: list[str] | None = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except InputError as exc:
        err.write(f"error: {exc}\n")
    except SpecError as exc:
        err.write(f"error: {exc.args[0] if exc.args else exc}\n")
    except FileNotFoundError as exc:
        err.write(f"error: {exc}\n")
    return EXIT_INPUT


def main() -> None:
    sys.exit(run_command())
