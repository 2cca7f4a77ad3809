"""Machine/interpretation spec files and report documents.

A spec file is JSON::

    {
      "version": 1,
      "spaces": [{"name": "Y", "elements": ["y0", "y1"]}, ...],
      "machine": {
        "states": "Y", "inputs": "S",
        "transitions": [{"from": "y0", "input": "s1", "to": "y1", "prob": "1"}, ...],
        "unchecked": ["outside"]                       # optional
      },
      "interpretation": {                              # optional
        "hidden": "H", "kind": "inference",
        "psi": {"y0": {"h1": "1/2", "h2": "1/2"}, ...},
        "phi": {"h1": {"s1": "1"}, ...}                # kind = inference
        "kappa": [{"from": "h1", "to": "h1", "emit": "s1", "prob": "1"}, ...]   # kind = filtering
      },
      "environment": {                                 # optional
        "hidden": "X",
        "dynamics": [{"from": "x0", "to": "x1", "emit": "s1", "prob": "1/2"}, ...],
        "initial": {"x0": "1"}
      }
    }

Omitted transitions have probability zero. Probabilities are exact strings
(``"3/4"``, ``"1"``); decimals are rejected. ``unchecked`` lists states that
are left out of every consistency constraint (used for window boundaries).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from . import __version__
from .finstoch import FinSpace, Kernel, format_rational, label, parse_rational, product
from .interpretation import ConsistencyReport, FilteringModel, InferenceModel, Interpretation
from .machine import Environment, Machine

SPEC_VERSION = 1

_PROB = {"type": "string"}
_LABEL = {"type": "string"}
_TABLE = {"type": "object", "additionalProperties": {"type": "object", "additionalProperties": _PROB}}
_EMITTING = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["from", "to", "emit", "prob"],
        "additionalProperties": False,
        "properties": {"from": _LABEL, "to": _LABEL, "emit": _LABEL, "prob": _PROB},
    },
}

SCHEMA = {
    "type": "object",
    "required": ["version", "spaces"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SPEC_VERSION},
        "spaces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "elements"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "elements": {"type": "array", "minItems": 1, "items": _LABEL},
                },
            },
        },
        "machine": {
            "type": "object",
            "required": ["states", "inputs", "transitions"],
            "additionalProperties": False,
            "properties": {
                "states": _LABEL,
                "inputs": _LABEL,
                "transitions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "input", "to", "prob"],
                        "additionalProperties": False,
                        "properties": {"from": _LABEL, "input": _LABEL, "to": _LABEL, "prob": _PROB},
                    },
                },
                "unchecked": {"type": "array", "items": _LABEL},
            },
        },
        "interpretation": {
            "type": "object",
            "required": ["hidden", "kind"],
            "additionalProperties": False,
            "properties": {
                "hidden": _LABEL,
                "kind": {"enum": ["inference", "filtering"]},
                "states": _LABEL,
                "inputs": _LABEL,
                "psi": _TABLE,
                "phi": _TABLE,
                "kappa": _EMITTING,
            },
        },
        "environment": {
            "type": "object",
            "required": ["hidden", "dynamics", "initial"],
            "additionalProperties": False,
            "properties": {
                "hidden": _LABEL,
                "dynamics": _EMITTING,
                "initial": {"type": "object", "additionalProperties": _PROB},
            },
        },
    },
}


class SpecError(ValueError):
    """Invalid spec file; carries the JSON path and, when known, line and column."""

    def __init__(self, message: str, path: tuple = (), line: int | None = None, column: int | None = None, rule: str = "schema"):
        self.message = message
        self.path = tuple(path)
        self.line = line
        self.column = column
        self.rule = rule
        super().__init__(str(self))

    def __str__(self) -> str:
        where = f"line {self.line}, column {self.column}: " if self.line is not None else ""
        at = f" (at {_path_str(self.path)})" if self.path else ""
        return f"{where}{self.rule}: {self.message}{at}"


def _path_str(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


# -- locating JSON paths in the source text -----------------------------------

_WS = " \t\r\n"


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _value_offsets(text: str, i: int, path: tuple, out: dict) -> int:
    """Record the offset of every value under ``path``; return the offset after the value."""
    decoder = json.JSONDecoder()
    i = _skip_ws(text, i)
    out[path] = i
    if text[i] == "{":
        i = _skip_ws(text, i + 1)
        if text[i] == "}":
            return i + 1
        while True:
            key, i = decoder.raw_decode(text, _skip_ws(text, i))
            i = _skip_ws(text, i) + 1  # ':'
            i = _skip_ws(text, _value_offsets(text, i, path + (key,), out))
            if text[i] == "}":
                return i + 1
            i += 1  # ','
    if text[i] == "[":
        i = _skip_ws(text, i + 1)
        if text[i] == "]":
            return i + 1
        n = 0
        while True:
            i = _skip_ws(text, _value_offsets(text, i, path + (n,), out))
            n += 1
            if text[i] == "]":
                return i + 1
            i += 1
    _, end = decoder.raw_decode(text, i)
    return end


def _line_col(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    return line, offset - (text.rfind("\n", 0, offset) + 1) + 1


@dataclass
class _Source:
    text: str
    offsets: dict = field(default_factory=dict)

    def error(self, message: str, path: tuple, rule: str) -> SpecError:
        p = tuple(path)
        while p and p not in self.offsets:
            p = p[:-1]
        if p in self.offsets:
            return SpecError(message, path, *_line_col(self.text, self.offsets[p]), rule=rule)
        return SpecError(message, path, rule=rule)


# -- the document -------------------------------------------------------------


@dataclass
class SpecDocument:
    spaces: dict[str, FinSpace]
    machine: Machine | None = None
    unchecked: tuple = ()
    model: InferenceModel | FilteringModel | None = None
    psi: Kernel | None = None
    environment: Environment | None = None
    version: int = SPEC_VERSION

    @property
    def interpretation(self) -> Interpretation | None:
        if self.model is None or self.psi is None:
            return None
        return Interpretation(self.psi, self.model)

    @property
    def kind(self) -> str | None:
        if self.model is None:
            return None
        return "inference" if isinstance(self.model, InferenceModel) else "filtering"


def _prob(src: _Source, value: str, path: tuple) -> Fraction:
    try:
        p = parse_rational(value)
    except ValueError as exc:
        raise src.error(str(exc), path, "exact-rational") from None
    if not 0 <= p <= 1:
        raise src.error(f"probability {value!r} is outside [0, 1]", path, "probability-range")
    return p


def _space(src: _Source, spaces: dict, name: str, path: tuple) -> FinSpace:
    if name not in spaces:
        raise src.error(f"unknown space {name!r}", path, "unknown-space")
    return spaces[name]


def _member(src: _Source, space: FinSpace, value: str, path: tuple) -> str:
    if value not in space:
        raise src.error(f"{value!r} is not an element of {space.name}", path, "unknown-label")
    return value


def _rows_to_kernel(src: _Source, rows: dict, A: FinSpace, B: FinSpace, path: tuple, what: str) -> Kernel:
    cols = []
    for a in A:
        col = [Fraction(0)] * len(B)
        for b, p in rows.get(a, {}).items():
            col[B.index(b)] += p
        total = sum(col)
        if total != 1:
            raise src.error(f"{what} row {a} sums to {format_rational(total)}, not 1", path, "stochastic-row")
        cols.append(col)
    return Kernel(A, B, cols)


def _table(src: _Source, table: dict, A: FinSpace, B: FinSpace, path: tuple, what: str) -> Kernel:
    rows: dict = {}
    for a, col in table.items():
        _member(src, A, a, path + (a,))
        for b, p in col.items():
            _member(src, B, b, path + (a, b))
            rows.setdefault(a, {})[b] = _prob(src, p, path + (a, b))
    return _rows_to_kernel(src, rows, A, B, path, what)


def _emitting(src: _Source, entries: list, X: FinSpace, S: FinSpace, path: tuple, what: str) -> Kernel:
    XS = product(X, S)
    rows: dict = {}
    for n, e in enumerate(entries):
        p_path = path + (n,)
        x = _member(src, X, e["from"], p_path + ("from",))
        x2 = _member(src, X, e["to"], p_path + ("to",))
        s = _member(src, S, e["emit"], p_path + ("emit",))
        row = rows.setdefault(x, {})
        if (x2, s) in row:
            raise src.error(f"duplicate {what} entry {x} -> ({x2}, {s})", p_path, "duplicate-entry")
        row[(x2, s)] = _prob(src, e["prob"], p_path + ("prob",))
    return _rows_to_kernel(src, rows, X, XS, path, what)


def parse_spec(text: str, base: SpecDocument | None = None) -> SpecDocument:
    """Parse and validate a spec document.

    ``base`` supplies spaces and the machine for a file that only carries an
    interpretation.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, (), exc.lineno, exc.colno, rule="syntax") from None
    src = _Source(text)
    _value_offsets(text, 0, (), src.offsets)
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise src.error(exc.message, tuple(exc.absolute_path), f"schema/{exc.validator}") from None

    spaces: dict[str, FinSpace] = dict(base.spaces) if base else {}
    for n, sp in enumerate(raw["spaces"]):
        path = ("spaces", n)
        if len(set(sp["elements"])) != len(sp["elements"]):
            raise src.error(f"space {sp['name']!r} repeats a label", path + ("elements",), "distinct-labels")
        space = FinSpace(sp["name"], tuple(sp["elements"]))
        if sp["name"] in spaces and spaces[sp["name"]] != space:
            raise src.error(f"space {sp['name']!r} is declared twice differently", path, "duplicate-space")
        spaces[sp["name"]] = space

    doc = SpecDocument(spaces)
    if base is not None:
        doc.machine, doc.unchecked, doc.environment = base.machine, base.unchecked, base.environment

    if "machine" in raw:
        mraw = raw["machine"]
        Y = _space(src, spaces, mraw["states"], ("machine", "states"))
        S = _space(src, spaces, mraw["inputs"], ("machine", "inputs"))
        rows: dict = {}
        first: dict = {}
        for n, t in enumerate(mraw["transitions"]):
            path = ("machine", "transitions", n)
            y = _member(src, Y, t["from"], path + ("from",))
            s = _member(src, S, t["input"], path + ("input",))
            y2 = _member(src, Y, t["to"], path + ("to",))
            row = rows.setdefault((y, s), {})
            first.setdefault((y, s), path)
            if y2 in row:
                raise src.error(f"duplicate transition ({y}, {s}) -> {y2}", path, "duplicate-entry")
            row[y2] = _prob(src, t["prob"], path + ("prob",))
        cols = []
        for y in Y:
            for s in S:
                row = rows.get((y, s), {})
                total = sum(row.values(), Fraction(0))
                if total != 1:
                    raise src.error(
                        f"transitions from ({y}, {s}) sum to {format_rational(total)}, not 1",
                        first.get((y, s), ("machine", "transitions")),
                        "stochastic-row",
                    )
                cols.append([row.get(y2, Fraction(0)) for y2 in Y])
        doc.machine = Machine(Y, S, Kernel(product(Y, S), Y, cols))
        unchecked = mraw.get("unchecked", [])
        for n, u in enumerate(unchecked):
            _member(src, Y, u, ("machine", "unchecked", n))
        doc.unchecked = tuple(unchecked)

    if "interpretation" in raw:
        iraw = raw["interpretation"]
        H = _space(src, spaces, iraw["hidden"], ("interpretation", "hidden"))
        if "states" in iraw:
            Y = _space(src, spaces, iraw["states"], ("interpretation", "states"))
        elif doc.machine is not None:
            Y = doc.machine.states
        else:
            Y = None
        if "inputs" in iraw:
            S = _space(src, spaces, iraw["inputs"], ("interpretation", "inputs"))
        elif doc.machine is not None:
            S = doc.machine.inputs
        else:
            raise src.error("no machine: the interpretation must name its input space", ("interpretation",), "missing-field")
        kind = iraw["kind"]
        if kind == "inference":
            if "phi" not in iraw or "kappa" in iraw:
                raise src.error("an inference interpretation takes 'phi' (and no 'kappa')", ("interpretation",), "model-kind")
            doc.model = InferenceModel(H, _table(src, iraw["phi"], H, S, ("interpretation", "phi"), "phi"))
        else:
            if "kappa" not in iraw or "phi" in iraw:
                raise src.error("a filtering interpretation takes 'kappa' (and no 'phi')", ("interpretation",), "model-kind")
            doc.model = FilteringModel(H, _emitting(src, iraw["kappa"], H, S, ("interpretation", "kappa"), "kappa"))
        if "psi" in iraw:
            if Y is None:
                raise src.error("no machine: the interpretation must name its state space", ("interpretation",), "missing-field")
            doc.psi = _table(src, iraw["psi"], Y, H, ("interpretation", "psi"), "psi")

    if "environment" in raw:
        eraw = raw["environment"]
        X = _space(src, spaces, eraw["hidden"], ("environment", "hidden"))
        if doc.machine is None:
            raise src.error("an environment needs a machine to emit into", ("environment",), "missing-field")
        dyn = _emitting(src, eraw["dynamics"], X, doc.machine.inputs, ("environment", "dynamics"), "dynamics")
        init = _table(src, {"*": eraw["initial"]}, FinSpace("1*", ("*",)), X, ("environment", "initial"), "initial")
        doc.environment = Environment(X, dyn, Kernel(product(), X, init.cols))
    return doc


def _json_table(k: Kernel) -> dict:
    return {a: {b: format_rational(p) for b, p in zip(k.dst.elements, col) if p} for a, col in zip(k.src.elements, k.cols)}


def _json_emitting(k: Kernel, key: str = "emit") -> list:
    out = []
    for x, col in zip(k.src.elements, k.cols):
        for (x2, s), p in zip(k.dst.elements, col):
            if p:
                out.append({"from": x, "to": x2, key: s, "prob": format_rational(p)})
    return out


def spec_to_json(doc: SpecDocument) -> dict:
    out: dict[str, Any] = {
        "version": doc.version,
        "spaces": [{"name": n, "elements": list(s.elements)} for n, s in doc.spaces.items()],
    }
    m = doc.machine
    if m is not None:
        transitions = []
        for (y, s), col in zip(m.gamma.src.elements, m.gamma.cols):
            for y2, p in zip(m.states.elements, col):
                if p:
                    transitions.append({"from": y, "input": s, "to": y2, "prob": format_rational(p)})
        out["machine"] = {"states": m.states.name, "inputs": m.inputs.name, "transitions": transitions}
        if doc.unchecked:
            out["machine"]["unchecked"] = list(doc.unchecked)
    if doc.model is not None:
        interp: dict[str, Any] = {"hidden": doc.model.hidden.name, "kind": doc.kind}
        if m is None:
            interp["inputs"] = doc.model.inputs.name
            if doc.psi is not None:
                interp["states"] = doc.psi.src.name
        if doc.psi is not None:
            interp["psi"] = _json_table(doc.psi)
        if isinstance(doc.model, InferenceModel):
            interp["phi"] = _json_table(doc.model.phi)
        else:
            interp["kappa"] = _json_emitting(doc.model.kappa)
        out["interpretation"] = interp
    if doc.environment is not None:
        env = doc.environment
        out["environment"] = {
            "hidden": env.hidden.name,
            "dynamics": _json_emitting(env.dynamics),
            "initial": _json_table(env.initial)[()],
        }
    return out


def dump_spec(doc: SpecDocument) -> str:
    return json.dumps(spec_to_json(doc), indent=2, ensure_ascii=False) + "\n"


def _relabel(space: FinSpace) -> FinSpace:
    return FinSpace(space.name, tuple(label(e) for e in space.elements))


def _relabel_kernel(k: Kernel, src: FinSpace, dst: FinSpace) -> Kernel:
    return Kernel(src, dst, k.cols)


def document_from(
    machine: Machine,
    interpretation: Interpretation | None = None,
    unchecked=(),
) -> SpecDocument:
    """Spec document for in-memory objects; every label becomes its string form."""
    Y, S = _relabel(machine.states), _relabel(machine.inputs)
    spaces = {Y.name: Y, S.name: S}
    doc = SpecDocument(spaces, Machine(Y, S, _relabel_kernel(machine.gamma, product(Y, S), Y)))
    doc.unchecked = tuple(label(u) for u in unchecked)
    if interpretation is not None:
        H = _relabel(interpretation.hidden)
        spaces[H.name] = H
        doc.psi = _relabel_kernel(interpretation.psi, Y, H)
        model = interpretation.model
        if isinstance(model, InferenceModel):
            doc.model = InferenceModel(H, _relabel_kernel(model.phi, H, S))
        else:
            doc.model = FilteringModel(H, _relabel_kernel(model.kappa, H, product(H, S)))
    return doc


BUNDLED = ("three_state.spec", "three_state_deterministic.spec", "full_support_2state.spec",
           "difference_window5.spec", "counting_pullback_window3.spec")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("bayesinterp") / "data" / name))


def resolve_spec_path(name: str) -> Path:
    """A filesystem path, or the name of a bundled spec."""
    p = Path(name)
    if p.exists():
        return p
    bundled = bundled_path(name)
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no such spec file: {name}")


def load_spec(name: str, base: SpecDocument | None = None) -> SpecDocument:
    path = resolve_spec_path(name)
    text = path.read_text(encoding="utf-8")
    try:
        return parse_spec(text, base)
    except SpecError as exc:
        exc.args = (f"{path}: {exc}",)
        raise


# -- reports -------------------------------------------------------------------


def report_to_json(report: ConsistencyReport, extra: dict | None = None) -> dict:
    doc = {
        "checker": report.checker,
        "verdict": report.verdict,
        "constraint_count": report.checked_constraints,
        "violations": [
            {
                "y": label(v.y),
                "s": label(v.s),
                "y_next": None if v.y_next is None else label(v.y_next),
                "h": label(v.h),
                "lhs": format_rational(v.lhs),
                "rhs": format_rational(v.rhs),
            }
            for v in report.violations
        ],
        "impossible_inputs": {label(y): [label(s) for s in ss] for y, ss in report.impossible_inputs.items()},
        "unconstrained_states": [label(u) for u in report.unconstrained],
        "tool_version": __version__,
    }
    if extra:
        doc.update(extra)
    return doc


def report_to_text(report: ConsistencyReport) -> str:
    lines = [
        f"checker:              {report.checker}",
        f"verdict:              {report.verdict}",
        f"constraints checked:  {report.checked_constraints}",
    ]
    if report.impossible_inputs:
        lines.append("subjectively impossible inputs:")
        for y, ss in report.impossible_inputs.items():
            lines.append(f"  {label(y)}: {', '.join(label(s) for s in ss)}")
    if report.unconstrained:
        lines.append(f"unconstrained:        {len(report.unconstrained)}")
    if not report.violations:
        lines.append("violations:           none")
    else:
        lines.append(f"violations:           {len(report.violations)}")
        header = ("y", "s", "y'", "h", "lhs", "rhs")
        rows = [
            (label(v.y), label(v.s), "-" if v.y_next is None else label(v.y_next), label(v.h),
             format_rational(v.lhs), format_rational(v.rhs))
            for v in report.violations
        ]
        widths = [max(len(r[c]) for r in [header, *rows]) for c in range(len(header))]
        for r in [header, *rows]:
            lines.append("  " + "  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"
