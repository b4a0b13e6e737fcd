"""Line-oriented text format (``.imz``) for interferometer networks.

Directives, one per line, ``#`` starts a comment::

    source <seg>
    splitter <name> <in> [<in2>] -> <outT> <outR> t=<float>
    phase <name> <in> -> <out> phi=<angle>
    phase <name> <seg> phi=<angle>        # plate inserted at the end of <seg>
    mirror <tag> <in> -> <out> [z=<float>]
    junction <name> <in> -> <out>
    detector <seg>        (or detector <name>=<seg>)
    dump <seg>

Angles accept arithmetic on ``pi`` such as ``pi/2`` or ``-3*pi/4``.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass
from pathlib import Path

from .netgraph import Element, Network, NetworkError, make_network

_TOKEN = re.compile(r"\S+")
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


class ParseError(NetworkError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def eval_expr(text: str) -> float:
    """Evaluate a numeric literal with optional ``pi`` arithmetic."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError) as exc:
        raise ValueError(f"bad numeric expression {text!r}") from exc
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


@dataclass
class _Tok:
    text: str
    col: int


def _split(line: str) -> list[_Tok]:
    return [_Tok(m.group(), m.start() + 1) for m in _TOKEN.finditer(line)]


def _kv(tok: _Tok, key: str, lineno: int) -> float:
    name, sep, val = tok.text.partition("=")
    if not sep or name != key:
        raise ParseError(f"expected {key}=<value>, got {tok.text!r}", lineno, tok.col)
    try:
        return eval_expr(val)
    except ValueError as exc:
        raise ParseError(str(exc), lineno, tok.col + len(name) + 1) from None


def _arrow(toks: list[_Tok], lineno: int) -> tuple[list[_Tok], list[_Tok], list[_Tok]]:
    """Split ``a b -> c d k=v`` into inputs, outputs and key=value tokens."""
    idx = [i for i, t in enumerate(toks) if t.text == "->"]
    if len(idx) != 1:
        col = toks[0].col if toks else 1
        raise ParseError("expected exactly one '->'", lineno, col)
    i = idx[0]
    ins = toks[:i]
    rest = toks[i + 1:]
    outs = [t for t in rest if "=" not in t.text]
    kvs = [t for t in rest if "=" in t.text]
    if rest and kvs and rest.index(kvs[0]) < len(outs):
        raise ParseError("parameters must follow the output segments", lineno, kvs[0].col)
    return ins, outs, kvs


def parse_network(text: str) -> Network:
    """Parse an ``.imz`` document into a validated :class:`Network`.

    Raises :class:`ParseError` with a line/column position for syntax
    problems and for structural errors traceable to a line.
    """
    elements: list[Element] = []
    where: dict[str, tuple[int, int]] = {}
    inserts: list[tuple[str, Element]] = []
    source = detector = None
    dumps: list[str] = []

    def add(el: Element, lineno: int, col: int):
        if el.label in where:
            raise ParseError(f"duplicate label {el.label!r} (first defined on line {where[el.label][0]})", lineno, col)
        where[el.label] = (lineno, col)
        elements.append(el)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _split(line)
        if not toks:
            continue
        kw, args = toks[0], toks[1:]
        if kw.text == "source":
            if len(args) != 1:
                raise ParseError("usage: source <seg>", lineno, kw.col)
            if source is not None:
                raise ParseError("multiple sources", lineno, kw.col)
            source = args[0].text
        elif kw.text in ("detector", "dump"):
            if len(args) != 1:
                raise ParseError(f"usage: {kw.text} <seg>", lineno, kw.col)
            seg = args[0].text.split("=", 1)[-1]
            if not seg:
                raise ParseError("empty segment name", lineno, args[0].col)
            if kw.text == "detector":
                if detector is not None:
                    raise ParseError("multiple detectors", lineno, kw.col)
                detector = seg
            else:
                dumps.append(seg)
        elif kw.text == "splitter":
            if not args:
                raise ParseError("splitter needs a name", lineno, kw.col)
            name = args[0]
            ins, outs, kvs = _arrow(args[1:], lineno)
            if len(ins) not in (1, 2) or len(outs) != 2 or len(kvs) != 1:
                raise ParseError("usage: splitter <name> <in> [<in2>] -> <outT> <outR> t=<float>", lineno, kw.col)
            t = _kv(kvs[0], "t", lineno)
            if not 0.0 <= t <= 1.0:
                raise ParseError(f"splitter magnitude out of range (t={t:g})", lineno, kvs[0].col)
            add(Element("splitter", name.text, tuple(x.text for x in ins), tuple(x.text for x in outs), {"t": t}),
                lineno, name.col)
        elif kw.text in ("mirror", "junction"):
            if not args:
                raise ParseError(f"{kw.text} needs a name", lineno, kw.col)
            name = args[0]
            ins, outs, kvs = _arrow(args[1:], lineno)
            if len(ins) != 1 or len(outs) != 1 or len(kvs) > (1 if kw.text == "mirror" else 0):
                raise ParseError(f"usage: {kw.text} <name> <in> -> <out>" + (" z=<float>" if kw.text == "mirror" else ""),
                                 lineno, kw.col)
            params = {"z": _kv(kvs[0], "z", lineno)} if kvs else ({"z": 0.0} if kw.text == "mirror" else {})
            add(Element(kw.text, name.text, (ins[0].text,), (outs[0].text,), params), lineno, name.col)
        elif kw.text == "phase":
            if len(args) < 3:
                raise ParseError("usage: phase <name> <in> -> <out> phi=<angle>", lineno, kw.col)
            name = args[0]
            if any(t.text == "->" for t in args):
                ins, outs, kvs = _arrow(args[1:], lineno)
                if len(ins) != 1 or len(outs) != 1 or len(kvs) != 1:
                    raise ParseError("usage: phase <name> <in> -> <out> phi=<angle>", lineno, kw.col)
                phi = _kv(kvs[0], "phi", lineno)
                add(Element("phase", name.text, (ins[0].text,), (outs[0].text,), {"phi": phi}), lineno, name.col)
            else:
                if len(args) != 3:
                    raise ParseError("usage: phase <name> <seg> phi=<angle>", lineno, kw.col)
                seg = args[1].text
                phi = _kv(args[2], "phi", lineno)
                el = Element("phase", name.text, (seg,), (f"{seg}.{name.text}",), {"phi": phi})
                if el.label in where:
                    raise ParseError(f"duplicate label {el.label!r}", lineno, name.col)
                where[el.label] = (lineno, name.col)
                inserts.append((seg, el))
        else:
            raise ParseError(f"unknown directive {kw.text!r}", lineno, kw.col)

    if source is None:
        raise ParseError("missing 'source' directive", max(1, len(text.splitlines())))
    if detector is None:
        raise ParseError("missing 'detector' directive", max(1, len(text.splitlines())))

    # in-place phase plates: rewire whoever consumed <seg> to the plate output
    for seg, plate in inserts:
        new = plate.outputs[0]
        rewired = []
        for el in elements:
            if seg in el.inputs:
                el = Element(el.kind, el.label, tuple(new if s == seg else s for s in el.inputs), el.outputs, el.params)
            rewired.append(el)
        elements = rewired + [plate]
        if detector == seg:
            detector = new
        dumps = [new if d == seg else d for d in dumps]

    try:
        return make_network(elements, source, detector, dumps)
    except NetworkError as exc:
        label = next((lb for lb in where if repr(lb) in str(exc)), None)
        if label is not None:
            raise ParseError(str(exc), *where[label]) from None
        raise ParseError(str(exc), len(text.splitlines()) or 1) from None


def load_network(path: str | Path) -> Network:
    return parse_network(Path(path).read_text(encoding="utf-8"))


def _num(x: float) -> str:
    return repr(float(x))


def to_dsl(net: Network) -> str:
    """Serialize a network; ``parse_network(to_dsl(net))`` is isomorphic to ``net``."""
    lines = [f"source {net.source}"]
    for el in net.order:
        ins = " ".join(el.inputs)
        outs = " ".join(el.outputs)
        if el.kind == "splitter":
            lines.append(f"splitter {el.label} {ins} -> {outs} t={_num(el.t)}")
        elif el.kind == "phase":
            lines.append(f"phase {el.label} {ins} -> {outs} phi={_num(el.params['phi'])}")
        elif el.kind == "mirror":
            lines.append(f"mirror {el.label} {ins} -> {outs} z={_num(el.z)}")
        else:
            lines.append(f"junction {el.label} {ins} -> {outs}")
    lines.append(f"detector {net.detector}")
    lines.extend(f"dump {d}" for d in net.dumps)
    return "\n".join(lines) + "\n"
