"""Feed-forward interferometer networks.

A network is a directed acyclic graph of optical elements connected by
labelled segments.  Every segment carries one complex field amplitude.
Splitters use the symmetric convention: real transmission ``t`` and
reflection ``i*r`` with ``r = sqrt(1 - t**2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Mapping

import numpy as np

KINDS = ("splitter", "phase", "mirror", "junction")
UNITARITY_TOL = 1e-12


class NetworkError(ValueError):
    """Raised for structurally invalid networks."""


@dataclass(frozen=True)
class Element:
    kind: str
    label: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def t(self) -> float:
        return float(self.params["t"])

    @property
    def r(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.t**2))

    @property
    def z(self) -> float:
        return float(self.params.get("z", 0.0))

    @cached_property
    def _matrix(self) -> np.ndarray:
        m = self._build_matrix()
        m.setflags(write=False)
        return m

    def matrix(self) -> np.ndarray:
        return self._matrix

    def _build_matrix(self) -> np.ndarray:
        """Coupling matrix, rows indexed by outputs and columns by inputs.

        A splitter with a single input still has a 2x2 matrix; its second
        input is an unused vacuum port.
        """
        if self.kind == "splitter":
            t, r = self.t, self.r
            return np.array([[t, 1j * r], [1j * r, t]], dtype=complex)
        if self.kind == "phase":
            return np.array([[cmath.exp(1j * self.params["phi"])]])
        return np.array([[1.0 + 0j]])

    def coupling(self, i_in: int, i_out: int) -> complex:
        return complex(self.matrix()[i_out, i_in])


@dataclass(frozen=True)
class Network:
    """Immutable, validated interferometer network.

    Construct with :func:`make_network` (or the DSL parser), which checks
    the structural invariants.
    """

    elements: tuple[Element, ...]
    source: str
    detector: str
    dumps: tuple[str, ...] = ()

    @cached_property
    def producer(self) -> dict[str, tuple[Element, int]]:
        return {s: (el, i) for el in self.elements for i, s in enumerate(el.outputs)}

    @cached_property
    def consumer(self) -> dict[str, tuple[Element, int]]:
        return {s: (el, i) for el in self.elements for i, s in enumerate(el.inputs)}

    @cached_property
    def order(self) -> tuple[Element, ...]:
        """Elements in topological order."""
        by_label = {el.label: el for el in self.elements}
        graph = {el.label: set() for el in self.elements}
        for el in self.elements:
            for s in el.inputs:
                if s in self.producer:
                    graph[el.label].add(self.producer[s][0].label)
        try:
            labels = tuple(TopologicalSorter(graph).static_order())
        except CycleError as exc:
            raise NetworkError(f"network contains a cycle: {exc.args[1]}") from None
        return tuple(by_label[lb] for lb in labels)

    @cached_property
    def segments(self) -> tuple[str, ...]:
        segs = [self.source]
        for el in self.order:
            segs.extend(el.outputs)
        return tuple(segs)

    @cached_property
    def terminals(self) -> tuple[str, ...]:
        return (self.detector, *self.dumps)

    @cached_property
    def paths(self) -> "PathDecomposition":
        return _enumerate_paths(self)

    @property
    def mirrors(self) -> dict[str, Element]:
        return {el.label: el for el in self.elements if el.kind == "mirror"}

    def element(self, label: str) -> Element:
        for el in self.elements:
            if el.label == label:
                return el
        raise KeyError(label)

    def mirror_segment(self, tag: str) -> str:
        """Segment on which a mirror sits (its input)."""
        try:
            return self.mirrors[tag].inputs[0]
        except KeyError:
            raise NetworkError(f"unknown mirror tag {tag!r}") from None

    def _check_segment(self, seg: str) -> None:
        if seg not in self.segments:
            raise NetworkError(f"unknown segment {seg!r}")

    def forward_pass(self, start: str | None = None) -> dict[str, complex]:
        """Amplitude on every segment for unit amplitude injected at ``start``."""
        start = self.source if start is None else start
        self._check_segment(start)
        amp: dict[str, complex] = {s: 0j for s in self.segments}
        amp[start] = 1.0 + 0j
        for el in self.order:
            ins = [amp[s] for s in el.inputs]
            if not any(ins):
                continue
            m = el.matrix()
            for j, s_out in enumerate(el.outputs):
                amp[s_out] = amp[s_out] + sum(m[j, i] * a for i, a in enumerate(ins))
        return amp

    def backward_pass(self, end: str | None = None) -> dict[str, complex]:
        """Amplitude from every segment to ``end`` (the detector by default)."""
        end = self.detector if end is None else end
        self._check_segment(end)
        amp: dict[str, complex] = {s: 0j for s in self.segments}
        amp[end] = 1.0 + 0j
        for el in reversed(self.order):
            outs = [amp[s] for s in el.outputs]
            if not any(outs):
                continue
            m = el.matrix()
            for i, s_in in enumerate(el.inputs):
                amp[s_in] = amp[s_in] + sum(m[j, i] * a for j, a in enumerate(outs))
        return amp


def make_network(
    elements: Iterable[Element],
    source: str,
    detector: str,
    dumps: Iterable[str] = (),
) -> Network:
    """Build a :class:`Network` and validate it."""
    net = Network(tuple(elements), source, detector, tuple(dumps))
    validate_network(net)
    return net


def validate_network(net: Network) -> None:
    labels = [el.label for el in net.elements]
    dup = {lb for lb in labels if labels.count(lb) > 1}
    if dup:
        raise NetworkError(f"duplicate label {sorted(dup)[0]!r}")
    produced: dict[str, str] = {}
    consumed: dict[str, str] = {}
    for el in net.elements:
        if el.kind not in KINDS:
            raise NetworkError(f"element {el.label!r}: unknown kind {el.kind!r}")
        n_in, n_out = len(el.inputs), len(el.outputs)
        if el.kind == "splitter":
            if n_in not in (1, 2) or n_out != 2:
                raise NetworkError(f"splitter {el.label!r} needs 1-2 inputs and 2 outputs")
            t = el.params.get("t")
            if t is None or not 0.0 <= t <= 1.0 or not math.isfinite(t):
                raise NetworkError(f"splitter {el.label!r}: splitter magnitude out of range (t={t})")
            m = el.matrix()
            if np.abs(m.conj().T @ m - np.eye(2)).max() > UNITARITY_TOL:
                raise NetworkError(f"splitter {el.label!r} is not unitary")
        elif n_in != 1 or n_out != 1:
            raise NetworkError(f"{el.kind} {el.label!r} needs exactly one input and one output")
        if el.kind == "phase" and not math.isfinite(el.params.get("phi", math.nan)):
            raise NetworkError(f"phase {el.label!r} needs a finite phi")
        for s in el.outputs:
            if s in produced or s == net.source:
                raise NetworkError(f"segment {s!r} has more than one producer")
            produced[s] = el.label
        for s in el.inputs:
            if s in consumed:
                raise NetworkError(f"segment {s!r} is consumed by both {consumed[s]!r} and {el.label!r}")
            consumed[s] = el.label
    mirror_tags = [el.label for el in net.elements if el.kind == "mirror"]
    if len(set(mirror_tags)) != len(mirror_tags):
        raise NetworkError("mirror tags must be unique")
    known = set(produced) | {net.source}
    for s, lb in consumed.items():
        if s not in known:
            raise NetworkError(f"dangling segment {s!r}: consumed by {lb!r} but never produced")
    terminals = [net.detector, *net.dumps]
    if len(set(terminals)) != len(terminals):
        raise NetworkError("detector and dump segments must be distinct")
    for s in terminals:
        if s not in known:
            raise NetworkError(f"dangling segment {s!r}: terminal is never produced")
        if s in consumed:
            raise NetworkError(f"terminal segment {s!r} is consumed by {consumed[s]!r}")
    for s in known:
        if s not in consumed and s not in terminals:
            raise NetworkError(f"dangling segment {s!r}: not consumed and not a detector or dump")
    net.order  # raises on cycles


# ---------------------------------------------------------------------------
# paths and amplitudes


@dataclass(frozen=True)
class Path:
    segments: tuple[str, ...]
    coefficient: complex
    mirrors: tuple[tuple[str, float], ...]

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(tag for tag, _ in self.mirrors)


@dataclass(frozen=True)
class PathDecomposition:
    paths: tuple[Path, ...]

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def total(self) -> complex:
        return sum((p.coefficient for p in self.paths), 0j)


def enumerate_paths(net: Network) -> PathDecomposition:
    """All source-to-detector paths with their coupling products."""
    return net.paths


def _enumerate_paths(net: Network) -> PathDecomposition:
    found: list[Path] = []

    def walk(seg: str, segs: list[str], coef: complex, mirrors: list[tuple[str, float]]):
        if seg == net.detector:
            found.append(Path(tuple(segs), coef, tuple(mirrors)))
            return
        if seg not in net.consumer:
            return
        el, i_in = net.consumer[seg]
        m = el.matrix()
        extra = [(el.label, el.z)] if el.kind == "mirror" else []
        for j, out in enumerate(el.outputs):
            c = m[j, i_in]
            if c == 0:
                continue
            walk(out, segs + [out], coef * c, mirrors + extra)

    walk(net.source, [net.source], 1.0 + 0j, [])
    return PathDecomposition(tuple(found))


def transfer_amplitude(net: Network, start: str, end: str) -> complex:
    net._check_segment(end)
    return net.forward_pass(start)[end]


# ---------------------------------------------------------------------------
# builders


def build_nested_mzi(
    phi_C: float = 0.0,
    z_offsets: Mapping[str, float] | None = None,
    delta: float = 0.0,
) -> Network:
    """The five-mirror nested Mach-Zehnder interferometer.

    The outer splitters send 2/3 of the power into the inner interferometer
    (mirrors E, A, B, F) and 1/3 into arm C.  Fixed -pi/2 plates on arm C
    put the forward amplitudes at the {A, B, C} mirrors at
    (1, i, exp(i*phi_C))/sqrt(3) and the backward amplitudes at (1, i, 1)/sqrt(3).
    ``delta`` is an extra phase on arm B that unbalances the inner
    interferometer.
    """
    z = {tag: 0.0 for tag in "ABCEF"}
    if z_offsets:
        unknown = set(z_offsets) - set(z)
        if unknown:
            raise NetworkError(f"unknown mirror tag(s) {sorted(unknown)}")
        z.update({k: float(v) for k, v in z_offsets.items()})
    t_outer = math.sqrt(2.0 / 3.0)
    t_inner = math.sqrt(0.5)
    els = [
        Element("splitter", "S1", ("s0",), ("e0", "c0"), {"t": t_outer}),
        Element("mirror", "E", ("e0",), ("e1",), {"z": z["E"]}),
        Element("splitter", "S2", ("e1",), ("a0", "b0"), {"t": t_inner}),
        Element("mirror", "A", ("a0",), ("a1",), {"z": z["A"]}),
        Element("mirror", "B", ("b0",), ("b1",), {"z": z["B"]}),
        Element("phase", "DB", ("b1",), ("b2",), {"phi": float(delta)}),
        Element("splitter", "S3", ("a1", "b2"), ("f0", "dI"), {"t": t_inner}),
        Element("mirror", "F", ("f0",), ("f1",), {"z": z["F"]}),
        Element("phase", "KC1", ("c0",), ("c1",), {"phi": -math.pi / 2}),
        Element("phase", "PC", ("c1",), ("c2",), {"phi": float(phi_C)}),
        Element("mirror", "C", ("c2",), ("c3",), {"z": z["C"]}),
        Element("phase", "KC2", ("c3",), ("c4",), {"phi": -math.pi / 2}),
        Element("splitter", "S4", ("f1", "c4"), ("d", "dO"), {"t": t_outer}),
    ]
    return make_network(els, source="s0", detector="d", dumps=("dI", "dO"))


def with_source_phase(net: Network, phase: float) -> Network:
    """Copy of ``net`` with a phase plate right after the source."""
    src = net.source + "~"
    els = [Element("phase", "__src_phase", (src,), (net.source,), {"phi": phase})]
    els.extend(net.elements)
    return make_network(els, source=src, detector=net.detector, dumps=net.dumps)


def random_network(rng: np.random.Generator, max_elements: int = 8) -> Network:
    """Random valid network with at most ``max_elements`` elements.

    Used for property tests; splitters get random transmissions and the
    arms get random phases so couplings are generic.
    """
    n_el = int(rng.integers(1, max_elements + 1))
    open_segs = ["s0"]
    els: list[Element] = []
    counter = 0

    def new_seg() -> str:
        nonlocal counter
        counter += 1
        return f"x{counter}"

    for k in range(n_el):
        choice = rng.random()
        if choice < 0.45 or len(open_segs) == 1 and choice < 0.6:
            i = int(rng.integers(len(open_segs)))
            s_in = open_segs.pop(i)
            outs = (new_seg(), new_seg())
            if len(open_segs) >= 1 and rng.random() < 0.5:
                j = int(rng.integers(len(open_segs)))
                ins = (s_in, open_segs.pop(j))
            else:
                ins = (s_in,)
            els.append(Element("splitter", f"S{k}", ins, outs, {"t": float(rng.uniform(0.05, 0.95))}))
            open_segs.extend(outs)
        else:
            i = int(rng.integers(len(open_segs)))
            s_in = open_segs.pop(i)
            s_out = new_seg()
            if rng.random() < 0.5:
                els.append(Element("phase", f"P{k}", (s_in,), (s_out,), {"phi": float(rng.uniform(-np.pi, np.pi))}))
            else:
                els.append(Element("mirror", f"M{k}", (s_in,), (s_out,), {"z": 0.0}))
            open_segs.append(s_out)
    det = open_segs.pop(int(rng.integers(len(open_segs))))
    return make_network(els, source="s0", detector=det, dumps=open_segs)


# ---------------------------------------------------------------------------
# comparison


def _graph(net: Network):
    import networkx as nx

    g = nx.MultiDiGraph()
    g.add_node("__source", kind="source", params={})
    for el in net.elements:
        params = dict(el.params)
        if el.kind == "mirror":
            params["tag"] = el.label
        g.add_node(el.label, kind=el.kind, params=params)
    for i, s in enumerate(net.terminals):
        g.add_node(f"__term{i}", kind="detector" if i == 0 else "dump", params={})
    terminal_node = {s: f"__term{i}" for i, s in enumerate(net.terminals)}
    for s in net.segments:
        src, i_out = (("__source", 0) if s == net.source else
                      (net.producer[s][0].label, net.producer[s][1]))
        if s in net.consumer:
            dst, i_in = net.consumer[s][0].label, net.consumer[s][1]
        else:
            dst, i_in = terminal_node[s], 0
        g.add_edge(src, dst, ports=(i_out, i_in))
    return g


def _params_match(a: dict, b: dict) -> bool:
    if a.keys() != b.keys():
        return False
    for k in a:
        if isinstance(a[k], str) or isinstance(b[k], str):
            if a[k] != b[k]:
                return False
        elif not math.isclose(a[k], b[k], rel_tol=1e-12, abs_tol=1e-12):
            return False
    return True


def is_isomorphic(a: Network, b: Network) -> bool:
    """Structural equality up to segment and element renaming (mirror tags kept)."""
    from networkx.algorithms.isomorphism import MultiDiGraphMatcher

    def node_match(x, y):
        return x["kind"] == y["kind"] and _params_match(x["params"], y["params"])

    def edge_match(x, y):
        return sorted(e["ports"] for e in x.values()) == sorted(e["ports"] for e in y.values())

    ga, gb = _graph(a), _graph(b)
    if ga.number_of_nodes() != gb.number_of_nodes():
        return False
    return MultiDiGraphMatcher(ga, gb, node_match=node_match, edge_match=edge_match).is_isomorphic()
