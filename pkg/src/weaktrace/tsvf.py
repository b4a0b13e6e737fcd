"""Two-state vectors and weak values of path projectors."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .netgraph import Network, NetworkError, enumerate_paths

ZERO_OVERLAP_RTOL = 1e-14


class InvalidCutError(NetworkError):
    pass


class ZeroOverlapError(ArithmeticError):
    """Post-selection on the detector is impossible (dark detector)."""


@dataclass(frozen=True)
class Cut:
    segments: frozenset[str]
    name: str = ""

    @classmethod
    def of(cls, segments: Iterable[str], name: str = "") -> "Cut":
        segs = frozenset(segments)
        return cls(segs, name or "{" + ",".join(sorted(segs)) + "}")


@dataclass(frozen=True)
class TwoStateVector:
    cut: Cut
    forward: dict[str, complex]
    backward: dict[str, complex]
    overlap: complex


@dataclass(frozen=True)
class WeakValueReport:
    values: dict[str, complex]
    overlap: complex
    cuts: dict[str, Cut] = field(default_factory=dict)
    config: dict[str, object] = field(default_factory=dict)

    def __getitem__(self, tag: str) -> complex:
        return self.values[tag]

    def to_csv(self) -> str:
        """Column header first, one row per mirror, an ``overlap`` row, then a ``# key=value`` trailer."""
        buf = io.StringIO()
        buf.write("mirror,re,im,abs\n")
        rows = list(self.values.items()) + [("overlap", self.overlap)]
        for tag, w in rows:
            buf.write(f"{tag},{_fmt(w.real)},{_fmt(w.imag)},{_fmt(abs(w))}\n")
        if self.config:
            buf.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in self.config.items()) + "\n")
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    x = float(x)
    if abs(x) < 1e-13:
        x = 0.0
    return f"{x:.12g}"


def validate_cut(net: Network, cut: Cut) -> tuple[bool, str]:
    """Check that every source-to-detector path crosses exactly one cut segment."""
    unknown = sorted(s for s in cut.segments if s not in net.segments)
    if unknown:
        return False, f"unknown segment(s) {unknown}"
    for p in enumerate_paths(net):
        n = sum(s in cut.segments for s in p.segments)
        if n != 1:
            route = "->".join(p.tags) or "->".join(p.segments)
            return False, f"path ({route}) crosses {n} cut segments"
    return True, ""


def _require_cut(net: Network, cut: Cut) -> None:
    ok, why = validate_cut(net, cut)
    if not ok:
        raise InvalidCutError(f"invalid cut {cut.name}: {why}")


def forward_amplitudes(net: Network, cut: Cut) -> dict[str, complex]:
    _require_cut(net, cut)
    amp = net.forward_pass()
    return {s: amp[s] for s in sorted(cut.segments)}


def backward_amplitudes(net: Network, cut: Cut) -> dict[str, complex]:
    _require_cut(net, cut)
    amp = net.backward_pass()
    return {s: amp[s] for s in sorted(cut.segments)}


def two_state_vector(net: Network, cut: Cut) -> TwoStateVector:
    fwd = forward_amplitudes(net, cut)
    bwd = backward_amplitudes(net, cut)
    overlap = sum((fwd[s] * bwd[s] for s in fwd), 0j)
    return TwoStateVector(cut, fwd, bwd, overlap)


def find_cut(net: Network, segment: str) -> Cut | None:
    """A valid cut containing ``segment``, or None if no such cut exists."""
    return next(iter_cuts(net, required=segment), None)


def iter_cuts(net: Network, required: str | None = None):
    """Yield every valid cut (optionally only those containing ``required``)."""
    paths = [set(p.segments) for p in enumerate_paths(net)]
    if not paths:
        return
    candidates = set().union(*paths)
    if required is not None:
        if required not in candidates:
            return
        start = frozenset([required])
    else:
        start = frozenset()

    def covered_by(chosen):
        return [any(s in p for s in chosen) for p in paths]

    def grow(chosen: frozenset):
        cov = covered_by(chosen)
        try:
            k = cov.index(False)
        except ValueError:
            yield Cut.of(chosen)
            return
        for s in sorted(paths[k]):
            # s must not sit on a path that is already crossed
            if any(c and s in p for c, p in zip(cov, paths)):
                continue
            yield from grow(chosen | {s})

    yield from grow(start)


def segment_weak_values(net: Network, segments: Iterable[str]) -> dict[str, complex]:
    """Weak values of the projectors onto arbitrary segments."""
    fwd = net.forward_pass()
    bwd = net.backward_pass()
    overlap = fwd[net.detector]
    _check_overlap(overlap, fwd)
    return {s: fwd[s] * bwd[s] / overlap for s in segments}


def _check_overlap(overlap: complex, fwd: Mapping[str, complex]) -> None:
    scale = max(abs(a) for a in fwd.values())
    if abs(overlap) < ZERO_OVERLAP_RTOL * scale:
        raise ZeroOverlapError(f"post-selection impossible: overlap {abs(overlap):.3e} is zero")


def weak_values(net: Network, mirrors: Iterable[str] | None = None, **config) -> WeakValueReport:
    """Complex weak values ``<Phi|P_m|Psi>/<Phi|Psi>`` of mirror projectors.

    Each mirror is evaluated on its own minimal valid cut; a mirror that
    lies on no valid cut is rejected.  Extra keyword arguments are echoed
    into the report's ``config``.
    """
    tags = sorted(net.mirrors) if mirrors is None else list(mirrors)
    fwd = net.forward_pass()
    bwd = net.backward_pass()
    overlap = fwd[net.detector]
    _check_overlap(overlap, fwd)
    values: dict[str, complex] = {}
    cuts: dict[str, Cut] = {}
    for tag in tags:
        seg = net.mirror_segment(tag)
        cut = find_cut(net, seg)
        if cut is None:
            raise InvalidCutError(f"mirror {tag!r} lies on no valid cut")
        cuts[tag] = cut
        values[tag] = complex(fwd[seg] * bwd[seg] / overlap)
    return WeakValueReport(values, complex(overlap), cuts, dict(config))


def cut_weak_values(net: Network, cut: Cut) -> dict[str, complex]:
    tsv = two_state_vector(net, cut)
    _check_overlap(tsv.overlap, net.forward_pass())
    return {s: tsv.forward[s] * tsv.backward[s] / tsv.overlap for s in tsv.forward}


def closed_form_weak_values(phi_C: float) -> dict[str, complex]:
    """Ideal nested-MZI weak values as functions of the arm-C phase."""
    e = complex(math.cos(phi_C), -math.sin(phi_C))
    return {"A": e, "B": -e, "C": 1 + 0j, "E": 0j, "F": 0j}
