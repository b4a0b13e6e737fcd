"""Deterministic SVG figures for scenario outputs.

Plots only ever read finished tables; nothing here feeds back into the
computation.  Every document carries a provenance description naming the
CSV it was drawn from and that file's sha256.
"""

from __future__ import annotations

import io
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib import rc_context  # noqa: E402
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

_RC = {"svg.hashsalt": "weaktrace", "svg.fonttype": "none", "path.simplify": False}


def _render(fig: Figure, provenance: str) -> bytes:
    buf = io.BytesIO()
    with rc_context(_RC):
        FigureCanvasSVG(fig)
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": "weaktrace",
                                                 "Description": provenance})
    return buf.getvalue()


def spectrum_svg(freqs: Sequence[float], mags: Sequence[float], lines: Mapping[str, float],
                 title: str, provenance: str) -> bytes:
    """Stem plot of |bin| against frequency with the drive lines labelled."""
    with rc_context(_RC):
        fig = Figure(figsize=(6.4, 3.6))
        ax = fig.add_subplot()
        ax.vlines(freqs, 0, mags, color="k", lw=1)
        top = max(max(mags, default=0.0), 1e-300)
        for tag, f in lines.items():
            ax.annotate(tag, (f, top * 1.02), ha="center", fontsize=8)
        ax.set_xlabel("frequency")
        ax.set_ylabel("|bin| (normalized quad-cell signal)")
        ax.set_title(title)
        ax.set_ylim(0, top * 1.12)
        return _render(fig, provenance)


def sweep_svg(zeta: Sequence[float], curves: Mapping[str, Sequence[float]],
              reference: Sequence[float] | None, title: str, provenance: str) -> bytes:
    with rc_context(_RC):
        fig = Figure(figsize=(6.4, 3.6))
        ax = fig.add_subplot()
        for name, ys in curves.items():
            ax.plot(zeta, ys, marker="o", ms=3, lw=1, label=name)
        if reference is not None:
            ax.plot(zeta, reference, ls="--", color="gray", lw=1, label="fitted reference")
        ax.set_xlabel("Gouy phase at detector (rad)")
        ax.set_ylabel("normalized peak")
        ax.set_title(title)
        ax.legend(fontsize=8)
        return _render(fig, provenance)


def scaling_svg(eps: Sequence[float], curves: Mapping[str, Sequence[float]], title: str,
                provenance: str) -> bytes:
    with rc_context(_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot()
        for name, ys in curves.items():
            ax.loglog(eps, ys, marker="o", ms=3, lw=1, label=name)
        ax.set_xlabel("kick strength k w0 theta")
        ax.set_ylabel("trace strength")
        ax.set_title(title)
        ax.legend(fontsize=7, ncol=2)
        return _render(fig, provenance)
