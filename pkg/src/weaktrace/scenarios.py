"""End-to-end runs of the nested interferometer with vibrating mirrors.

Each ``run_*`` function computes every table in memory, renders the plots
from those tables, and only then writes the whole set (plus a manifest with
sha256 checksums) under ``<out>/<scenario>/``.
"""

from __future__ import annotations

import hashlib
import io
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import plotting
from .config import MIRRORS, ConfigError, ScenarioConfig, dump_config, pf_phase
from .dynamics import (QUAD_CELL_GAIN, ScalingFit, SpectrumReport, TraceReport, analytic_first_order,
                       field_sidebands, fit_scaling_exponent, power_spectrum, simulate_timeseries,
                       trace_strengths)
from .netgraph import Network, build_nested_mzi
from .tsvf import WeakValueReport, weak_values

log = logging.getLogger(__name__)

NULL_THRESHOLD = 1e-3
PF_PHASE_TOL = 1e-5
MAX_THETA = 1e-2  # paraxial bound on the mirror kick angle (rad)
SIDEBAND_LABELS = ("E+A", "E-A", "E+B", "E-B", "F+A", "F-A", "F+B", "F-B")


@dataclass
class RunArtifacts:
    scenario: str
    config: ScenarioConfig
    weak_values: WeakValueReport
    spectra: dict[str, SpectrumReport] = field(default_factory=dict)
    traces: TraceReport | None = None
    sweep: list[dict] = field(default_factory=list)
    summary: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    files: dict[str, bytes] = field(default_factory=dict)
    directory: Path | None = None

    @property
    def checksums(self) -> dict[str, str]:
        return {name: hashlib.sha256(data).hexdigest() for name, data in self.files.items()}

    def manifest(self) -> str:
        buf = io.StringIO()
        buf.write(f"# scenario: {self.scenario}\n# config:\n")
        for line in dump_config(self.config).splitlines():
            buf.write(f"#   {line}\n")
        if self.summary:
            buf.write("# summary:\n")
            for k, v in self.summary.items():
                buf.write(f"#   {k} = {_g(v)}\n")
        if self.notes:
            buf.write("# notes:\n")
            for n in self.notes:
                buf.write(f"#   {n}\n")
        buf.write("sha256,bytes,file\n")
        for name, digest in self.checksums.items():
            buf.write(f"{digest},{len(self.files[name])},{name}\n")
        return buf.getvalue()

    def write(self, out: str | os.PathLike | None = None) -> Path:
        """Write every file and then the manifest; each file is replaced atomically."""
        root = Path(self.config.out if out is None else out) / self.scenario
        root.mkdir(parents=True, exist_ok=True)
        payload = dict(self.files)
        payload["manifest.txt"] = self.manifest().encode()
        for name, data in payload.items():
            tmp = root / f".{name}.tmp"
            tmp.write_bytes(data)
            os.replace(tmp, root / name)
        self.directory = root
        log.info("wrote %d files to %s", len(payload), root)
        return root


def _g(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return repr(float(x))


def _csv(header: Sequence[str], rows: Sequence[dict]) -> bytes:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_g(r.get(h)) for h in header) + "\n")
    return buf.getvalue().encode()


def _network(cfg: ScenarioConfig, phi_C: float) -> Network:
    return build_nested_mzi(phi_C, z_offsets=cfg.z, delta=cfg.delta)


def _weak_values(cfg: ScenarioConfig, net: Network, phi_C: float) -> WeakValueReport:
    return weak_values(net, phi_C=phi_C, delta=cfg.delta)


def _check_paraxial(cfg: ScenarioConfig, eps: float) -> None:
    theta = cfg.beam.theta_for_eps(eps)
    if theta > MAX_THETA:
        raise ConfigError(f"eps: kick angle {theta:g} rad exceeds the paraxial bound {MAX_THETA:g}")


def _spectrum_files(art: RunArtifacts, spec: SpectrumReport, title: str) -> None:
    full = spec.to_csv().encode()
    art.files["spectrum_full.csv"] = full
    art.files["spectrum_peaks.csv"] = spec.peaks_csv().encode()
    if art.config.format == "csv+svg":
        keep = spec.freqs >= 0
        prov = f"scenario={art.scenario}; data=spectrum_full.csv sha256={hashlib.sha256(full).hexdigest()}"
        lines = {t: spec.line_freqs[t] for t in spec.peaks}
        art.files["spectrum.svg"] = plotting.spectrum_svg(spec.freqs[keep], np.abs(spec.bins[keep]), lines,
                                                         title, prov)


def _peak_summary(spec: SpectrumReport, ref: str) -> dict[str, float]:
    top = spec.peak(ref)
    out = {f"peak_{t}": spec.peak(t) for t in spec.peaks}
    out.update({f"ratio_{t}_{ref}": spec.peak(t) / top for t in spec.peaks if t != ref})
    return out


def _traces_file(art: RunArtifacts, report: TraceReport) -> None:
    art.traces = report
    art.files["traces.csv"] = report.to_csv().encode()


# ---------------------------------------------------------------------------
# scenarios


def run_danan_original(cfg: ScenarioConfig, write: bool = True) -> RunArtifacts:
    """Balanced arm C (phi_C = 0): traces of A, B and C all show up in the spectrum."""
    cfg = replace(cfg, scenario="original").validate()
    phi = cfg.phi_C
    if phi != 0.0:
        raise ConfigError(f"phi_c: the original configuration needs phi_c = 0, got {phi:g}")
    _check_paraxial(cfg, cfg.eps)
    net = _network(cfg, phi)
    wv = _weak_values(cfg, net, phi)
    vib = cfg.vibration()
    spec = power_spectrum(simulate_timeseries(net, vib, cfg.z_D, cfg.beam), vib)
    traces = trace_strengths(net, vib, cfg.z_D, cfg.beam)

    art = RunArtifacts("original", cfg, wv, {"full": spec})
    art.files["weak_values.csv"] = wv.to_csv().encode()
    _spectrum_files(art, spec, "phi_C = 0")
    _traces_file(art, TraceReport(traces))
    art.summary = _peak_summary(spec, "C")
    art.summary["null_threshold"] = NULL_THRESHOLD
    return _finish(art, write)


def run_pf_modification(cfg: ScenarioConfig, write: bool = True) -> RunArtifacts:
    """Arm-C phase tuned to the detector's Gouy phase: only C's line survives."""
    cfg = replace(cfg, scenario="pf").validate()
    target = pf_phase(cfg)
    phi = cfg.phi_C
    if abs(phi - target) > PF_PHASE_TOL:
        raise ConfigError(f"phi_c: must equal the Gouy phase at z_d ({target:.12g}), got {phi:.12g}")
    _check_paraxial(cfg, cfg.eps)
    net = _network(cfg, phi)
    wv = _weak_values(cfg, net, phi)
    vib = cfg.vibration()
    spec = power_spectrum(simulate_timeseries(net, vib, cfg.z_D, cfg.beam), vib)
    traces = trace_strengths(net, vib, cfg.z_D, cfg.beam)
    reference = trace_strengths(_network(cfg, 0.0), vib, cfg.z_D, cfg.beam)

    art = RunArtifacts("pf", cfg, wv, {"full": spec})
    art.files["weak_values.csv"] = wv.to_csv().encode()
    _spectrum_files(art, spec, f"phi_C = {phi:.6g}")
    _traces_file(art, TraceReport(traces))
    art.summary = _peak_summary(spec, "C")
    art.summary["phi_C"] = phi
    for tag in MIRRORS:
        if reference[tag] > 0:
            art.summary[f"trace_ratio_{tag}"] = traces[tag] / reference[tag]
    art.summary["null_threshold"] = NULL_THRESHOLD
    art.notes.append("trace_ratio_* compares each trace with the same run at phi_C = 0")
    return _finish(art, write)


def _zd_point(zeta: float, cfg: ScenarioConfig) -> float:
    if zeta >= math.pi / 2 - 1e-12:
        return ScenarioConfig(w0=cfg.w0, wavelength=cfg.wavelength).z_D  # far literal
    return float(cfg.beam.z_for_gouy(zeta))


def sweep_points(cfg: ScenarioConfig) -> list[tuple[float, float, str]]:
    """(gouy phase, z_D, kind) for the grid plus the point where gouy = phi_C."""
    pts = [(float(z), _zd_point(float(z), cfg), "grid") for z in cfg.zeta_grid()]
    phi = cfg.phi_C
    if 0.0 <= phi <= math.pi / 2:
        z_null = _zd_point(phi, cfg)
        pts.append((float(cfg.beam.gouy(z_null)), z_null, "null"))
    return sorted(pts)


def scale_fit(y: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    """Least-squares scale ``s`` for ``y ~ s g`` and the RMS residual relative to max |y|."""
    s = float(y @ g / (g @ g))
    rms = float(np.sqrt(np.mean((y - s * g) ** 2)) / np.max(np.abs(y)))
    return s, rms


def run_zd_sweep(cfg: ScenarioConfig, write: bool = True) -> RunArtifacts:
    """Move the detector through the Gouy phase range at fixed phi_C."""
    cfg = replace(cfg, scenario="zd-sweep").validate()
    _check_paraxial(cfg, cfg.eps)
    phi = cfg.phi_C
    net = _network(cfg, phi)
    wv = _weak_values(cfg, net, phi)
    vib = cfg.vibration()
    rows = []
    for zeta, z_D, kind in sweep_points(cfg):
        spec = power_spectrum(simulate_timeseries(net, vib, z_D, cfg.beam), vib)
        pred = analytic_first_order(wv, vib, z_D, cfg.beam, cfg.z)
        width = float(cfg.beam.width(z_D))
        row = {"zeta": zeta, "z_d": z_D, "width": width, "kind": kind}
        for t in MIRRORS:
            row[f"peak_{t}"] = spec.peak(t)
            row[f"predicted_{t}"] = abs(pred[t])
            # centroid amplitude in length units, and the same divided by w(z_D)
            row[f"centroid_{t}"] = spec.peak(t) * width / QUAD_CELL_GAIN
            row[f"normalized_{t}"] = row[f"centroid_{t}"] / width
        rows.append(row)
        log.debug("zeta=%.4f peak_A=%.3e", zeta, row["peak_A"])

    grid = [r for r in rows if r["kind"] == "grid"]
    y = np.array([r["normalized_A"] for r in grid])
    law = np.abs(np.sin(np.array([r["zeta"] for r in grid]) - phi))
    s, rms = scale_fit(y, law)
    peaks_A = [r["peak_A"] for r in rows]
    art = RunArtifacts("zd-sweep", cfg, wv, sweep=rows)
    art.files["weak_values.csv"] = wv.to_csv().encode()
    header = ["zeta", "z_d", "width", "kind"] + [f"{p}_{t}" for p in ("peak", "predicted", "centroid", "normalized")
                                                  for t in MIRRORS]
    sweep_csv = _csv(header, rows)
    art.files["sweep.csv"] = sweep_csv
    art.summary = {
        "phi_C": phi,
        "law_scale": s,
        "law_rms": rms,
        "max_ratio_E_C": max(r["peak_E"] / r["peak_C"] for r in rows),
        "max_ratio_F_C": max(r["peak_F"] / r["peak_C"] for r in rows),
        "min_over_max_A": min(peaks_A) / max(peaks_A),
        "argmax_zeta_A": rows[int(np.argmax(peaks_A))]["zeta"],
        "null_threshold": NULL_THRESHOLD,
    }
    art.notes.append("law_rms: RMS of normalized_A minus the fitted s*|sin(zeta - phi_C)| over grid points, "
                     "relative to max normalized_A")
    if not any(r["kind"] == "null" for r in rows):
        art.notes.append(f"phi_C = {phi:g} is outside [0, pi/2]; no detector position nulls f_A")
    if cfg.format == "csv+svg":
        prov = f"scenario=zd-sweep; data=sweep.csv sha256={hashlib.sha256(sweep_csv).hexdigest()}"
        zeta = [r["zeta"] for r in grid]
        curves = {f"normalized {t}": [r[f"normalized_{t}"] for r in grid] for t in ("A", "B", "C")}
        art.files["sweep.svg"] = plotting.sweep_svg(zeta, curves, list(s * law), f"phi_C = {phi:.6g}", prov)
    return _finish(art, write)


def run_scaling(cfg: ScenarioConfig, write: bool = True) -> RunArtifacts:
    """Trace strengths and second-order field sidebands over the eps grid."""
    cfg = replace(cfg, scenario="scaling").validate()
    eps_grid = cfg.eps_grid()
    if math.log10(eps_grid[-1] / eps_grid[0]) < 1.5 - 1e-9 or len(eps_grid) < 5:
        raise ConfigError("eps_min/eps_max/n_eps: the eps grid must span at least 1.5 decades with >= 5 points")
    _check_paraxial(cfg, float(eps_grid[-1]))
    phi = cfg.phi_C
    net = _network(cfg, phi)
    wv = _weak_values(cfg, net, phi)
    rows = []
    for eps in eps_grid:
        vib = cfg.vibration(float(eps))
        tr = trace_strengths(net, vib, cfg.z_D, cfg.beam)
        sb = field_sidebands(net, vib, cfg.z_D, cfg.beam, SIDEBAND_LABELS)
        spec = power_spectrum(simulate_timeseries(net, vib, cfg.z_D, cfg.beam), vib)
        row = {"eps": float(eps)}
        row.update({f"trace_{t}": tr[t] for t in MIRRORS})
        row.update({f"sideband_{lb}": sb[lb] for lb in SIDEBAND_LABELS})
        row.update({f"peak_{t}": spec.peak(t) for t in MIRRORS})
        rows.append(row)
        log.debug("eps=%.3e trace_A=%.3e trace_E=%.3e", eps, tr["A"], tr["E"])

    series = {t: f"trace_{t}" for t in MIRRORS} | {lb: f"sideband_{lb}" for lb in SIDEBAND_LABELS}
    fits: dict[str, ScalingFit] = {}
    for name, col in series.items():
        fits[name] = fit_scaling_exponent([(r["eps"], r[col]) for r in rows])
    top = rows[-1]
    report = TraceReport({name: top[col] for name, col in series.items()}, fits)

    art = RunArtifacts("scaling", cfg, wv, sweep=rows)
    art.files["weak_values.csv"] = wv.to_csv().encode()
    _traces_file(art, report)
    header = ["eps"] + [f"trace_{t}" for t in MIRRORS] + [f"sideband_{lb}" for lb in SIDEBAND_LABELS] \
        + [f"peak_{t}" for t in MIRRORS]
    sweep_csv = _csv(header, rows)
    art.files["sweep.csv"] = sweep_csv

    ca = np.array([r["trace_C"] / r["trace_A"] for r in rows])
    ae = fit_scaling_exponent([(r["eps"], r["trace_A"] / r["trace_E"]) for r in rows], floor=0.0)
    art.summary = {f"exponent_{n}": f.exponent for n, f in fits.items() if f.exponent is not None}
    art.summary["ratio_C_A_spread"] = float(ca.max() / ca.min() - 1)
    if ae.exponent is not None:
        art.summary["exponent_ratio_A_E"] = ae.exponent
    art.notes.append(f"traces.csv strength column is taken at the largest eps ({_g(eps_grid[-1])})")
    for name, f in fits.items():
        if f.note:
            art.notes.append(f"{name}: {f.note}")
    if cfg.format == "csv+svg":
        prov = f"scenario=scaling; data=sweep.csv sha256={hashlib.sha256(sweep_csv).hexdigest()}"
        curves = {f"trace {t}": [r[f"trace_{t}"] for r in rows] for t in MIRRORS}
        curves |= {lb: [r[f"sideband_{lb}"] for r in rows] for lb in ("E+A", "F-B")}
        art.files["scaling.svg"] = plotting.scaling_svg([r["eps"] for r in rows], curves,
                                                       f"phi_C = {phi:.6g}", prov)
    return _finish(art, write)


def _finish(art: RunArtifacts, write: bool) -> RunArtifacts:
    if write:
        art.write()
    return art


SCENARIO_RUNNERS: dict[str, Callable[..., RunArtifacts]] = {
    "original": run_danan_original,
    "pf": run_pf_modification,
    "zd-sweep": run_zd_sweep,
    "scaling": run_scaling,
}


def run_scenario(cfg: ScenarioConfig, write: bool = True) -> RunArtifacts:
    return SCENARIO_RUNNERS[cfg.validate().scenario](cfg, write=write)
