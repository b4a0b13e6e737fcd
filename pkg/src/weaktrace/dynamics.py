"""Vibrating mirrors: quad-cell time series, spectra, traces and predictions."""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .beamprop import (BeamParams, GaussianBeam, QuadCellReading, apply_tilt, gouy_phase,
                       propagate_to, quad_cell)
from .netgraph import Network
from .tsvf import WeakValueReport, ZeroOverlapError

DEFAULT_FREQS = {"A": 13.0, "B": 17.0, "C": 19.0, "E": 23.0, "F": 29.0}
DEFAULT_EPS = 1e-3
FLOOR = 1e-13
QUAD_CELL_GAIN = 2 * math.sqrt(2 / math.pi)  # normalized signal per (centroid / width)


class VibrationError(ValueError):
    pass


@dataclass(frozen=True)
class Drive:
    freq: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class VibrationConfig:
    drives: Mapping[str, Drive]
    sample_rate: float = 512.0
    duration: float = 1.0

    def __post_init__(self):
        self.validate()

    @classmethod
    def uniform(cls, beam: BeamParams = BeamParams(), eps: float = DEFAULT_EPS,
                freqs: Mapping[str, float] = DEFAULT_FREQS, phases: Mapping[str, float] | None = None,
                **kw) -> "VibrationConfig":
        """Every mirror driven with the same kick strength ``k w0 theta = eps``."""
        theta = beam.theta_for_eps(eps)
        phases = phases or {}
        return cls({t: Drive(f, theta, phases.get(t, 0.0)) for t, f in freqs.items()}, **kw)

    def validate(self) -> None:
        freqs = {t: d.freq for t, d in self.drives.items()}
        if len(set(freqs.values())) != len(freqs):
            raise VibrationError(f"drive frequencies must be distinct: {freqs}")
        n = self.duration * self.sample_rate
        if n <= 0 or abs(n - round(n)) > 1e-9:
            raise VibrationError("duration * sample_rate must be a positive integer")
        combos = self.combination_freqs()
        for t, f in freqs.items():
            if f <= 0:
                raise VibrationError(f"mirror {t}: frequency must be positive")
            if abs(f * self.duration - round(f * self.duration)) > 1e-9:
                raise VibrationError(f"mirror {t}: duration * f = {f * self.duration:g} is not an integer")
            for label, fc in combos.items():
                if abs(fc - f) < 1e-9:
                    raise VibrationError(f"mirror {t}: frequency {f:g} collides with combination line {label}")
        top = max(combos.values(), default=0.0)
        if freqs and self.sample_rate <= 2 * top:
            raise VibrationError(f"sample rate {self.sample_rate:g} must exceed {2 * top:g}")

    def combination_freqs(self) -> dict[str, float]:
        """Second-order lines ``f_m + f_n`` (including ``2 f_m``) and ``|f_m - f_n|``."""
        tags = sorted(self.drives)
        out = {}
        for i, m in enumerate(tags):
            for n in tags[i:]:
                fm, fn = self.drives[m].freq, self.drives[n].freq
                out[f"{m}+{n}"] = fm + fn
                if m != n:
                    out[f"{m}-{n}"] = abs(fm - fn)
        return out

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def theta(self, tag: str, t: np.ndarray | None = None):
        t = self.times if t is None else t
        d = self.drives.get(tag)
        if d is None or d.amplitude == 0:
            return np.zeros_like(t)
        return d.amplitude * np.sin(2 * math.pi * d.freq * t + d.phase)

    def scaled(self, factor: float) -> "VibrationConfig":
        return replace(self, drives={t: replace(d, amplitude=d.amplitude * factor) for t, d in self.drives.items()})

    def without(self, tag: str) -> "VibrationConfig":
        return replace(self, drives={t: (replace(d, amplitude=0.0) if t == tag else d) for t, d in self.drives.items()})


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    reading: QuadCellReading

    @property
    def normalized(self) -> np.ndarray:
        return np.asarray(self.reading.normalized)


def _check_tags(net: Network, vib: VibrationConfig) -> None:
    unknown = sorted(set(vib.drives) - set(net.mirrors))
    if unknown:
        raise VibrationError(f"vibration table names mirrors not in the network: {unknown}")


def output_beams(net: Network, vib: VibrationConfig, z_D: float, beam: BeamParams = BeamParams(),
                 frozen: Iterable[str] = ()) -> list[GaussianBeam]:
    """One array-valued beam per source-detector path, evaluated at ``z_D``.

    Each path starts from the reference waist beam (at z = 0) weighted by its
    path coefficient; every mirror along the way tilts it by its
    instantaneous angle at its own ``z``.  Mirrors in ``frozen`` are held
    still.
    """
    _check_tags(net, vib)
    frozen = set(frozen)
    t = vib.times
    out = []
    for p in net.paths:
        b = GaussianBeam.waist(beam, amp=p.coefficient * np.ones(len(t), dtype=complex))
        b = replace(b, x_c=np.zeros(len(t)), theta_c=np.zeros(len(t)), phi_acc=np.zeros(len(t)))
        for tag, z_m in p.mirrors:
            b = propagate_to(b, z_m)
            if tag not in frozen:
                b = apply_tilt(b, vib.theta(tag, t))
        out.append(propagate_to(b, z_D))
    return out


def simulate_timeseries(net: Network, vib: VibrationConfig, z_D: float, beam: BeamParams = BeamParams(),
                        split_offset: float = 0.0) -> TimeSeries:
    """Quad-cell readings at every sample time for a detector at ``z_D``."""
    beams = output_beams(net, vib, z_D, beam)
    reading = quad_cell(beams, offset=split_offset)
    return TimeSeries(vib.times, reading)


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectrumReport:
    freqs: np.ndarray
    bins: np.ndarray
    peaks: dict[str, complex]
    sidebands: dict[str, complex]
    drive_phase: dict[str, float] = field(default_factory=dict)
    line_freqs: dict[str, float] = field(default_factory=dict)

    def peak(self, tag: str) -> float:
        return abs(self.peaks[tag])

    def signed_peak(self, tag: str) -> float:
        """Peak amplitude in phase with the mirror's own drive ``sin(2 pi f t + phase)``."""
        return float((2j * self.peaks[tag] * np.exp(-1j * self.drive_phase.get(tag, 0.0))).real)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("frequency,re,im,abs\n")
        for f, v in zip(self.freqs, self.bins):
            if f >= 0:
                buf.write(f"{_g(f)},{_g(v.real)},{_g(v.imag)},{_g(abs(v))}\n")
        return buf.getvalue()

    def peaks_csv(self) -> str:
        buf = io.StringIO()
        buf.write("line,frequency,re,im,abs,signed\n")
        for tag, v in self.peaks.items():
            f = self.line_freqs[tag]
            buf.write(f"{tag},{_g(f)},{_g(v.real)},{_g(v.imag)},{_g(abs(v))},{_g(self.signed_peak(tag))}\n")
        for label, v in self.sidebands.items():
            f = self.line_freqs[label]
            buf.write(f"{label},{_g(f)},{_g(v.real)},{_g(v.imag)},{_g(abs(v))},\n")
        return buf.getvalue()


def _g(x) -> str:
    return repr(float(x))


def _bin(n: int, duration: float, f: float) -> int:
    return int(round(f * duration)) % n


def power_spectrum(series: TimeSeries | np.ndarray, vib: VibrationConfig) -> SpectrumReport:
    """Rectangular-window DFT of the normalized difference signal.

    Bins are scaled by ``1/N`` so a sinusoid of amplitude ``a`` on an
    exact bin shows ``|bin| = a/2`` and the bins satisfy Parseval against
    the time-domain mean square.
    """
    x = series.normalized if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    n = vib.n_samples
    if x.shape != (n,):
        raise ValueError(f"series has {x.shape[0] if x.ndim else 0} samples, expected {n}")
    bins = np.fft.fft(x) / n
    freqs = np.fft.fftfreq(n, d=1 / vib.sample_rate)
    peaks = {t: complex(bins[_bin(n, vib.duration, d.freq)]) for t, d in sorted(vib.drives.items())}
    combos = vib.combination_freqs()
    side = {label: complex(bins[_bin(n, vib.duration, f)]) for label, f in combos.items()}
    line_freqs = {t: d.freq for t, d in vib.drives.items()} | combos
    return SpectrumReport(freqs, bins, peaks, side, {t: d.phase for t, d in vib.drives.items()}, line_freqs)


# ---------------------------------------------------------------------------
# first-order predictor


def analytic_first_order(wv: WeakValueReport | Mapping[str, complex], vib: VibrationConfig, z_D: float,
                         beam: BeamParams = BeamParams(),
                         z_offsets: Mapping[str, float] | None = None) -> dict[str, complex]:
    """Predicted complex spectrum bins at each drive frequency, to first order in the kicks.

    A kick ``theta`` at a mirror sitting at ``z_m`` with weak value ``W``
    moves the normalized quad-cell signal by

        2 sqrt(2/pi) * k w(z_m) theta * Im[W exp(i (gouy(z_D) - gouy(z_m)))]

    so the real part of ``W`` is read in the far field and the imaginary
    part (a lateral shift of the beam) near the waist.
    """
    values = wv.values if isinstance(wv, WeakValueReport) else dict(wv)
    if isinstance(wv, WeakValueReport) and wv.overlap == 0:
        raise ZeroOverlapError("zero overlap")
    z_offsets = z_offsets or {}
    zeta_D = gouy_phase(z_D, beam.z_R)
    out = {}
    for tag, d in sorted(vib.drives.items()):
        if tag not in values:
            continue
        z_m = z_offsets.get(tag, 0.0)
        w_m = float(beam.width(z_m))
        rot = np.exp(1j * (zeta_D - gouy_phase(z_m, beam.z_R)))
        gain = QUAD_CELL_GAIN * beam.k * w_m * d.amplitude * float(np.imag(values[tag] * rot))
        out[tag] = complex(gain * np.exp(1j * d.phase) / 2j)
    return out


# ---------------------------------------------------------------------------
# traces


def _ratio_fields(beams: Sequence[GaussianBeam], ref: GaussianBeam, x: np.ndarray) -> np.ndarray:
    """Per-path fields divided by the unkicked reference mode, shape (paths, t, x)."""
    p0, a0, _, _ = ref.coefficients()
    out = []
    for b in beams:
        pref, a, bb, c = b.coefficients()
        pref, bb, c = (np.asarray(v)[:, None] for v in (pref, bb, c))
        out.append(pref / p0 * np.exp((a - a0) * x**2 + bb * x + c))
    return np.array(out)


@dataclass
class _FieldProbe:
    """Output field relative to the reference mode, sampled on Gauss-Hermite nodes."""

    net: Network
    vib: VibrationConfig
    z_D: float
    beam: BeamParams
    n_nodes: int = 64

    def __post_init__(self):
        self.ref = propagate_to(GaussianBeam.waist(self.beam), self.z_D)
        s, w = np.polynomial.hermite.hermgauss(self.n_nodes)
        self.x = s * self.ref.width / math.sqrt(2)
        self.weights = w / math.sqrt(math.pi)
        overlap = self.net.paths.total
        if overlap == 0:
            raise ZeroOverlapError("zero overlap")
        self.overlap = overlap
        self.per_path = _ratio_fields(output_beams(self.net, self.vib, self.z_D, self.beam), self.ref, self.x)

    def mean(self, g: np.ndarray) -> np.ndarray:
        return g @ self.weights

    def orth_norm2(self, g: np.ndarray) -> np.ndarray:
        """Squared norm of the part of ``g * u_ref`` orthogonal to ``u_ref``."""
        h = g - self.mean(g)[..., None]
        return (np.abs(h) ** 2) @ self.weights

    def field(self) -> np.ndarray:
        return self.per_path.sum(axis=0) / self.overlap

    def drive_component(self, tag: str) -> np.ndarray:
        """Output field minus the output field with mirror ``tag`` held still."""
        idx = [i for i, p in enumerate(self.net.paths) if tag in p.tags]
        if not idx or tag not in self.vib.drives or self.vib.drives[tag].amplitude == 0:
            return np.zeros(self.per_path.shape[1:], dtype=complex)
        still = _ratio_fields(output_beams(self.net, self.vib, self.z_D, self.beam, frozen=[tag]), self.ref, self.x)
        return (self.per_path[idx] - still[idx]).sum(axis=0) / self.overlap


def trace_strengths(net: Network, vib: VibrationConfig, z_D: float, beam: BeamParams = BeamParams(),
                    tags: Iterable[str] | None = None) -> dict[str, float]:
    """Trace strength of every mirror (see :func:`trace_strength`)."""
    probe = _FieldProbe(net, vib, z_D, beam)
    tags = sorted(net.mirrors) if tags is None else list(tags)
    out = {}
    for tag in tags:
        g = probe.drive_component(tag)
        out[tag] = float(math.sqrt(2 * np.mean(probe.orth_norm2(g))))
    return out


def trace_strength(net: Network, vib: VibrationConfig, z_D: float, tag: str,
                   beam: BeamParams = BeamParams()) -> float:
    """RMS size of the transverse-mode disturbance that mirror ``tag`` imprints.

    The post-selected output field (normalized by the overlap) is compared
    with the same field computed with ``tag`` held still; the difference,
    projected orthogonally to the undisturbed output mode, is the part of
    the field correlated with that mirror's drive.  Its time-RMS norm times
    sqrt(2) equals ``k w(z_m) |W_m| theta_m`` to first order, for any
    detector distance.
    """
    if tag not in net.mirrors:
        raise VibrationError(f"unknown mirror {tag!r}")
    return trace_strengths(net, vib, z_D, beam, [tag])[tag]


def field_sidebands(net: Network, vib: VibrationConfig, z_D: float, beam: BeamParams = BeamParams(),
                    labels: Iterable[str] | None = None) -> dict[str, float]:
    """Orthogonal-mode field amplitude at combination lines such as ``"E+A"`` or ``"E-A"``.

    The amplitude is the root-sum-square over the +f and -f components of
    the demodulated field.
    """
    probe = _FieldProbe(net, vib, z_D, beam)
    field = probe.field()
    t = vib.times
    if labels is None:
        labels = list(vib.combination_freqs())
    out = {}
    combos = vib.combination_freqs()
    for label in labels:
        f = combos.get(label)
        if f is None:
            m, sign, n = re.fullmatch(r"(.+?)([+-])(.+)", label).groups()
            fm, fn = vib.drives[m].freq, vib.drives[n].freq
            f = fm + fn if sign == "+" else abs(fm - fn)
        total = 0.0
        for ff in (f, -f):
            demod = np.exp(-2j * math.pi * ff * t) @ field / len(t)
            total += float(probe.orth_norm2(demod))
        out[label] = math.sqrt(total)
    return out


@dataclass(frozen=True)
class ScalingFit:
    exponent: float | None
    stderr: float | None = None
    intercept: float | None = None
    residual: float | None = None
    n_used: int = 0
    note: str = ""

    @property
    def measurable(self) -> bool:
        return self.exponent is not None


def fit_scaling_exponent(samples: Sequence[tuple[float, float]], floor: float = FLOOR) -> ScalingFit:
    """Least-squares slope of ``log(magnitude)`` against ``log(eps)``.

    Samples at or below ``floor`` are dropped; if fewer than four remain the
    fit reports "below measurable floor" instead of an exponent.
    """
    samples = list(samples)
    if len(samples) < 4:
        raise ValueError("need at least 4 samples")
    eps = np.array([s[0] for s in samples], dtype=float)
    mag = np.array([s[1] for s in samples], dtype=float)
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    if math.log10(eps.max() / eps.min()) < 1.0 - 1e-12:
        raise ValueError("eps must span at least one decade")
    keep = mag > floor
    dropped = int((~keep).sum())
    if keep.sum() < 4:
        return ScalingFit(None, n_used=int(keep.sum()), note="below measurable floor")
    lx, ly = np.log10(eps[keep]), np.log10(mag[keep])
    fit = stats.linregress(lx, ly)
    resid = ly - (fit.intercept + fit.slope * lx)
    note = f"{dropped} sample(s) at floor excluded" if dropped else ""
    return ScalingFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                      float(np.sqrt(np.mean(resid**2))), int(keep.sum()), note)


@dataclass
class TraceReport:
    strengths: dict[str, float]
    fits: dict[str, ScalingFit] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("mirror,strength,exponent,residual\n")
        for tag in sorted(set(self.strengths) | set(self.fits)):
            s = self.strengths.get(tag)
            fit = self.fits.get(tag)
            exp = "" if fit is None or fit.exponent is None else _g(fit.exponent)
            res = "" if fit is None or fit.residual is None else _g(fit.residual)
            if fit is not None and fit.exponent is None:
                exp = "below measurable floor"
            buf.write(f"{tag},{'' if s is None else _g(s)},{exp},{res}\n")
        return buf.getvalue()


def sideband_labels(pairs: Iterable[tuple[str, str]]) -> list[str]:
    out = []
    for m, n in pairs:
        out += [f"{m}+{n}", f"{m}-{n}"]
    return out


def mirror_pairs(tags: Iterable[str]) -> list[tuple[str, str]]:
    return list(combinations(sorted(tags), 2))
