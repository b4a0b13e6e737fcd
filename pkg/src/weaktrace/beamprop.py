"""Closed-form 1-D Gaussian beams and a grid propagation oracle.

Conventions
-----------
Fields are envelopes of the carrier ``exp(-i k z)``, so the paraxial
equation reads ``dpsi/dz = -(i / 2k) d2psi/dx2``.  A beam is

    psi(x) = amp * exp(i phi_acc) * u(x - x_c; q) * exp(-i k theta_c (x - x_c))

with the unit-norm fundamental mode

    u(x; q) = (k Im q / pi)**(1/4) * exp(i pi/4) * q**(-1/2) * exp(-i k x**2 / (2 q))

and ``q = (z - z_waist) + i z_R``.  With these signs a beam with positive
``theta_c`` moves toward +x, and the on-axis phase of ``u`` grows as
``+gouy/2`` (one transverse dimension).  The relative phase between the
first-order and fundamental modes is the full ``gouy_phase``.

Beam fields other than ``q``, ``wavelength`` and ``z`` may be numpy arrays;
all operations broadcast, which is how time series are evaluated in one
pass.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import erf

DEFAULT_W0 = 1.0
DEFAULT_WAVELENGTH = math.pi * 1e-3  # z_R = pi w0^2 / lambda = 1000
EDGE_ENERGY_TOL = 1e-16


class GridTooNarrowError(ValueError):
    pass


class AliasingError(ValueError):
    pass


def gouy_phase(z, z_R):
    """Gouy phase ``arctan(z / z_R)`` of a beam at distance ``z`` from its waist."""
    if np.any(np.asarray(z_R) <= 0):
        raise ValueError("Rayleigh range must be positive")
    return np.arctan2(z, z_R)


@dataclass(frozen=True)
class BeamParams:
    w0: float = DEFAULT_W0
    wavelength: float = DEFAULT_WAVELENGTH

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def z_R(self) -> float:
        return math.pi * self.w0**2 / self.wavelength

    def width(self, z):
        return self.w0 * np.sqrt(1 + (np.asarray(z) / self.z_R) ** 2)

    def gouy(self, z):
        return gouy_phase(z, self.z_R)

    def z_for_gouy(self, zeta):
        """Distance from the waist at which the Gouy phase equals ``zeta``."""
        return self.z_R * np.tan(zeta)

    def theta_for_eps(self, eps):
        """Mirror angle whose kick strength ``k w0 theta`` equals ``eps``."""
        return eps / (self.k * self.w0)


@dataclass(frozen=True)
class GaussianBeam:
    q: complex
    x_c: float | np.ndarray = 0.0
    theta_c: float | np.ndarray = 0.0
    phi_acc: float | np.ndarray = 0.0
    amp: complex | np.ndarray = 1.0
    wavelength: float = DEFAULT_WAVELENGTH
    z: float = 0.0

    def __post_init__(self):
        if not np.imag(self.q) > 0:
            raise ValueError(f"beam parameter must have Im(q) > 0, got {self.q!r}")

    @classmethod
    def waist(cls, params: BeamParams = BeamParams(), amp=1.0, z: float = 0.0) -> "GaussianBeam":
        return cls(q=1j * params.z_R, amp=amp, wavelength=params.wavelength, z=z)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def z_R(self) -> float:
        return float(np.imag(self.q))

    @property
    def width(self) -> float:
        return math.sqrt(2 * abs(self.q) ** 2 / (self.k * self.z_R))

    @property
    def gouy(self) -> float:
        return float(gouy_phase(np.real(self.q), self.z_R))

    def coefficients(self):
        """``(pref, a, b, c)`` with ``psi(x) = pref * exp(a x^2 + b x + c)``.

        ``b`` and ``c`` are written in terms of ``x_c - theta_c q`` so that the
        cancellation between tilt and wavefront curvature in the far field
        happens before, not after, multiplying by ``k``.
        """
        k, q = self.k, self.q
        pref = (self.amp * np.exp(1j * self.phi_acc)
                * (k * self.z_R / math.pi) ** 0.25 * np.exp(1j * math.pi / 4) / np.sqrt(q))
        a = -1j * k / (2 * q)
        b = 1j * k * (self.x_c - self.theta_c * q) / q
        c = 1j * k * self.x_c * (2 * self.theta_c * q - self.x_c) / (2 * q)
        return pref, a, b, c

    def field(self, x):
        pref, a, b, c = self.coefficients()
        x = np.asarray(x, dtype=float)
        return pref * np.exp(a * x**2 + b * x + c)


def apply_tilt(beam: GaussianBeam, theta_m) -> GaussianBeam:
    """Reflect off a mirror tilted by ``theta_m``: the beam turns by ``2 theta_m``.

    Equivalent to multiplying the field by ``exp(-2i k theta_m x)``.
    """
    k = beam.k
    return replace(beam, theta_c=beam.theta_c + 2 * theta_m,
                   phi_acc=beam.phi_acc - 2 * k * theta_m * beam.x_c)


def propagate_beam(beam: GaussianBeam, dz: float) -> GaussianBeam:
    if dz == 0:
        return beam
    k = beam.k
    return replace(beam, q=beam.q + dz, x_c=beam.x_c + beam.theta_c * dz,
                   phi_acc=beam.phi_acc - 0.5 * k * beam.theta_c**2 * dz, z=beam.z + dz)


def propagate_to(beam: GaussianBeam, z: float) -> GaussianBeam:
    return propagate_beam(beam, z - beam.z)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    n: int
    dx: float
    x0: float

    @classmethod
    def centered(cls, n: int, half_width: float, center: float = 0.0) -> "GridSpec":
        """Cell-centred grid on ``[center - half_width, center + half_width]``."""
        dx = 2 * half_width / n
        return cls(n, dx, center - half_width + dx / 2)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)


@dataclass(frozen=True)
class GridField:
    samples: np.ndarray
    dx: float
    x0: float
    wavelength: float
    z: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(len(self.samples))

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dx)

    def mirrored(self) -> "GridField":
        """Field reflected through x = 0 (needs a grid symmetric about 0)."""
        if not math.isclose(self.x0, -self.x[-1], rel_tol=1e-12, abs_tol=1e-12 * self.dx):
            raise ValueError("grid is not symmetric about x = 0")
        return replace(self, samples=self.samples[::-1].copy())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,re,im\n")
        for x, v in zip(self.x, self.samples):
            buf.write(f"{x!r},{v.real!r},{v.imag!r}\n")
        return buf.getvalue()


def default_grid(beam: GaussianBeam, z_max: float | None = None, n: int = 4096) -> GridSpec:
    """Grid of ``n`` samples spanning +-12 beam widths at the widest plane."""
    w = beam.width
    if z_max is not None:
        qz = abs(np.real(beam.q)) + abs(z_max - beam.z)
        w = max(w, math.sqrt(2 * (qz**2 + beam.z_R**2) / (beam.k * beam.z_R)))
    return GridSpec.centered(n, 12 * w, float(np.mean(beam.x_c)))


def evaluate_on_grid(beam: GaussianBeam, spec: GridSpec | None = None) -> GridField:
    """Sample a (scalar) beam on a uniform grid."""
    spec = default_grid(beam) if spec is None else spec
    x = spec.x
    w = beam.width
    lo, hi = x[0] - spec.dx / 2, x[-1] + spec.dx / 2
    if min(beam.x_c - lo, hi - beam.x_c) < 4 * w:
        raise GridTooNarrowError(
            f"grid [{lo:.4g}, {hi:.4g}] is narrower than 8 beam widths (w={w:.4g}) around x_c={beam.x_c:.4g}")
    return GridField(beam.field(x), spec.dx, spec.x0, beam.wavelength, beam.z)


def _edge_fraction(samples: np.ndarray, frac: float = 0.1) -> float:
    n = len(samples)
    m = max(1, int(n * frac))
    p = np.abs(samples) ** 2
    total = p.sum()
    if total == 0:
        return 0.0
    return float((p[:m].sum() + p[-m:].sum()) / total)


def grid_propagate(field: GridField, dz: float, check: bool = True) -> GridField:
    """Paraxial angular-spectrum propagation by ``dz``.

    The transfer function ``exp(i kx^2 dz / 2k)`` is the exact propagator of
    the paraxial equation on the periodic grid, so the step is unitary.
    With ``check`` the input spectrum and the output field must both be
    negligible near the grid edges, otherwise :class:`AliasingError`.
    """
    if dz == 0:
        return field
    n = len(field.samples)
    spec = np.fft.fft(field.samples)
    if check and _edge_fraction(np.fft.fftshift(spec)) > EDGE_ENERGY_TOL:
        raise AliasingError("field spectrum reaches the Nyquist band; refine dx")
    kx = 2 * math.pi * np.fft.fftfreq(n, d=field.dx)
    out = np.fft.ifft(spec * np.exp(1j * kx**2 * dz / (2 * field.k)))
    if check and _edge_fraction(out) > EDGE_ENERGY_TOL:
        raise AliasingError(f"propagation by dz={dz:g} wraps energy around the grid; widen it")
    return replace(field, samples=out, z=field.z + dz)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ---------------------------------------------------------------------------
# quad cell


@dataclass(frozen=True)
class QuadCellReading:
    difference: float | np.ndarray
    total: float | np.ndarray

    @property
    def defined(self):
        return np.asarray(self.total) > 0

    @property
    def normalized(self):
        total = np.asarray(self.total, dtype=float)
        diff = np.asarray(self.difference, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(total > 0, diff / np.where(total > 0, total, 1.0), np.nan)
        return out if out.ndim else float(out)


def _pair_integrals(bj: GaussianBeam, bl: GaussianBeam, offset: float):
    pj, aj, b_j, cj = bj.coefficients()
    pl, al, b_l, cl = bl.coefficients()
    A = aj + np.conj(al)
    B = b_j + np.conj(b_l)
    C = cj + np.conj(cl)
    alpha = -A
    sa = np.sqrt(alpha)
    base = pj * np.conj(pl) * math.sqrt(math.pi) / sa * np.exp(C + B**2 / (4 * alpha))
    mu = B / (2 * alpha)
    return base, base * erf(sa * (mu - offset))


def quad_cell(field: GridField | Sequence[GaussianBeam], offset: float = 0.0) -> QuadCellReading:
    """Split-detector reading of a grid field or a coherent sum of beams.

    ``difference`` is the integral of ``sign(x - offset) |psi|^2``.  Grids
    use the midpoint rule; beam sums use exact error-function integrals of
    every pairwise product, vectorized over any array-valued beam fields.
    """
    if isinstance(field, GridField):
        p = np.abs(field.samples) ** 2
        s = np.sign(field.x - offset)
        return QuadCellReading(float(np.sum(s * p) * field.dx), float(np.sum(p) * field.dx))
    beams = list(field)
    diff = 0.0
    total = 0.0
    for j, bj in enumerate(beams):
        for l in range(j, len(beams)):
            t, d = _pair_integrals(bj, beams[l], offset)
            if l == j:
                total = total + t.real
                diff = diff + d.real
            else:
                total = total + 2 * t.real
                diff = diff + 2 * d.real
    return QuadCellReading(diff, total)


def centroid(field: GridField) -> float:
    p = np.abs(field.samples) ** 2
    return float(np.sum(field.x * p) / np.sum(p))
