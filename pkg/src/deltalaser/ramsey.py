"""Ramsey fringes of the double delta laser: quantum vs semiclassical.

The measured quantity is the transmission probability into the excited
channel as a function of detuning.  The semiclassical expression treats
the center-of-mass motion classically; the quantum curve uses the exact
double-field amplitudes and switches off below the critical detuning
where the outgoing excited channel closes.  Decay is fixed to gamma = 0
here; lossy fringes are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import (HBAR, AtomSpec, FieldLayout, critical_detuning,
                         wavenumber_from_velocity)
from .delta_amplitudes import double_delta
from .errors import DiagnosticsError, InvalidInputError

TWO_PI = 2.0 * math.pi


def p12_semiclassical(delta, v: float, u: float, L: float):
    """Classical-motion fringe curve 4 sin^2(u/2v) cos^2(u/2v) cos^2(dL/2v)."""
    if v <= 0:
        raise InvalidInputError("velocity must be positive")
    delta = np.asarray(delta, dtype=float)
    su = math.sin(u / (2.0 * v))
    cu = math.cos(u / (2.0 * v))
    out = 4.0 * su * su * cu * cu * np.cos(delta * L / (2.0 * v)) ** 2
    return out if out.shape else float(out)


def p12_quantum(delta, k: float, mass: float, u: float, L: float):
    """Exact excited transmission probability (q/k)|T12|^2 above cutoff.

    Zero for detunings at or below the critical value where the excited
    outgoing wave is evanescent; continuous (from above) at the cutoff.
    """
    k = float(k)
    if k <= 0:
        raise InvalidInputError("wavenumber must be positive")
    darr = np.atleast_1d(np.asarray(delta, dtype=float))
    probe = AtomSpec(mass=mass, gamma=0.0, delta=0.0)
    dcr = critical_detuning(k, probe)
    out = np.zeros(darr.shape)
    open_mask = darr > dcr
    if np.any(open_mask):
        out[open_mask] = _p12_quantum_vec(darr[open_mask], k, mass, u, L)
    return out if np.asarray(delta).shape else float(out[0])


@dataclass(frozen=True)
class FringeCurve:
    """Sampled fringe curve with its parameter snapshot."""

    detunings: np.ndarray
    p12: np.ndarray
    kind: str  # 'quantum' | 'semiclassical'
    v: float
    u: float
    L: float
    gamma: float = 0.0

    @property
    def crossing_time(self) -> float:
        return self.L / self.v

    @property
    def semiclassical_period(self) -> float:
        return TWO_PI * self.v / self.L


def fringe_scan(atom_mass: float, u: float, L: float, v: float, delta_range,
                n: int, kinds: tuple[str, ...] = ("quantum", "semiclassical")):
    """Sample fringe curves on a uniform detuning grid.

    Returns a dict of :class:`FringeCurve` keyed by kind.
    """
    if n < 100:
        raise InvalidInputError("need at least 100 detuning samples")
    lo, hi = float(delta_range[0]), float(delta_range[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidInputError("detuning range must be finite and increasing")
    deltas = np.linspace(lo, hi, n)
    k = wavenumber_from_velocity(v, atom_mass)
    out = {}
    for kind in kinds:
        if kind == "quantum":
            # vectorized evaluation over the open-channel part of the grid
            probe = AtomSpec(mass=atom_mass)
            dcr = critical_detuning(k, probe)
            vals = np.zeros(deltas.shape)
            open_mask = deltas > dcr
            if np.any(open_mask):
                vals[open_mask] = _p12_quantum_vec(deltas[open_mask], k, atom_mass, u, L)
            out[kind] = FringeCurve(deltas, vals, "quantum", v, u, L)
        elif kind == "semiclassical":
            out[kind] = FringeCurve(deltas, p12_semiclassical(deltas, v, u, L),
                                    "semiclassical", v, u, L)
        else:
            raise InvalidInputError(f"unknown fringe kind {kind!r}")
    return out


def _p12_quantum_vec(deltas: np.ndarray, k: float, mass: float, u: float, L: float):
    """p12_quantum over an array of open-channel detunings (shared k)."""
    from .delta_amplitudes import _double_kernel

    kappa = 2.0 * HBAR * k / (mass * u)
    mu2 = mass * u * u
    chi2 = kappa * kappa + 8.0 * HBAR * deltas / mu2
    chi = np.sqrt(chi2.astype(complex))
    q = chi * mass * u / (2.0 * HBAR)
    lam = L * mass * u / HBAR
    _, _, _, t12 = _double_kernel(kappa, chi, k * L, lam)
    return (np.real(q) / k) * np.abs(t12) ** 2


@dataclass(frozen=True)
class FringeReport:
    """Peak diagnostics of a fringe scan."""

    quantum_peaks: list = field(default_factory=list)        # (position, height)
    semiclassical_peaks: list = field(default_factory=list)
    central_shift: float = 0.0
    width: float = 0.0
    expected_width: float = 0.0
    mean_peak_spacing: float = 0.0
    resonance_regime: bool = False


def _refined_extrema(x: np.ndarray, y: np.ndarray, find_max: bool) -> list[tuple[float, float]]:
    """Local extrema with 3-point parabolic refinement."""
    s = y if find_max else -y
    idx = np.nonzero((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:]))[0] + 1
    h = x[1] - x[0]
    out = []
    for i in idx:
        denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
        shift = 0.0 if denom == 0 else 0.5 * (y[i - 1] - y[i + 1]) / denom
        pos = x[i] + shift * h
        val = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift
        out.append((float(pos), float(val)))
    return out


def fringe_report(quantum: FringeCurve, scl: FringeCurve) -> FringeReport:
    """Locate fringe maxima, the central-peak shift, and the central width.

    The width is the distance between the two minima flanking the central
    peak.  A resonance regime is flagged when the mean quantum peak
    spacing deviates from the semiclassical period by more than 20%.
    """
    if quantum.detunings.shape != scl.detunings.shape or \
            not np.array_equal(quantum.detunings, scl.detunings):
        raise InvalidInputError("curves must share one detuning grid")
    x = quantum.detunings
    h = x[1] - x[0]
    period = scl.semiclassical_period
    if h > period / 20.0:
        raise DiagnosticsError(
            f"detuning grid too coarse: spacing {h:.3e} exceeds 1/20 of the "
            f"semiclassical period {period:.3e}")
    q_peaks = _refined_extrema(x, quantum.p12, True)
    s_peaks = _refined_extrema(x, scl.p12, True)
    if not q_peaks or not s_peaks:
        raise DiagnosticsError("no fringe peaks detected on the scan range")
    central_q = min(q_peaks, key=lambda p: abs(p[0]))
    central_s = min(s_peaks, key=lambda p: abs(p[0]))
    shift = central_q[0] - central_s[0]
    minima = _refined_extrema(x, quantum.p12, False)
    left = [p for p in minima if p[0] < central_q[0]]
    right = [p for p in minima if p[0] > central_q[0]]
    width = (right[0][0] - left[-1][0]) if (left and right) else math.nan
    spacings = np.diff([p[0] for p in q_peaks])
    mean_spacing = float(np.mean(spacings)) if spacings.size else math.nan
    resonance = bool(abs(mean_spacing - period) > 0.2 * period) if spacings.size else True
    return FringeReport(
        quantum_peaks=q_peaks,
        semiclassical_peaks=s_peaks,
        central_shift=float(shift),
        width=float(width),
        expected_width=period,
        mean_peak_spacing=mean_spacing,
        resonance_regime=resonance,
    )
