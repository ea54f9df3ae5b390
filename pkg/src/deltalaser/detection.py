"""Operational detection distributions and their ideal reference limits.

Distributions are held as :class:`TimeSeries` on uniform time grids; all
normalization integrals use the trapezoid rule.  Operator normalization
never builds an operator: the loss operator is diagonal in k for these
models, so sandwiching reduces to multiplying the momentum amplitude by
B(k)^(-1/2) (positive rule) or B(k)^(-1) (symmetrized rule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_model import HBAR, AtomSpec, FieldLayout
from .delta_amplitudes import absorption_probability
from .errors import (DegenerateInputError, InvalidInputError, NumericalFailureError,
                     RegimeError, UnderflowError)
from .wavepacket import (DiscretizedPacket, bilinear_excited_overlap, excited_norm,
                         field_site_amplitudes, free_evolve, survival_series)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled distribution over a strictly increasing uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    name: str = ""
    unit: str = "1/s"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise InvalidInputError("times and values must be 1-d arrays of equal length")
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise InvalidInputError("time grid must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.times))

    def normalized(self) -> "TimeSeries":
        return normalized_rate(self)

    def with_values(self, values, name: str | None = None) -> "TimeSeries":
        return TimeSeries(self.times, values, name or self.name, self.unit,
                          dict(self.metadata))


def default_time_grid(packet: DiscretizedPacket, n: int = 2048,
                      span: tuple[float, float] = (0.5, 1.5)) -> np.ndarray:
    """Uniform grid over span * (arrival time |x0|/v0) with n points."""
    spec = packet.spec
    v0 = HBAR * spec.k0 / packet.mass
    t_arr = abs(spec.x0) / v0
    return np.linspace(span[0] * t_arr, span[1] * t_arr, n)


def _require_uniform(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    dt = np.diff(t)
    if t.size < 5 or np.any(dt <= 0) or abs(dt.max() - dt.min()) > 1e-9 * dt.mean():
        raise InvalidInputError("need a uniform, strictly increasing time grid")
    return t


def _derivative_4th(values: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order central differences (one-sided at the edges)."""
    d = np.gradient(values, dt, edge_order=2)
    d[2:-2] = (values[:-4] - 8 * values[1:-3] + 8 * values[3:-1] - values[4:]) / (12 * dt)
    return d


def first_photon_density(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                         times, check: bool = True, check_tol: float = 1e-4) -> TimeSeries:
    """Probability density of the first emitted photon, gamma * excited norm.

    With ``check=True`` the norm-decay route -d||Psi||^2/dt is evaluated
    independently on the same grid and the two are required to agree.
    """
    if atom.gamma <= 0:
        raise RegimeError("first_photon_density needs gamma > 0")
    t = _require_uniform(times)
    vals = atom.gamma * excited_norm(packet, atom, layout, t)
    meta = {"gamma": atom.gamma, "delta": atom.delta, "u": layout.strength,
            "positions": layout.positions, "kind": "first_photon"}
    if check:
        surv = survival_series(packet, atom, layout, t)
        decay = -_derivative_4th(surv, t[1] - t[0])
        err = float(np.max(np.abs(decay[2:-2] - vals[2:-2])))
        scale = float(np.max(np.abs(vals)))
        if scale > 0 and err > check_tol * scale:
            raise NumericalFailureError(
                f"norm-decay and excited-norm routes disagree: {err:.3e} vs "
                f"max {scale:.3e}")
        meta["decay_route_max_diff"] = err
    return TimeSeries(t, vals, name="pi", metadata=meta)


def normalized_rate(series: TimeSeries) -> TimeSeries:
    """Pointwise division by the trapezoid integral."""
    total = series.integral()
    if not math.isfinite(total) or total <= 0:
        raise DegenerateInputError(f"cannot normalize series with integral {total}")
    meta = dict(series.metadata)
    meta["normalized_by"] = total
    return TimeSeries(series.times, series.values / total,
                      name=series.name + "_n" if series.name else "normalized",
                      metadata=meta)


@dataclass(frozen=True)
class NormalizationKernel:
    """Samples of the detection-loss kernel B(k) on the packet grid."""

    b_values: np.ndarray
    exponent: float  # -0.5 for the positive rule, -1.0 for the symmetrized rule

    def factors(self) -> np.ndarray:
        return self.b_values ** self.exponent


def normalization_kernel(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                         exponent: float) -> NormalizationKernel:
    if exponent not in (-0.5, -1.0):
        raise InvalidInputError("exponent must be -0.5 or -1.0")
    if layout.strength <= 0:
        raise RegimeError("operator normalization needs u > 0")
    if atom.gamma <= 0:
        raise RegimeError("operator normalization needs gamma > 0")
    b = np.asarray(absorption_probability(packet.grid.nodes, atom, layout))
    if np.any(b < 1e-300):
        raise UnderflowError(
            "B(k) underflowed on the grid; shrink the momentum window so all "
            "nodes keep a nonzero detection probability")
    if np.any(b >= 1.0) or np.any(b <= 0.0):
        raise NumericalFailureError("B(k) left the open interval (0, 1)")
    return NormalizationKernel(b_values=b, exponent=exponent)


def op_normalized_positive(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                           times) -> TimeSeries:
    """Positive operator-normalized distribution.

    The incident amplitude is filtered by B(k)^(-1/2) before detection;
    the result is manifestly nonnegative and integrates to one.
    """
    kernel = normalization_kernel(packet, atom, layout, -0.5)
    filtered = packet.filtered(kernel.factors())
    t = _require_uniform(times)
    vals = atom.gamma * excited_norm(filtered, atom, layout, t)
    meta = {"gamma": atom.gamma, "u": layout.strength, "kind": "pi_on1"}
    return TimeSeries(t, vals, name="pi_on1", metadata=meta)


def op_normalized_rivier(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                         times) -> TimeSeries:
    """Symmetrized operator-normalized distribution (not manifestly positive).

    Real part of the detection bilinear form between the B^-1-filtered
    packet and the bare packet; equals the half-sum of the two operator
    orderings.  Negative excursions are reported, never clipped.
    """
    kernel = normalization_kernel(packet, atom, layout, -1.0)
    filtered = packet.filtered(kernel.factors())
    t = _require_uniform(times)
    vals = np.real(bilinear_excited_overlap(filtered, packet, atom, layout, t))
    meta = {"gamma": atom.gamma, "u": layout.strength, "kind": "pi_on2"}
    return TimeSeries(t, vals, name="pi_on2", metadata=meta)


def occupation_rate(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                    times) -> tuple[TimeSeries, TimeSeries]:
    """Excited-occupation growth rate dP2/dt for a lossless single field at x = 0.

    Evaluated from the local identity dP2/dt = u Im[Psi_1(0,t) conj(Psi_2(0,t))];
    also returns the cumulative occupation P2(t).
    """
    if atom.gamma != 0.0:
        raise RegimeError("occupation_rate is defined for gamma = 0 exactly")
    if layout.is_double or layout.positions[0] != 0.0:
        raise RegimeError("occupation_rate needs a single field at position 0")
    t = _require_uniform(times)
    g_site, e_site = field_site_amplitudes(packet, atom, layout, t)
    vals = layout.strength * np.imag(g_site * np.conjugate(e_site))
    rate = TimeSeries(t, vals, name="dp2_dt",
                      metadata={"u": layout.strength, "delta": atom.delta,
                                "kind": "occupation_rate"})
    from scipy.integrate import cumulative_trapezoid
    cum = cumulative_trapezoid(vals, t, initial=0.0)
    cumulative = TimeSeries(t, cum, name="p2", unit="1",
                            metadata={"kind": "occupation_cumulative"})
    return rate, cumulative


def ideal_density(packet: DiscretizedPacket, times) -> TimeSeries:
    """Free-packet density at the origin over mean inverse velocity."""
    t = _require_uniform(times)
    psi = free_evolve(packet, 0.0, t)
    vals = np.abs(psi) ** 2 / packet.mean_inverse_velocity
    return TimeSeries(t, vals, name="ideal_density",
                      metadata={"kind": "ideal_density"})


def ideal_ked(packet: DiscretizedPacket, times) -> TimeSeries:
    """Local kinetic-energy density at the origin, scaled by 2/p0."""
    t = _require_uniform(times)
    _, dpsi = free_evolve(packet, 0.0, t, derivative=True)
    vals = (HBAR ** 2 / (packet.mass * packet.p0)) * np.abs(dpsi) ** 2
    return TimeSeries(t, vals, name="ideal_ked", metadata={"kind": "ideal_ked"})


def kijowski(packet: DiscretizedPacket, times) -> TimeSeries:
    """Ideal positive arrival-time distribution at the origin.

    (hbar / 2 pi m) |integral dk psi(k) sqrt(k) e^{-i hbar k^2 t/2m}|^2,
    positive by construction for packets supported on k > 0.
    """
    t = _require_uniform(times)
    grid = packet.grid
    weighted = grid.weights * packet.psi * np.sqrt(grid.nodes)
    amp = weighted @ packet.time_phases(t)
    vals = (HBAR / (2.0 * math.pi * packet.mass)) * np.abs(amp) ** 2
    return TimeSeries(t, vals, name="kijowski", metadata={"kind": "kijowski"})


def flux(packet: DiscretizedPacket, times) -> TimeSeries:
    """Quantum flux of the free packet at the origin.

    May be negative (backflow); for single Gaussians with k0 >= 5 sigma_k
    it is positive in practice.
    """
    t = _require_uniform(times)
    psi, dpsi = free_evolve(packet, 0.0, t, derivative=True)
    vals = (HBAR / packet.mass) * np.imag(np.conjugate(psi) * dpsi)
    return TimeSeries(t, vals, name="flux", metadata={"kind": "flux"})


def distribution_distance(a: TimeSeries, b: TimeSeries) -> float:
    """L1 distance (1/2) integral |a - b| dt on a common grid."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise InvalidInputError("distributions must share one time grid")
    return 0.5 * float(np.trapezoid(np.abs(a.values - b.values), a.times))
