"""Physical constants, parameter records, and unit conventions.

Conventions used throughout the package:

* All rates (decay rate ``gamma``, detuning ``delta``) are angular
  frequencies in rad/s.  A quoted "100 Hz" detuning is read as
  100 rad/s; output manifests record this convention so results can be
  reinterpreted if desired.
* The field strength ``u`` has velocity units (m/s): it is the area of
  the delta-shaped coupling profile, i.e. the Rabi frequency times the
  width in the narrow-field limit.
* The excited-channel wavenumber ``q`` obeys
  ``q**2 = k**2 + m*(i*gamma + 2*delta)/hbar`` with the branch
  ``Im q >= 0`` (and ``Re q >= 0`` when ``Im q == 0``) so that excited
  outgoing waves decay or are evanescent.
* Internally, amplitude computations run in dimensionless variables
  scaled by ``u`` whenever ``u > 0``; the SI API boundary is unaffected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ScalingUndefinedError

HBAR = 1.054571817e-34
"""Reduced Planck constant in J*s (CODATA)."""

RB87_MASS = 1.4e-25
"""Default atomic mass in kg (87Rb, rounded as commonly quoted)."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class AtomSpec:
    """Two-level atom: mass, spontaneous decay rate, laser detuning.

    ``gamma`` and ``delta`` are angular rates in rad/s; ``delta`` is the
    laser frequency minus the atomic transition frequency.
    """

    mass: float = RB87_MASS
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        _require_finite("mass", self.mass)
        _require_finite("gamma", self.gamma)
        _require_finite("delta", self.delta)
        if self.mass <= 0:
            raise InvalidInputError(f"mass must be positive, got {self.mass}")
        if self.gamma < 0:
            raise InvalidInputError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class FieldLayout:
    """One or two delta-shaped laser fields of equal strength.

    ``strength`` is the field area u in m/s.  ``positions`` holds one or
    two field coordinates in metres; two positions must be distinct and
    ascending.
    """

    strength: float
    positions: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        _require_finite("strength", self.strength)
        if self.strength < 0:
            raise InvalidInputError(f"strength must be >= 0, got {self.strength}")
        pos = tuple(float(p) for p in self.positions)
        if len(pos) not in (1, 2):
            raise InvalidInputError(f"need 1 or 2 field positions, got {len(pos)}")
        for p in pos:
            _require_finite("position", p)
        if len(pos) == 2 and not pos[0] < pos[1]:
            raise InvalidInputError(f"two positions must be distinct and ordered, got {pos}")
        object.__setattr__(self, "positions", pos)

    @property
    def is_double(self) -> bool:
        return len(self.positions) == 2

    @property
    def separation(self) -> float:
        """Distance L between the two fields (double layout only)."""
        if not self.is_double:
            raise InvalidInputError("separation is defined only for a double layout")
        return self.positions[1] - self.positions[0]

    @classmethod
    def single(cls, strength: float, position: float = 0.0) -> "FieldLayout":
        return cls(strength, (position,))

    @classmethod
    def double(cls, strength: float, separation: float, origin: float = 0.0) -> "FieldLayout":
        return cls(strength, (origin, origin + separation))


@dataclass(frozen=True)
class ScaleSet:
    """Natural scales built from the atom mass and field strength u.

    velocity u, length hbar/(m u), time hbar/(m u^2), energy m u^2 / 2.
    """

    velocity: float
    length: float
    time: float
    energy: float

    @classmethod
    def from_mass_and_strength(cls, mass: float, u: float) -> "ScaleSet":
        if u <= 0:
            raise ScalingUndefinedError(
                "dimensionless scaling needs u > 0; use raw SI quantities for u = 0"
            )
        if mass <= 0 or not (math.isfinite(mass) and math.isfinite(u)):
            raise InvalidInputError(f"invalid mass/strength pair ({mass}, {u})")
        return cls(
            velocity=u,
            length=HBAR / (mass * u),
            time=HBAR / (mass * u * u),
            energy=0.5 * mass * u * u,
        )


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless image of (k, gamma, delta, L) under a ScaleSet.

    kappa = 2 hbar k/(m u), gamma_s = hbar gamma/(m u^2),
    delta_s = hbar delta/(m u^2), lam = L m u / hbar.
    """

    kappa: float
    gamma_s: float
    delta_s: float
    lam: float | None = None
    scales: ScaleSet = field(default=None, repr=False)  # type: ignore[assignment]


def to_dimensionless(k: float, atom: AtomSpec, layout: FieldLayout) -> ScaledParams:
    """Map SI parameters onto the dimensionless set used internally."""
    u = layout.strength
    scales = ScaleSet.from_mass_and_strength(atom.mass, u)
    mu2 = atom.mass * u * u
    lam = layout.separation * atom.mass * u / HBAR if layout.is_double else None
    return ScaledParams(
        kappa=2.0 * HBAR * k / (atom.mass * u),
        gamma_s=HBAR * atom.gamma / mu2,
        delta_s=HBAR * atom.delta / mu2,
        lam=lam,
        scales=scales,
    )


def from_dimensionless(scaled: ScaledParams, mass: float) -> tuple[float, float, float, float | None]:
    """Exact inverse of :func:`to_dimensionless`: returns (k, gamma, delta, L)."""
    u = scaled.scales.velocity
    mu2 = mass * u * u
    k = scaled.kappa * mass * u / (2.0 * HBAR)
    gamma = scaled.gamma_s * mu2 / HBAR
    delta = scaled.delta_s * mu2 / HBAR
    L = scaled.lam * HBAR / (mass * u) if scaled.lam is not None else None
    return k, gamma, delta, L


def excited_wavenumber(k, atom: AtomSpec):
    """Complex excited-channel wavenumber q for ground wavenumber k.

    Solves ``q**2 = k**2 + m*(i*gamma + 2*delta)/hbar`` on the branch
    with ``Im q >= 0`` (``Re q >= 0`` when ``Im q == 0``).  Accepts a
    scalar or an array of wavenumbers.
    """
    karr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(karr)) or np.any(karr <= 0):
        raise InvalidInputError("wavenumber k must be finite and > 0")
    q2 = karr * karr + atom.mass * (1j * atom.gamma + 2.0 * atom.delta) / HBAR
    # principal sqrt maps Im(q^2) >= 0 onto the required branch
    q = np.sqrt(q2.astype(complex))
    return q if q.shape else complex(q)


def critical_detuning(k, atom: AtomSpec):
    """Detuning below which the excited outgoing channel closes at gamma = 0.

    Returns ``-hbar*k**2/(2m)``; for gamma = 0 the excited channel is
    open if and only if ``delta`` exceeds this value.
    """
    karr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(karr)) or np.any(karr <= 0):
        raise InvalidInputError("wavenumber k must be finite and > 0")
    dcr = -HBAR * karr * karr / (2.0 * atom.mass)
    return dcr if dcr.shape else float(dcr)


def wavenumber_from_velocity(v: float, mass: float = RB87_MASS) -> float:
    """k = m v / hbar for a velocity in m/s."""
    return mass * v / HBAR


def velocity_from_wavenumber(k: float, mass: float = RB87_MASS) -> float:
    """v = hbar k / m for a wavenumber in 1/m."""
    return HBAR * k / mass
