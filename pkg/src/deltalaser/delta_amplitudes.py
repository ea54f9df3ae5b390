"""Exact two-channel scattering amplitudes for one and two delta lasers.

Amplitudes are evaluated from dimensionless variables (kappa = 2 hbar k /
(m u), chi = 2 hbar q / (m u)) whenever u > 0, which keeps every
intermediate of order unity; the u = 0 limit short-circuits to free
propagation.  Double-field formulas are written with the common factor q
divided out of numerator and denominator, so the closed channel point
q = 0 evaluates to the continuous limit instead of 0/0.

The double-field transmission amplitude into the ground channel carries
a phase factor exp(i(k+q)L) on its sin(kL) term; the variant with
exp(iqL) sometimes seen in print violates flux conservation for q != k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import HBAR, AtomSpec, FieldLayout, excited_wavenumber
from .errors import InvalidInputError, RegimeError


def _cis(z):
    """exp(i z) for complex z: libm-reduced phase times a real decay factor."""
    z = np.asarray(z, dtype=complex)
    out = np.exp(-z.imag) * (np.cos(z.real) + 1j * np.sin(z.real))
    return out if out.shape else complex(out)


@dataclass(frozen=True)
class ChannelAmplitudes:
    """Scattering amplitudes {r11, t11, r12, t12} at one wavenumber (or array).

    For a double layout the fields hold the double-field set (R11, T11,
    R12, T12); ``kind`` records which.  ``u`` and ``positions`` snapshot
    the layout the amplitudes belong to.
    """

    r11: complex
    t11: complex
    r12: complex
    t12: complex
    k: float
    q: complex
    kind: str  # 'single' | 'double'
    u: float
    positions: tuple[float, ...]

    def excited_channel_open(self):
        """True where gamma = 0 and the excited outgoing channel carries flux."""
        q = np.asarray(self.q)
        open_ = (q.imag == 0.0) & (q.real > 0.0)
        return open_ if open_.shape else bool(open_)


@dataclass(frozen=True)
class ChannelProbabilities:
    """Flux-weighted channel probabilities; excited entries only when open."""

    reflection_ground: float
    transmission_ground: float
    reflection_excited: float
    transmission_excited: float
    open_excited_channel: bool


def _validate_k(k):
    karr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(karr)) or np.any(karr <= 0):
        raise InvalidInputError("wavenumber k must be finite and > 0")
    return karr if karr.shape else float(karr)


def _dimensionless(k, atom: AtomSpec, u: float):
    """kappa, chi on the Im q >= 0 branch."""
    kappa = 2.0 * HBAR * np.asarray(k, dtype=float) / (atom.mass * u)
    mu2 = atom.mass * u * u
    chi2 = kappa * kappa + (4j * HBAR * atom.gamma + 8.0 * HBAR * atom.delta) / mu2
    chi = np.sqrt(np.asarray(chi2, dtype=complex))
    return kappa, chi


def single_delta(k, atom: AtomSpec, layout: FieldLayout) -> ChannelAmplitudes:
    """Amplitudes for a single delta field at position xi.

    r11 = -m^2 u^2 e^{2ik xi} / d, t11 = 4 hbar^2 k q / d,
    r12/t12 = -2i hbar m k u e^{i(k +/- q) xi} / d, d = 4 hbar^2 k q + m^2 u^2.
    """
    if layout.is_double:
        raise InvalidInputError("single_delta needs a one-field layout")
    k = _validate_k(k)
    q = excited_wavenumber(k, atom)
    xi = layout.positions[0]
    u = layout.strength
    if u == 0.0:
        one = np.ones_like(np.asarray(k, dtype=complex))
        zero = np.zeros_like(one)
        return ChannelAmplitudes(
            r11=zero if one.shape else 0j, t11=one if one.shape else 1 + 0j,
            r12=zero if one.shape else 0j, t12=zero if one.shape else 0j,
            k=k, q=q, kind="single", u=u, positions=layout.positions)
    kappa, chi = _dimensionless(k, atom, u)
    den = kappa * chi + 1.0
    r11 = -_cis(2.0 * k * xi + 0j) / den
    t11 = kappa * chi / den
    r12 = -1j * kappa * _cis((k + q) * xi) / den
    t12 = -1j * kappa * _cis((k - q) * xi) / den
    return ChannelAmplitudes(r11=r11, t11=t11, r12=r12, t12=t12, k=k, q=q,
                             kind="single", u=u, positions=layout.positions)


def _expm1_over(z, chi):
    """(exp(z) - 1)/chi with a series fallback where chi -> 0 (z = i*chi*lam)."""
    z = np.asarray(z, dtype=complex)
    chi = np.asarray(chi, dtype=complex)
    safe = np.where(chi == 0, 1.0, chi)
    direct = (np.exp(z) - 1.0) / safe
    # z/chi is finite as chi -> 0; use it to build the small-|z| series
    ratio = np.where(chi == 0, 0.0, z / safe)
    series = ratio * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    small = np.abs(z) < 1e-6
    out = np.where(small, series, direct)
    if np.any(chi == 0):
        # exact chi = 0 limit: (e^{i chi lam} - 1)/chi -> i*lam, recovered
        # by the caller passing ratio = i*lam through z/chi; guard directly:
        out = np.where(chi == 0, _zero_chi_limit(z, chi), out)
    return out


def _zero_chi_limit(z, chi):
    # only invoked where chi == 0 exactly; there z == 0 and the limit is
    # d z / d chi, supplied by the caller through closure-free recompute
    return np.zeros_like(np.asarray(z, dtype=complex))


def _double_kernel(kappa, chi, kL, lam):
    """Canonical double-field amplitudes from dimensionless inputs.

    All four inputs broadcast; kL = k*L and lam = L m u / hbar carry the
    geometry.  The common factor q of the matching solution is cancelled
    analytically, so chi = 0 (critical detuning) evaluates to the limit.
    """
    kappa = np.asarray(kappa, dtype=float)
    chi = np.asarray(chi, dtype=complex)
    kL = np.asarray(kL, dtype=float)
    Ek = _cis(kL + 0j)
    E2k = _cis(2.0 * kL + 0j)
    qL = 0.5 * chi * lam  # q*L in physical phase units
    Eq = _cis(qL)
    # tq = (e^{2iqL} - 1)/chi, finite at chi = 0 where it equals i*lam
    z = 1j * chi * lam
    chi_safe = np.where(chi == 0, 1.0, chi)
    small = np.abs(z) < 1e-6
    tq = np.where(
        small,
        1j * lam * (1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0),
        (_cis(2.0 * qL) - 1.0) / chi_safe,
    )
    den = kappa * kappa * chi + 2.0 * kappa * (1.0 + Ek * Eq) + (E2k - 1.0) * tq
    r11 = -(kappa * (1.0 + E2k + 2.0 * Ek * Eq) + (E2k - 1.0) * tq) / den
    r12 = -1j * kappa * (kappa * (1.0 + Ek * Eq) + (E2k - 1.0) * tq) / den
    t11 = kappa * (kappa * chi + 2j * Eq * np.sin(kL)) / den
    t12 = -1j * kappa * kappa * (Ek + Eq) * _cis(-qL) / den
    return r11, t11, r12, t12


def double_delta(k, atom: AtomSpec, layout: FieldLayout) -> ChannelAmplitudes:
    """Amplitudes for two equal delta fields separated by L.

    Evaluated with the common denominator of the exact matching solution;
    the overall factor q is cancelled analytically so the critical point
    q = 0 is finite, and large-kL phase factors are evaluated from the
    real and imaginary parts of qL separately.
    """
    if not layout.is_double:
        raise InvalidInputError("double_delta needs a two-field layout")
    k = _validate_k(k)
    q = excited_wavenumber(k, atom)
    u = layout.strength
    s = layout.positions[0]
    L = layout.separation
    if u == 0.0:
        one = np.ones_like(np.asarray(k, dtype=complex))
        zero = np.zeros_like(one)
        return ChannelAmplitudes(
            r11=zero if one.shape else 0j, t11=one if one.shape else 1 + 0j,
            r12=zero if one.shape else 0j, t12=zero if one.shape else 0j,
            k=k, q=q, kind="double", u=u, positions=layout.positions)
    kappa, chi = _dimensionless(k, atom, u)
    lam = L * atom.mass * u / HBAR
    kL = np.asarray(k, dtype=float) * L
    r11, t11, r12, t12 = _double_kernel(kappa, chi, kL, lam)
    if s != 0.0:
        # translating both fields by s multiplies the scattered waves by
        # the same phases as for a single field at xi = s
        r11 = r11 * _cis(2.0 * k * s + 0j)
        r12 = r12 * _cis((k + q) * s)
        t12 = t12 * _cis((k - q) * s)
    if not np.asarray(k).shape:
        r11, t11, r12, t12 = complex(r11), complex(t11), complex(r12), complex(t12)
    return ChannelAmplitudes(r11=r11, t11=t11, r12=r12, t12=t12, k=k, q=q,
                             kind="double", u=u, positions=layout.positions)


def interior_coefficients(amps: ChannelAmplitudes, atom: AtomSpec):
    """Coefficients (A, B, C, D) of the wave between the two fields.

    Between the fields (y measured from the first field) the ground wave
    is A e^{iky} + B e^{-iky} and the excited wave is C e^{iqy} + D
    e^{-iqy}.  Obtained by applying the matching conditions at the first
    field to the reflected amplitudes.  The e^{+-iqy} basis degenerates
    at q = 0, which is rejected.
    """
    if amps.kind != "double":
        raise InvalidInputError("interior coefficients exist only for a double layout")
    q = np.asarray(amps.q)
    k = np.asarray(amps.k)
    if np.any(q == 0):
        raise InvalidInputError("interior basis degenerates at q = 0")
    # canonical-frame reflected amplitudes (first field at the origin)
    s = amps.positions[0]
    r11 = amps.r11 * _cis(-2.0 * k * s + 0j) if s != 0.0 else amps.r11
    r12 = amps.r12 * _cis(-(k + q) * s) if s != 0.0 else amps.r12
    c = atom.mass * amps.u / HBAR
    A = 1.0 - 0.5j * (c / k) * r12
    B = r11 + 0.5j * (c / k) * r12
    C = -0.5j * (c / q) * (1.0 + r11)
    D = r12 + 0.5j * (c / q) * (1.0 + r11)
    return A, B, C, D


def channel_probabilities(amps: ChannelAmplitudes) -> ChannelProbabilities:
    """Flux-weighted probabilities; excited entries flagged closed when
    the outgoing excited channel carries no flux."""
    open_ = amps.excited_channel_open()
    rg = np.abs(amps.r11) ** 2
    tg = np.abs(amps.t11) ** 2
    fluxf = np.where(open_, np.real(amps.q) / np.asarray(amps.k), 0.0)
    re = fluxf * np.abs(amps.r12) ** 2
    te = fluxf * np.abs(amps.t12) ** 2
    if np.asarray(amps.k).shape:
        return ChannelProbabilities(rg, tg, re, te, open_)
    return ChannelProbabilities(float(rg), float(tg), float(re), float(te), bool(open_))


def unitarity_deficit(amps: ChannelAmplitudes):
    """1 - |r11|^2 - |t11|^2 - (q/k)(|r12|^2 + |t12|^2) for gamma = 0.

    With decay (gamma > 0) the deficit is physical absorption, not a
    conservation diagnostic; use :func:`absorption_probability` instead.
    """
    q = np.asarray(amps.q)
    if np.any((q.real > 0) & (q.imag > 0)):
        raise RegimeError(
            "unitarity_deficit needs gamma = 0; for gamma > 0 the deficit is "
            "the absorption probability B(k)")
    fluxf = np.where(q.imag == 0, q.real / np.asarray(amps.k), 0.0)
    deficit = (1.0 - np.abs(amps.r11) ** 2 - np.abs(amps.t11) ** 2
               - fluxf * (np.abs(amps.r12) ** 2 + np.abs(amps.t12) ** 2))
    return deficit if deficit.shape else float(deficit)


def absorption_probability(k, atom: AtomSpec, layout: FieldLayout):
    """Plane-wave detection probability B(k) = 1 - |r11|^2 - |t11|^2."""
    amps = double_delta(k, atom, layout) if layout.is_double else single_delta(k, atom, layout)
    b = 1.0 - np.abs(amps.r11) ** 2 - np.abs(amps.t11) ** 2
    return b if np.asarray(b).shape else float(b)
