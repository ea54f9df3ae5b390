"""Gaussian packets, momentum quadrature, free and conditional evolution.

The state before the first photon emission is expanded over the exact
scattering eigenfunctions,

    Psi(x, t) = (2 pi)^(-1/2) * sum_i w_i psi(k_i) e^{-i hbar k_i^2 t / 2m} Phi_{k_i}(x),

with the momentum amplitude normalized to sum_i w_i |psi(k_i)|^2 = 1 on a
Gauss-Legendre grid.  The unitary Fourier convention (the 1/sqrt(2 pi))
makes the position-space norm equal to the momentum-space norm, so the
free packet, the spinor field, and every detection distribution come out
normalized without ad hoc factors.

Spatial integrals of products of piecewise plane waves are evaluated in
closed form region by region (a Gram matrix over the momentum grid), so
norms and overlaps carry no x-discretization error.  Each region
integral is referenced to the edge where the integrand is largest, which
keeps evanescent factors from overflowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core_model import HBAR, RB87_MASS, AtomSpec, FieldLayout
from .delta_amplitudes import (ChannelAmplitudes, double_delta, interior_coefficients,
                               single_delta)
from .errors import InvalidInputError, NumericalFailureError, RegimeError

_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Incoming ground-state Gaussian: psi(k) ~ exp(-(k-k0)^2/(4 sigma_k^2)) e^{-i k x0}.

    The amplitude is truncated to k > 0 and renormalized; specs must
    satisfy k0 >= 5 sigma_k so the discarded weight is negligible.
    """

    k0: float
    sigma_k: float
    x0: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.k0, self.sigma_k, self.x0))):
            raise InvalidInputError("packet parameters must be finite")
        if self.sigma_k <= 0 or self.k0 <= 0:
            raise InvalidInputError("k0 and sigma_k must be positive")
        if self.k0 < 5.0 * self.sigma_k:
            raise InvalidInputError(
                f"k0 = {self.k0} < 5 sigma_k = {5 * self.sigma_k}: packet is not "
                "essentially positive-momentum")

    @classmethod
    def from_velocity(cls, v0: float, sigma_rel: float, x0: float | None = None,
                      mass: float = RB87_MASS) -> "GaussianPacketSpec":
        """Convenience builder: mean velocity, relative spread sigma_k/k0,
        and center (default 10/sigma_k left of the origin)."""
        k0 = mass * v0 / HBAR
        sigma_k = sigma_rel * k0
        if x0 is None:
            x0 = -10.0 / sigma_k
        return cls(k0=k0, sigma_k=sigma_k, x0=x0)


@dataclass(frozen=True)
class KGrid:
    """Gauss-Legendre nodes and weights on [k0 - w sigma_k, k0 + w sigma_k] ∩ k > 0."""

    nodes: np.ndarray
    weights: np.ndarray
    n: int
    window: float

    @classmethod
    def for_packet(cls, spec: GaussianPacketSpec, n: int = 512, window: float = 8.0) -> "KGrid":
        lo = max(spec.k0 - window * spec.sigma_k, 1e-9 * spec.k0)
        hi = spec.k0 + window * spec.sigma_k
        x, w = np.polynomial.legendre.leggauss(n)
        nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        weights = 0.5 * (hi - lo) * w
        return cls(nodes=nodes, weights=weights, n=n, window=window)


@dataclass(frozen=True)
class DiscretizedPacket:
    """Momentum amplitude sampled on a KGrid, normalized on the grid."""

    spec: GaussianPacketSpec
    grid: KGrid
    psi: np.ndarray
    mass: float

    @property
    def mean_k(self) -> float:
        return float(np.sum(self.grid.weights * self.nodes_density() * self.grid.nodes))

    @property
    def p0(self) -> float:
        return HBAR * self.mean_k

    @property
    def mean_inverse_velocity(self) -> float:
        dens = self.nodes_density()
        return float(np.sum(self.grid.weights * dens * self.mass / (HBAR * self.grid.nodes)))

    def nodes_density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.grid.weights * self.nodes_density()))

    def filtered(self, factors: np.ndarray) -> "DiscretizedPacket":
        """Pointwise-multiplied copy (not renormalized)."""
        factors = np.asarray(factors)
        if factors.shape != self.psi.shape:
            raise InvalidInputError("filter factors must match the grid")
        return replace(self, psi=self.psi * factors)

    def energies(self) -> np.ndarray:
        return HBAR * HBAR * self.grid.nodes ** 2 / (2.0 * self.mass)

    def time_phases(self, times) -> np.ndarray:
        """e^{-i E_i t / hbar} as an (n_k, n_t) array."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return np.exp(-1j * np.outer(self.energies() / HBAR, t))

    def coefficients(self, times) -> np.ndarray:
        """(w_i psi_i / sqrt(2 pi)) e^{-i E_i t/hbar}, shape (n_k, n_t)."""
        base = (self.grid.weights * self.psi / _SQRT2PI)[:, None]
        return base * self.time_phases(times)


def make_gaussian(spec: GaussianPacketSpec, grid: KGrid | None = None,
                  mass: float = RB87_MASS) -> DiscretizedPacket:
    """Discretize the Gaussian momentum amplitude and renormalize on the grid."""
    if grid is None:
        grid = KGrid.for_packet(spec)
    k = grid.nodes
    amp = np.exp(-((k - spec.k0) ** 2) / (4.0 * spec.sigma_k ** 2)) * \
        np.exp(-1j * k * spec.x0)
    amp = amp * (2.0 * math.pi * spec.sigma_k ** 2) ** (-0.25)
    norm2 = np.sum(grid.weights * np.abs(amp) ** 2)
    packet = DiscretizedPacket(spec=spec, grid=grid, psi=amp / math.sqrt(norm2), mass=mass)
    return packet


# ---------------------------------------------------------------------------
# closed-form region overlaps


def _interval_block(ci, ki, ri, cj, kj, rj, a, b):
    """sum-free Gram block: integral over [a, b] of conj(w_i(x)) w_j(x).

    w(x) = c e^{i kappa (x - r)}; ``a``/``b`` may be -inf/+inf when the
    integrand decays there.  Evaluated from the edge where the integrand
    is largest so growing exponentials never appear.
    """
    ki = np.asarray(ki, dtype=complex)
    kj = np.asarray(kj, dtype=complex)
    alpha = kj[None, :] - np.conjugate(ki)[:, None]
    ci_c = np.conjugate(np.asarray(ci, dtype=complex))
    cj_c = np.asarray(cj, dtype=complex)

    def edge_product(x):
        wi = ci_c * np.exp(-1j * np.conjugate(ki) * (x - ri))
        wj = cj_c * np.exp(1j * kj * (x - rj))
        return wi[:, None] * wj[None, :]

    if a == -np.inf and b == np.inf:
        raise InvalidInputError("doubly infinite overlap region is not supported")
    if a == -np.inf:
        if np.any(alpha.imag >= 0):
            raise RegimeError("overlap does not converge toward -inf")
        return edge_product(b) / (1j * alpha)
    if b == np.inf:
        if np.any(alpha.imag <= 0):
            raise RegimeError("overlap does not converge toward +inf")
        return -edge_product(a) / (1j * alpha)

    width = b - a
    z = 1j * alpha * width
    small = np.abs(z) < 1e-6
    grow = (alpha.imag < 0) & ~small
    decay = ~grow & ~small
    out = np.empty_like(alpha)
    # |z| small: series of integral = width (e^z - 1)/z, safe from any edge
    if np.any(small):
        zs = np.where(small, z, 0.0)
        series = width * (1.0 + zs / 2.0 + zs * zs / 6.0 + zs ** 3 / 24.0)
        out = np.where(small, edge_product(a) * series, out)
    # integrand decays toward b: (e^z - 1)/(i alpha) from edge a (Re z <= 0)
    if np.any(decay):
        zd = np.where(decay, z, -1.0)
        vals = edge_product(a) * (np.exp(zd) - 1.0) / (1j * np.where(decay, alpha, 1.0))
        out = np.where(decay, vals, out)
    # integrand grows toward b: (1 - e^{-z})/(i alpha) from edge b (Re(-z) < 0)
    if np.any(grow):
        zg = np.where(grow, z, 1.0)
        vals = edge_product(b) * (1.0 - np.exp(-zg)) / (1j * np.where(grow, alpha, 1.0))
        out = np.where(grow, vals, out)
    return out


@dataclass(frozen=True)
class _Region:
    a: float
    b: float
    ground: tuple  # tuple of (coef_array, kappa_array, ref)
    excited: tuple


def _scattering_regions(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout):
    """Piecewise plane-wave description of the eigenfunctions on the grid.

    Works in the frame of the first field; the translation phase
    e^{i k s} is folded into the incoming coefficients, which leaves all
    overlap integrals unchanged and keeps the region bookkeeping at the
    canonical positions.
    """
    k = packet.grid.nodes
    shift = layout.positions[0]
    canonical = FieldLayout(layout.strength, tuple(p - shift for p in layout.positions))
    ones = np.ones_like(k, dtype=complex)
    if canonical.is_double:
        amps = double_delta(k, atom, canonical)
        L = canonical.separation
        A, B, C, D = interior_coefficients(amps, atom)
        q = amps.q
        regions = (
            _Region(-np.inf, 0.0,
                    ground=((ones, k.astype(complex), 0.0), (amps.r11, -k.astype(complex), 0.0)),
                    excited=((amps.r12, -q, 0.0),)),
            _Region(0.0, L,
                    ground=((A, k.astype(complex), 0.0), (B, -k.astype(complex), 0.0)),
                    excited=((C, q, 0.0), (D * np.exp(-1j * q * L), -q, L))),
            _Region(L, np.inf,
                    ground=((amps.t11, k.astype(complex), 0.0),),
                    excited=((amps.t12 * np.exp(1j * q * L), q, L),)),
        )
    else:
        amps = single_delta(k, atom, canonical)
        q = amps.q
        regions = (
            _Region(-np.inf, 0.0,
                    ground=((ones, k.astype(complex), 0.0), (amps.r11, -k.astype(complex), 0.0)),
                    excited=((amps.r12, -q, 0.0),)),
            _Region(0.0, np.inf,
                    ground=((amps.t11, k.astype(complex), 0.0),),
                    excited=((amps.t12, q, 0.0),)),
        )
    return regions, amps, shift


def _gram(regions, channel: str, bounds: tuple[float, float]) -> np.ndarray:
    """Accumulate the Gram matrix of one spinor channel over clipped regions."""
    total = None
    lo, hi = bounds
    for region in regions:
        a = max(region.a, lo)
        b = min(region.b, hi)
        if not a < b:
            continue
        terms = region.ground if channel == "ground" else region.excited
        for (ci, ki, ri) in terms:
            for (cj, kj, rj) in terms:
                block = _interval_block(ci, ki, ri, cj, kj, rj, a, b)
                total = block if total is None else total + block
    if total is None:
        raise InvalidInputError("empty integration window")
    return total


def _quadratic_form(gram: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Re diag(C^dagger G C) evaluated for every time column of C."""
    return np.real(np.einsum("it,it->t", np.conjugate(coeffs), gram @ coeffs))


def _psd_form(gram: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Quadratic form of a positive-semidefinite Gram, nonnegative by construction.

    The Gram of square-integrable waves is PSD up to roundoff; evaluating
    through its eigensystem (tiny negative eigenvalues dropped) keeps
    norms from dipping below zero in the far tails.
    """
    sym = 0.5 * (gram + gram.conj().T)
    evals, evecs = np.linalg.eigh(sym)
    floor = -1e-12 * max(float(evals[-1]), 0.0)
    if evals[0] < floor:
        raise NumericalFailureError(
            f"overlap matrix is not positive semidefinite (min eig {evals[0]:.3e})")
    evals = np.clip(evals, 0.0, None)
    proj = evecs.conj().T @ coeffs
    return np.einsum("a,at->t", evals, np.abs(proj) ** 2)


def _packet_translation(packet: DiscretizedPacket, shift: float) -> DiscretizedPacket:
    if shift == 0.0:
        return packet
    return packet.filtered(np.exp(1j * packet.grid.nodes * shift))


def _window_for(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                times) -> tuple[float, float]:
    """Spatial window that contains every packet component at the given times."""
    t_max = float(np.max(np.abs(np.atleast_1d(times))))
    spec = packet.spec
    sigx0 = 1.0 / (2.0 * spec.sigma_k)
    tau = packet.mass / (2.0 * HBAR * spec.sigma_k ** 2)
    sigx = sigx0 * math.sqrt(1.0 + (t_max / tau) ** 2)
    k_max = float(packet.grid.nodes[-1])
    v_max = HBAR * k_max / packet.mass
    if atom.gamma == 0.0:
        # open excited waves really propagate and must fit in the window;
        # for gamma > 0 they are handled on the infinite domain instead
        from .core_model import excited_wavenumber
        q_max = excited_wavenumber(k_max, atom)
        v_max = max(v_max, HBAR * float(np.real(q_max)) / packet.mass)
    span = layout.positions[-1] - layout.positions[0]
    extent = abs(spec.x0) + span + 1.05 * v_max * t_max + 12.0 * sigx
    _check_resolvable(packet.grid, extent)
    return (-extent, extent)


def _check_resolvable(grid: KGrid, extent: float):
    """Closed-form overlaps oscillate like e^{i (k-k') x}; the node spacing
    must resolve that across the window or the quadrature silently degrades."""
    spacing = float(np.max(np.diff(grid.nodes)))
    if spacing * extent > 2.5:
        raise InvalidInputError(
            f"integration window ({extent:.3e} m) too wide for the momentum grid "
            f"(node spacing {spacing:.3e} 1/m); increase the node count")


# ---------------------------------------------------------------------------
# public operations


def free_evolve(packet: DiscretizedPacket, x, t, derivative: bool = False):
    """Freely evolving packet amplitude (and optional spatial derivative).

    psi_free(x, t) = (2 pi)^(-1/2) sum_i w_i psi_i e^{i k_i x - i hbar k_i^2 t/2m};
    the derivative weights the integrand with i k.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    coeff = packet.coefficients(t)
    phases = np.exp(1j * np.outer(x, packet.grid.nodes))
    psi = phases @ coeff
    psi = np.squeeze(psi)
    if not derivative:
        return psi
    dpsi = (phases * (1j * packet.grid.nodes)[None, :]) @ coeff
    return psi, np.squeeze(dpsi)


@dataclass(frozen=True)
class SpinorField:
    """Two-component field sampled at positions x for one time."""

    x: np.ndarray
    t: float
    ground: np.ndarray
    excited: np.ndarray

    def density(self) -> np.ndarray:
        return np.abs(self.ground) ** 2 + np.abs(self.excited) ** 2


def conditional_evolve(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                       x, t: float) -> SpinorField:
    """Sample the conditionally evolved spinor wave packet at (x, t)."""
    _check_incoming(packet, layout)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    regions, _, shift = _scattering_regions(packet, atom, layout)
    shifted = _packet_translation(packet, shift)
    coeff = shifted.coefficients(t)[:, 0]
    y = x - shift
    ground = np.zeros(x.shape, dtype=complex)
    excited = np.zeros(x.shape, dtype=complex)
    for region in regions:
        mask = (y >= region.a) & (y <= region.b)
        if not np.any(mask):
            continue
        ym = y[mask]
        for out, terms in ((ground, region.ground), (excited, region.excited)):
            acc = np.zeros(ym.shape, dtype=complex)
            for (c, kap, ref) in terms:
                acc += np.exp(1j * np.outer(ym - ref, kap)) @ (c * coeff)
            out[mask] = acc
    return SpinorField(x=x, t=float(t), ground=ground, excited=excited)


def _check_incoming(packet: DiscretizedPacket, layout: FieldLayout):
    if packet.spec.x0 >= min(layout.positions):
        raise InvalidInputError(
            "packet center x0 must lie left of the leftmost field "
            f"(x0 = {packet.spec.x0}, field at {min(layout.positions)})")


def excited_norm(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout, t):
    """Integral of |excited component|^2 over all space at time(s) t.

    Needs gamma > 0 so the excited waves decay away from the fields and
    the closed-form overlaps converge.
    """
    if atom.gamma <= 0:
        raise RegimeError("excited_norm needs gamma > 0; use the grid propagator "
                          "or local quantities at gamma = 0")
    _check_incoming(packet, layout)
    if layout.strength == 0.0:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t_arr.shape)
        return out if np.asarray(t).shape else 0.0
    regions, _, shift = _scattering_regions(packet, atom, layout)
    gram = _gram(regions, "excited", (-np.inf, np.inf))
    shifted = _packet_translation(packet, shift)
    coeffs = shifted.coefficients(t)
    vals = _psd_form(gram, coeffs)
    return vals if np.asarray(t).shape else float(vals[0])


def bilinear_excited_overlap(packet_a: DiscretizedPacket, packet_b: DiscretizedPacket,
                             atom: AtomSpec, layout: FieldLayout, t):
    """gamma * integral of conj(excited_A) excited_B: the detection bilinear form.

    Sesquilinear in (A, B); its diagonal reproduces gamma * excited_norm.
    """
    if atom.gamma <= 0:
        raise RegimeError("the detection bilinear form needs gamma > 0")
    if packet_a.grid is not packet_b.grid and not (
            packet_a.grid.n == packet_b.grid.n
            and np.array_equal(packet_a.grid.nodes, packet_b.grid.nodes)):
        raise InvalidInputError("both packets must share one momentum grid")
    _check_incoming(packet_a, layout)
    _check_incoming(packet_b, layout)
    if layout.strength == 0.0:
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t_arr.shape, dtype=complex)
        return out if np.asarray(t).shape else 0j
    regions, _, shift = _scattering_regions(packet_a, atom, layout)
    gram = _gram(regions, "excited", (-np.inf, np.inf))
    ca = _packet_translation(packet_a, shift).coefficients(t)
    cb = _packet_translation(packet_b, shift).coefficients(t)
    vals = atom.gamma * np.einsum("it,it->t", np.conjugate(ca), gram @ cb)
    return vals if np.asarray(t).shape else complex(vals[0])


def survival_series(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                    times) -> np.ndarray:
    """Total norm ||Psi(t)||^2 on a generous finite window.

    The excited channel uses the convergent infinite-domain overlaps when
    gamma > 0 and the finite window otherwise.
    """
    _check_incoming(packet, layout)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    regions, _, shift = _scattering_regions(packet, atom, layout)
    window = _window_for(packet, atom, layout, times)
    g_ground = _gram(regions, "ground", window)
    if atom.gamma > 0:
        g_excited = _gram(regions, "excited", (-np.inf, np.inf))
    else:
        g_excited = _gram(regions, "excited", window)
    shifted = _packet_translation(packet, shift)
    coeffs = shifted.coefficients(times)
    return _quadratic_form(g_ground + g_excited, coeffs)


def field_site_amplitudes(packet: DiscretizedPacket, atom: AtomSpec, layout: FieldLayout,
                          times) -> tuple[np.ndarray, np.ndarray]:
    """(Psi_ground, Psi_excited) evaluated at the (first) field position over time."""
    _check_incoming(packet, layout)
    k = packet.grid.nodes
    shift = layout.positions[0]
    canonical = FieldLayout(layout.strength, tuple(p - shift for p in layout.positions))
    amps = double_delta(k, atom, canonical) if canonical.is_double else \
        single_delta(k, atom, canonical)
    # at the field site the wave is continuous: 1 + r11 = value of the
    # ground component, r12 the excited one (canonical frame)
    shifted = _packet_translation(packet, shift)
    coeffs = shifted.coefficients(times)
    g_site = (1.0 + amps.r11) @ coeffs
    e_site = amps.r12 @ coeffs
    return g_site, e_site


def free_left_probability(packet: DiscretizedPacket, edge: float, times) -> np.ndarray:
    """Probability of the freely evolving packet to sit left of ``edge``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    k = packet.grid.nodes.astype(complex)
    spec = packet.spec
    sigx0 = 1.0 / (2.0 * spec.sigma_k)
    tau = packet.mass / (2.0 * HBAR * spec.sigma_k ** 2)
    t_max = float(np.max(np.abs(times)))
    sigx = sigx0 * math.sqrt(1.0 + (t_max / tau) ** 2)
    v_max = HBAR * float(packet.grid.nodes[-1]) / packet.mass
    lo = min(spec.x0, edge) - (1.05 * v_max * t_max + 12.0 * sigx)
    _check_resolvable(packet.grid, max(abs(lo), abs(edge)))
    ones = np.ones_like(packet.grid.nodes, dtype=complex)
    gram = _interval_block(ones, k, 0.0, ones, k, 0.0, lo, edge)
    coeffs = packet.coefficients(times)
    return _quadratic_form(gram, coeffs)
