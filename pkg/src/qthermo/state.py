"""Single-qubit states, spectral bookkeeping and small-dimension ergotropy.

Conventions: hbar = k_B = 1, the Hamiltonian is H = -h.sigma and the mean
energy of a Bloch vector r is U = -h.r.  Entropies are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError, ValidationError

RADIUS_SLACK = 1e-12
MIXED_EPS = 1e-12

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SX, SY, SZ)


@dataclass(frozen=True)
class BlochState:
    """Bloch vector of a qubit density operator rho = (I + r.sigma)/2."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        comps = (float(self.x), float(self.y), float(self.z))
        if not all(math.isfinite(c) for c in comps):
            raise ValidationError(f"non-finite Bloch components {comps}")
        r = math.sqrt(sum(c * c for c in comps))
        if r > 1.0 + RADIUS_SLACK:
            raise ValidationError(f"Bloch radius {r!r} exceeds 1")
        if r > 1.0:
            comps = tuple(c / r for c in comps)
        for name, c in zip("xyz", comps):
            object.__setattr__(self, name, c)

    @classmethod
    def from_vector(cls, v) -> BlochState:
        x, y, z = (float(c) for c in v)
        return cls(x, y, z)

    @classmethod
    def from_spherical(cls, r: float, theta: float, phi: float = 0.0) -> BlochState:
        return cls(
            r * math.sin(theta) * math.cos(phi),
            r * math.sin(theta) * math.sin(phi),
            r * math.cos(theta),
        )

    @classmethod
    def from_density_matrix(cls, rho) -> BlochState:
        rho = np.asarray(rho, dtype=complex)
        return cls(*(float(np.real(np.trace(rho @ p))) for p in PAULI))

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def r(self) -> float:
        return purity_radius(self)

    def density_matrix(self) -> np.ndarray:
        return 0.5 * (I2 + self.x * SX + self.y * SY + self.z * SZ)

    def eigenvalues(self) -> tuple[float, float]:
        r = self.r
        return (0.5 * (1.0 + r), 0.5 * (1.0 - r))


@dataclass(frozen=True)
class Field3:
    """Field vector h of H = -h.sigma, in energy units."""

    hx: float
    hy: float
    hz: float

    @classmethod
    def from_vector(cls, v) -> Field3:
        hx, hy, hz = (float(c) for c in v)
        return cls(hx, hy, hz)

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.hx, self.hy, self.hz])

    @property
    def h(self) -> float:
        return math.sqrt(self.hx**2 + self.hy**2 + self.hz**2)

    @property
    def unit(self) -> np.ndarray:
        h = self.h
        if h == 0.0:
            raise ValidationError("zero field has no direction")
        return self.vec / h

    def hamiltonian(self) -> np.ndarray:
        return -(self.hx * SX + self.hy * SY + self.hz * SZ)


@dataclass(frozen=True)
class SpectralPair:
    """Occupation probabilities paired with energy levels.

    ``probs[k]`` is the population of the level ``energies[k]``.  The pair
    is passive when probabilities descend while energies ascend.
    """

    probs: tuple[float, ...]
    energies: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in self.probs)
        e = tuple(float(v) for v in self.energies)
        if len(p) != len(e):
            raise ValidationError("probs and energies differ in length")
        if len(p) < 2:
            raise ValidationError("dimension must be at least 2")
        if any(v < -1e-12 or v > 1 + 1e-12 for v in p):
            raise ValidationError(f"probabilities outside [0, 1]: {p}")
        if abs(sum(p) - 1.0) > 1e-10:
            raise ValidationError(f"probabilities sum to {sum(p)!r}, not 1")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "energies", e)

    @property
    def dim(self) -> int:
        return len(self.probs)

    @property
    def energy(self) -> float:
        return math.fsum(p * e for p, e in zip(self.probs, self.energies))

    @property
    def is_passive(self) -> bool:
        p, e = self.probs, self.energies
        return all(p[k] >= p[k + 1] and e[k] <= e[k + 1] for k in range(len(p) - 1))


def purity_radius(state: BlochState) -> float:
    r = math.sqrt(state.x**2 + state.y**2 + state.z**2)
    return min(r, 1.0)


def binary_entropy(r: float) -> float:
    """Entropy in nats of the spectrum ((1+r)/2, (1-r)/2)."""
    total = 0.0
    for lam in (0.5 * (1.0 + r), 0.5 * (1.0 - r)):
        if lam > 0.0:
            total -= lam * math.log(lam)
    return total


def von_neumann_entropy(state: BlochState) -> float:
    return binary_entropy(state.r)


def coherence_l1(state: BlochState, field: Field3) -> float:
    """l1 coherence in the energy eigenbasis, i.e. the Bloch component normal to h."""
    if field.h == 0.0:
        raise ValidationError("coherence needs a nonzero field to fix the energy basis")
    c = float(np.linalg.norm(np.cross(state.vec, field.unit)))
    return min(c, 1.0)


def trace_distance(a: BlochState, b: BlochState) -> float:
    return 0.5 * float(np.linalg.norm(a.vec - b.vec))


def relative_entropy_qubit(a: BlochState, b: BlochState) -> float:
    """S(a||b) in nats.  Returns ``math.inf`` when supp(a) is not inside supp(b)."""
    rb = b.r
    if rb >= 1.0 - 1e-15:
        return 0.0 if trace_distance(a, b) < 1e-12 else math.inf
    # ln rho_b = ln(sqrt(lam+ lam-)) I + artanh(rb) (b_hat . sigma)
    cross = float(np.dot(a.vec, b.vec)) / rb if rb > 0.0 else 0.0
    value = -binary_entropy(a.r) - 0.5 * math.log((1.0 - rb * rb) / 4.0) - math.atanh(rb) * cross
    return max(value, 0.0)


def thermal_state(field: Field3, beta: float) -> BlochState:
    """Gibbs state of H = -h.sigma at inverse temperature ``beta`` (may be inf)."""
    if beta < 0 or math.isnan(beta):
        raise ValidationError(f"inverse temperature must be >= 0, got {beta!r}")
    h = field.h
    if h == 0.0:
        if math.isinf(beta):
            raise ValidationError("zero field at zero temperature has a degenerate ground state")
        return BlochState(0.0, 0.0, 0.0)
    r = 1.0 if math.isinf(beta) else math.tanh(beta * h)
    return BlochState.from_vector(r * field.unit)


def passive_state(sp: SpectralPair) -> tuple[SpectralPair, float]:
    """Passive rearrangement of a spectrum and its energy.

    Ties are broken by original index (stable sort), which leaves the
    passive energy unchanged.
    """
    probs = sorted(sp.probs, reverse=True)
    energies = sorted(sp.energies)
    passive = SpectralPair(tuple(probs), tuple(energies))
    return passive, passive.energy


def ergotropy_general(sp: SpectralPair, actual_energy: float) -> float:
    """Maximal cyclic work: ``actual_energy`` minus the passive energy of ``sp``."""
    _, passive_energy = passive_state(sp)
    e = actual_energy - passive_energy
    if e < -1e-12:
        raise NumericalError(
            f"negative ergotropy {e!r}: actual energy {actual_energy!r} is below the passive bound"
        )
    return max(e, 0.0)


def qubit_spectral_pair(state: BlochState, field: Field3) -> SpectralPair:
    """Spectrum of the state paired with the levels of H = -h.sigma."""
    lam_hi, lam_lo = state.eigenvalues()
    return SpectralPair((lam_hi, lam_lo), (-field.h, field.h))


def passive_bloch(state: BlochState, field: Field3) -> BlochState:
    """Bloch vector of the passive state: same radius, aligned with h."""
    return BlochState.from_vector(state.r * field.unit)


def random_states(rng: np.random.Generator, n: int, pure: bool = False) -> list[BlochState]:
    """Draw ``n`` states uniformly in the Bloch ball (or on the sphere)."""
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    if not pure:
        v *= rng.uniform(size=(n, 1)) ** (1.0 / 3.0)
    return [BlochState.from_vector(row) for row in v]


def as_states(vectors: Sequence) -> list[BlochState]:
    return [BlochState.from_vector(v) for v in vectors]
