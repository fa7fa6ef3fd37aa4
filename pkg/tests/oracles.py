"""Brute-force references that share no code with the package under test."""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.linalg import logm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
UP_TO_DOWN = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
DOWN_TO_UP = UP_TO_DOWN.T.copy()  # |0><1|


def rho_of(v) -> np.ndarray:
    x, y, z = v
    return 0.5 * (np.eye(2) + x * SX + y * SY + z * SZ)


def bloch_of(rho) -> np.ndarray:
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


def lindblad_rk4(H_of_t, jumps, r0, times, dt=1e-3) -> np.ndarray:
    """Fixed-step RK4 on the 2x2 density matrix; H_of_t(t) gives the Hamiltonian."""

    def rhs(t, rho):
        H = H_of_t(t)
        out = -1j * (H @ rho - rho @ H)
        for g, L in jumps:
            Ld = L.conj().T
            out += g * (L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L))
        return out

    rho = rho_of(r0).astype(complex)
    out = [bloch_of(rho)]
    t = 0.0
    for t_next in times[1:]:
        n = max(1, int(math.ceil((t_next - t) / dt - 1e-9)))
        h = (t_next - t) / n
        for _ in range(n):
            k1 = rhs(t, rho)
            k2 = rhs(t + h / 2, rho + h / 2 * k1)
            k3 = rhs(t + h / 2, rho + h / 2 * k2)
            k4 = rhs(t + h, rho + h * k3)
            rho = rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = t_next
        out.append(bloch_of(rho))
    return np.array(out)


def relative_entropy_logm(a, b) -> float:
    ra, rb = rho_of(a), rho_of(b)
    return float(np.trace(ra @ (logm(ra) - logm(rb))).real)


def von_neumann_eig(v) -> float:
    lam = np.linalg.eigvalsh(rho_of(v))
    return float(-sum(l * math.log(l) for l in lam if l > 0))


def min_permutation_energy(probs, energies) -> float:
    return min(sum(p * e for p, e in zip(perm, energies)) for perm in itertools.permutations(probs))


def haar_unitary(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
