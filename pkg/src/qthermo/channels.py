"""Qubit channel families: Kraus sets, closed-form Bloch trajectories, the
generalized amplitude damping master equation and the Ohmic dephasing rate.

Field conventions (H = -h.sigma):

* AD, NM-AD, PD, NM-PD, SPONT-EMISSION: h = (0, 0, omega0), ground state z = +1,
  which is the basis the Kraus operators are written in.
* GAD (Kraus form): h = (0, 0, omega0/2), ground state z = +1.
* BITFLIP-DISS, OHMIC-PD: H = omega0 sigma_z, so h = (0, 0, -omega0).
* GAD-MASTER: H = (omega0/2) sigma_z, so h = (0, 0, -omega0/2).
* PD-TIMEDEP: h(t) = (0, 0, -(omega0/2)(1 - cos(omega t))).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import numerics
from .errors import NumericalError, ValidationError
from .state import I2, PAULI, SX, SY, SZ, BlochState, Field3

FAMILIES = (
    "AD",
    "GAD",
    "PD",
    "NM-PD",
    "NM-AD",
    "BITFLIP-DISS",
    "SPONT-EMISSION",
    "OHMIC-PD",
    "GAD-MASTER",
    "PD-TIMEDEP",
)
KRAUS_FAMILIES = ("AD", "GAD", "PD", "NM-PD", "NM-AD")
UNITAL_FAMILIES = ("PD", "NM-PD", "OHMIC-PD", "BITFLIP-DISS", "PD-TIMEDEP")
DEPHASING_FAMILIES = ("PD", "NM-PD", "OHMIC-PD", "PD-TIMEDEP")

_REQUIRED = {
    "AD": (("gamma", "p"),),
    "GAD": (("gamma", "p"), ("T_e", "a")),
    "PD": (("gamma", "p"),),
    "NM-PD": (("gamma",), ("Gamma",)),
    "NM-AD": (("gamma",), ("Gamma",)),
    "BITFLIP-DISS": (("gamma",),),
    "SPONT-EMISSION": (("gamma",),),
    "OHMIC-PD": (("s",),),
    "GAD-MASTER": (("gamma",), ("T_e",)),
    "PD-TIMEDEP": (("gamma",), ("omega",)),
}

IMAG_TOL = 1e-10


@dataclass(frozen=True)
class ChannelModel:
    """A channel family tag plus the parameters it uses.

    ``gamma`` is the family's coupling rate (gamma_0 for GAD-MASTER).  For AD, PD
    and GAD a fixed ``p`` (and ``a`` for GAD) gives a static channel instead of a
    time-dependent one.
    """

    family: str
    gamma: float | None = None
    Gamma: float | None = None
    omega0: float = 1.0
    omega: float | None = None
    omega_c: float = 1.0
    s: float | None = None
    T_e: float | None = None
    p: float | None = None
    a: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown channel family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        for f in fields(self)[1:]:
            v = getattr(self, f.name)
            if v is not None:
                v = float(v)
                if not math.isfinite(v):
                    raise ValidationError(f"{f.name} must be finite, got {v!r}")
                object.__setattr__(self, f.name, v)
        for group in _REQUIRED[self.family]:
            if all(getattr(self, name) is None for name in group):
                raise ValidationError(f"{self.family} needs {' or '.join(group)}")
        if self.family == "GAD" and (self.p is None) != (self.a is None):
            raise ValidationError("GAD takes either (gamma, T_e) or a fixed (p, a) pair")
        for name in ("Gamma", "omega0", "omega", "omega_c", "T_e"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValidationError(f"{name} must be > 0, got {v!r}")
        if self.gamma is not None:
            if self.gamma < 0 or (self.gamma == 0 and self.family != "PD-TIMEDEP"):
                raise ValidationError(f"gamma must be > 0, got {self.gamma!r}")
        if self.s is not None and self.s < 0:
            raise ValidationError(f"s must be >= 0, got {self.s!r}")
        for name in ("p", "a"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")

    @property
    def N(self) -> float | None:
        """Bose occupation of the bath mode at the qubit gap omega0."""
        if self.T_e is None:
            return None
        return 1.0 / math.expm1(self.omega0 / self.T_e)

    @property
    def unital(self) -> bool:
        return self.family in UNITAL_FAMILIES

    def field_vectors(self, t) -> np.ndarray:
        """h(t) for an array of times, shape (n, 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, 3))
        out[:, 2] = _field_z(self, t)
        return out

    def field_at(self, t: float) -> Field3:
        return Field3.from_vector(self.field_vectors(t)[0])

    @property
    def static_field(self) -> bool:
        return self.family != "PD-TIMEDEP"


def _field_z(model: ChannelModel, t: np.ndarray) -> np.ndarray:
    w0 = model.omega0
    fam = model.family
    if fam in ("AD", "NM-AD", "PD", "NM-PD", "SPONT-EMISSION"):
        return np.full_like(t, w0)
    if fam == "GAD":
        return np.full_like(t, 0.5 * w0)
    if fam in ("BITFLIP-DISS", "OHMIC-PD"):
        return np.full_like(t, -w0)
    if fam == "GAD-MASTER":
        return np.full_like(t, -0.5 * w0)
    return -0.5 * w0 * (1.0 - np.cos(model.omega * t))


@dataclass(frozen=True)
class KrausSet:
    ops: tuple[np.ndarray, ...]
    t: float = 0.0

    def completeness_error(self) -> float:
        total = sum(k.conj().T @ k for k in self.ops)
        return float(np.max(np.abs(total - I2)))


# ---------------------------------------------------------------- Kraus sets


def amplitude_damping_kraus(p: float) -> list[np.ndarray]:
    """Decay toward |0> (z = +1) with probability ``p``."""
    return [
        np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex),
        np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex),
    ]


def generalized_amplitude_damping_kraus(p: float, a: float) -> list[np.ndarray]:
    """GAD with ground population ``p`` at the fixed point and damping ``a``."""
    sp, sq = math.sqrt(p), math.sqrt(1 - p)
    sa, sb = math.sqrt(a), math.sqrt(1 - a)
    return [
        sp * np.array([[1, 0], [0, sb]], dtype=complex),
        sp * np.array([[0, sa], [0, 0]], dtype=complex),
        sq * np.array([[sb, 0], [0, 1]], dtype=complex),
        sq * np.array([[0, 0], [sa, 0]], dtype=complex),
    ]


def phase_damping_kraus(p: float) -> list[np.ndarray]:
    """Phase flip with probability ``p``: coherences scale by 1 - 2p."""
    return [math.sqrt(1 - p) * I2, math.sqrt(p) * SZ]


def nm_pd_exponent(t, gamma: float, Gamma: float):
    """q(t) = (gamma/2)(t + (exp(-Gamma t) - 1)/Gamma); coherences scale by exp(-q)."""
    t = np.asarray(t, dtype=float)
    return 0.5 * gamma * (t + np.expm1(-Gamma * t) / Gamma)


def nm_ad_q(t, gamma: float, Gamma: float):
    """Excited-state survival q(t) of damping through a Lorentzian reservoir.

    q = exp(-Gamma t) [cos(d t/2) + (Gamma/d) sin(d t/2)]^2 with
    d = sqrt(2 gamma Gamma - Gamma^2) taken in the complex plane, so the
    overdamped branch (Gamma > 2 gamma) turns into cosh/sinh automatically.
    The bracket is expanded in exponentials with the decay folded in so that
    nothing overflows at long times.
    """
    t = np.asarray(t, dtype=float)
    d = np.sqrt(complex(2.0 * gamma * Gamma - Gamma * Gamma))
    x = 0.5 * d * t
    if abs(d) * max(float(np.max(t, initial=0.0)), 1.0) < 1e-6 or abs(d) < 1e-12 * Gamma:
        amp = (np.cos(x) + 0.5 * Gamma * t * (1 - x * x / 6.0)) * np.exp(-0.5 * Gamma * t)
    else:
        g = Gamma / (1j * d)
        amp = 0.5 * (
            np.exp(1j * x - 0.5 * Gamma * t) * (1 + g) + np.exp(-1j * x - 0.5 * Gamma * t) * (1 - g)
        )
    q = amp * amp
    if np.max(np.abs(np.imag(q)), initial=0.0) > IMAG_TOL:
        raise NumericalError(f"NM-AD q(t) has imaginary residue {np.max(np.abs(np.imag(q)))}")
    return np.real(q)


def _ad_survival(model: ChannelModel, t):
    """Excited-state survival q(t) for AD and NM-AD."""
    t = np.asarray(t, dtype=float)
    if model.family == "NM-AD":
        return nm_ad_q(t, model.gamma, model.Gamma)
    if model.p is not None:
        return np.full_like(t, 1.0 - model.p)
    return np.exp(-model.gamma * t)


def _pd_attenuation(model: ChannelModel, t):
    t = np.asarray(t, dtype=float)
    if model.family == "NM-PD":
        return np.exp(-nm_pd_exponent(t, model.gamma, model.Gamma))
    if model.p is not None:
        return np.full_like(t, 1.0 - 2.0 * model.p)
    return np.exp(-0.5 * model.gamma * t)


def _gad_parameters(model: ChannelModel, t):
    """(p, a(t)) for the Kraus-form GAD."""
    t = np.asarray(t, dtype=float)
    if model.p is not None:
        return model.p, np.full_like(t, model.a)
    n = model.N
    p = (n + 1.0) / (2.0 * n + 1.0)
    return p, -np.expm1(-model.gamma * (2.0 * n + 1.0) * t)


def build_kraus(model: ChannelModel, t: float) -> KrausSet:
    if t < 0 or not math.isfinite(t):
        raise ValidationError(f"time must be finite and >= 0, got {t!r}")
    fam = model.family
    if fam in ("AD", "NM-AD"):
        q = float(np.clip(_ad_survival(model, t), 0.0, 1.0))
        ops = amplitude_damping_kraus(1.0 - q)
    elif fam in ("PD", "NM-PD"):
        f = float(_pd_attenuation(model, t))
        ops = phase_damping_kraus(0.5 * (1.0 - f))
    elif fam == "GAD":
        p, a = _gad_parameters(model, t)
        ops = generalized_amplitude_damping_kraus(p, float(np.clip(a, 0.0, 1.0)))
    else:
        raise ValidationError(f"{fam} has no Kraus form here; use simulate()")
    return KrausSet(tuple(ops), float(t))


def apply_kraus(k: KrausSet, state: BlochState) -> BlochState:
    err = k.completeness_error()
    if err > 1e-8:
        raise ValidationError(f"Kraus set is not trace preserving (error {err:.3e})")
    rho = state.density_matrix()
    out = sum(op @ rho @ op.conj().T for op in k.ops)
    out = out / np.real(np.trace(out))
    return BlochState.from_density_matrix(out)


# ------------------------------------------------------------- Ohmic dephasing


def ohmic_rate(t, s: float, omega_c: float = 1.0):
    """gamma(t, s) = (1 + (wc t)^2)^(-s/2) Gamma(s) sin(s arctan(wc t))."""
    t = np.asarray(t, dtype=float)
    if s == 0:
        return np.zeros_like(t) if t.ndim else 0.0
    x = omega_c * t
    out = (1.0 + x * x) ** (-0.5 * s) * special.gamma(s) * np.sin(s * np.arctan(x))
    return out if t.ndim else float(out)


def _phi_integrand(phi, s: float):
    """gamma after substituting t = tan(phi)/wc (the 1/wc is applied by callers)."""
    return np.cos(phi) ** (s - 2.0) * np.sin(s * phi) * special.gamma(s)


def critical_times(s: float, omega_c: float = 1.0) -> list[tuple[float, float]]:
    """Maximal intervals on which gamma(t, s) < 0.

    gamma vanishes where s arctan(wc t) is a multiple of pi, so
    t_k = tan(k pi / s)/wc while k pi/s < pi/2.  The last negative interval
    is open-ended (upper limit inf) once 2k pi/s reaches pi/2.
    """
    if s <= 0:
        raise ValidationError(f"s must be > 0, got {s!r}")
    out = []
    k = 1
    while (2 * k - 1) * math.pi / s < 0.5 * math.pi:
        lo = math.tan((2 * k - 1) * math.pi / s) / omega_c
        hi_angle = 2 * k * math.pi / s
        hi = math.tan(hi_angle) / omega_c if hi_angle < 0.5 * math.pi else math.inf
        out.append((lo, hi))
        k += 1
    return out


def rate_integral(t: float, s: float, omega_c: float = 1.0, tol: float = 1e-10) -> float:
    """int_0^t gamma(tau, s) dtau by adaptive Simpson in the variable arctan(wc tau)."""
    if t < 0:
        raise ValidationError(f"time must be >= 0, got {t!r}")
    if s == 0 or t == 0:
        return 0.0
    if math.isinf(t):
        if s <= 1:
            return math.inf
        if s < 2:
            raise NumericalError(f"integrand is singular at t = inf for s = {s}")
    if s > 2:
        # cos(phi)^(s-2) is not smooth at phi = pi/2; psi = pi/2 - phi = w^3 removes that
        psi_min = 0.0 if math.isinf(t) else math.atan2(1.0, omega_c * t)
        f = lambda w: float(_phi_integrand(0.5 * math.pi - w**3, s)) * 3.0 * w * w
        lo, hi = psi_min ** (1.0 / 3.0), (0.5 * math.pi) ** (1.0 / 3.0)
        return numerics.adaptive_simpson(f, lo, hi, tol=tol * omega_c) / omega_c
    f = lambda phi: float(_phi_integrand(phi, s))
    return numerics.adaptive_simpson(f, 0.0, math.atan(omega_c * t), tol=tol * omega_c) / omega_c


def dephasing_attenuation(t: float, s: float, omega_c: float = 1.0) -> float:
    """Coherence attenuation Gamma(t) = exp(-2 int_0^t gamma) of the Ohmic dephasing channel.

    The factor 2 follows from the dissipator gamma(t)(sigma_z rho sigma_z - rho).
    """
    return math.exp(-2.0 * rate_integral(t, s, omega_c))


def dephasing_attenuation_grid(times, s: float, omega_c: float = 1.0) -> np.ndarray:
    """Vectorized attenuation on many finite times via panel Gauss-Legendre in arctan(wc t)."""
    times = np.asarray(times, dtype=float)
    if s == 0:
        return np.ones_like(times)
    flat = times.ravel()
    order = np.argsort(flat)
    phis = np.arctan(omega_c * flat[order])
    edges = np.concatenate(([0.0], phis))
    panels = numerics.gauss_legendre_panels(lambda p: _phi_integrand(p, s), edges)
    cum = np.cumsum(panels) / omega_c
    out = np.empty_like(flat)
    out[order] = np.exp(-2.0 * cum)
    return out.reshape(times.shape)


# -------------------------------------------------------- closed-form solutions


def _as_vec(r0) -> np.ndarray:
    return r0.vec if isinstance(r0, BlochState) else np.asarray(r0, dtype=float)


def _check_real(arrs, what: str):
    worst = max(float(np.max(np.abs(np.imag(a)), initial=0.0)) for a in arrs)
    if worst > IMAG_TOL:
        raise NumericalError(f"{what}: imaginary residue {worst:.3e} exceeds {IMAG_TOL}")
    return [np.real(a) for a in arrs]


def _bitflip_vectors(gamma: float, omega0: float, r0, t) -> np.ndarray:
    x0, y0, z0 = _as_vec(r0)
    t = np.asarray(t, dtype=float)
    w = np.sqrt(complex(gamma * gamma - 4.0 * omega0 * omega0))
    ax = gamma * x0 - 2.0 * omega0 * y0
    ay = -gamma * y0 + 2.0 * omega0 * x0
    if abs(w) * max(float(np.max(t, initial=0.0)), 1.0) < 1e-7:
        # critical damping: cosh(wt) -> 1, sinh(wt)/w -> t
        decay = np.exp(-gamma * t)
        x = decay * (x0 + ax * t)
        y = decay * (y0 + ay * t)
    else:
        ep = np.exp((w - gamma) * t)
        em = np.exp((-w - gamma) * t)
        x = 0.5 * (ep * (x0 + ax / w) + em * (x0 - ax / w))
        y = 0.5 * (ep * (y0 + ay / w) + em * (y0 - ay / w))
    x, y = _check_real((x, y), "bit-flip solution")
    z = z0 * np.exp(-2.0 * gamma * t)
    return np.stack([x, y, z], axis=-1)


def _spont_vectors(gamma: float, omega0: float, r0, t) -> np.ndarray:
    x0, y0, z0 = _as_vec(r0)
    t = np.asarray(t, dtype=float)
    damp = np.exp(-0.5 * gamma * t)
    c, s = np.cos(2 * omega0 * t), np.sin(2 * omega0 * t)
    x = damp * (x0 * c + y0 * s)
    y = damp * (y0 * c - x0 * s)
    z = 1.0 - (1.0 - z0) * np.exp(-gamma * t)
    return np.stack([x, y, z], axis=-1)


def _pd_timedep_vectors(omega0: float, omega: float, gamma: float, r0, t) -> np.ndarray:
    x0, y0, z0 = _as_vec(r0)
    t = np.asarray(t, dtype=float)
    alpha = (omega0 / omega) * (omega * t - np.sin(omega * t))
    damp = np.exp(-2.0 * gamma * t)
    x = damp * (x0 * np.cos(alpha) - y0 * np.sin(alpha))
    y = damp * (y0 * np.cos(alpha) + x0 * np.sin(alpha))
    return np.stack([x, y, np.full_like(t, z0)], axis=-1)


def bloch_solution_bitflip(model: ChannelModel, r0: BlochState, t: float) -> BlochState:
    """Dissipative bit flip: d rho/dt = -i w0 [sz, rho] + gamma (sx rho sx - rho)."""
    if model.family != "BITFLIP-DISS":
        raise ValidationError(f"expected a BITFLIP-DISS model, got {model.family}")
    return BlochState.from_vector(_bitflip_vectors(model.gamma, model.omega0, r0, t))


def bloch_solution_spont_emission(r0: BlochState, gamma: float, t: float, omega0: float = 1.0) -> BlochState:
    """Spontaneous emission under H = -w0 sz toward the ground state (0, 0, 1)."""
    if gamma <= 0:
        raise ValidationError(f"gamma must be > 0, got {gamma!r}")
    if math.isinf(t):
        return BlochState(0.0, 0.0, 1.0)
    return BlochState.from_vector(_spont_vectors(gamma, omega0, r0, t))


def bloch_solution_pd_timedep(r0: BlochState, omega0: float, omega: float, gamma: float, t: float) -> BlochState:
    """Dephasing at rate gamma under the driven field h(t) = (0, 0, -(w0/2)(1 - cos wt))."""
    if omega <= 0 or gamma < 0:
        raise ValidationError("need omega > 0 and gamma >= 0")
    return BlochState.from_vector(_pd_timedep_vectors(omega0, omega, gamma, r0, t))


# ------------------------------------------------------------- master equation


def lindblad_bloch_generator(H: np.ndarray, jumps) -> tuple[np.ndarray, np.ndarray]:
    """Affine Bloch generator (M, c) with dr/dt = M r + c.

    ``jumps`` is an iterable of (rate, L) pairs for rate (L rho L+ - {L+L, rho}/2).
    """
    jumps = [(float(g), np.asarray(L, dtype=complex)) for g, L in jumps]

    def lindbladian(rho):
        out = -1j * (H @ rho - rho @ H)
        for g, L in jumps:
            LdL = L.conj().T @ L
            out = out + g * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
        return out

    def bloch(m):
        return np.array([np.real(np.trace(p @ m)) for p in PAULI])

    c = bloch(lindbladian(0.5 * I2))
    M = np.column_stack([bloch(lindbladian(0.5 * p)) for p in PAULI])
    return M, c


SIGMA_MINUS_GAD = 0.5 * (SX - 1j * SY)  # |1><0|, lowers toward z = -1


def gad_master_generator(omega0: float, gamma0: float, T_e: float) -> tuple[np.ndarray, np.ndarray]:
    n = 1.0 / math.expm1(omega0 / T_e)
    H = Field3(0.0, 0.0, -0.5 * omega0).hamiltonian()
    lower = SIGMA_MINUS_GAD
    raise_ = lower.conj().T
    return lindblad_bloch_generator(H, [(gamma0 * (n + 1.0), lower), (gamma0 * n, raise_)])


def master_generator(model: ChannelModel) -> tuple[np.ndarray, np.ndarray]:
    """Bloch generator of the time-independent master equation behind ``model``."""
    fam = model.family
    if fam == "GAD-MASTER":
        return gad_master_generator(model.omega0, model.gamma, model.T_e)
    H = model.field_at(0.0).hamiltonian()
    if fam == "BITFLIP-DISS":
        return lindblad_bloch_generator(H, [(model.gamma, SX)])
    if fam == "SPONT-EMISSION":
        return lindblad_bloch_generator(H, [(model.gamma, 0.5 * (SX + 1j * SY))])
    raise ValidationError(f"{fam} has no time-independent master equation here")


def _integrate_affine(M, c, r0, t_eval) -> np.ndarray:
    t_eval = np.asarray(t_eval, dtype=float)
    order = np.argsort(t_eval)
    ts = t_eval[order]
    out = np.empty((ts.size, 3))
    mask = ts == 0.0
    out[mask] = r0
    if np.any(~mask):
        sol = integrate.solve_ivp(
            lambda _t, r: M @ r + c,
            (0.0, float(ts[-1])),
            np.asarray(r0, dtype=float),
            method="RK45",
            t_eval=ts[~mask],
            rtol=1e-9,
            atol=1e-10,
        )
        if not sol.success:
            raise NumericalError(f"master-equation integration failed: {sol.message}")
        out[~mask] = sol.y.T
    result = np.empty_like(out)
    result[order] = out
    return result


# ----------------------------------------------------------------- trajectories


@dataclass
class Trajectory:
    """Sampled evolution of one initial state.

    ``vectors`` and ``field_vectors`` hold r(t) and h(t) row by row.  When the
    generating model can be evaluated at arbitrary times, ``state_fn`` and
    ``field_fn`` are set so that consumers can densify the grid.
    """

    times: np.ndarray
    vectors: np.ndarray
    field_vectors: np.ndarray
    channel: ChannelModel | None = None
    state_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    field_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    velocity_fn: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.vectors = np.asarray(self.vectors, dtype=float).reshape(-1, 3)
        self.field_vectors = np.asarray(self.field_vectors, dtype=float).reshape(-1, 3)
        n = self.times.size
        if n < 2:
            raise ValidationError("a trajectory needs at least two time points")
        if len(self.vectors) != n or len(self.field_vectors) != n:
            raise ValidationError("times, states and fields differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        radii = np.linalg.norm(self.vectors, axis=1)
        if np.any(radii > 1.0 + 1e-12):
            raise ValidationError(f"Bloch radius {radii.max()!r} exceeds 1")
        big = radii > 1.0
        self.vectors[big] /= radii[big, None]

    @property
    def states(self) -> list[BlochState]:
        return [BlochState.from_vector(v) for v in self.vectors]

    @property
    def fields(self) -> list[Field3]:
        return [Field3.from_vector(v) for v in self.field_vectors]

    @property
    def radii(self) -> np.ndarray:
        return np.minimum(np.linalg.norm(self.vectors, axis=1), 1.0)

    @property
    def resamplable(self) -> bool:
        return self.state_fn is not None and self.field_fn is not None

    def resample(self, times) -> Trajectory:
        if not self.resamplable:
            raise ValidationError("trajectory has no evaluator to resample from")
        times = np.asarray(times, dtype=float)
        return Trajectory(
            times,
            self.state_fn(times),
            self.field_fn(times),
            self.channel,
            self.state_fn,
            self.field_fn,
            self.velocity_fn,
        )

    def velocities(self, times=None) -> np.ndarray:
        """dr/dt at ``times`` (default: the grid)."""
        times = self.times if times is None else np.asarray(times, dtype=float)
        if self.velocity_fn is not None:
            return self.velocity_fn(times)
        if self.state_fn is None:
            return np.gradient(self.vectors, self.times, axis=0)
        h = 1e-2 * (self.times[-1] - self.times[0]) / (len(self.times) - 1)
        out = numerics.derivative(self.state_fn, np.maximum(times, 2 * h), h)
        near_zero = times < 2 * h
        if np.any(near_zero):
            # one-sided fourth-order stencil next to t = 0
            tf = times[near_zero]
            f = [self.state_fn(tf + k * h) for k in range(5)]
            out[near_zero] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
        return out


def evolution(model: ChannelModel, r0) -> tuple[Callable, Callable | None]:
    """Vectorized t -> r(t) for ``model`` started at ``r0``, plus dr/dt when cheaply known."""
    r0 = _as_vec(r0).astype(float)
    x0, y0, z0 = r0
    fam = model.family
    velocity = None
    if fam in ("AD", "NM-AD"):

        def fn(t):
            q = np.clip(_ad_survival(model, t), 0.0, 1.0)
            sq = np.sqrt(q)
            return np.stack([sq * x0, sq * y0, 1.0 - q * (1.0 - z0)], axis=-1)

    elif fam in ("PD", "NM-PD"):

        def fn(t):
            f = _pd_attenuation(model, t)
            return np.stack([f * x0, f * y0, np.full_like(f, z0)], axis=-1)

    elif fam == "GAD":

        def fn(t):
            p, a = _gad_parameters(model, t)
            sb = np.sqrt(1.0 - a)
            return np.stack([sb * x0, sb * y0, (2 * p - 1) * a + (1 - a) * z0], axis=-1)

    elif fam == "OHMIC-PD":

        def fn(t):
            g = dephasing_attenuation_grid(t, model.s, model.omega_c)
            return np.stack([g * x0, g * y0, np.full_like(g, z0)], axis=-1)

    elif fam == "BITFLIP-DISS":
        fn = lambda t: _bitflip_vectors(model.gamma, model.omega0, r0, np.asarray(t, dtype=float))
        velocity = _generator_velocity(fn, *master_generator(model))
    elif fam == "SPONT-EMISSION":
        fn = lambda t: _spont_vectors(model.gamma, model.omega0, r0, np.asarray(t, dtype=float))
        velocity = _generator_velocity(fn, *master_generator(model))
    elif fam == "PD-TIMEDEP":
        fn = lambda t: _pd_timedep_vectors(model.omega0, model.omega, model.gamma, r0, np.asarray(t, dtype=float))
    else:
        M, c = master_generator(model)
        fn = lambda t: _integrate_affine(M, c, r0, t)
        velocity = _generator_velocity(fn, M, c)
    return fn, velocity


def _generator_velocity(fn, M, c):
    return lambda t: fn(t) @ M.T + c


def simulate(model: ChannelModel, r0, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    if times.size and times[0] < 0:
        raise ValidationError("times must be >= 0")
    fn, velocity = evolution(model, r0)
    return Trajectory(
        times, fn(times), model.field_vectors(times), model, fn, model.field_vectors, velocity
    )


def integrate_gad_master(r0, omega0: float, gamma0: float, T_e: float, t_grid) -> Trajectory:
    """Thermalization of the qubit (H = (w0/2) sz) in a bath at temperature T_e."""
    model = ChannelModel("GAD-MASTER", gamma=gamma0, omega0=omega0, T_e=T_e)
    return simulate(model, r0, t_grid)


# ----------------------------------------------------------------- sudden death


@dataclass(frozen=True)
class SuddenDeath:
    """Roots of q(t) = 1/(1 + U0) within ``horizon``; ``t_sd`` is the last one."""

    times: tuple[float, ...]
    horizon: float
    U0: float

    @property
    def t_sd(self) -> float | None:
        return self.times[-1] if self.times else None

    @property
    def occurs(self) -> bool:
        return bool(self.times)


def sudden_death_times(
    model: ChannelModel, U0: float, horizon: float | None = None, n_grid: int = 10_000
) -> SuddenDeath:
    """Times at which the incoherent ergotropy of an initially incoherent state dies or revives.

    ``U0`` is the initial energy in units of the field magnitude; the default
    horizon is 1000/gamma.
    """
    if model.family not in ("AD", "NM-AD"):
        raise ValidationError(f"sudden death is defined for AD and NM-AD, not {model.family}")
    if model.gamma is None:
        raise ValidationError("sudden death needs a time-dependent channel (gamma)")
    if horizon is None:
        horizon = 1e3 / model.gamma
    if U0 <= 0:
        return SuddenDeath((), horizon, U0)
    target = 1.0 / (1.0 + U0)
    f = lambda t: float(_ad_survival(model, t)) - target
    grid = np.linspace(0.0, horizon, n_grid)
    values = _ad_survival(model, grid) - target
    roots = [t for t in numerics.grid_roots(f, grid, values, xtol=1e-9) if t > 0]
    return SuddenDeath(tuple(roots), horizon, U0)
