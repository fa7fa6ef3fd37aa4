"""First-law bookkeeping along qubit trajectories.

Three heat/work splits of dU are tracked side by side:

* standard:   dQ = -h.dr,         dW = -r.dh
* entropic:   dQ = (U/r) dr,      dW = r d(U/r)    (W* = Q_stand - Q_entro)
* ergotropic: dQ = -|h| d|r|,     dW = -|r| d|h| + dE

Increments use the midpoint rule, so each split telescopes to dU exactly up
to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import numerics
from .channels import Trajectory
from .errors import ValidationError
from .state import MIXED_EPS, BlochState, Field3, binary_entropy, passive_bloch, relative_entropy_qubit

LEDGER_COLUMNS = (
    "U",
    "S",
    "C",
    "E",
    "E_I",
    "E_C",
    "Q_stand",
    "W_stand",
    "Q_entro",
    "W_entro",
    "W_star",
    "Q_ergo",
    "W_ergo",
    "Q_op",
    "T_stand",
    "T_entro",
    "T_ergo",
)
CUMULATIVE = ("Q_stand", "W_stand", "Q_entro", "W_entro", "W_star", "Q_ergo", "W_ergo")


class Formulation(str, Enum):
    STANDARD = "STANDARD"
    ENTROPY = "ENTROPY"
    ERGOTROPY = "ERGOTROPY"
    OPERATIONAL = "OPERATIONAL"


HEAT_WORK = {
    Formulation.STANDARD: ("Q_stand", "W_stand"),
    Formulation.ENTROPY: ("Q_entro", "W_entro"),
    Formulation.ERGOTROPY: ("Q_ergo", "W_ergo"),
}


def internal_energy(state: BlochState, field: Field3) -> float:
    return -(field.hx * state.x + field.hy * state.y + field.hz * state.z)


def ergotropy_qubit(C: float, U: float, h: float = 1.0) -> tuple[float, float, float]:
    """Ergotropy and its incoherent/coherent parts from coherence ``C`` and energy ``U``.

    ``C`` is dimensionless and ``U`` carries energy units, so the field
    magnitude ``h`` scales the coherent contribution.
    """
    if C < 0 or h < 0:
        raise ValidationError(f"need C >= 0 and h >= 0, got C={C!r}, h={h!r}")
    if h > 0 and C * C + (U / h) ** 2 > 1.0 + 1e-12:
        raise ValidationError(f"C^2 + (U/h)^2 = {C * C + (U / h) ** 2!r} exceeds 1")
    norm = math.hypot(h * C, U)
    return norm + U, 2.0 * max(0.0, U), norm - abs(U)


def _ergotropy_arrays(C, U, h):
    norm = np.hypot(np.nan_to_num(C) * h, U)
    return norm + U, 2.0 * np.maximum(0.0, U), norm - np.abs(U)


# -------------------------------------------------------------------- increments


def _increments(r, hv):
    """Per-step increments for consecutive rows of r (n, 3) and h (n, 3)."""
    rad = np.minimum(np.linalg.norm(r, axis=1), 1.0)
    hmag = np.linalg.norm(hv, axis=1)
    U = -np.einsum("ij,ij->i", hv, r)
    dr, dh = np.diff(r, axis=0), np.diff(hv, axis=0)
    rm, hm = 0.5 * (r[1:] + r[:-1]), 0.5 * (hv[1:] + hv[:-1])

    dQ_stand = -np.einsum("ij,ij->i", hm, dr)
    dW_stand = -np.einsum("ij,ij->i", rm, dh)

    mixed = rad < MIXED_EPS
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(mixed, np.nan, U / rad)
    u1, u2 = u[:-1], u[1:]
    u1, u2 = np.where(np.isnan(u1), u2, u1), np.where(np.isnan(u2), u1, u2)
    both_mixed = np.isnan(u1)
    drad = np.diff(rad)
    dQ_entro = np.where(both_mixed, 0.0, 0.5 * (u1 + u2) * drad)
    dW_star = dQ_stand - dQ_entro
    dW_entro = dW_stand + dW_star

    E = U + hmag * rad
    dQ_ergo = -0.5 * (hmag[1:] + hmag[:-1]) * drad
    dW_ergo = -0.5 * (rad[1:] + rad[:-1]) * np.diff(hmag) + np.diff(E)
    return {
        "Q_stand": dQ_stand,
        "W_stand": dW_stand,
        "Q_entro": dQ_entro,
        "W_entro": dW_entro,
        "W_star": dW_star,
        "Q_ergo": dQ_ergo,
        "W_ergo": dW_ergo,
        "U": np.diff(U),
        "mixed": both_mixed,
    }


@dataclass(frozen=True)
class LedgerStep:
    dU: float
    dQ_stand: float
    dW_stand: float
    dQ_entro: float
    dW_entro: float
    dW_star: float
    dQ_ergo: float
    dW_ergo: float
    maximally_mixed: bool = False

    def closure_error(self) -> float:
        return max(
            abs(self.dU - self.dQ_stand - self.dW_stand),
            abs(self.dU - self.dQ_entro - self.dW_entro),
            abs(self.dU - self.dQ_ergo - self.dW_ergo),
        )


def ledger_step(prev: tuple[BlochState, Field3], next: tuple[BlochState, Field3]) -> LedgerStep:
    (s1, f1), (s2, f2) = prev, next
    inc = _increments(np.array([s1.vec, s2.vec]), np.array([f1.vec, f2.vec]))
    return LedgerStep(
        dU=float(inc["U"][0]),
        dQ_stand=float(inc["Q_stand"][0]),
        dW_stand=float(inc["W_stand"][0]),
        dQ_entro=float(inc["Q_entro"][0]),
        dW_entro=float(inc["W_entro"][0]),
        dW_star=float(inc["W_star"][0]),
        dQ_ergo=float(inc["Q_ergo"][0]),
        dW_ergo=float(inc["W_ergo"][0]),
        maximally_mixed=bool(inc["mixed"][0]),
    )


# ------------------------------------------------------------------ temperatures


def _temperature_arrays(rad, hdotr, hmag):
    with np.errstate(divide="ignore", invalid="ignore"):
        at = np.arctanh(np.minimum(rad, 1.0))
        t_ergo = hmag / at
        t_stand = hmag * hmag * rad / (hdotr * at)
        t_entro = hdotr / (rad * at)
    pure = rad >= 1.0
    t_ergo = np.where(pure, 0.0, t_ergo)
    t_stand = np.where(pure & (hdotr != 0), 0.0, t_stand)
    t_entro = np.where(pure, 0.0, t_entro)
    mixed = rad < MIXED_EPS
    inf = np.full_like(rad, np.inf)
    return (
        np.where(mixed, inf, t_stand),
        np.where(mixed, inf, t_entro),
        np.where(mixed, inf, t_ergo),
    )


def temperature(state: BlochState, field: Field3, formulation: Formulation | str) -> float:
    """Effective temperature of ``state`` in ``field``.

    Sentinels: r = 0 gives +inf for every formulation; h.r = 0 gives a signed
    infinity for the standard one; pure states give 0.
    """
    formulation = Formulation(formulation)
    rad = np.array([state.r])
    hdotr = np.array([float(np.dot(field.vec, state.vec))])
    t_stand, t_entro, t_ergo = _temperature_arrays(rad, hdotr, np.array([field.h]))
    values = {
        Formulation.STANDARD: t_stand,
        Formulation.ENTROPY: t_entro,
        Formulation.ERGOTROPY: t_ergo,
    }
    if formulation not in values:
        raise ValidationError("no temperature is defined for the operational formulation")
    return float(values[formulation][0])


# ------------------------------------------------------------------------ ledger


@dataclass
class ThermoLedger:
    """Pointwise and cumulative thermodynamic quantities on a time grid."""

    times: np.ndarray
    vectors: np.ndarray
    columns: dict[str, np.ndarray]
    mixed_steps: int = 0
    refinements: int = 0
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def delta_U(self) -> np.ndarray:
        return self.columns["U"] - self.columns["U"][0]

    def closure_error(self, formulation: Formulation | str) -> float:
        q, w = HEAT_WORK[Formulation(formulation)]
        return float(np.max(np.abs(self.delta_U - self.columns[q] - self.columns[w])))


def _cumulative(r, hv, stride: int):
    inc = _increments(r, hv)
    out = {}
    for name in CUMULATIVE:
        cum = np.concatenate(([0.0], np.cumsum(inc[name])))
        out[name] = cum[::stride]
    return out, int(np.count_nonzero(inc["mixed"]))


def _needs_densify(r, hv, limit=0.05):
    rad = np.linalg.norm(r, axis=1)
    return bool(
        np.max(np.abs(np.diff(rad))) >= limit or np.max(np.abs(np.diff(np.linalg.norm(hv, axis=1)))) >= limit
    )


def accumulate_ledger(
    traj: Trajectory, densify: bool = True, tol: float = 1e-8, max_rounds: int = 10
) -> ThermoLedger:
    """Accumulate the three first-law splits and fill the pointwise columns.

    When the trajectory can be resampled the grid is halved repeatedly until
    two successive refinements agree within ``tol`` at the original points.
    """
    times = traj.times
    r, hv = traj.vectors, traj.field_vectors
    cum, mixed = _cumulative(r, hv, 1)
    rounds = 0
    notes = []
    if densify and traj.resamplable:
        fine = times
        previous = cum
        for rounds in range(1, max_rounds + 1):
            fine = numerics.refine_grid(fine)
            stride = 2**rounds
            rf, hf = traj.state_fn(fine), traj.field_fn(fine)
            current, mixed = _cumulative(rf, hf, stride)
            change = max(float(np.max(np.abs(current[k] - previous[k]))) for k in CUMULATIVE)
            previous = current
            if change <= tol and not _needs_densify(rf, hf):
                break
        else:
            notes.append(f"ledger refinement stopped after {max_rounds} rounds (last change {change:.3e})")
        cum = previous
    elif _needs_densify(r, hv):
        notes.append("grid is coarse (|dr| or |dh| >= 0.05 per step) and cannot be refined")

    rad = np.minimum(np.linalg.norm(r, axis=1), 1.0)
    hmag = np.linalg.norm(hv, axis=1)
    hdotr = np.einsum("ij,ij->i", hv, r)
    U = -hdotr
    S = np.array([binary_entropy(v) for v in rad])
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = hv / hmag[:, None]
    C = np.where(hmag > 0, np.linalg.norm(np.cross(r, unit), axis=1), np.nan)
    E, E_I, E_C = _ergotropy_arrays(C, U, hmag)
    t_stand, t_entro, t_ergo = _temperature_arrays(rad, hdotr, hmag)
    q_op = -hmag[0] * (rad - rad[0])

    columns = {"U": U, "S": S, "C": np.minimum(C, 1.0), "E": E, "E_I": E_I, "E_C": E_C}
    columns.update(cum)
    columns["Q_op"] = q_op
    columns.update({"T_stand": t_stand, "T_entro": t_entro, "T_ergo": t_ergo})
    return ThermoLedger(times, r, columns, mixed_steps=mixed, refinements=rounds, notes=notes)


def entropy_from_heat(traj: Trajectory) -> np.ndarray:
    """Cumulative int dQ_ergo / T_ergo on the trajectory grid (midpoint rule)."""
    r, hv = traj.vectors, traj.field_vectors
    rad = np.minimum(np.linalg.norm(r, axis=1), 1.0)
    hmag = np.linalg.norm(hv, axis=1)
    hm = 0.5 * (hmag[1:] + hmag[:-1])
    rm = 0.5 * (rad[1:] + rad[:-1])
    dQ = -hm * np.diff(rad)
    with np.errstate(invalid="ignore", divide="ignore"):
        inv_t = np.arctanh(rm) / hm
    ds = np.where(hm > 0, dQ * inv_t, -np.arctanh(rm) * np.diff(rad))
    return np.concatenate(([0.0], np.cumsum(ds)))


def operational_heat_qop(traj: Trajectory, t: float) -> float:
    """Q_op(t): energy change, measured with H(0), of the passive states of rho(t) and rho(0)."""
    h0 = float(np.linalg.norm(traj.field_vectors[0]))
    r0 = float(np.linalg.norm(traj.vectors[0]))
    idx = np.flatnonzero(traj.times == t)
    if idx.size:
        rt = float(np.linalg.norm(traj.vectors[idx[0]]))
    elif traj.state_fn is not None:
        rt = float(np.linalg.norm(traj.state_fn(np.array([t]))[0]))
    else:
        rt = float(np.interp(t, traj.times, np.linalg.norm(traj.vectors, axis=1)))
    return -h0 * (min(rt, 1.0) - min(r0, 1.0))


def temperature_singularities(traj: Trajectory, xtol: float = 1e-12) -> list[float]:
    """Times where h.r changes sign, i.e. where T_stand passes through a signed infinity."""
    hdotr = np.einsum("ij,ij->i", traj.field_vectors, traj.vectors)
    if traj.resamplable:
        f = lambda t: float(np.dot(traj.field_fn(np.array([t]))[0], traj.state_fn(np.array([t]))[0]))
        return numerics.grid_roots(f, traj.times, hdotr, xtol=xtol)
    out = []
    for k in np.flatnonzero(np.sign(hdotr[:-1]) * np.sign(hdotr[1:]) < 0):
        t0, t1, v0, v1 = traj.times[k], traj.times[k + 1], hdotr[k], hdotr[k + 1]
        out.append(float(t0 - v0 * (t1 - t0) / (v1 - v0)))
    return out


# ------------------------------------------------------------ entropy production


def entropy_production_step(
    prev_state: BlochState,
    next_state: BlochState,
    fixed_point: BlochState,
    field: Field3 | None = None,
) -> tuple[float, float, float]:
    """(Sigma, Sigma_passive, Sigma_nonpassive) for one step toward ``fixed_point``.

    The passive states are taken along ``field`` (default: the direction of
    the fixed point).  A support violation yields nan for all three.
    """
    if field is None:
        if fixed_point.r == 0:
            raise ValidationError("a field is needed when the fixed point is maximally mixed")
        field = Field3.from_vector(fixed_point.vec)
    s_prev = relative_entropy_qubit(prev_state, fixed_point)
    s_next = relative_entropy_qubit(next_state, fixed_point)
    if math.isinf(s_prev) or math.isinf(s_next):
        return math.nan, math.nan, math.nan
    sigma = s_prev - s_next
    p_prev, p_next = passive_bloch(prev_state, field), passive_bloch(next_state, field)
    sigma_pi = relative_entropy_qubit(p_prev, fixed_point) - relative_entropy_qubit(p_next, fixed_point)
    return sigma, sigma_pi, sigma - sigma_pi


# ------------------------------------------------------------- adiabatic times


def _require_static(traj: Trajectory) -> np.ndarray:
    h = traj.field_vectors
    if np.max(np.abs(h - h[0])) > 0:
        raise ValidationError("adiabatic times need a time-independent field")
    if np.linalg.norm(h[0]) == 0:
        raise ValidationError("adiabatic times need a nonzero field")
    return h[0]


def _entropic_heat_rate(traj: Trajectory, h: np.ndarray):
    def rate(t):
        t = np.asarray(t, dtype=float)
        r = traj.state_fn(t)
        v = traj.velocities(t)
        rad = np.linalg.norm(r, axis=1)
        safe = np.where(rad < MIXED_EPS, 1.0, rad)
        u = -(r @ h) / safe
        rdot = np.einsum("ij,ij->i", r, v) / safe
        return np.where(rad < MIXED_EPS, 0.0, u * rdot)

    return rate


@dataclass(frozen=True)
class AdiabaticTimes:
    """Zeros of the cumulative entropic heat after t = 0 within the horizon."""

    times: tuple[float, ...]
    horizon: float

    @property
    def first(self) -> float | None:
        return self.times[0] if self.times else None

    @property
    def last(self) -> float | None:
        return self.times[-1] if self.times else None


def entropic_heat(traj: Trajectory) -> tuple[np.ndarray, callable]:
    """Cumulative Q_entro on the grid and an evaluator Q_entro(t).

    Each panel is integrated with Gauss-Legendre on the exact rate
    (U/r) dr/dt, so the result does not inherit the midpoint-rule error.
    """
    h = _require_static(traj)
    if not traj.resamplable:
        raise ValidationError("entropic heat evaluator needs a resamplable trajectory")
    rate = _entropic_heat_rate(traj, h)
    grid = traj.times
    q = np.concatenate(([0.0], np.cumsum(numerics.gauss_legendre_panels(rate, grid))))

    def at(t: float) -> float:
        k = int(np.clip(np.searchsorted(grid, t, side="right") - 1, 0, len(grid) - 2))
        return float(q[k] + numerics.gauss_legendre_panels(rate, np.array([grid[k], t]))[0])

    return q, at


def adiabatic_times(traj: Trajectory, xtol: float = 1e-12, zero_tol: float = 1e-13) -> AdiabaticTimes:
    """All t > 0 on the horizon where the accumulated entropic heat returns to zero."""
    if traj.resamplable:
        q, at = entropic_heat(traj)
    else:
        _require_static(traj)
        q = accumulate_ledger(traj, densify=False)["Q_entro"]
        at = lambda t: float(np.interp(t, traj.times, q))
    sign = np.where(np.abs(q) <= zero_tol, 0.0, np.sign(q))
    roots = []
    last_sign, last_k = 0.0, 0
    for k in range(1, len(q)):
        if sign[k] == 0.0:
            continue
        if last_sign != 0.0 and sign[k] != last_sign:
            roots.append(numerics.bisect(at, traj.times[last_k], traj.times[k], xtol=xtol))
        last_sign, last_k = sign[k], k
    return AdiabaticTimes(tuple(roots), float(traj.times[-1]))


def adiabatic_time_tc(traj: Trajectory, largest: bool = False) -> float | None:
    """Smallest (or, for oscillating dynamics, largest) t_c > 0 with Q_entro(t_c) = 0."""
    found = adiabatic_times(traj)
    return found.last if largest else found.first


@dataclass(frozen=True)
class EnvWork:
    t_c: float
    W_star: float
    dE: float
    dU_pi: float

    @property
    def identity_error(self) -> float:
        return abs(self.dE - (self.W_star - self.dU_pi))


def env_work_identities(traj: Trajectory, t_c: float | None) -> EnvWork | None:
    """Environment-induced work, ergotropy change and passive-energy change at t_c."""
    if t_c is None:
        return None
    h = _require_static(traj)
    hmag = float(np.linalg.norm(h))
    _, q_at = entropic_heat(traj)
    r0, rc = traj.vectors[0], traj.state_fn(np.array([t_c]))[0]
    field = Field3.from_vector(h)

    def energies(v):
        s = BlochState.from_vector(v)
        U = -float(np.dot(h, v))
        C = float(np.linalg.norm(np.cross(v, field.unit)))
        return U, s.r, ergotropy_qubit(min(C, s.r), U, hmag)[0]

    U0, rad0, E0 = energies(r0)
    Uc, radc, Ec = energies(rc)
    w_star = (Uc - U0) - q_at(t_c)
    return EnvWork(t_c=float(t_c), W_star=w_star, dE=Ec - E0, dU_pi=-hmag * (radc - rad0))
