"""Witnesses of non-Markovianity built from the loss of monotonicity of a signal F(t).

A signal is paired with its Markovian orientation alpha: +1 if F never
decreases under memoryless dynamics, -1 if it never increases.  The measure
of a signal adds up |F(b) - F(a)| over the intervals where F moves against
alpha, maximized over initial states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import numerics
from .channels import (
    DEPHASING_FAMILIES,
    ChannelModel,
    Trajectory,
    critical_times,
    dephasing_attenuation,
    evolution,
    simulate,
)
from .errors import NumericalError, ValidationError, WitnessInapplicable
from .state import BlochState, Field3, binary_entropy, trace_distance
from .thermo import entropic_heat

SIGNALS = ("Q_entro", "Q_ergo", "Q_stand", "C", "S", "U", "T_ergo", "D")


@dataclass(frozen=True)
class MonotoneSignal:
    """F(t) on arrays of times, its Markovian orientation, and optionally dF/dt."""

    value: Callable[[np.ndarray], np.ndarray]
    alpha: int
    derivative: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "F"

    def __post_init__(self):
        if self.alpha not in (1, -1):
            raise ValidationError(f"orientation must be +1 or -1, got {self.alpha!r}")


@dataclass
class MeasureResult:
    value: float
    optimizer: object = None
    intervals: list[tuple[float, float]] = field(default_factory=list)
    coordinate: float | None = None
    audit_max: float | None = None


# -------------------------------------------------------------- sign intervals


def _against_runs(values, grid, alpha):
    dF = np.diff(values)
    noise = 1e-13 * max(float(np.max(np.abs(values))), 1e-300)
    step_sign = np.where(np.abs(dF) <= noise, 0, np.sign(dF))
    bad = step_sign == -alpha
    runs = []
    k = 0
    while k < len(bad):
        if bad[k]:
            j = k
            while j + 1 < len(bad) and bad[j + 1]:
                j += 1
            runs.append((k, j + 1))
            k = j + 1
        else:
            k += 1
    return [(float(grid[i]), float(grid[j])) for i, j in runs], runs


def _same_intervals(a, b, tol):
    return len(a) == len(b) and all(abs(x0 - y0) <= tol and abs(x1 - y1) <= tol for (x0, x1), (y0, y1) in zip(a, b))


def sign_intervals(signal: MonotoneSignal, grid, xtol: float = 1e-9, max_rounds: int = 12) -> list[tuple[float, float]]:
    """Maximal intervals of ``grid`` on which sign(dF/dt) = -alpha.

    The grid is halved until the interval set is stable between two rounds;
    interior endpoints are then bisected on dF/dt to ``xtol``.
    """
    grid = np.asarray(grid, dtype=float)
    previous = None
    for _ in range(max_rounds):
        values = np.asarray(signal.value(grid), dtype=float)
        intervals, idx = _against_runs(values, grid, signal.alpha)
        if previous is not None and _same_intervals(previous, intervals, 2.0 * spacing):
            break
        previous, spacing = intervals, float(np.max(np.diff(grid)))
        grid = numerics.refine_grid(grid)
    else:
        raise NumericalError(f"sign intervals of {signal.name} did not stabilize after {max_rounds} refinements")

    if signal.derivative is not None:
        deriv = lambda t: float(np.asarray(signal.derivative(np.array([t])))[0])
    else:
        h = 1e-3 * float(np.min(np.diff(grid)))
        deriv = lambda t: float(numerics.derivative(signal.value, np.array([t]), h)[0])

    def refine(k):
        if k == 0 or k == len(grid) - 1:
            return float(grid[k])
        lo, hi = float(grid[k - 1]), float(grid[k + 1])
        dlo, dhi = deriv(lo), deriv(hi)
        if dlo == 0.0 or dhi == 0.0 or (dlo < 0) == (dhi < 0):
            return float(grid[k])
        return numerics.bisect(deriv, lo, hi, xtol=xtol)

    return [(refine(i), refine(j)) for i, j in idx]


def interval_variation(values_at: Callable[[np.ndarray], np.ndarray], intervals) -> float:
    if not intervals:
        return 0.0
    ends = np.array(intervals, dtype=float)
    fa, fb = values_at(ends[:, 0]), values_at(ends[:, 1])
    return float(np.sum(np.abs(np.asarray(fb) - np.asarray(fa))))


# -------------------------------------------------------------------- signals


def _static_field(model: ChannelModel) -> np.ndarray:
    if not model.static_field:
        raise WitnessInapplicable(f"{model.family} has a time-dependent field; heat signals need a static one")
    return model.field_vectors(0.0)[0]


def channel_signal(model: ChannelModel, r0: BlochState, name: str, partner: BlochState | None = None) -> MonotoneSignal:
    """MonotoneSignal for quantity ``name`` along the evolution of ``r0`` under ``model``."""
    if name not in SIGNALS:
        raise ValidationError(f"unknown signal {name!r}; expected one of {', '.join(SIGNALS)}")
    fn, velocity = evolution(model, r0)
    r0v = r0.vec
    if name == "D":
        if partner is None:
            raise ValidationError("the trace-distance signal needs a partner state")
        fn2, _ = evolution(model, partner)
        return MonotoneSignal(lambda t: 0.5 * np.linalg.norm(fn(t) - fn2(t), axis=1), -1, name="D")
    if name == "S":
        return MonotoneSignal(lambda t: np.array([binary_entropy(min(v, 1.0)) for v in np.linalg.norm(fn(t), axis=1)]), 1, name="S")
    if name == "T_ergo":

        def t_ergo(t):
            h = np.linalg.norm(model.field_vectors(t), axis=1)
            return h / np.arctanh(np.linalg.norm(fn(t), axis=1))

        return MonotoneSignal(t_ergo, 1, name="T_ergo")
    h = _static_field(model)
    hmag = float(np.linalg.norm(h))
    U0 = -float(np.dot(h, r0v))
    toward_zero = -1 if U0 >= 0 else 1
    if name == "C":
        unit = h / hmag
        return MonotoneSignal(lambda t: np.linalg.norm(np.cross(fn(t), unit), axis=1), -1, name="C")
    if name == "U":
        return MonotoneSignal(lambda t: -(fn(t) @ h), toward_zero, name="U")
    if name == "Q_stand":
        return MonotoneSignal(lambda t: -((fn(t) - r0v) @ h), toward_zero, name="Q_stand")
    if name == "Q_ergo":
        r0n = float(np.linalg.norm(r0v))
        return MonotoneSignal(lambda t: -hmag * (np.linalg.norm(fn(t), axis=1) - r0n), 1, name="Q_ergo")
    # Q_entro: U is conserved by dephasing, so Q_entro = U0 ln(r/r0) in closed form
    if model.family in DEPHASING_FAMILIES:
        r0n = float(np.linalg.norm(r0v))
        return MonotoneSignal(lambda t: U0 * np.log(np.linalg.norm(fn(t), axis=1) / r0n), toward_zero, name="Q_entro")

    def q_entro(t):
        t = np.asarray(t, dtype=float)
        grid = np.unique(np.concatenate(([0.0], t)))
        traj = Trajectory(grid, fn(grid), model.field_vectors(grid), model, fn, model.field_vectors, velocity)
        q, _ = entropic_heat(traj)
        return np.interp(t, grid, q)

    return MonotoneSignal(q_entro, toward_zero, name="Q_entro")


def _check_energy_sign(model: ChannelModel, state: BlochState, grid) -> None:
    fn, _ = evolution(model, state)
    h = _static_field(model)
    U = -(fn(grid) @ h)
    if np.any(np.sign(U) != np.sign(U[0])) or U[0] == 0:
        raise WitnessInapplicable(
            f"Q_entro needs an energy sign-preserving channel: U(t) changes sign or vanishes under {model.family}"
        )


def measure_NF(
    model: ChannelModel,
    signal: str,
    states: Sequence[BlochState] | None = None,
    coordinate: Callable[[float], BlochState] | None = None,
    bounds: tuple[float, float] = (0.0, 1.0),
    n_coordinate: int = 51,
    horizon: float = 20.0,
    n_grid: int = 2001,
) -> MeasureResult:
    """Generalized measure: max over initial states of the anti-monotone variation of ``signal``.

    The search space is an explicit list of ``states`` and/or a one-parameter
    family ``coordinate`` on ``bounds``; the best coordinate is polished by a
    bounded scalar search.
    """
    grid = np.linspace(0.0, horizon, n_grid)
    if signal == "Q_entro" and not model.unital:
        raise WitnessInapplicable(f"Q_entro needs a unital channel; {model.family} is not unital")

    def score(state: BlochState) -> tuple[float, list]:
        if signal == "Q_entro":
            _check_energy_sign(model, state, grid)
        sig = channel_signal(model, state, signal)
        intervals = sign_intervals(sig, grid)
        return interval_variation(sig.value, intervals), intervals

    best = MeasureResult(0.0)
    candidates = list(states or [])
    if coordinate is not None:
        xs = np.linspace(bounds[0], bounds[1], n_coordinate)
        candidates += [coordinate(x) for x in xs]
    if not candidates:
        raise ValidationError("empty initial-state search space")
    if signal == "Q_entro":
        candidates = [s for s in candidates if abs(float(np.dot(_static_field(model), s.vec))) > 0]
    coord_best = None
    for k, st in enumerate(candidates):
        v, iv = score(st)
        if v > best.value:
            best = MeasureResult(v, st, iv)
            coord_best = k - (len(candidates) - n_coordinate) if coordinate is not None else None
    if coordinate is not None and coord_best is not None and coord_best >= 0 and best.value > 0:
        xs = np.linspace(bounds[0], bounds[1], n_coordinate)
        lo = xs[max(coord_best - 1, 0)]
        hi = xs[min(coord_best + 1, n_coordinate - 1)]
        x, v = numerics.maximize_scalar(lambda x: score(coordinate(x))[0], lo, hi, xtol=1e-8)
        if v > best.value:
            st = coordinate(x)
            best = MeasureResult(v, st, score(st)[1], coordinate=x)
    return best


# ---------------------------------------------------------- Ohmic dephasing


def _require_ohmic(model: ChannelModel) -> None:
    if model.family != "OHMIC-PD":
        raise ValidationError(f"expected an OHMIC-PD model, got {model.family}")


@dataclass(frozen=True)
class _OhmicWindows:
    intervals: list[tuple[float, float]]
    g_start: np.ndarray
    g_end: np.ndarray


def _ohmic_windows(model: ChannelModel) -> _OhmicWindows:
    """Non-Markovian windows of Ohmic dephasing with the attenuation at both ends."""
    _require_ohmic(model)
    if model.s <= 2:
        return _OhmicWindows([], np.zeros(0), np.zeros(0))
    iv = critical_times(model.s, model.omega_c)
    ga = np.array([dephasing_attenuation(a, model.s, model.omega_c) for a, _ in iv])
    gb = np.array([dephasing_attenuation(b, model.s, model.omega_c) for _, b in iv])
    return _OhmicWindows(iv, ga, gb)


def _ohmic_evolved(r, g):
    """Bloch vectors r (n, 3) after attenuation g (scalar)."""
    out = np.array(r, dtype=float, copy=True)
    out[..., :2] *= g
    return out


def _audit_states(seed: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * rng.uniform(size=(n, 1)) ** (1.0 / 3.0)


def measure_NC(model: ChannelModel) -> MeasureResult:
    """Coherence-based measure, optimized by a maximally coherent state."""
    if model.family not in DEPHASING_FAMILIES:
        raise WitnessInapplicable(f"coherence witness needs an incoherent channel; {model.family} is not one")
    opt = BlochState(1.0, 0.0, 0.0)
    if model.family != "OHMIC-PD":
        return measure_NF(model, "C", states=[opt])
    w = _ohmic_windows(model)
    return MeasureResult(float(np.sum(np.abs(w.g_end - w.g_start))), opt, list(w.intervals))


def _q_entro_variation(z, ga, gb):
    """Anti-monotone variation of Q_entro for r0 = 1 and |z0| = z, in units of omega0."""
    z = np.asarray(z, dtype=float)
    num = gb[:, None] ** 2 + (1 - gb[:, None] ** 2) * z**2
    den = ga[:, None] ** 2 + (1 - ga[:, None] ** 2) * z**2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = 0.5 * z * np.log(num / den)
    return np.sum(np.nan_to_num(terms), axis=0)


def measure_NQ_entro(model: ChannelModel, audit: int = 1000, seed: int = 7) -> MeasureResult:
    """Entropic-heat measure; ``coordinate`` is the optimal |z0| of a pure initial state."""
    _require_ohmic(model)
    w = _ohmic_windows(model)
    if not w.intervals:
        return MeasureResult(0.0, None, [], None, 0.0)
    # the optimum |z0| shrinks with the attenuation, so small values get a log grid
    zs = np.unique(np.concatenate((np.linspace(0.0, 1.0, 1001), np.logspace(-20, -3, 171))))
    vals = _q_entro_variation(zs, w.g_start, w.g_end)
    k = int(np.argmax(vals))
    lo, hi = zs[max(k - 1, 0)], zs[min(k + 1, len(zs) - 1)]
    z_opt, v_opt = numerics.maximize_scalar(
        lambda z: float(_q_entro_variation([z], w.g_start, w.g_end)[0]), lo, hi, xtol=1e-3 * (hi - lo)
    )
    if v_opt < vals[k]:
        z_opt, v_opt = float(zs[k]), float(vals[k])
    value = model.omega0 * v_opt
    opt = BlochState(math.sqrt(max(0.0, 1 - z_opt * z_opt)), 0.0, z_opt)

    # mixed states: Q_entro = U0 ln(r/r0) with r^2 = z0^2 + G^2 (x0^2 + y0^2)
    r = _audit_states(seed, audit)
    perp2, z2 = r[:, 0] ** 2 + r[:, 1] ** 2, r[:, 2] ** 2
    keep = z2 > 0
    ra = np.sqrt(z2[:, None] + w.g_start[None, :] ** 2 * perp2[:, None])
    rb = np.sqrt(z2[:, None] + w.g_end[None, :] ** 2 * perp2[:, None])
    audit_vals = model.omega0 * np.abs(r[:, 2])[:, None] * np.abs(np.log(rb / ra))
    audit_max = float(np.max(np.sum(audit_vals, axis=1)[keep], initial=0.0))
    if audit_max > value + 1e-9:
        raise NumericalError(f"audit state beats the pure-state optimizer: {audit_max} > {value}")
    return MeasureResult(value, opt, list(w.intervals), z_opt, audit_max)


def measure_NQ_ergo(model: ChannelModel, audit: int = 1000, seed: int = 11) -> MeasureResult:
    """Ergotropic-heat measure, optimized by any equatorial pure state."""
    _require_ohmic(model)
    w = _ohmic_windows(model)
    value = model.omega0 * float(np.sum(np.abs(w.g_end - w.g_start)))
    r = _audit_states(seed, audit)
    audit_max = 0.0
    if w.intervals:
        perp2, z2 = r[:, 0] ** 2 + r[:, 1] ** 2, r[:, 2] ** 2
        ra = np.sqrt(z2[:, None] + w.g_start[None, :] ** 2 * perp2[:, None])
        rb = np.sqrt(z2[:, None] + w.g_end[None, :] ** 2 * perp2[:, None])
        audit_max = model.omega0 * float(np.max(np.sum(np.abs(rb - ra), axis=1)))
    if audit_max > value + 1e-9:
        raise NumericalError(f"audit state beats the equatorial optimizer: {audit_max} > {value}")
    return MeasureResult(value, BlochState(1.0, 0.0, 0.0), list(w.intervals), None, audit_max)


def measure_NQ_stand(model: ChannelModel, n_states: int = 13, horizon: float = 20.0) -> MeasureResult:
    """Standard-heat measure; Q_stand = -h.dr vanishes identically under pure dephasing."""
    thetas = np.linspace(0.0, math.pi, n_states)
    states = [BlochState.from_spherical(1.0, th) for th in thetas]
    return measure_NF(model, "Q_stand", states=states, horizon=horizon, n_grid=401)


def measure_ND_blp(
    model: ChannelModel,
    pairs: Sequence[tuple[BlochState, BlochState]] | None = None,
    n_pairs: int = 1000,
    seed: int = 3,
    horizon: float = 20.0,
    n_grid: int = 2001,
) -> MeasureResult:
    """Trace-distance (information backflow) measure, maximized over state pairs.

    The antipodal equatorial pair is always included.  For Ohmic dephasing the
    windows where distances can grow are the windows where gamma < 0, so the
    pairs are evolved to the window ends directly.
    """
    antipodal = (BlochState(1.0, 0.0, 0.0), BlochState(-1.0, 0.0, 0.0))
    if pairs is None:
        a, b = _audit_states(seed, n_pairs), _audit_states(seed + 1, n_pairs)
        pairs = [antipodal] + [(BlochState.from_vector(u), BlochState.from_vector(v)) for u, v in zip(a, b)]
    else:
        pairs = list(pairs)
    best = MeasureResult(0.0)
    if model.family == "OHMIC-PD":
        w = _ohmic_windows(model)
        if not w.intervals:
            return MeasureResult(0.0, antipodal, [])
        for p, q in pairs:
            total = 0.0
            for ga, gb in zip(w.g_start, w.g_end):
                da = trace_distance(
                    BlochState.from_vector(_ohmic_evolved(p.vec, ga)), BlochState.from_vector(_ohmic_evolved(q.vec, ga))
                )
                db = trace_distance(
                    BlochState.from_vector(_ohmic_evolved(p.vec, gb)), BlochState.from_vector(_ohmic_evolved(q.vec, gb))
                )
                total += abs(db - da)
            if total > best.value:
                best = MeasureResult(total, (p, q), list(w.intervals))
        return best
    grid = np.linspace(0.0, horizon, n_grid)
    for p, q in pairs:
        sig = channel_signal(model, p, "D", partner=q)
        iv = sign_intervals(sig, grid)
        v = interval_variation(sig.value, iv)
        if v > best.value:
            best = MeasureResult(v, (p, q), iv)
    return best


# ------------------------------------------------------------ temperature witness


@dataclass(frozen=True)
class TemperatureWitness:
    non_markovian: bool
    intervals: list[tuple[float, float]]

    def __bool__(self) -> bool:
        return self.non_markovian


def witness_temperature(traj: Trajectory) -> TemperatureWitness:
    """Flags a non-monotone ergotropic temperature along ``traj``."""
    radii = traj.radii
    if np.any(radii <= 0) or np.any(radii >= 1):
        raise ValidationError("temperature witness needs 0 < r < 1 along the trajectory")
    hmag = np.linalg.norm(traj.field_vectors, axis=1)
    if np.any(hmag <= 0):
        raise ValidationError("temperature witness needs a nonzero field")

    if traj.resamplable:
        value = lambda t: np.linalg.norm(traj.field_fn(t), axis=1) / np.arctanh(np.linalg.norm(traj.state_fn(t), axis=1))
    else:
        value = lambda t: np.interp(t, traj.times, hmag / np.arctanh(radii))
    T = value(traj.times)
    if np.max(np.abs(T - T[0])) <= 1e-13 * abs(T[0]):
        return TemperatureWitness(False, [])
    falling = sign_intervals(MonotoneSignal(value, 1, name="T_ergo"), traj.times)
    rising = sign_intervals(MonotoneSignal(value, -1, name="T_ergo"), traj.times)
    if not falling or not rising:
        return TemperatureWitness(False, [])
    # the trend set by the first move is the reference; report the reversals
    reversals = falling if rising[0][0] < falling[0][0] else rising
    return TemperatureWitness(True, reversals)


def ohmic_trajectory(s: float, r0: BlochState, horizon: float = 10.0, n: int = 1001, omega0: float = 1.0, omega_c: float = 1.0) -> Trajectory:
    return simulate(ChannelModel("OHMIC-PD", s=s, omega0=omega0, omega_c=omega_c), r0, np.linspace(0.0, horizon, n))
