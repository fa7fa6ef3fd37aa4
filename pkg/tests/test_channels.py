import math

import numpy as np
import pytest
from scipy import integrate, optimize

from oracles import DOWN_TO_UP, SX, SZ, UP_TO_DOWN, lindblad_rk4, rho_of, bloch_of
from qthermo.channels import (
    KRAUS_FAMILIES,
    ChannelModel,
    KrausSet,
    Trajectory,
    apply_kraus,
    bloch_solution_bitflip,
    bloch_solution_pd_timedep,
    bloch_solution_spont_emission,
    build_kraus,
    critical_times,
    dephasing_attenuation,
    dephasing_attenuation_grid,
    evolution,
    integrate_gad_master,
    nm_ad_q,
    ohmic_rate,
    rate_integral,
    simulate,
    sudden_death_times,
)
from qthermo.errors import NumericalError, ValidationError
from qthermo.state import BlochState, Field3, random_states, thermal_state, trace_distance

KRAUS_MODELS = {
    "AD": ChannelModel("AD", gamma=1.0),
    "GAD": ChannelModel("GAD", gamma=1.0, T_e=2.0),
    "PD": ChannelModel("PD", gamma=1.0),
    "NM-PD": ChannelModel("NM-PD", gamma=1.0, Gamma=0.01),
    "NM-AD": ChannelModel("NM-AD", gamma=1.0, Gamma=0.01),
}


# ------------------------------------------------------------------- models


def test_model_validation():
    with pytest.raises(ValidationError):
        ChannelModel("XX", gamma=1.0)
    with pytest.raises(ValidationError):
        ChannelModel("AD", gamma=-1.0)
    with pytest.raises(ValidationError):
        ChannelModel("NM-AD", gamma=1.0)
    with pytest.raises(ValidationError):
        ChannelModel("PD", p=1.5)
    with pytest.raises(ValidationError):
        ChannelModel("OHMIC-PD", s=-1.0)
    with pytest.raises(ValidationError):
        ChannelModel("GAD", p=0.5)
    assert ChannelModel("PD-TIMEDEP", gamma=0.0, omega=1.0).gamma == 0.0


# -------------------------------------------------------------------- Kraus


@pytest.mark.parametrize("family", KRAUS_FAMILIES)
def test_kraus_completeness_on_sampled_times(family):
    for t in np.linspace(0.0, 50.0, 100):
        assert build_kraus(KRAUS_MODELS[family], t).completeness_error() <= 1e-10


@pytest.mark.parametrize("family", KRAUS_FAMILIES)
def test_kraus_matches_trajectory_evolution(family):
    model = KRAUS_MODELS[family]
    fn, _ = evolution(model, np.array([0.3, -0.4, 0.2]))
    rho0 = rho_of([0.3, -0.4, 0.2])
    for t in (0.0, 0.3, 2.0, 17.0):
        ks = build_kraus(model, t)
        rho = sum(K @ rho0 @ K.conj().T for K in ks.ops)
        assert np.allclose(bloch_of(rho), fn(np.array([t]))[0], atol=1e-12)
        assert np.allclose(apply_kraus(ks, BlochState(0.3, -0.4, 0.2)).vec, bloch_of(rho), atol=1e-12)


def test_kraus_examples():
    ks = build_kraus(ChannelModel("NM-AD", gamma=1.0, Gamma=0.5), 0.0)
    assert sum(np.allclose(K, np.eye(2)) for K in ks.ops) == 1
    assert sum(np.allclose(K, 0) for K in ks.ops) == 1
    gad = build_kraus(ChannelModel("GAD", p=1.0, a=1.0), 0.0)
    assert np.allclose(apply_kraus(gad, BlochState(0.2, 0.5, -0.7)).vec, [0, 0, 1], atol=1e-15)
    ad = build_kraus(ChannelModel("AD", p=1.0), 0.0)
    assert np.allclose(apply_kraus(ad, BlochState(0, 0, -1)).vec, [0, 0, 1])
    f = 0.37
    pd = build_kraus(ChannelModel("PD", p=(1 - f) / 2), 0.0)
    assert np.allclose(apply_kraus(pd, BlochState(0.4, 0.5, 0.6)).vec, [f * 0.4, f * 0.5, 0.6])
    ident = KrausSet((np.eye(2, dtype=complex),))
    assert np.allclose(apply_kraus(ident, BlochState(0.1, 0.2, 0.3)).vec, [0.1, 0.2, 0.3], atol=1e-15)
    with pytest.raises(ValidationError):
        build_kraus(ChannelModel("SPONT-EMISSION", gamma=1.0), 1.0)


def test_incomplete_kraus_set_is_rejected():
    with pytest.raises(ValidationError):
        apply_kraus(KrausSet((0.9 * np.eye(2, dtype=complex),)), BlochState(0, 0, 0))


def test_nm_pd_markov_limit():
    model = ChannelModel("NM-PD", gamma=1.0, Gamma=1e6)
    fn, _ = evolution(model, np.array([1.0, 0, 0]))
    t = np.linspace(0, 5, 21)
    assert np.allclose(fn(t)[:, 0], np.exp(-t / 2), atol=1e-4)


@pytest.mark.parametrize("ratio", [1e-3, 1e-1, 1.0, 10.0])
def test_nm_ad_survival_in_unit_interval(ratio):
    t = np.linspace(0.0, 200.0, 20001)
    q = nm_ad_q(t, 1.0, ratio)
    assert q.min() >= -1e-12 and q.max() <= 1 + 1e-12


def test_nm_ad_overdamped_branch_matches_hyperbolic_form():
    g, G = 1.0, 10.0
    d = math.sqrt(G * G - 2 * g * G)
    t = np.linspace(0, 3, 31)
    ref = np.exp(-G * t) * (np.cosh(d * t / 2) + (G / d) * np.sinh(d * t / 2)) ** 2
    assert np.allclose(nm_ad_q(t, g, G), ref, rtol=1e-12, atol=1e-15)


def test_unital_and_nonunital_images_of_the_origin():
    origin = BlochState(0, 0, 0)
    for m in (ChannelModel("PD", gamma=1.0), ChannelModel("NM-PD", gamma=1.0, Gamma=0.3)):
        assert apply_kraus(build_kraus(m, 1.3), origin).vec.tolist() == [0, 0, 0]
    for m in (ChannelModel("AD", gamma=1.0), ChannelModel("GAD", gamma=1.0, T_e=1.0)):
        assert np.linalg.norm(apply_kraus(build_kraus(m, 1.3), origin).vec) > 0


def test_markovian_pd_never_increases_purity():
    traj = simulate(ChannelModel("PD", gamma=0.7), BlochState(0.6, 0.3, 0.5), np.linspace(0, 10, 1001))
    assert np.all(np.diff(traj.radii) <= 1e-15)


@pytest.mark.parametrize(
    "model",
    [ChannelModel("AD", gamma=1.0), ChannelModel("GAD", gamma=1.0, T_e=0.7), ChannelModel("PD", gamma=1.0)],
    ids=["AD", "GAD", "PD"],
)
def test_trace_distance_contracts_under_markovian_channels(model):
    rng = np.random.default_rng(13)
    a, b = random_states(rng, 1000), random_states(rng, 1000)
    for t in (0.1, 1.0, 4.0):
        ks = build_kraus(model, t)
        for p, q in zip(a, b):
            assert trace_distance(apply_kraus(ks, p), apply_kraus(ks, q)) <= trace_distance(p, q) + 1e-12


# -------------------------------------------------------------- Ohmic rates


def test_ohmic_rate_examples():
    assert ohmic_rate(0.0, 3.0) == 0
    assert ohmic_rate(1.0, 2.0) == pytest.approx(0.5)
    assert ohmic_rate(1.0, 0.0) == 0


@pytest.mark.parametrize("s", [2.5, 3.2, 4.0, 5.0, 8.0])
def test_rate_changes_sign_at_critical_times(s):
    f = lambda t: ohmic_rate(t, s)
    for lo, hi in critical_times(s):
        assert f(lo * (1 - 1e-6)) * f(lo * (1 + 1e-6)) < 0
        assert f(0.5 * (lo + min(hi, 10 * lo + 10))) < 0
    first = math.tan(math.pi / s)
    assert optimize.brentq(f, 0.5 * first, min(1.5 * first, first + 0.5 * (critical_times(s)[0][1] - first))) == pytest.approx(first, abs=1e-9)


def test_critical_times_examples():
    assert critical_times(1.5) == []
    assert critical_times(2.0) == []
    assert len(critical_times(3.2)) == 1
    assert critical_times(3.2)[0][1] == math.inf
    iv = critical_times(8.0)
    assert len(iv) == 2
    assert iv[0] == pytest.approx((math.tan(math.pi / 8), math.tan(math.pi / 4)))


def test_rate_integral_matches_antiderivative_and_quad():
    for t in (0.1, 1.0, 7.0, 40.0):
        assert rate_integral(t, 1.0) == pytest.approx(0.5 * math.log1p(t * t), abs=1e-9)
        assert dephasing_attenuation(t, 1.0) == pytest.approx(1.0 / (1.0 + t * t), abs=1e-9)
    for s in (0.5, 2.0, 2.5, 3.2, 4.5, 6.0):
        for t in (0.3, 2.0, 15.0):
            ref, _ = integrate.quad(lambda u: ohmic_rate(u, s), 0, t, limit=400, epsabs=1e-13)
            assert rate_integral(t, s) == pytest.approx(ref, abs=1e-9)


def test_rate_integral_at_infinity_for_superohmic():
    for s in (2.5, 3.2, 5.0):
        ref, _ = integrate.quad(lambda u: ohmic_rate(u, s), 0, np.inf, limit=800)
        assert rate_integral(math.inf, s) == pytest.approx(ref, abs=1e-8)


def test_attenuation_grid_matches_scalar_and_regimes():
    t = np.linspace(0, 20, 201)
    for s in (1.0, 2.0, 3.5):
        g = dephasing_attenuation_grid(t, s)
        scalar = np.array([dephasing_attenuation(x, s) for x in t[::20]])
        assert np.allclose(g[::20], scalar, atol=1e-10)
        assert g[0] == 1.0 and np.all((g > 0) & (g <= 1))
        if s <= 2:
            assert np.all(np.diff(g) <= 0)
        else:
            assert np.any(np.diff(g) > 0)


# ------------------------------------------------------- closed forms vs ODE


def _grid(T, n=1000):
    return np.linspace(0.0, T, n)


@pytest.mark.parametrize("gamma", [0.1, 2.0, 3.0])
def test_bitflip_closed_form_matches_ode_oracle(gamma):
    w0 = 1.0
    r0 = np.array([0.5, 0.2, 0.5])
    t = _grid(20.0)
    ref = lindblad_rk4(lambda _: w0 * SZ, [(gamma, SX)], r0, t)
    model = ChannelModel("BITFLIP-DISS", gamma=gamma, omega0=w0)
    got = np.array([bloch_solution_bitflip(model, BlochState.from_vector(r0), x).vec for x in t])
    assert np.max(np.abs(got - ref)) < 1e-8
    assert np.allclose(got[:, 2], r0[2] * np.exp(-2 * gamma * t))


def test_bitflip_critical_damping_branch():
    model = ChannelModel("BITFLIP-DISS", gamma=2.0, omega0=1.0)
    r0 = np.array([0.5, 0.2, 0.5])
    t = _grid(5.0)
    ref = lindblad_rk4(lambda _: SZ, [(2.0, SX)], r0, t)
    got = simulate(model, r0, t).vectors
    assert np.max(np.abs(got - ref)) < 1e-8


def test_spont_emission_closed_form_matches_ode_oracle():
    r0 = np.array([1.0, 0.0, 0.0])
    t = _grid(6.0)
    ref = lindblad_rk4(lambda _: -SZ, [(1.0, DOWN_TO_UP)], r0, t)
    got = np.array([bloch_solution_spont_emission(BlochState.from_vector(r0), 1.0, x).vec for x in t])
    assert np.max(np.abs(got - ref)) < 1e-8
    s1 = bloch_solution_spont_emission(BlochState(1, 0, 0), 1.0, 1.0)
    assert s1.z == pytest.approx(1 - math.exp(-1))
    assert math.hypot(s1.x, s1.y) == pytest.approx(math.exp(-0.5))
    assert bloch_solution_spont_emission(BlochState(0.3, 0, 0.1), 1.0, math.inf).vec.tolist() == [0, 0, 1]
    assert np.allclose(bloch_solution_spont_emission(BlochState(0.3, 0.2, 0.1), 1.0, 0.0).vec, [0.3, 0.2, 0.1])


def test_pd_timedep_closed_form_matches_ode_oracle():
    w0, w, g = 1.0, 1.0, 1.0
    r0 = np.array([0.5, 0.7, 0.0])
    t = _grid(4.0)
    H = lambda x: 0.5 * w0 * (1 - math.cos(w * x)) * SZ
    ref = lindblad_rk4(H, [(g, SZ)], r0, t)
    got = np.array([bloch_solution_pd_timedep(BlochState.from_vector(r0), w0, w, g, x).vec for x in t])
    assert np.max(np.abs(got - ref)) < 1e-8
    assert np.allclose(np.hypot(got[:, 0], got[:, 1]), math.sqrt(0.74) * np.exp(-2 * t))
    free = np.array([bloch_solution_pd_timedep(BlochState.from_vector(r0), w0, w, 0.0, x).r for x in t])
    assert np.allclose(free, math.sqrt(0.74))


def test_gad_master_matches_ode_oracle_and_thermalizes():
    w0, g0, T = 1.0, 1.0, 10.0
    n = 1 / math.expm1(w0 / T)
    r0 = np.array([0.45, 0.0, 0.8])
    t = _grid(3.0)
    ref = lindblad_rk4(lambda _: 0.5 * w0 * SZ, [(g0 * (n + 1), UP_TO_DOWN), (g0 * n, DOWN_TO_UP)], r0, t)
    traj = integrate_gad_master(r0, w0, g0, T, t)
    assert np.max(np.abs(traj.vectors - ref)) < 1e-8
    gibbs = thermal_state(Field3(0, 0, -0.5 * w0), 1 / T)
    assert np.allclose(traj.vectors[-1], gibbs.vec, atol=1e-10)
    assert gibbs.r == pytest.approx(math.tanh(0.05))


def test_gad_master_fixed_point_is_stationary():
    gibbs = thermal_state(Field3(0, 0, -0.5), 0.1)
    traj = integrate_gad_master(gibbs.vec, 1.0, 1.0, 10.0, np.linspace(0, 5, 51))
    assert np.max(np.abs(traj.vectors - gibbs.vec)) < 1e-10


def test_gad_standard_temperature_crossing_follows_z_root():
    traj = integrate_gad_master(np.array([0.45, 0, 0.8]), 1.0, 1.0, 10.0, np.linspace(0, 1, 10001))
    n = 1 / math.expm1(0.1)
    z_inf = -1 / (2 * n + 1)
    t_cross = math.log((0.8 - z_inf) / -z_inf) / (2 * n + 1)
    k = np.flatnonzero(np.diff(np.sign(traj.vectors[:, 2])))[0]
    assert traj.times[k] <= t_cross <= traj.times[k + 1]


# ------------------------------------------------------------ sudden death


def test_sudden_death_markovian_and_limits():
    ad = ChannelModel("AD", gamma=1.0)
    assert sudden_death_times(ad, 0.5).t_sd == pytest.approx(math.log(1.5), abs=1e-9)
    assert sudden_death_times(ad, 1e-6).t_sd == pytest.approx(math.log1p(1e-6), abs=1e-9)
    none = sudden_death_times(ad, -0.2)
    assert not none.occurs and none.t_sd is None
    assert sudden_death_times(ad, 0.5).horizon == 1000.0


def test_sudden_death_non_markovian():
    res = sudden_death_times(ChannelModel("NM-AD", gamma=1.0, Gamma=0.001), 0.5)
    assert res.t_sd == pytest.approx(297, rel=0.02)
    assert len(res.times) >= 3
    with pytest.raises(ValidationError):
        sudden_death_times(ChannelModel("PD", gamma=1.0), 0.5)


# ------------------------------------------------------------- trajectories


def test_trajectory_validation():
    with pytest.raises(ValidationError):
        Trajectory([0.0], [[0, 0, 0]], [[0, 0, 1]])
    with pytest.raises(ValidationError):
        Trajectory([0.0, 0.0], [[0, 0, 0]] * 2, [[0, 0, 1]] * 2)
    with pytest.raises(ValidationError):
        Trajectory([0.0, 1.0], [[0, 0, 0]] * 3, [[0, 0, 1]] * 2)
    with pytest.raises(ValidationError):
        Trajectory([0.0, 1.0], [[0, 0, 1.1]] * 2, [[0, 0, 1]] * 2)


def test_velocities_match_generator_and_stencil():
    model = ChannelModel("SPONT-EMISSION", gamma=0.7)
    traj = simulate(model, BlochState(0.4, 0.3, -0.2), np.linspace(0, 5, 101))
    stencil = Trajectory(traj.times, traj.vectors, traj.field_vectors, model, traj.state_fn, traj.field_fn)
    assert np.allclose(stencil.velocities(), traj.velocities(), atol=1e-7)


def test_imaginary_residue_guard_reports_numerical_error():
    from qthermo.channels import _check_real

    with pytest.raises(NumericalError):
        _check_real([np.array([1 + 1e-6j])], "probe")
