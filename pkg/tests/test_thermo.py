import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from gate_thermo.channel import choi_of_model, from_kraus
from gate_thermo.dynamics import (
    GateModel, HamiltonianProtocol, JumpProcess, lindblad_evolve, model_from_jumps, random_detailed_balance_model,
)
from gate_thermo.harness.presets import PhysicalParams, amplitude_damping_model, build_preset, pauli_noise_model
from gate_thermo.qcore import I2, SM, SP, SX, SY, SZ, HaarSampler, pauli_string
from gate_thermo.thermo import (
    ModeMismatch, activity, energy_change, entropy_production, entropy_production_curve, entropy_rate_spectral,
    gamma_coefficients, logmean, spectral_rate_along, spectral_rate_terms, summarize,
)


def thermal_qubit(beta_gap=1.2, rate=0.4, tau=1.0, steps=2000):
    h = -0.5 * SZ  # |1> excited
    nbar = 1 / math.expm1(beta_gap)
    jumps = (JumpProcess(math.sqrt(rate * (nbar + 1)) * SM, beta_gap, 1, "dissipative"),
             JumpProcess(math.sqrt(rate * nbar) * SP, -beta_gap, 0, "dissipative"))
    return model_from_jumps(h, jumps, tau, steps, thermal_relaxation=True)


# entropy production -------------------------------------------------------

def test_closed_system_produces_nothing():
    model = GateModel(HamiltonianProtocol.constant(SX), (), 1.0, 200)
    ent = entropy_production(lindblad_evolve(model, np.array([1, 0], dtype=complex)))
    assert abs(ent.sigma_sys) < 1e-9 and abs(ent.sigma_env) < 1e-9


def test_amplitude_damping_environment_entropy():
    beta = 2.0
    model = amplitude_damping_model(1.0, 1.0, entropy_weight=beta)
    ent = entropy_production(lindblad_evolve(model, np.array([0, 1], dtype=complex)))
    assert ent.sigma_env == pytest.approx(beta * (1 - math.exp(-1)), abs=1e-6)
    assert ent.sigma_total >= 0
    assert ent.sigma_total == ent.sigma_sys + ent.sigma_env


def test_second_law_random_models(rng):
    for k in range(50):
        d = int(rng.integers(2, 4))
        model = random_detailed_balance_model(d, rng, driven=bool(k % 3 == 0), steps=200)
        psi = HaarSampler(k).states(d, 1)[0]
        assert entropy_production(lindblad_evolve(model, psi)).sigma_total >= -1e-8


# spectral rate ------------------------------------------------------------

def test_logmean_limits():
    assert logmean(3.0, 3.0) == 3.0
    assert logmean(3.0, 0.0) == 0.0
    assert logmean(0.0, 0.0) == 0.0
    assert logmean(2.0, 1.0) == pytest.approx(1 / math.log(2))
    assert logmean(1.0, 1.0 + 1e-14) == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3))
def test_logmean_between_geometric_and_arithmetic(x, y):
    m = float(logmean(x, y))
    assert math.sqrt(x * y) * (1 - 1e-9) <= m <= (x + y) / 2 * (1 + 1e-9)
    assert m == pytest.approx(float(logmean(y, x)), rel=1e-12)


def test_gibbs_state_has_zero_rate():
    model = thermal_qubit()
    beta = 1.2
    gibbs = np.diag([1.0, math.exp(-beta)]) / (1 + math.exp(-beta))
    ops = np.stack([j.operator for j in model.jumps])
    assert entropy_rate_spectral(gibbs, ops, [1.2, -1.2], [1, 0]) < 1e-8


def test_pure_dephasing_diagonal_state_has_zero_rate():
    ops = np.stack([0.3 * SZ, 0.2 * pauli_string("Z")])
    assert entropy_rate_spectral(np.diag([0.9, 0.1]), ops, [0.0, 0.0]) < 1e-10


def test_rate_terms_detailed_balance_identities():
    model = thermal_qubit()
    rho = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    ops = np.stack([j.operator for j in model.jumps])
    terms = spectral_rate_terms(rho, ops, [1.2, -1.2], [1, 0])
    w = terms.transition_rates
    np.testing.assert_allclose(w[0], math.exp(1.2) * w[1].T, atol=1e-8)
    f = terms.forces
    ok = np.isfinite(f[0]) & np.isfinite(f[1].T)
    np.testing.assert_allclose(f[0][ok], -f[1].T[ok], atol=1e-10)


def test_rate_matches_finite_difference_of_entropy():
    model = build_preset("xtheta", PhysicalParams(tau_us=10.0), 4000)
    traj = lindblad_evolve(model, np.diag([0.9, 0.1]).astype(complex))
    curve = entropy_production_curve(traj)
    rate = np.gradient(curve, traj.times, edge_order=2)
    spectral = spectral_rate_along(model, traj)
    k = slice(10, -10)
    np.testing.assert_allclose(spectral[k], rate[k], rtol=1e-4)


def test_integrated_rate_matches_entropy_production_interior():
    model = build_preset("xtheta", PhysicalParams(tau_us=20.0), 2000)
    traj = lindblad_evolve(model, HaarSampler(9).states(2, 1)[0])
    curve = entropy_production_curve(traj)
    spectral = spectral_rate_along(model, traj)
    t = traj.times
    k0 = int(np.searchsorted(t, 0.02 * t[-1]))
    integrated = trapezoid(spectral[k0:], t[k0:])
    direct = curve[-1] - curve[k0]
    assert abs(integrated - direct) <= 1e-3 * abs(direct)


def test_spectral_rate_needs_partners():
    model = amplitude_damping_model(1.0, 1.0, 0.5, steps=10)
    traj = lindblad_evolve(model, np.array([0, 1], dtype=complex))
    with pytest.raises(ValueError):
        spectral_rate_along(model, traj)


# gamma and activity -------------------------------------------------------

def test_gamma_single_dephasing():
    gp, tau = 0.3, 2.0
    model = model_from_jumps(np.zeros((2, 2)), (JumpProcess(math.sqrt(gp / 2) * SZ),), tau, 50)
    gamma, _ = gamma_coefficients(model)
    assert gamma == pytest.approx(tau * gp / 3, rel=1e-12)
    assert activity(model) == pytest.approx(tau * math.sqrt(gp / 2) * math.sqrt(gp / 3), rel=1e-12)


@pytest.mark.parametrize("labels", [("X", "Y", "Z"), ("XI", "IZ", "YY", "ZX")])
def test_gamma_pauli_noise(labels):
    rates = {lab: 0.01 * (i + 1) for i, lab in enumerate(labels)}
    tau = 3.0
    model = pauli_noise_model(rates, tau, 20)
    d = model.dim
    gamma, _ = gamma_coefficients(model)
    assert gamma == pytest.approx(tau * sum(rates.values()) * d / (d + 1), rel=1e-12)


def test_gamma_phi_haar_average_is_gamma():
    model = build_preset("xtheta", PhysicalParams(tau_us=10.0), 200)
    gamma, _ = gamma_coefficients(model)
    psis = HaarSampler(12).states(2, 1000)
    from gate_thermo.dynamics import gamma_phi_integrand
    vals = trapezoid(gamma_phi_integrand(model, psis), model.grid(), axis=1)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - gamma) < 3 * se
    _, gphi = gamma_coefficients(model, psis[0])
    assert gphi == pytest.approx(vals[0], rel=1e-12)


def test_gamma_frame_invariance():
    for gate in ("xtheta", "cz"):
        model = build_preset(gate, PhysicalParams(tau_us=15.0), 300)
        lab, _ = gamma_coefficients(model, frame="lab")
        inter, _ = gamma_coefficients(model, frame="interaction")
        assert abs(lab - inter) < 1e-10


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_quadratic_scaling(c, rng):
    model = random_detailed_balance_model(3, rng, steps=50)
    scaled = model.replace(jumps=tuple(j.scaled(c) for j in model.jumps))
    assert gamma_coefficients(scaled)[0] == pytest.approx(c ** 2 * gamma_coefficients(model)[0], rel=1e-12)
    assert activity(scaled) == pytest.approx(c ** 2 * activity(model), rel=1e-12)


def test_activity_without_jumps():
    assert activity(GateModel(HamiltonianProtocol.zero(2), (), 1.0, 10)) == 0.0


# energy change ------------------------------------------------------------

def test_closed_system_energy_change_vanishes():
    model = GateModel(HamiltonianProtocol.constant(SZ), (), 1.0, 100)
    e = energy_change(model, choi_of_model(model))
    assert abs(e.value) < 1e-10
    assert e.bandwidth == pytest.approx(2.0)


def test_depolarizing_energy_change():
    dep = from_kraus(np.stack([I2, SX, SY, SZ]) / 2)
    model = GateModel(HamiltonianProtocol.constant(SZ), (), 1.0, 10)
    e = energy_change(model, dep)
    assert abs(e.value) < 1e-15 and e.bandwidth == pytest.approx(2.0)


def test_bare_mode_refused_for_driven_gate():
    model = build_preset("xtheta", PhysicalParams(), 50)
    with pytest.raises(ModeMismatch):
        energy_change(model, choi_of_model(model), "bare")
    eff = energy_change(model, choi_of_model(model), "effective")
    assert eff.mode == "effective" and eff.bandwidth > 0


def test_energy_change_matches_monte_carlo():
    model = build_preset("cz", PhysicalParams(tau_us=1.0, coupling=1e-3), 500)
    ch = choi_of_model(model)
    h = model.ideal.evaluate(0.0)
    psis = HaarSampler(8).states(4, 1000)
    out = ch.apply_pure(psis)
    vals = np.einsum("ab,nba->n", h, out).real - np.einsum("na,ab,nb->n", psis.conj(), h, psis).real
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - energy_change(model, ch).value) < 3 * se


def test_summary_modes():
    cz = build_preset("cz", PhysicalParams(tau_us=5.0), 100)
    s = summarize(cz, choi_of_model(cz))
    assert s.energy_mode == "bare" and s.gamma >= 0 and s.upsilon >= 0 and s.bandwidth_g >= 0
    x = build_preset("xtheta", PhysicalParams(tau_us=5.0), 100)
    s = summarize(x, choi_of_model(x))
    assert s.energy_mode == "effective" and s.Q is None and s.bandwidth_gbar >= 0
