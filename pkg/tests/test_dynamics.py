import math

import numpy as np
import pytest
from scipy.linalg import expm

from gate_thermo.dynamics import (
    GateModel, HamiltonianProtocol, IntegrationDiverged, JumpProcess, bohr_frequency, interaction_frame,
    lindblad_evolve, model_from_jumps, propagator, random_detailed_balance_model, thermal_relaxation_check,
    unitary_grid, validate_pairing,
)
from gate_thermo.harness.presets import PhysicalParams, build_preset, xtheta_drive
from gate_thermo.qcore import (
    SM, SP, SX, SZ, HaarSampler, ValidationError, dag, pauli_string, trace_distance,
)


def xtheta_protocol(theta=math.pi / 2, tau=10.0):
    w = xtheta_drive(theta, tau)
    return HamiltonianProtocol(((lambda t: 0.5 * w(t), SX),), 2)


# propagators ---------------------------------------------------------------

def test_constant_propagator_closed_form():
    u = propagator(HamiltonianProtocol.constant(SZ), 0.0, math.pi)
    np.testing.assert_allclose(u, -np.eye(2), atol=1e-10)


def test_zero_propagator_is_identity():
    np.testing.assert_array_equal(propagator(HamiltonianProtocol.zero(3), 0.0, 2.0), np.eye(3))


def test_xtheta_propagator_matches_rotation():
    u = propagator(xtheta_protocol(), 0.0, 10.0, 4000)
    target = expm(-1j * math.pi / 4 * SX)
    assert abs(abs(np.trace(dag(u) @ target)) - 2) < 1e-6
    np.testing.assert_allclose(dag(u) @ u, np.eye(2), atol=1e-9)


def test_propagator_second_order_in_substeps():
    # non-commuting drive so the midpoint rule has a visible error
    p = HamiltonianProtocol(((lambda t: np.cos(t), SX), (0.7, SZ)), 2)
    exact = propagator(p, 0.0, 2.0, 20000)
    errs = [np.linalg.norm(propagator(p, 0.0, 2.0, n) - exact) for n in (50, 100, 200)]
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.0 < r1 < 5.0 and 3.0 < r2 < 5.0


def test_propagator_rejects_bad_arguments():
    p = HamiltonianProtocol.constant(SZ)
    with pytest.raises(ValueError):
        propagator(p, 1.0, 0.0)
    with pytest.raises(ValueError):
        propagator(p, 0.0, 1.0, 0)


def test_non_hermitian_hamiltonian_rejected():
    with pytest.raises(ValidationError):
        HamiltonianProtocol.constant(SM)
    bad = HamiltonianProtocol(((lambda t: 1.0 + 0.0 * t, SX), (lambda t: 1j + 0.0 * t, SZ)), 2)
    with pytest.raises(ValidationError):
        propagator(bad, 0.0, 1.0, 10)


def test_unitary_grid_matches_propagator():
    p = xtheta_protocol(1.1, 3.0)
    times = np.array([0.0, 0.5, 1.7, 3.0])
    us = unitary_grid(p, times, substeps=200)
    for t, u in zip(times, us):
        np.testing.assert_allclose(u, propagator(p, 0.0, t, 2000), atol=1e-6)


# model construction -------------------------------------------------------

def test_pairing_validated():
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2),
                  (JumpProcess(SM, 1.0, 1, "dissipative"), JumpProcess(SP, -1.0, 0, "dissipative")), 1.0, 10)
    good = (JumpProcess(SM, 1.0, 1, "dissipative"), JumpProcess(math.exp(-0.5) * SP, -1.0, 0, "dissipative"))
    GateModel(HamiltonianProtocol.zero(2), good, 1.0, 10)


def test_nondissipative_must_be_hermitian():
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2), (JumpProcess(SM),), 1.0, 10)


def test_time_dependent_pairing_checked_at_interior_times():
    # pairing holds at t = 0 and t = tau but breaks in between
    bad = JumpProcess(lambda t: (1 + np.sin(np.pi * t) ** 2) * SP, 0.0, 1, "dissipative")
    partner = JumpProcess(SM, 0.0, 0, "dissipative")
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2), (bad, partner), 1.0, 10)


def test_invalid_model_parameters():
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2), (), 0.0)
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2), (), 1.0, 0)
    with pytest.raises(ValidationError):
        GateModel(HamiltonianProtocol.zero(2), (JumpProcess(np.eye(3)),), 1.0, 10)


def test_thermal_relaxation_structural_check():
    h = -0.5 * SZ  # |1> is the excited state, sigma_- releases one quantum
    pair = (JumpProcess(SM, 1.0, 1, "dissipative"), JumpProcess(math.exp(-0.5) * SP, -1.0, 0, "dissipative"))
    ok, _ = thermal_relaxation_check(model_from_jumps(h, pair, 1.0, 10))
    assert ok
    assert bohr_frequency(h, SM) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        model_from_jumps(0.5 * SX, pair, 1.0, 10, thermal_relaxation=True)
    with pytest.raises(ValidationError):
        model_from_jumps(h, (JumpProcess(SX),), 1.0, 10, thermal_relaxation=True)
    with pytest.raises(ValidationError):  # driven gate can't be flagged
        GateModel(xtheta_protocol(), pair, 10.0, 10, thermal_relaxation=True)


# integration --------------------------------------------------------------

def test_closed_system_matches_unitary(rng):
    p = xtheta_protocol(1.3, 2.0)
    model = GateModel(p, (), 2.0, 500)
    traj = lindblad_evolve(model, np.array([1, 0], dtype=complex))
    psi = model.implemented_unitary @ np.array([1, 0])
    np.testing.assert_allclose(traj.final_state, np.outer(psi, psi.conj()), atol=1e-8)


def test_amplitude_damping_population():
    model = GateModel(HamiltonianProtocol.zero(2), (JumpProcess(SM, 0.0, None, "dissipative"),), 1.0, 2000)
    traj = lindblad_evolve(model, np.array([0, 1], dtype=complex))
    assert traj.final_state[1, 1].real == pytest.approx(math.exp(-1), abs=1e-6)


def test_trajectory_invariants_on_presets():
    for gate in ("xtheta", "cz"):
        model = build_preset(gate, PhysicalParams(tau_us=30.0), 600)
        for psi in HaarSampler(7).states(model.dim, 3):
            states = lindblad_evolve(model, psi).states
            np.testing.assert_allclose(np.trace(states, axis1=1, axis2=2), 1, atol=1e-9)
            np.testing.assert_allclose(states, np.conj(np.swapaxes(states, 1, 2)), atol=1e-9)
            assert np.linalg.eigvalsh(states).min() >= -1e-9


def test_trajectory_invariants_random_models(rng):
    for k in range(50):
        d = int(rng.integers(2, 5))
        model = random_detailed_balance_model(d, rng, driven=bool(k % 2), steps=200)
        psi = HaarSampler(k).states(d, 1)[0]
        traj = lindblad_evolve(model, psi)
        s = traj.states
        assert np.max(np.abs(np.trace(s, axis1=1, axis2=2) - 1)) < 1e-9
        assert np.linalg.eigvalsh(s).min() >= -1e-9
        assert np.all(np.diff(traj.gamma_phi_acc) >= -1e-15)


def test_diverging_integration_is_reported():
    model = GateModel(HamiltonianProtocol.zero(2), (JumpProcess(30 * SX),), 1.0, 2)
    with pytest.raises(IntegrationDiverged):
        lindblad_evolve(model, np.array([1, 0], dtype=complex))


def test_rk4_convergence_order_on_presets():
    for gate in ("xtheta", "cz"):
        params = PhysicalParams(tau_us=50.0)
        psi = HaarSampler(3).states(2 if gate == "xtheta" else 4, 1)[0]
        finals = {n: lindblad_evolve(build_preset(gate, params, n), psi).final_state for n in (25, 50, 100, 2000, 4000)}
        assert trace_distance(finals[2000], finals[4000]) < 1e-7
        e1 = trace_distance(finals[25], finals[4000])
        e2 = trace_distance(finals[50], finals[4000])
        e3 = trace_distance(finals[100], finals[4000])
        for ratio in (e1 / e2, e2 / e3):
            assert 8.0 <= ratio <= 24.0, (gate, ratio)


# frames -------------------------------------------------------------------

def test_frame_equivalence_on_xtheta():
    model = build_preset("xtheta", PhysicalParams(tau_us=20.0), 1000)
    psi = np.array([0.6, 0.8j])
    lab = lindblad_evolve(model, psi, "lab").final_state
    inter = lindblad_evolve(model, psi, "interaction").final_state
    u = model.implemented_unitary
    assert trace_distance(lab, u @ inter @ dag(u)) < 1e-8
    rotated = lindblad_evolve(interaction_frame(model), psi).final_state
    assert trace_distance(rotated, inter) < 1e-9


def test_interaction_frame_trivial_for_zero_hamiltonian():
    model = GateModel(HamiltonianProtocol.zero(2), (JumpProcess(SZ),), 1.0, 10)
    assert interaction_frame(model) is model


def test_interaction_frame_preserves_traces_and_pairing():
    model = build_preset("xtheta", PhysicalParams(tau_us=10.0), 200)
    rot = interaction_frame(model)
    times = model.grid()
    for j, jr in zip(model.jumps, rot.jumps):
        a, b = j.sample(times), jr.sample(times)
        np.testing.assert_allclose(np.einsum("tab,tab->t", a.conj(), a), np.einsum("tab,tab->t", b.conj(), b),
                                   atol=1e-10)
        np.testing.assert_allclose(np.abs(np.trace(a, axis1=1, axis2=2)), np.abs(np.trace(b, axis1=1, axis2=2)),
                                   atol=1e-10)
        assert jr.entropy_weight == j.entropy_weight
    # rotated pair obeys detailed balance too
    l0, l1 = rot.jumps[0].sample(times), rot.jumps[1].sample(times)
    s = rot.jumps[0].entropy_weight
    np.testing.assert_allclose(l0, math.exp(s / 2) * dag(l1), atol=1e-10 * np.abs(l0).max())


def test_density_matrix_input_checks():
    model = GateModel(HamiltonianProtocol.zero(2), (), 1.0, 10)
    with pytest.raises(ValidationError):
        lindblad_evolve(model, np.diag([0.7, 0.7]))
    with pytest.raises(ValidationError):
        lindblad_evolve(model, np.eye(3) / 3)


def test_pauli_string_jump_at_constant():
    j = JumpProcess(pauli_string("XZ"))
    assert j.time_independent
    np.testing.assert_array_equal(j.at(0.3), pauli_string("XZ"))
    validate_pairing(GateModel(HamiltonianProtocol.zero(4), (j,), 1.0, 5))
