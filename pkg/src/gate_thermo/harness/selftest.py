"""Quick invariant checks runnable from the command line."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from ..channel import average_dissipation_mc, average_fidelity, choi_of_model
from ..dynamics import GateModel, HamiltonianProtocol, random_detailed_balance_model, validate_pairing
from ..qcore import HaarSampler, SZ, haar_pair_average, pauli_string
from ..thermo import logmean
from .presets import PhysicalParams, build_preset, cz_hamiltonian, measure_t1_t2, xtheta_drive


def _xtheta_area():
    for tau in (0.3, 10.0, 100.0):
        area, _ = quad(xtheta_drive(math.pi / 2, tau), 0, tau, epsabs=1e-13)
        assert abs(area - math.pi / 2) < 1e-9, area


def _cz_trace():
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    for tau in (1.0, 10.0, 55.0):
        u = expm(-1j * cz_hamiltonian(tau) * tau)
        assert abs(abs(np.trace(u.conj().T @ cz)) - 4) < 1e-8


def _thermal_pair():
    p = PhysicalParams()
    assert abs(p.nbar - 6.2e-6) < 0.1e-6, p.nbar
    x = p.beta * p.omega
    assert abs(math.sqrt((p.nbar + 1) / p.nbar) - math.exp(x / 2)) < 1e-6 * math.exp(x / 2)
    validate_pairing(build_preset("xtheta", p))


def _closed_system():
    model = GateModel(HamiltonianProtocol.constant(0.7 * pauli_string("X")), (), 1.3, 400)
    f = average_fidelity(choi_of_model(model), model.target_unitary).value
    assert abs(f - 1) < 1e-10, f


def _channel_and_second_law():
    for gate in ("xtheta", "cz"):
        model = build_preset(gate, PhysicalParams(tau_us=20.0), 500)
        ch = choi_of_model(model)
        assert ch.completeness_error() < 1e-7
        est = average_dissipation_mc(model, 50, HaarSampler(1), ch)
        assert est.records["sigma_phi"].min() >= -1e-8


def _t1_t2():
    t1, t2 = measure_t1_t2(PhysicalParams(), steps=2000)
    assert abs(t1 / t2 / math.sqrt(2) - 1) < 0.02, t1 / t2


def _logmean():
    assert logmean(2.0, 2.0) == 2.0 and logmean(2.0, 0.0) == 0.0
    assert abs(logmean(math.e, 1.0) - (math.e - 1)) < 1e-14


def _pair_average():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    psis = HaarSampler(4).states(2, 20_000)
    mc = np.einsum("ni,ij,nj,nk,kl,nl->n", psis.conj(), x, psis, psis.conj(), SZ, psis)
    se = np.std(mc) / math.sqrt(len(mc))
    assert abs(np.mean(mc) - haar_pair_average(x, SZ)) < 5 * se


def _random_pairing():
    rng = np.random.default_rng(5)
    for _ in range(5):
        validate_pairing(random_detailed_balance_model(3, rng))


CHECKS: dict[str, Callable[[], None]] = {
    "xtheta pulse area": _xtheta_area,
    "cz propagator": _cz_trace,
    "thermal pair": _thermal_pair,
    "closed system fidelity": _closed_system,
    "kraus completeness and second law": _channel_and_second_law,
    "T1 = sqrt(2) T2": _t1_t2,
    "logarithmic mean": _logmean,
    "haar pair average": _pair_average,
    "detailed balance generator": _random_pairing,
}


def run_selftest(out=print) -> int:
    """Run every check, print PASS/FAIL lines, return the number of failures."""
    failed = 0
    for name, check in CHECKS.items():
        try:
            check()
            out(f"PASS {name}")
        except Exception as exc:  # report and keep going
            failed += 1
            out(f"FAIL {name}: {type(exc).__name__}: {exc}")
    out(f"{len(CHECKS) - failed}/{len(CHECKS)} checks passed")
    return failed
