import math

import numpy as np
import pytest
from scipy.linalg import expm

from cfsupp.channels import SIGMA, apply_kraus, noisy_bell, thermal_channel
from cfsupp.codes import binomial_code, cat_code
from cfsupp.communication import (
    CommConfig,
    Herald,
    closed_form_p_outcomes,
    closed_form_p_succ_comm,
    heralded_comm_terms,
    make_comm_runner,
    run_communication,
    teleportation_baseline,
    teleportation_simulate,
)
from cfsupp.fock import FockSpace, dm, max_abs
from cfsupp.haar import two_design_states
from cfsupp.suppression import (
    SuppressionConfig,
    average_fidelity,
    average_success,
    closed_form_p_succ,
    make_heralded_runner,
)

SP = FockSpace(60)
RNG = np.random.default_rng(17)


def thermal_for(code, eta, nbar, target=1e-10):
    w = np.diag(code.codespace_identity).real
    return thermal_channel(eta, nbar, code.space, l_max=None, k_max=None,
                           occupied_diag=w, defect_target=target)


def test_comm_matches_brute_force_pipeline():
    n = 20
    sp = FockSpace(n)
    eta, nbar, p = 0.06, 0.4, 0.15
    ch = thermal_channel(eta, nbar, sp, 8, 8)
    cfg = CommConfig(bell_noise_p=p, cv_noise=ch)

    nvec = np.arange(n)
    sx = SIGMA["x"]
    u1 = expm(1j * (math.pi / 2) * np.kron(np.diag(nvec).astype(complex), np.kron(sx, np.eye(2))))
    u2 = expm(-1j * (math.pi / 2) * np.kron(np.diag(nvec).astype(complex), np.kron(np.eye(2), sx)))
    rng = np.random.default_rng(0)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    rho /= np.trace(rho)

    big = np.kron(rho, noisy_bell(p))
    big = u1 @ big @ u1.conj().T
    lifted = [np.kron(k, np.eye(4)) for k in ch.terms]
    big = apply_kraus(lifted, big)
    big = u2 @ big @ u2.conj().T
    t = big.reshape(n, 2, 2, n, 2, 2)
    for outcome, (q1, q2) in (("00", (0, 0)), ("11", (1, 1))):
        brute = t[:, q1, q2, :, q1, q2]
        fast = apply_kraus(heralded_comm_terms(cfg, sp, outcome), rho)
        assert max_abs(brute - fast) < 1e-12


def test_zero_damping_equals_single_party():
    code = binomial_code(2, 4, SP)
    ch = thermal_for(code, 0.05, 0.5)
    comm = make_comm_runner(CommConfig(0.0, Herald.BOTH_00_AND_11, ch), SP)
    single = make_heralded_runner(ch, SuppressionConfig(), SP, code.parity)
    rng = np.random.default_rng(8)
    for _ in range(3):
        v1 = rng.normal(size=60) + 1j * rng.normal(size=60)
        v2 = rng.normal(size=60) + 1j * rng.normal(size=60)
        dyad = np.outer(v1, v2.conj()) / (np.linalg.norm(v1) * np.linalg.norm(v2))
        assert max_abs(comm(dyad) - single(dyad)) < 1e-10


def test_noiseless_outcomes_split_evenly():
    # the Phi+ resource makes the two agreeing outcomes equally likely; each
    # branch returns the input state untouched (matches the SM closed form,
    # p00 = 1/2 at eta = p = 0)
    code = binomial_code(2, 4, SP)
    rho = dm(code.ket0)
    out, probs = run_communication(rho, CommConfig(), SP)
    assert probs["00"] == pytest.approx(0.5, abs=1e-12)
    assert probs["11"] == pytest.approx(0.5, abs=1e-12)
    assert max_abs(out - rho) < 1e-12
    only = run_communication(rho, CommConfig(herald=Herald.ONLY_00), SP)[0]
    assert max_abs(only - rho) < 1e-12


def test_eq3_reduces_to_eq2_at_zero_damping():
    for code in (binomial_code(2, 4, SP), cat_code(6, 1.916, SP)):
        for eta, nbar in ((0.03, 0.2), (0.08, 0.9)):
            assert closed_form_p_succ_comm(code, eta, nbar, 0.0) == pytest.approx(
                closed_form_p_succ(code, eta, nbar), abs=1e-14
            )


def test_outcome_probabilities_sum_to_eq3():
    code = binomial_code(2, 4, SP)
    for eta in (0.02, 0.05, 0.1):
        for nbar in (0.0, 0.5, 1.0):
            for p in (0.1, 0.3, 0.6):
                p00, p11 = closed_form_p_outcomes(code, eta, nbar, p)
                both = closed_form_p_succ_comm(code, eta, nbar, p)
                assert p00 + p11 == pytest.approx(both, abs=1e-12)


def test_simulated_success_matches_closed_form():
    code = binomial_code(2, 4, SP)
    eta, nbar, p = 0.05, 0.5, 0.2
    ch = thermal_for(code, eta, nbar)
    for herald, expected in (
        (Herald.BOTH_00_AND_11, closed_form_p_succ_comm(code, eta, nbar, p)),
        (Herald.ONLY_00, closed_form_p_outcomes(code, eta, nbar, p)[0]),
    ):
        runner = make_comm_runner(CommConfig(p, herald, ch), SP)
        assert average_success(code, runner) == pytest.approx(expected, abs=1e-8)


def test_herald_00_only_helps_like_parity_fidelity():
    code = binomial_code(2, 4, SP)
    ch = thermal_for(code, 0.05, 0.5)
    f00, _ = average_fidelity(code, make_comm_runner(CommConfig(0.1, Herald.ONLY_00, ch), SP))
    fboth, _ = average_fidelity(
        code, make_comm_runner(CommConfig(0.1, Herald.BOTH_00_AND_11, ch), SP)
    )
    assert f00 >= fboth - 1e-12


def test_teleportation_closed_form_points():
    assert teleportation_baseline(0.0) == 1.0
    assert teleportation_baseline(0.3) == pytest.approx(0.76, abs=1e-15)


def test_teleportation_simulation_matches_formula():
    # per-state fidelity is quadratic in rho, so the six-state average is the
    # exact Haar average
    for p in (0.1, 0.5, 0.9):
        fids = []
        for c in two_design_states():
            rho = np.outer(c, c.conj())
            out = teleportation_simulate(rho, p)
            assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
            fids.append(float(np.trace(rho @ out).real))
        assert np.mean(fids) == pytest.approx(teleportation_baseline(p), abs=1e-12)


def test_per_state_teleportation_fidelity():
    # tr(rho_in rho_out) = 1 - p + p^2 - 2 p^2 rho00 (1 - rho00)
    p = 0.37
    rng = np.random.default_rng(4)
    for _ in range(5):
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        c /= np.linalg.norm(c)
        rho = np.outer(c, c.conj())
        out = teleportation_simulate(rho, p)
        got = float(np.trace(rho @ out).real)
        r00 = float(rho[0, 0].real)
        assert got == pytest.approx(1 - p + p * p - 2 * p * p * r00 * (1 - r00), abs=1e-12)


def test_damping_resilience_ordering_and_crossover():
    bin24 = binomial_code(2, 4, SP)
    cat6 = cat_code(6, 1.916, SP)
    eta, nbar = 0.05, 0.5
    drops = {}
    for code in (bin24, cat6):
        ch = thermal_for(code, eta, nbar)
        f0, _ = average_fidelity(code, make_comm_runner(CommConfig(0.0, Herald.BOTH_00_AND_11, ch), SP))
        f3, _ = average_fidelity(code, make_comm_runner(CommConfig(0.3, Herald.BOTH_00_AND_11, ch), SP))
        drops[code.name] = f0 - f3
    assert drops["bin"] < drops["cat"]
    assert drops["bin"] < 1.0 - teleportation_baseline(0.3)

    # teleportation needs high-quality pairs: the suppressed channel overtakes
    # it well below p = 0.5
    ch = thermal_for(bin24, eta, nbar)
    crossover = None
    for p in np.arange(0.0, 0.5, 0.05):
        f, _ = average_fidelity(bin24, make_comm_runner(CommConfig(float(p), Herald.BOTH_00_AND_11, ch), SP))
        if f > teleportation_baseline(float(p)):
            crossover = float(p)
            break
    assert crossover is not None and crossover < 0.5
