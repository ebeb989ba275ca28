import math

import numpy as np
import pytest
from scipy.linalg import expm

from cfsupp.channels import (
    amp_channel,
    depolarizing,
    loss_channel,
    qubit_damping,
    thermal_channel,
)
from cfsupp.codes import Parity, binomial_code, cat_code, code_from_kets
from cfsupp.fock import FockSpace, dm, fock_ket, max_abs, number, annihilation
from cfsupp.suppression import (
    GateNoise,
    QuadratureNotConverged,
    SuppressionConfig,
    Variant,
    VariantParityMismatch,
    _conditioned_terms,
    _pipeline_runner,
    average_fidelity,
    average_success,
    axis_sigma,
    closed_form_F_supp,
    closed_form_F_unsupp,
    closed_form_p_succ,
    herald_amplitude,
    hybrid_entangled_ket,
    hybrid_entangled_suppression,
    make_heralded_runner,
    run_suppression,
    suppression_unitary,
)

SP = FockSpace(40)
CFG = SuppressionConfig()
RNG = np.random.default_rng(99)


def random_code_state(code, rng=RNG):
    c = rng.normal(size=2) + 1j * rng.normal(size=2)
    c /= np.linalg.norm(c)
    return c[0] * code.ket0 + c[1] * code.ket1


def thermal_for(code, eta, nbar, target=1e-10):
    w = np.diag(code.codespace_identity).real
    return thermal_channel(eta, nbar, code.space, l_max=None, k_max=None,
                           occupied_diag=w, defect_target=target)


def test_unitary_trivial_and_unitarity():
    u0 = suppression_unitary(0.0, (1, 0, 0), SP)
    assert max_abs(u0 - np.eye(80)) < 1e-14
    u = suppression_unitary(0.7, (0.6, 0.8, 0.0), SP)
    assert max_abs(u @ u.conj().T - np.eye(80)) < 1e-12


def test_unitary_matches_matrix_exponential():
    sp = FockSpace(12)
    theta, axis = 0.83, (0.6, 0.0, 0.8)
    gen = np.kron(np.diag(sp.levels()).astype(complex), axis_sigma(axis))
    ref = expm(1j * theta * gen)
    assert max_abs(suppression_unitary(theta, axis, sp) - ref) < 1e-12


def test_cf_unitary_zero_block_is_cosine():
    u = suppression_unitary(math.pi / 2, (1, 0, 0), SP)
    blk = u.reshape(40, 2, 40, 2)[:, 0, :, 0]
    cos_diag = np.diag(np.cos(math.pi * SP.levels() / 2))
    assert max_abs(blk - cos_diag) < 1e-14


def test_herald_amplitude_parity_filter():
    for delta in (-2, -1, 0, 1, 2):
        got = abs(herald_amplitude(delta)) ** 2
        assert got == pytest.approx(1.0 if delta % 2 == 0 else 0.0, abs=1e-30)


def test_cf_config_guards():
    with pytest.raises(ValueError):
        SuppressionConfig(axis=(0.0, 0.0, 1.0))  # axis along z in CF mode
    with pytest.raises(ValueError):
        SuppressionConfig(axis=(1.0, 1.0, 0.0))  # not a unit vector
    SuppressionConfig(theta=0.3, axis=(0.0, 0.0, 1.0))  # fine away from CF


def test_noiseless_passthrough():
    code = binomial_code(2, 4, SP)
    rho = dm(random_code_state(code))
    out, p = run_suppression(rho, None, CFG, SP)
    assert p == pytest.approx(1.0, abs=1e-12)
    assert max_abs(out - rho) < 1e-12


def test_vacuum_is_loss_proof():
    rho = dm(fock_ket(SP, 0))
    out, p = run_suppression(rho, loss_channel(0.3, SP), CFG, SP)
    assert p == pytest.approx(1.0, abs=1e-12)
    assert max_abs(out - rho) < 1e-12


def test_parity_selection_kills_odd_pairings():
    eta, nbar = 0.05, 0.5
    gain, mu = 1 + eta * nbar, 1 - (1 - eta) / (1 + eta * nbar)
    lch = loss_channel(mu, SP, 6)
    ach = amp_channel(gain, SP, 6)
    eye2 = [np.eye(2, dtype=complex)]
    code = binomial_code(2, 4, SP)
    cl = code.codespace_identity
    for l in range(7):
        for k in range(7):
            if (l - k) % 2 == 0:
                continue
            pair = [ach.terms[k] @ lch.terms[l]]
            ts = _conditioned_terms(pair, eye2, CFG, SP, None)
            weight = sum(float(np.trace(t @ cl @ t.conj().T).real) for t in ts)
            assert weight < 1e-12
            assert all(max_abs(t) < 1e-12 for t in ts)


def test_fast_path_matches_pipeline():
    code = binomial_code(2, 4, SP)
    ch = thermal_channel(0.06, 0.4, SP, 10, 10)
    cfg = SuppressionConfig(dv_noise=qubit_damping(0.17, "composite"))
    fast = make_heralded_runner(ch, cfg, SP, code.parity)
    slow = _pipeline_runner(ch, cfg, SP, code.parity)
    rho = dm(random_code_state(code))
    assert max_abs(fast(rho) - slow(rho)) < 1e-12


def test_per_state_fidelity_expansion():
    # SM-style second-order per-state fidelity for |+>; the remainder of the
    # closed form is third order in eta
    code = binomial_code(2, 4, FockSpace(60))
    sp = code.space
    psi = (code.ket0 + code.ket1) / math.sqrt(2)
    nmat = number(sp).mat
    a2 = annihilation(sp).mat @ annihilation(sp).mat
    n1 = float(np.real(psi.conj() @ nmat @ psi))
    n2 = float(np.real(psi.conj() @ nmat @ nmat @ psi))
    a2v = complex(psi.conj() @ a2 @ psi)
    nbar = 0.5
    diffs = []
    etas = (0.01, 0.02, 0.04)
    for eta in etas:
        braces = (
            nbar**2
            + 3 * (nbar + 0.5) ** 2 * n2
            + (nbar**2 - nbar - 0.5) * n1
            - (0.25 + 2 * nbar * (1 + nbar)) * n1**2
            - (0.5 + nbar + nbar**2) * abs(a2v) ** 2
        )
        expected = 1 - eta**2 * braces
        out, p = run_suppression(dm(psi), thermal_for(code, eta, nbar), CFG, sp)
        got = float(np.real(psi.conj() @ out @ psi))
        diffs.append(abs(got - expected))
        assert abs(got - expected) < 100 * eta**3
    slope = np.polyfit(np.log(etas), np.log(diffs), 1)[0]
    assert slope > 2.7


@pytest.mark.parametrize("make", [
    lambda: binomial_code(2, 4, SP),
    lambda: cat_code(4, 2.0, SP),  # like-even four-component cat
])
def test_like_parity_damping_invariance_exact(make):
    code = make()
    ch = thermal_for(code, 0.05, 0.5)
    base_runner = make_heralded_runner(ch, CFG, SP, code.parity)
    f0, _ = average_fidelity(code, base_runner)
    p0 = average_success(code, base_runner)
    for p in (0.1, 0.3):
        cfg = SuppressionConfig(dv_noise=qubit_damping(p, "composite"))
        runner = make_heralded_runner(ch, cfg, SP, code.parity)
        f, _ = average_fidelity(code, runner)
        assert abs(f - f0) < 1e-10
        assert abs(average_success(code, runner) - p0) < 1e-10


def test_like_odd_damping_invariance_with_flipped_ancilla():
    code = code_from_kets("oddpair", SP, fock_ket(SP, 1), fock_ket(SP, 3))
    assert code.parity is Parity.LIKE_ODD
    ch = thermal_for(code, 0.05, 0.5)
    f0, _ = average_fidelity(code, make_heralded_runner(ch, CFG, SP, code.parity))
    cfg = SuppressionConfig(dv_noise=qubit_damping(0.3, "composite"))
    f, _ = average_fidelity(code, make_heralded_runner(ch, cfg, SP, code.parity))
    assert abs(f - f0) < 1e-10


def test_opposite_parity_code_degrades_with_damping():
    code = cat_code(6, 1.916, FockSpace(60))
    ch = thermal_for(code, 0.05, 0.5)
    fids = []
    for p in (0.0, 0.1, 0.3):
        cfg = SuppressionConfig(dv_noise=qubit_damping(p, "composite") if p else None)
        fids.append(average_fidelity(code, make_heralded_runner(ch, cfg, code.space, code.parity))[0])
    assert fids[0] > fids[1] > fids[2]


def test_variant_equivalence_like_parity():
    even = binomial_code(2, 4, SP)
    odd = code_from_kets("oddpair", SP, fock_ket(SP, 1), fock_ket(SP, 3))
    for code in (even, odd):
        ch = thermal_channel(0.05, 0.5, SP, 12, 12)
        cfg_two = SuppressionConfig(dv_noise=qubit_damping(0.2, "composite"))
        cfg_loc = SuppressionConfig(
            dv_noise=qubit_damping(0.2, "composite"),
            variant=Variant.LOCAL_ROTATION_PLUS_ONE_CF,
        )
        rho = dm(random_code_state(code))
        out1, p1 = run_suppression(rho, ch, cfg_two, SP, code.parity)
        out2, p2 = run_suppression(rho, ch, cfg_loc, SP, code.parity)
        assert abs(p1 - p2) < 1e-10
        assert max_abs(out1 - out2) < 1e-10


def test_variant_parity_guards():
    cat2 = cat_code(2, 2.0, SP)
    cfg_loc = SuppressionConfig(variant=Variant.LOCAL_ROTATION_PLUS_ONE_CF)
    with pytest.raises(VariantParityMismatch):
        make_heralded_runner(None, cfg_loc, SP, cat2.parity)
    runner = make_heralded_runner(None, cfg_loc, SP, None)
    with pytest.raises(VariantParityMismatch):
        runner(dm(random_code_state(cat2)))  # mixed-parity support
    even_rho = dm(fock_ket(SP, 2))
    assert max_abs(runner(even_rho) - even_rho) < 1e-12


def test_average_fidelity_noiseless_and_mc_crosscheck():
    code = binomial_code(2, 4, SP)
    runner = make_heralded_runner(None, CFG, SP, code.parity)
    f, err = average_fidelity(code, runner)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert err < 1e-8

    ch = thermal_for(code, 0.05, 0.5)
    noisy = make_heralded_runner(ch, CFG, SP, code.parity)
    fq, _ = average_fidelity(code, noisy)
    fmc, em = average_fidelity(code, noisy, method="monte-carlo", mc_samples=200_000, mc_seed=5)
    assert abs(fq - fmc) < 4 * em


def test_average_success_matches_closed_form():
    for code in (binomial_code(2, 4, SP), cat_code(2, 2.0, SP)):
        for eta, nbar in ((0.05, 0.5), (0.1, 1.0)):
            ch = thermal_for(code, eta, nbar)
            ps = average_success(code, make_heralded_runner(ch, CFG, SP, code.parity))
            assert ps == pytest.approx(closed_form_p_succ(code, eta, nbar), abs=1e-8)
            if eta * (1 + nbar) < 0.5:
                assert ps > 0.5


def test_closed_form_trivial_limits():
    code = binomial_code(2, 4, SP)
    assert closed_form_F_supp(code, 0.0, 0.7) == 1.0
    assert closed_form_F_unsupp(code, 0.0, 0.7) == 1.0
    assert closed_form_p_succ(code, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_hand_value_trivial_qubit():
    # bin(1,1): all traces computable by hand
    code = binomial_code(1, 1, SP)
    eta, nbar = 0.03, 0.4
    braces = (
        nbar**2
        + 3 * (nbar + 0.5) ** 2 / 2
        + (nbar**2 - nbar - 0.5) / 2
        - (1 / 6 + 4 * (nbar**2 + nbar) / 3) / 2
    )
    assert closed_form_F_supp(code, eta, nbar) == pytest.approx(1 - eta**2 * braces, abs=1e-14)


def test_unsuppressed_cross_terms_vanish_for_like_parity():
    code = binomial_code(2, 4, SP)
    nbar = 0.5
    m1 = 4.0
    assert closed_form_F_unsupp(code, 0.05, nbar) == pytest.approx(
        1 - 0.05 * (nbar + (1 + 2 * nbar) * m1), abs=1e-10
    )
    # opposite-parity cat(2,2) keeps them: strictly smaller linear penalty
    cat2 = cat_code(2, 2.0, SP)
    n1 = float(np.trace(cat2.codespace_identity @ number(SP).mat).real)
    assert closed_form_F_unsupp(cat2, 0.05, nbar) > 1 - 0.05 * (nbar + (1 + 2 * nbar) * n1)


def test_gate_noise_pipeline():
    code = binomial_code(2, 4, SP)
    cfg = SuppressionConfig(gate_noise=GateNoise(0.01, 0.01))
    rho = dm(random_code_state(code))
    out, p = run_suppression(rho, None, cfg, SP, code.parity)
    assert 0.5 < p < 1.0  # gate noise alone already costs acceptance rate
    fid = float(np.real(np.trace(rho @ out)))
    assert 0.8 < fid < 1.0
    # local-rotation variant spends one fewer noisy entangling gate
    cfg_loc = SuppressionConfig(
        gate_noise=GateNoise(0.01, 0.01), variant=Variant.LOCAL_ROTATION_PLUS_ONE_CF
    )
    out2, p2 = run_suppression(rho, None, cfg_loc, SP, code.parity)
    fid2 = float(np.real(np.trace(rho @ out2)))
    assert fid2 > fid


def test_depolarizing_degrades_smoothly():
    code = binomial_code(2, 4, SP)
    ch = thermal_for(code, 0.05, 0.5)
    fids = []
    for e in (0.0, 0.05, 0.1):
        cfg = SuppressionConfig(dv_noise=depolarizing(e) if e else None)
        fids.append(average_fidelity(code, make_heralded_runner(ch, cfg, SP, code.parity))[0])
    assert fids[0] > fids[1] > fids[2]
    assert fids[2] > 0.9  # still far from catastrophic


def test_depolarizing_hurts_cf_less_than_optimized_baseline():
    # uncalibrated depolarizing ordering: the sequence optimized at p = 0
    # loses more fidelity than the code-agnostic CF interferometer
    from conftest import IMPROVED_DEPTH3_X
    from cfsupp.optimize import GateSequence, make_sequence_runner

    code = binomial_code(2, 4, SP)
    ch = thermal_channel(0.05, 0.5, SP, 11, 11)
    seq = GateSequence.from_vector(3, IMPROVED_DEPTH3_X)
    for p in (0.05, 0.1):
        dv = depolarizing(p)
        cfg = SuppressionConfig(dv_noise=dv)
        f_cf, _ = average_fidelity(code, make_heralded_runner(ch, cfg, SP, code.parity))
        f_opt, _ = average_fidelity(code, make_sequence_runner(seq, ch, dv, SP))
        assert f_cf >= f_opt


def test_hybrid_entangled_noiseless_and_dyad_transform():
    sp = FockSpace(40)
    out, p = hybrid_entangled_suppression(2.0, -2.0, +1, None, CFG, sp)
    ket = hybrid_entangled_ket(2.0, -2.0, +1, sp)
    assert p == pytest.approx(1.0, abs=1e-12)
    assert float(np.real(ket.conj() @ out.matrix @ ket)) == pytest.approx(1.0, abs=1e-12)

    # l = 1 loss Kraus conjugated by U_s equals K_1 (x) exp(i theta n.sigma)
    k1 = loss_channel(0.1, sp, 2).terms[1]
    u = suppression_unitary(math.pi / 2, (1, 0, 0), sp)
    lhs = u.conj().T @ np.kron(k1, np.eye(2)) @ u
    rot = expm(1j * math.pi / 2 * axis_sigma((1, 0, 0)))
    assert max_abs(lhs - np.kron(k1, rot)) < 1e-12


def test_quadrature_failure_surfaces():
    code = binomial_code(2, 4, SP)
    runner = make_heralded_runner(thermal_for(code, 0.05, 0.5), CFG, SP, code.parity)
    with pytest.raises(QuadratureNotConverged):
        average_fidelity(code, runner, tol=1e-18, max_order=16)
