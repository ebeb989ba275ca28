"""Single-ancilla noise suppression with conditional rotation gates.

The protocol: encode -> U_s -> noise slab (CV noise, optional ancilla noise)
-> U_s† -> herald on the ancilla.  At the conditional-Fourier point
(theta = pi/2, axis perpendicular to z) the herald kills every noise Kraus
pairing that flips the photon-number parity, pushing the infidelity from
O(eta) to O(eta^2).

The heralded map is linear in the input, so Haar averages over encoded qubit
states reduce to the map's action on the four logical dyads; the fidelity is
then a cheap rational function on the Bloch sphere, integrated by adaptive
product quadrature.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channels import (
    KrausChannel,
    KrausMap,
    SIGMA,
    apply,
    apply_kraus,
    loss_channel,
    qubit_damping,
)
from .codes import BosonicCode, Parity
from .fock import (
    FockError,
    FockSpace,
    HybridState,
    annihilation,
    dm,
    max_abs,
    number,
    project_qubits,
    tensor,
)
from .haar import two_design_states

KET0 = np.array([1.0, 0.0], dtype=complex)
DEFAULT_AXIS = (1.0, 0.0, 0.0)
GATE_NOISE_LOSS_ORDER = 8


class VariantParityMismatch(FockError):
    """The simplified (local-rotation) variant needs a like-parity input."""


class QuadratureNotConverged(FockError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class Variant(enum.Enum):
    TWO_CF = "two-cf"
    LOCAL_ROTATION_PLUS_ONE_CF = "local-rotation+one-cf"


@dataclass(frozen=True)
class GateNoise:
    """Imperfect conditional gates: CV loss and ancilla composite damping
    applied after every entangling gate."""

    cv_loss: float = 0.01
    dv_damp: float = 0.01


@dataclass(frozen=True)
class SuppressionConfig:
    theta: float = math.pi / 2
    axis: tuple = DEFAULT_AXIS
    ancilla_init: tuple | None = None
    variant: Variant = Variant.TWO_CF
    dv_noise: KrausChannel | None = None
    gate_noise: GateNoise | None = None

    def __post_init__(self):
        n = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit vector")
        if abs(self.theta - math.pi / 2) < 1e-12 and abs(n[2]) > 1e-12:
            raise ValueError("CF configuration requires the axis perpendicular to z")
        if self.variant is Variant.LOCAL_ROTATION_PLUS_ONE_CF and abs(
            self.theta - math.pi / 2
        ) > 1e-12:
            raise ValueError("the local-rotation variant is defined at theta = pi/2")


def axis_sigma(axis) -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    return n[0] * SIGMA["x"] + n[1] * SIGMA["y"] + n[2] * SIGMA["z"]


def suppression_unitary(theta: float, axis, space: FockSpace) -> np.ndarray:
    """exp(i theta a†a (n.sigma)) on CV (x) qubit, built spectrally."""
    ns = space.levels()
    s = axis_sigma(axis)
    return np.kron(np.diag(np.cos(theta * ns)).astype(complex), np.eye(2)) + np.kron(
        np.diag(1j * np.sin(theta * ns)), s
    )


def herald_amplitude(delta: int, theta: float = math.pi / 2, axis=DEFAULT_AXIS,
                     anc=KET0, herald=None) -> complex:
    """<herald| exp(i theta delta (n.sigma)) |anc> for a Kraus pairing with
    net photon-number change delta = l - k."""
    if herald is None:
        herald = anc
    m = math.cos(theta * delta) * np.eye(2) + 1j * math.sin(theta * delta) * axis_sigma(axis)
    return complex(np.asarray(herald).conj() @ m @ np.asarray(anc))


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def _resolve_kets(config: SuppressionConfig, parity: Parity | None):
    """(prep ket, herald ket, local pre-rotation?) for the chosen variant."""
    s = axis_sigma(config.axis)
    if config.ancilla_init is not None:
        anc = _normalize(config.ancilla_init)
    elif parity is Parity.LIKE_ODD:
        anc = _normalize(s @ KET0)
    else:
        anc = KET0
    if config.variant is Variant.TWO_CF:
        return anc, anc
    if parity is Parity.OPPOSITE:
        raise VariantParityMismatch(
            "local-rotation variant needs like-parity codewords"
        )
    if parity is None:
        raise VariantParityMismatch(
            "local-rotation variant needs a known input parity"
        )
    # During the noise slab the two-CF protocol holds the ancilla in the
    # state U_s maps it to; prepare that state directly.
    prep = _normalize(s @ anc) if parity is Parity.LIKE_ODD else anc
    return prep, anc


def _state_parity(rho: np.ndarray) -> Parity:
    """Definite parity sector of a CV operator's support, or raise."""
    w = np.abs(rho)
    total = float(w.sum())
    even = np.zeros(rho.shape[0], dtype=bool)
    even[0::2] = True
    w_even = float(w[np.ix_(even, even)].sum())
    w_odd = float(w[np.ix_(~even, ~even)].sum())
    if total - w_even < 1e-12 * max(total, 1.0):
        return Parity.LIKE_EVEN
    if total - w_odd < 1e-12 * max(total, 1.0):
        return Parity.LIKE_ODD
    raise VariantParityMismatch("input state is not supported on one parity sector")


def _conditioned_terms(cv_terms, dv_terms, config: SuppressionConfig,
                       space: FockSpace, parity: Parity | None) -> list:
    """Heralded CV Kraus terms <h| U_post (K (x) D) U_pre |prep>.

    Uses the spectral form U_s = sum_s exp(i s theta a†a) (x) P_s, which
    reduces each term to phase-scalings of K: O(N^2) apiece.
    """
    prep, herald = _resolve_kets(config, parity)
    s_op = axis_sigma(config.axis)
    projs = {+1: (np.eye(2) + s_op) / 2.0, -1: (np.eye(2) - s_op) / 2.0}
    ns = space.levels()
    phases = {s: np.exp(1j * s * config.theta * ns) for s in (+1, -1)}
    local = config.variant is Variant.LOCAL_ROTATION_PLUS_ONE_CF
    rot = np.exp(1j * (math.pi / 2) * ns) if local else None
    out = []
    for k in cv_terms:
        for d in dv_terms:
            t = np.zeros_like(k)
            for s_post in (+1, -1):
                row = phases[-s_post]
                if local:
                    chi = complex(herald.conj() @ projs[s_post] @ d @ prep)
                    if abs(chi) > 0.0:
                        t = t + chi * (row[:, None] * k * rot[None, :])
                else:
                    for s_pre in (+1, -1):
                        chi = complex(
                            herald.conj() @ projs[s_post] @ d @ projs[s_pre] @ prep
                        )
                        if abs(chi) > 0.0:
                            t = t + chi * (row[:, None] * k * phases[s_pre][None, :])
            if max_abs(t) > 0.0:
                out.append(t)
    return out


def _pipeline_runner(cv_noise, config: SuppressionConfig, space: FockSpace,
                     parity: Parity | None):
    """Reference implementation: explicit hybrid-state evolution.

    Handles per-gate noise; used whenever gate_noise is set.
    """
    prep, herald = _resolve_kets(config, parity)
    u_s = suppression_unitary(config.theta, config.axis, space)
    local = config.variant is Variant.LOCAL_ROTATION_PLUS_ONE_CF
    if local:
        pre = np.kron(np.diag(np.exp(1j * (math.pi / 2) * space.levels())), np.eye(2))
    else:
        pre = u_s
    post = u_s.conj().T
    gn = config.gate_noise
    gate_cv = loss_channel(gn.cv_loss, space, GATE_NOISE_LOSS_ORDER) if gn else None
    gate_dv = qubit_damping(gn.dv_damp, "composite") if gn else None

    def runner(rho: np.ndarray) -> np.ndarray:
        st = HybridState(space, 1, np.kron(rho, dm(prep)))
        st = HybridState(space, 1, pre @ st.matrix @ pre.conj().T)
        if gn and not local:  # the local rotation is not an entangling gate
            st = apply(gate_cv, st, "cv")
            st = apply(gate_dv, st, "qubit0")
        if cv_noise is not None:
            st = apply(cv_noise, st, "cv")
        if config.dv_noise is not None:
            st = apply(config.dv_noise, st, "qubit0")
        st = HybridState(space, 1, post @ st.matrix @ post.conj().T)
        if gn:
            st = apply(gate_cv, st, "cv")
            st = apply(gate_dv, st, "qubit0")
        return project_qubits(st, herald).matrix

    return runner


def make_heralded_runner(cv_noise: KrausChannel | None, config: SuppressionConfig,
                         space: FockSpace, parity: Parity | None = None):
    """Linear map rho_CV -> unnormalized heralded CV output."""
    if config.variant is Variant.LOCAL_ROTATION_PLUS_ONE_CF and parity is None:
        def deferred(rho):
            return make_heralded_runner(cv_noise, config, space, _state_parity(rho))(rho)

        return deferred
    if config.gate_noise is not None:
        return _pipeline_runner(cv_noise, config, space, parity)
    cv_terms = cv_noise.terms if cv_noise is not None else (np.eye(space.dim, dtype=complex),)
    dv_terms = config.dv_noise.terms if config.dv_noise is not None else (np.eye(2, dtype=complex),)
    return KrausMap(_conditioned_terms(cv_terms, dv_terms, config, space, parity))


def run_suppression(rho_in: np.ndarray, cv_noise: KrausChannel | None,
                    config: SuppressionConfig, space: FockSpace,
                    parity: Parity | None = None):
    """Run the interferometer on a unit-trace CV state.

    Returns (normalized output, herald probability).
    """
    out = make_heralded_runner(cv_noise, config, space, parity)(np.asarray(rho_in, dtype=complex))
    p = float(np.trace(out).real)
    return out / p, p


def make_unsuppressed_runner(cv_noise: KrausChannel):
    """Bare channel application; the no-interferometer baseline."""

    def runner(rho: np.ndarray) -> np.ndarray:
        return apply_kraus(cv_noise.terms, rho)

    return runner


# ---------------------------------------------------------------------------
# Haar averages over encoded qubit states


def dyad_images(code: BosonicCode, runner) -> np.ndarray:
    """(2, 2, N, N) array of runner(|mu_L><nu_L|)."""
    k0, k1 = code.kets()
    kets = (k0, k1)
    n = code.space.dim
    dyad = getattr(runner, "dyad", None)
    out = np.empty((2, 2, n, n), dtype=complex)
    for mu in range(2):
        for nu in range(2):
            if dyad is not None:
                out[mu, nu] = dyad(kets[mu], kets[nu])
            else:
                out[mu, nu] = runner(np.outer(kets[mu], kets[nu].conj()))
    return out


def fidelity_tensors(code: BosonicCode, images: np.ndarray):
    """Compress dyad images to the codespace: T[mu,nu,sig,tau], t[mu,nu]."""
    k0, k1 = code.kets()
    basis = np.stack([k0, k1], axis=1)
    t_full = np.einsum("is,mnij,jt->mnst", basis.conj(), images, basis)
    traces = np.einsum("mnii->mn", images)
    return t_full, traces


@lru_cache(maxsize=32)
def _leggauss_cached(order: int):
    return np.polynomial.legendre.leggauss(order)


def _fidelity_on_grid(t_full, traces, c0, c1):
    """Heralded fidelity (num/den) for arrays of amplitudes c0, c1."""
    c = np.stack([c0, c1], axis=-1)
    w = c[..., :, None] * c.conj()[..., None, :]  # rho_L[mu, nu]
    num = np.einsum("...mn,...s,mnst,...t->...", w, c.conj(), t_full, c)
    den = np.einsum("...mn,mn->...", w, traces)
    return num.real / den.real, den.real


def average_fidelity(code: BosonicCode, runner, tol: float = 1e-8,
                     start_order: int = 8, max_order: int = 4096,
                     method: str = "quadrature", mc_samples: int = 200_000,
                     mc_seed: int = 0):
    """Haar-average the heralded fidelity over encoded qubit states.

    Deterministic spherical product quadrature (Gauss-Legendre in cos(theta),
    trapezoid in phi) with order doubling until the value moves less than
    ``tol``; returns (value, error estimate).  ``method='monte-carlo'`` gives
    the sampling cross-check instead.
    """
    images = dyad_images(code, runner)
    t_full, traces = fidelity_tensors(code, images)
    if method == "monte-carlo":
        from .haar import haar_sample

        samples = haar_sample(mc_seed, mc_samples)
        vals, _ = _fidelity_on_grid(t_full, traces, samples[:, 0], samples[:, 1])
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))
    if method != "quadrature":
        raise ValueError(f"unknown averaging method {method!r}")

    def evaluate(n_u: int, n_phi: int) -> float:
        u, wu = _leggauss_cached(n_u)
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        c0 = np.sqrt((1.0 + u) / 2.0)[:, None] * np.ones(n_phi)[None, :]
        c1 = np.sqrt((1.0 - u) / 2.0)[:, None] * np.exp(1j * phi)[None, :]
        vals, den = _fidelity_on_grid(t_full, traces, c0, c1)
        if den.min() <= 0.0:
            raise QuadratureNotConverged("herald probability vanished on the grid")
        return float(np.einsum("u,up->", wu / 2.0, vals) / n_phi)

    order = start_order
    prev = evaluate(order, order)
    while order <= max_order:
        order *= 2
        cur = evaluate(order, order)
        change = abs(cur - prev)
        if change < tol:
            return cur, change
        prev = cur
    raise QuadratureNotConverged(
        f"order {max_order} quadrature still moving by {change:.2e}"
    )


def average_success(code: BosonicCode, runner) -> float:
    """Exact Haar-average herald probability via the six-state 2-design."""
    images = dyad_images(code, runner)
    _, traces = fidelity_tensors(code, images)
    states = two_design_states()
    w = states[:, :, None] * states.conj()[:, None, :]
    return float(np.einsum("smn,mn->s", w, traces).real.mean())


# ---------------------------------------------------------------------------
# Closed forms


def _ladder(space: FockSpace) -> np.ndarray:
    return annihilation(space).mat


def _g_functional(cl: np.ndarray, y: np.ndarray) -> float:
    val = np.trace(cl @ y @ cl @ y.conj().T) + abs(np.trace(cl @ y)) ** 2
    return float(val.real)


def closed_form_F_supp(code: BosonicCode, eta: float, nbar: float) -> float:
    """Average suppression fidelity to O(eta^2) for thermal noise."""
    cl = code.codespace_identity
    nmat = number(code.space).mat
    a2 = _ladder(code.space)
    a2 = a2 @ a2
    m1 = float(np.trace(cl @ nmat).real)
    m2 = float(np.trace(cl @ nmat @ nmat).real)
    braces = (
        nbar**2
        + 3.0 * (nbar + 0.5) ** 2 * m2
        + (nbar**2 - nbar - 0.5) * m1
        - (1.0 / 6.0 + 4.0 / 3.0 * (nbar**2 + nbar)) * _g_functional(cl, nmat)
        - (1.0 / 3.0 + 2.0 / 3.0 * (nbar**2 + nbar)) * _g_functional(cl, a2)
    )
    return 1.0 - eta**2 * braces


def closed_form_F_unsupp(code: BosonicCode, eta: float, nbar: float) -> float:
    """Average fidelity without suppression, to O(eta): linear in the rate."""
    cl = code.codespace_identity
    nmat = number(code.space).mat
    a = _ladder(code.space)
    ad = a.conj().T
    m1 = float(np.trace(cl @ nmat).real)
    tr_a = np.trace(cl @ a)
    cross_down = float((np.trace(cl @ ad @ cl @ a) + abs(tr_a) ** 2).real)
    cross_up = float((np.trace(cl @ a @ cl @ ad) + abs(tr_a) ** 2).real)
    bracket = (
        nbar
        + (1.0 + 2.0 * nbar) * m1
        - (2.0 * nbar / 3.0) * cross_down
        - (2.0 * (1.0 + nbar) / 3.0) * cross_up
    )
    return 1.0 - eta * bracket


def closed_form_p_succ(code: BosonicCode, eta: float, nbar: float) -> float:
    """Exact average success probability of the CF protocol (thermal noise)."""
    gain = 1.0 + eta * nbar
    mu = 1.0 - (1.0 - eta) / gain
    x = (1.0 - 2.0 * mu * gain) / (2.0 * gain - 1.0)
    cl_diag = np.diag(code.codespace_identity).real
    ns = code.space.levels()
    tr = float(cl_diag @ np.power(x, ns))
    return 0.5 + tr / (2.0 * (2.0 * gain - 1.0))


# ---------------------------------------------------------------------------
# Hybrid-entangled states (one extra ancilla protects the CV factor)


def hybrid_entangled_ket(alpha: complex, beta: complex, sign: int,
                         space: FockSpace) -> np.ndarray:
    """(|alpha>|0> + sign |beta>|1>)/sqrt(2) on CV (x) qubit."""
    from .fock import coherent_ket

    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    v = tensor(coherent_ket(space, alpha), [1, 0]) + sign * tensor(
        coherent_ket(space, beta), [0, 1]
    )
    return v / np.linalg.norm(v)


def hybrid_entangled_suppression(alpha: complex, beta: complex, sign: int,
                                 cv_noise: KrausChannel | None,
                                 config: SuppressionConfig, space: FockSpace):
    """Protect the CV factor of a hybrid-entangled state with one ancilla.

    Returns (joint CV (x) system-qubit output, normalized HybridState;
    herald probability).
    """
    if config.variant is not Variant.TWO_CF:
        raise VariantParityMismatch("hybrid states are parity-mixed; use the two-CF variant")
    ket = hybrid_entangled_ket(alpha, beta, sign, space)
    prep, herald = _resolve_kets(config, None)
    # qubit0 = system half of the hybrid state, qubit1 = suppression ancilla
    st = HybridState(space, 2, np.kron(dm(ket), dm(prep)))

    ns = space.levels()
    s_op = axis_sigma(config.axis)
    u = np.kron(np.diag(np.cos(config.theta * ns)).astype(complex), np.eye(4)) + np.kron(
        np.diag(1j * np.sin(config.theta * ns)), np.kron(np.eye(2), s_op)
    )
    st = HybridState(space, 2, u @ st.matrix @ u.conj().T)
    if cv_noise is not None:
        st = apply(cv_noise, st, "cv")
    if config.dv_noise is not None:
        st = apply(config.dv_noise, st, "qubit1")
    st = HybridState(space, 2, u.conj().T @ st.matrix @ u)
    heralded = project_qubits(st, herald, which=1)
    p = heralded.trace
    return heralded.normalized(), p
