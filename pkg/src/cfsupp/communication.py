"""Two-party qumode transmission over a noisy channel.

A preshared (possibly damped) Bell pair supplies the DV resource: the sender
applies exp(i pi/2 a†a sigma_x) with their qubit, the mode flies through the
CV noise, the receiver applies the inverse rotation with theirs, and both
qubits are measured.  Heralding on 00 (or on both 00 and 11) suppresses the
parity-flipping noise exactly as in the single-ancilla protocol.  DV-only
teleportation over the same noisy pair is the comparison baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel, KrausMap, SIGMA, apply_kraus, noisy_bell
from .codes import BosonicCode
from .fock import FockSpace

HALF_PI = math.pi / 2.0


class Herald(enum.Enum):
    ONLY_00 = "00"
    BOTH_00_AND_11 = "both"


@dataclass(frozen=True)
class CommConfig:
    bell_noise_p: float = 0.0
    herald: Herald = Herald.BOTH_00_AND_11
    cv_noise: KrausChannel | None = None

    def __post_init__(self):
        if not 0.0 <= self.bell_noise_p <= 1.0:
            raise ValueError("bell damping strength must lie in [0, 1]")


def _two_qubit_ket(bits: str) -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def heralded_comm_terms(config: CommConfig, space: FockSpace, outcome: str) -> list:
    """CV Kraus terms of the two-party protocol conditioned on ``outcome``.

    Spectral form: both conditional rotations decompose over the sigma_x
    eigenbasis of their qubit, so each term is a phase-scaled copy of a CV
    noise Kraus operator weighted by <outcome| (P_s (x) P_t) |bell>.
    """
    if outcome not in ("00", "11"):
        raise ValueError("outcome must be '00' or '11'")
    rho_bell = noisy_bell(config.bell_noise_p)
    evals, evecs = np.linalg.eigh(rho_bell)
    ns = space.levels()
    phase = {s: np.exp(1j * s * HALF_PI * ns) for s in (+1, -1)}
    projs = {s: (np.eye(2) + s * SIGMA["x"]) / 2.0 for s in (+1, -1)}
    bra = _two_qubit_ket(outcome).conj()
    cv_terms = (
        config.cv_noise.terms
        if config.cv_noise is not None
        else (np.eye(space.dim, dtype=complex),)
    )
    out = []
    for r in range(4):
        if evals[r] < 1e-15:
            continue
        chi = math.sqrt(float(evals[r])) * evecs[:, r]
        for k in cv_terms:
            t = np.zeros_like(k)
            for s in (+1, -1):  # sender-qubit sector
                for tt in (+1, -1):  # receiver-qubit sector
                    c = complex(bra @ np.kron(projs[s], projs[tt]) @ chi)
                    if abs(c) > 0.0:
                        # receiver gate exp(-i pi/2 a†a sx) attaches E_{-t}
                        # on the left of the noise Kraus term
                        t = t + c * (phase[-tt][:, None] * k * phase[s][None, :])
            if float(np.abs(t).max()) > 0.0:
                out.append(t)
    return out


def make_comm_runner(config: CommConfig, space: FockSpace):
    """Linear map rho -> unnormalized heralded output for config.herald."""
    terms = heralded_comm_terms(config, space, "00")
    if config.herald is Herald.BOTH_00_AND_11:
        terms = terms + heralded_comm_terms(config, space, "11")
    return KrausMap(terms)


def run_communication(rho_in: np.ndarray, config: CommConfig, space: FockSpace):
    """Transmit a unit-trace CV state.

    Returns (normalized accepted output, {"00": p00, "11": p11}); the output
    mixes the accepted outcomes according to the herald setting.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    img00 = apply_kraus(heralded_comm_terms(config, space, "00"), rho_in)
    img11 = apply_kraus(heralded_comm_terms(config, space, "11"), rho_in)
    p00 = float(np.trace(img00).real)
    p11 = float(np.trace(img11).real)
    if config.herald is Herald.ONLY_00:
        out = img00 / p00
    else:
        out = (img00 + img11) / (p00 + p11)
    return out, {"00": p00, "11": p11}


def _success_traces(code: BosonicCode, eta: float, nbar: float):
    gain = 1.0 + eta * nbar
    mu = 1.0 - (1.0 - eta) / gain
    x = (1.0 - 2.0 * mu * gain) / (2.0 * gain - 1.0)
    ns = code.space.levels()
    cl_diag = np.diag(code.codespace_identity).real
    xs = np.power(x, ns)
    sin2 = np.sin(HALF_PI * ns) ** 2
    t_x = float(cl_diag @ xs)
    t_sin = float(cl_diag @ sin2)
    t_sin_x = float(cl_diag @ (sin2 * xs))
    return gain, t_x, t_sin, t_sin_x


def closed_form_p_outcomes(code: BosonicCode, eta: float, nbar: float, p: float):
    """Average success probabilities (p00, p11) of the two-party protocol."""
    gain, t_x, t_sin, t_sin_x = _success_traces(code, eta, nbar)
    d = 2.0 * gain - 1.0
    common = 1.0 + p + (1.0 - p + 2.0 * p * p) / d * t_x
    p00 = 0.25 * (common - 2.0 * p * (t_sin + t_sin_x / d))
    p11 = 0.25 * (common - 2.0 * p * ((1.0 - t_sin) + (t_x - t_sin_x) / d))
    return p00, p11


def closed_form_p_succ_comm(code: BosonicCode, eta: float, nbar: float, p: float,
                            herald: Herald = Herald.BOTH_00_AND_11) -> float:
    """Average success probability; the both-outcomes form is the paper's
    single-line expression, 1/2 + (1 - 2p(1-p)) tr{C_L x^(a†a)} / (2(2G-1))."""
    if herald is Herald.ONLY_00:
        return closed_form_p_outcomes(code, eta, nbar, p)[0]
    gain, t_x, _, _ = _success_traces(code, eta, nbar)
    return 0.5 + (1.0 - 2.0 * p * (1.0 - p)) * t_x / (2.0 * (2.0 * gain - 1.0))


# ---------------------------------------------------------------------------
# DV-only teleportation baseline

_BELL_KETS = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2),
    "phi-": np.array([1, 0, 0, -1], dtype=complex) / math.sqrt(2),
    "psi+": np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2),
    "psi-": np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2),
}
_CORRECTIONS = {
    "phi+": np.eye(2, dtype=complex),
    "phi-": SIGMA["z"],
    "psi+": SIGMA["x"],
    "psi-": SIGMA["z"] @ SIGMA["x"],
}


def teleportation_simulate(rho_in: np.ndarray, p: float) -> np.ndarray:
    """Teleport a qubit through the damped Bell pair: ideal Bell measurement
    on (input, first half), perfect Pauli corrections on the second half."""
    rho_in = np.asarray(rho_in, dtype=complex)
    total = np.kron(rho_in, noisy_bell(p)).reshape((2, 2, 2) * 2)
    out = np.zeros((2, 2), dtype=complex)
    for name, bell in _BELL_KETS.items():
        b = bell.reshape(2, 2)
        kept = np.einsum("ij,ijklmn,lm->kn", b.conj(), total, b)
        c = _CORRECTIONS[name]
        out += c @ kept @ c.conj().T
    return out


def teleportation_baseline(p: float) -> float:
    """Average teleportation fidelity over the damped pair: 1 - p + 2p^2/3."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return 1.0 - p + 2.0 * p * p / 3.0
