"""Kraus representations of the noise channels.

CV noise: pure loss, quantum-limited amplification, thermal noise
(amp of gain G = 1 + eta*nbar after loss of rate mu = 1 - (1-eta)/G), and
Gaussian displacement noise (G = 1/eta, mu = eta).  DV noise: amplitude,
phase, and composite damping, and depolarizing.  Channels are immutable;
application is a pure function.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .fock import DimensionMismatch, FockSpace, HybridState, max_abs, tensor

DEFAULT_KRAUS_ORDER = 12
DEFAULT_DEFECT_TARGET = 1e-8
_MAX_ADAPTIVE_ORDER = 64

SIGMA = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class ThermalParams:
    """Decomposition of thermal noise into amp(G) after loss(mu)."""

    eta: float
    nbar: float

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if self.nbar < 0.0:
            raise ValueError("nbar must be >= 0")

    @property
    def gain(self) -> float:
        return 1.0 + self.eta * self.nbar

    @property
    def mu(self) -> float:
        return 1.0 - (1.0 - self.eta) / self.gain


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Ordered Kraus terms plus truncation metadata.

    ``l_max``/``k_max`` are the loss/excitation truncation orders (0 for
    qubit channels).  The CPTP defect is reported, never enforced.
    """

    label: str
    terms: tuple
    l_max: int = 0
    k_max: int = 0

    def __post_init__(self):
        terms = tuple(np.asarray(t, dtype=complex) for t in self.terms)
        if not terms:
            raise ValueError("channel needs at least one Kraus term")
        d = terms[0].shape[0]
        for t in terms:
            if t.shape != (d, d):
                raise DimensionMismatch("Kraus terms must share a square shape")
        object.__setattr__(self, "terms", terms)

    @property
    def dim(self) -> int:
        return self.terms[0].shape[0]

    def completeness(self) -> np.ndarray:
        """sum_j K_j† K_j (identity for an exactly CPTP channel)."""
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for t in self.terms:
            acc += t.conj().T @ t
        return acc

    def cptp_defect(self, n_restrict: int | None = None) -> float:
        """max-abs of sum K†K - 1 on levels n <= n_restrict.

        Defaults to the sub-block n <= dim - l_max - k_max that the
        truncated Kraus orders can, at best, reach.
        """
        if n_restrict is None:
            n_restrict = self.dim - self.l_max - self.k_max
        g = self.completeness() - np.eye(self.dim)
        blk = g[: n_restrict + 1, : n_restrict + 1]
        return max_abs(blk)

    def weighted_defect(self, diag_weights: np.ndarray) -> float:
        """Occupied-subspace defect: sum_n w_n |(sum K†K - 1)_nn|."""
        w = np.asarray(diag_weights, dtype=float)
        if w.shape != (self.dim,):
            raise DimensionMismatch("weights must match channel dimension")
        dev = np.abs(np.diag(self.completeness() - np.eye(self.dim)).real)
        return float(w @ dev)


def apply_kraus(terms, rho: np.ndarray) -> np.ndarray:
    if isinstance(terms, np.ndarray) and terms.ndim == 3:
        return stack_apply(terms, rho)
    out = np.zeros_like(rho, dtype=complex)
    for t in terms:
        out += t @ rho @ t.conj().T
    return out


def stack_apply(stack: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """sum_k K_k rho K_k† for a (k, d, d) stack, via two batched products."""
    tmp = np.matmul(stack, rho)
    return np.tensordot(tmp, stack.conj(), axes=([0, 2], [0, 2]))


class KrausMap:
    """Callable Kraus-sum map with a cheap path for rank-1 (dyad) inputs."""

    def __init__(self, stack):
        self.stack = np.ascontiguousarray(np.asarray(stack, dtype=complex))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return stack_apply(self.stack, rho)

    def dyad(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Image of |u><v| without forming the dyad: one batched mat-vec pair."""
        wu = self.stack @ np.asarray(u, dtype=complex)
        wv = self.stack @ np.asarray(v, dtype=complex)
        return wu.T @ wv.conj()


def lifted_terms(channel: KrausChannel, qubit_count: int, part: str, cv_dim: int) -> list:
    """Kraus terms embedded into CV (x) qubit^qubit_count at the named factor.

    ``part`` is "cv", "qubit0", or "qubit1".
    """
    if part == "cv":
        if channel.dim != cv_dim:
            raise DimensionMismatch("channel does not act on this Fock space")
        if qubit_count == 0:
            return list(channel.terms)
        eye_q = np.eye(2**qubit_count)
        return [np.kron(t, eye_q) for t in channel.terms]
    m = re.fullmatch(r"qubit([01])", part)
    if not m:
        raise ValueError(f"unknown factor selector {part!r}")
    i = int(m.group(1))
    if i >= qubit_count:
        raise DimensionMismatch(f"state has no qubit factor {i}")
    if channel.dim != 2:
        raise DimensionMismatch("qubit channel terms must be 2x2")
    out = []
    for t in channel.terms:
        mats = [np.eye(cv_dim, dtype=complex)] + [np.eye(2, dtype=complex)] * qubit_count
        mats[1 + i] = t
        out.append(tensor(*mats))
    return out


def apply(channel: KrausChannel, state: HybridState, part: str = "cv") -> HybridState:
    """Kraus sum on the chosen factor, identity elsewhere."""
    terms = lifted_terms(channel, state.qubit_count, part, state.cv_space.dim)
    return HybridState(state.cv_space, state.qubit_count, apply_kraus(terms, state.matrix))


def loss_channel(mu: float, space: FockSpace, l_max: int = DEFAULT_KRAUS_ORDER) -> KrausChannel:
    """Pure photon loss: A_l = sqrt(mu^l / l!) (1-mu)^(a†a/2) a^l."""
    if not 0.0 <= mu < 1.0:
        raise ValueError("mu must lie in [0, 1)")
    n = space.dim
    ns = np.arange(n)
    resc = np.diag(np.sqrt((1.0 - mu) ** ns).astype(complex))
    a = np.zeros((n, n), dtype=complex)
    a[ns[1:] - 1, ns[1:]] = np.sqrt(ns[1:])
    terms = []
    a_pow = np.eye(n, dtype=complex)
    for l in range(l_max + 1):
        if l > 0:
            a_pow = a_pow @ a
        coeff = math.sqrt(mu**l / math.factorial(l)) if mu > 0 else (1.0 if l == 0 else 0.0)
        if coeff == 0.0 and l > 0:
            continue
        terms.append(coeff * (resc @ a_pow))
    return KrausChannel(f"loss(mu={mu:g})", tuple(terms), l_max=l_max)


def amp_channel(gain: float, space: FockSpace, k_max: int = DEFAULT_KRAUS_ORDER) -> KrausChannel:
    """Quantum-limited amplification: B_k = sqrt((1-1/G)^k / (k! G)) a†^k G^(-a†a/2)."""
    if gain < 1.0:
        raise ValueError("gain must be >= 1")
    n = space.dim
    ns = np.arange(n)
    resc = np.diag((gain ** (-ns / 2.0)).astype(complex))
    ad = np.zeros((n, n), dtype=complex)
    ad[ns[1:], ns[1:] - 1] = np.sqrt(ns[1:])
    z = 1.0 - 1.0 / gain
    terms = []
    ad_pow = np.eye(n, dtype=complex)
    for k in range(k_max + 1):
        if k > 0:
            ad_pow = ad_pow @ ad
        coeff = math.sqrt(z**k / (math.factorial(k) * gain)) if z > 0 else (
            1.0 / math.sqrt(gain) if k == 0 else 0.0
        )
        if coeff == 0.0 and k > 0:
            continue
        terms.append(coeff * (ad_pow @ resc))
    return KrausChannel(f"amp(G={gain:g})", tuple(terms), k_max=k_max)


def compose(outer: KrausChannel, inner: KrausChannel, label: str | None = None) -> KrausChannel:
    """Channel composition (outer after inner) as the product Kraus list."""
    if outer.dim != inner.dim:
        raise DimensionMismatch("cannot compose channels of different dimension")
    terms = tuple(b @ a for b in outer.terms for a in inner.terms)
    return KrausChannel(
        label or f"{outer.label}*{inner.label}",
        terms,
        l_max=outer.l_max + inner.l_max,
        k_max=outer.k_max + inner.k_max,
    )


def _amp_after_loss(
    gain: float,
    mu: float,
    space: FockSpace,
    label: str,
    l_max,
    k_max,
    occupied_diag,
    defect_target: float,
) -> KrausChannel:
    adaptive = l_max is None or k_max is None
    l = DEFAULT_KRAUS_ORDER if l_max is None else l_max
    k = DEFAULT_KRAUS_ORDER if k_max is None else k_max
    while True:
        ch = compose(amp_channel(gain, space, k), loss_channel(mu, space, l), label)
        if not adaptive:
            return ch
        defect = (
            ch.weighted_defect(occupied_diag)
            if occupied_diag is not None
            else ch.cptp_defect()
        )
        if defect < defect_target or max(l, k) >= _MAX_ADAPTIVE_ORDER:
            return ch
        l, k = l + 4, k + 4


def thermal_channel(
    eta: float,
    nbar: float,
    space: FockSpace,
    l_max: int | None = DEFAULT_KRAUS_ORDER,
    k_max: int | None = DEFAULT_KRAUS_ORDER,
    occupied_diag=None,
    defect_target: float = DEFAULT_DEFECT_TARGET,
) -> KrausChannel:
    """Thermal noise as amp(G) after loss(mu), composed into one Kraus list.

    Pass ``l_max=None``/``k_max=None`` for adaptive truncation: orders grow
    until the defect (weighted by ``occupied_diag`` when given) is below
    ``defect_target``.
    """
    p = ThermalParams(eta, nbar)
    return _amp_after_loss(
        p.gain, p.mu, space, f"thermal(eta={eta:g},nbar={nbar:g})",
        l_max, k_max, occupied_diag, defect_target,
    )


def gdn_channel(
    eta: float,
    space: FockSpace,
    l_max: int | None = DEFAULT_KRAUS_ORDER,
    k_max: int | None = DEFAULT_KRAUS_ORDER,
    occupied_diag=None,
    defect_target: float = DEFAULT_DEFECT_TARGET,
) -> KrausChannel:
    """Gaussian displacement noise: amp(1/eta) after loss(eta)."""
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    return _amp_after_loss(
        1.0 / eta, eta, space, f"gdn(eta={eta:g})",
        l_max, k_max, occupied_diag, defect_target,
    )


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel("identity", (np.eye(dim, dtype=complex),))


def qubit_damping(p: float, kind: str = "composite") -> KrausChannel:
    """Qubit damping of strength p: amplitude, phase, or their composite."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    k0 = np.diag([1.0, math.sqrt(1.0 - p)]).astype(complex)
    amp1 = math.sqrt(p) * np.array([[0, 1], [0, 0]], dtype=complex)
    ph1 = math.sqrt(p) * np.diag([0.0, 1.0]).astype(complex)
    if kind == "amplitude":
        return KrausChannel(f"damp-amp(p={p:g})", (k0, amp1))
    if kind == "phase":
        return KrausChannel(f"damp-phase(p={p:g})", (k0, ph1))
    if kind == "composite":
        phase = KrausChannel("ph", (k0, ph1))
        amp = KrausChannel("am", (k0, amp1))
        comp = compose(phase, amp, f"damp(p={p:g})")
        terms = tuple(t for t in comp.terms if max_abs(t) > 0.0)
        return KrausChannel(comp.label, terms)
    raise ValueError(f"unknown damping kind {kind!r}")


def composite_damping_pauli(rho: np.ndarray, p: float) -> np.ndarray:
    """Closed Pauli form of the composite damping channel (test oracle)."""
    s = math.sqrt(1.0 - p)
    c_plus = (1 + s) * (1 - p / 2 + s) + (1 - s) * (1 - p / 2 - s)
    c_minus = (1 + s) * (1 - p / 2 - s) + (1 - s) * (1 - p / 2 + s)
    sx, sy, sz = SIGMA["x"], SIGMA["y"], SIGMA["z"]
    out = c_plus * rho + c_minus * (sz @ rho @ sz)
    out += p * (
        sx @ rho @ sx
        + sy @ rho @ sy
        + rho @ sz
        + sz @ rho
        + 1j * (sy @ rho @ sx - sx @ rho @ sy)
    )
    return out / 4.0


def depolarizing(eta_prime: float) -> KrausChannel:
    """(1 - eta') rho + (eta'/3) sum_j sigma_j rho sigma_j."""
    if not 0.0 <= eta_prime <= 1.0:
        raise ValueError("eta' must lie in [0, 1]")
    terms = [math.sqrt(1.0 - eta_prime) * SIGMA["i"]]
    terms += [math.sqrt(eta_prime / 3.0) * SIGMA[ax] for ax in "xyz"]
    return KrausChannel(f"depol(eta={eta_prime:g})", tuple(t for t in terms if max_abs(t) > 0))


def bell_phi_plus() -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1.0 / math.sqrt(2.0)
    return v


def noisy_bell(p: float) -> np.ndarray:
    """|Phi+> after iid composite damping of strength p on both qubits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0 + p * p
    rho[3, 3] = (1.0 - p) ** 2
    rho[1, 1] = rho[2, 2] = p * (1.0 - p)
    rho[0, 3] = rho[3, 0] = (1.0 - p) ** 2
    return rho / 2.0


_NOISE_KINDS = {
    "loss": ("eta",),
    "thermal": ("eta", "nbar"),
    "gdn": ("eta",),
    "damp": ("p",),
    "depol": ("eta",),
}


def parse_noise_spec(spec: str) -> tuple[str, dict]:
    """Parse ``thermal:eta=0.05,nbar=0.5`` and friends into (kind, params)."""
    m = re.fullmatch(r"(\w+):([\w=.,+-]+)", spec.strip())
    if not m or m.group(1) not in _NOISE_KINDS:
        raise ValueError(f"unrecognized noise specifier {spec!r}")
    kind = m.group(1)
    wanted = _NOISE_KINDS[kind]
    params = {}
    for item in m.group(2).split(","):
        key, _, val = item.partition("=")
        if key not in wanted:
            raise ValueError(f"unknown parameter {key!r} for noise kind {kind!r}")
        params[key] = float(val)
    missing = set(wanted) - set(params)
    if missing:
        raise ValueError(f"noise specifier {spec!r} missing {sorted(missing)}")
    return kind, params


def build_cv_noise(spec: str, space: FockSpace, **kwargs) -> KrausChannel:
    """Build a CV channel from a specifier string (loss/thermal/gdn)."""
    kind, params = parse_noise_spec(spec)
    if kind == "loss":
        return thermal_channel(params["eta"], 0.0, space, **kwargs)
    if kind == "thermal":
        return thermal_channel(params["eta"], params["nbar"], space, **kwargs)
    if kind == "gdn":
        return gdn_channel(params["eta"], space, **kwargs)
    raise ValueError(f"{spec!r} is not a CV noise specifier")
