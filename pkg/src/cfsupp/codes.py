"""Bosonic code families: cat, binomial, and finite-energy GKP.

Each code carries orthonormal logical kets, the normalized codespace identity
C_L = (|0><0| + |1><1|)/2, and a photon-number-parity classification that the
suppression protocol keys off.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fock import FockError, FockSpace, coherent_ket, dm, number

ORTHOGONALITY_TOL = 1e-8
PARITY_WEIGHT_TOL = 1e-10


class NonOrthogonal(FockError):
    """Constructed codewords overlap beyond tolerance."""


class CutoffExceeded(FockError):
    """The code does not fit in the requested Fock space."""


class Parity(enum.Enum):
    LIKE_EVEN = "like-even"
    LIKE_ODD = "like-odd"
    OPPOSITE = "opposite"


@dataclass(frozen=True)
class BosonicCode:
    """A logical qubit encoded in one bosonic mode."""

    name: str
    params: dict
    space: FockSpace
    ket0: np.ndarray
    ket1: np.ndarray

    def __post_init__(self):
        for k in (self.ket0, self.ket1):
            if abs(np.linalg.norm(k) - 1.0) > 1e-10:
                raise NonOrthogonal("logical kets must be unit vectors")
        ov = abs(np.vdot(self.ket0, self.ket1))
        if ov > ORTHOGONALITY_TOL:
            raise NonOrthogonal(f"|<0_L|1_L>| = {ov:.3e}")

    @cached_property
    def codespace_identity(self) -> np.ndarray:
        """C_L = (|0_L><0_L| + |1_L><1_L|) / 2, trace one."""
        return (dm(self.ket0) + dm(self.ket1)) / 2.0

    @cached_property
    def parity(self) -> Parity:
        p0 = _ket_parity(self.ket0)
        p1 = _ket_parity(self.ket1)
        if p0 == p1 == 0:
            return Parity.LIKE_EVEN
        if p0 == p1 == 1:
            return Parity.LIKE_ODD
        return Parity.OPPOSITE

    def kets(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ket0, self.ket1

    @property
    def spec_string(self) -> str:
        args = ",".join(f"{k}={_fmt_param(v)}" for k, v in self.params.items())
        return f"{self.name}:{args}"


def _fmt_param(v):
    return f"{v:g}" if isinstance(v, float) else str(v)


def _ket_parity(ket: np.ndarray) -> int:
    w = np.abs(ket) ** 2
    w_odd = float(w[1::2].sum())
    w_even = float(w[0::2].sum())
    if w_odd < PARITY_WEIGHT_TOL:
        return 0
    if w_even < PARITY_WEIGHT_TOL:
        return 1
    raise FockError(
        f"codeword is not a parity eigenstate (even {w_even:.3e}, odd {w_odd:.3e})"
    )


def code_from_kets(name: str, space: FockSpace, ket0, ket1, params=None) -> BosonicCode:
    """Wrap explicit codewords; normalizes but does not orthogonalize."""
    k0 = np.asarray(ket0, dtype=complex)
    k1 = np.asarray(ket1, dtype=complex)
    return BosonicCode(
        name, dict(params or {}), space,
        k0 / np.linalg.norm(k0), k1 / np.linalg.norm(k1),
    )


def cat_code(n: int, alpha: complex, space: FockSpace) -> BosonicCode:
    """n-component cat code: coherent states of amplitude alpha on a ring.

    ket0 is the +-superposition (Fock support {0 mod n}), ket1 carries the
    alternating signs (support {n/2 mod n}); n must be even.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError("cat code needs an even number of components >= 2")
    ring = [coherent_ket(space, alpha * np.exp(2j * math.pi * k / n)) for k in range(n)]
    k0 = np.sum(ring, axis=0)
    k1 = np.sum([(-1.0) ** k * r for k, r in enumerate(ring)], axis=0)
    return code_from_kets("cat", space, k0, k1, {"n": n, "alpha": complex_or_float(alpha)})


def complex_or_float(a):
    a = complex(a)
    return a.real if a.imag == 0.0 else a


def binomial_code(n: int, kappa: int, space: FockSpace) -> BosonicCode:
    """Binomial code with Fock gap n and binomial order kappa.

    ket0 gathers the even binomial weights sqrt(C(kappa, j)) |j*n>, ket1 the
    odd ones; mean photon number is n*kappa/2.
    """
    if n < 1 or kappa < 1:
        raise ValueError("need gap n >= 1 and order kappa >= 1")
    if n * kappa >= space.dim:
        raise CutoffExceeded(f"top Fock level {n * kappa} >= cutoff {space.dim}")
    k0 = np.zeros(space.dim, dtype=complex)
    k1 = np.zeros(space.dim, dtype=complex)
    for j in range(kappa + 1):
        w = math.sqrt(math.comb(kappa, j))
        (k0 if j % 2 == 0 else k1)[j * n] = w
    return code_from_kets("bin", space, k0, k1, {"n": n, "kappa": kappa})


def _oscillator_eigenfunctions(x: float, nmax: int) -> np.ndarray:
    """psi_n(x) for n < nmax, position wavefunctions with q = (a + a†)/sqrt(2)."""
    psi = np.zeros(nmax)
    psi[0] = math.pi ** -0.25 * math.exp(-x * x / 2.0)
    if nmax > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for k in range(2, nmax):
        psi[k] = math.sqrt(2.0 / k) * x * psi[k - 1] - math.sqrt((k - 1) / k) * psi[k - 2]
    return psi


def _mehler_kernel(x: float, y: float, lam: float) -> float:
    """sum_n lam^n psi_n(x) psi_n(y), in closed form."""
    pref = 1.0 / math.sqrt(math.pi * (1.0 - lam * lam))
    expo = (4.0 * x * y * lam - (x * x + y * y) * (1.0 + lam * lam)) / (2.0 * (1.0 - lam * lam))
    return pref * math.exp(expo)


def _gkp_raw_kets(delta: float, space: FockSpace) -> tuple[np.ndarray, np.ndarray, float]:
    """Damped ideal-peak sums for square GKP, before orthogonalization.

    Returns (raw0, raw1, discarded) where ``discarded`` bounds the relative
    weight the truncation dropped (from the exact Mehler-kernel norm).
    """
    lam = math.exp(-2.0 * delta * delta)
    damp = np.exp(-delta * delta * space.levels())
    kets = []
    discarded = 0.0
    for mu in (0, 1):
        centers = []
        s = 0
        while True:
            added = False
            for x in {(2 * s + mu) * math.sqrt(math.pi), (-2 * s + mu) * math.sqrt(math.pi)}:
                # Mehler diagonal = squared norm of the damped peak
                if _mehler_kernel(x, x, lam) > 1e-24:
                    centers.append(x)
                    added = True
            if not added and s > 0:
                break
            s += 1
        v = np.zeros(space.dim)
        for x in centers:
            v += damp * _oscillator_eigenfunctions(x, space.dim)
        exact_norm2 = sum(_mehler_kernel(x, y, lam) for x in centers for y in centers)
        trunc_norm2 = float(v @ v)
        discarded = max(discarded, 1.0 - trunc_norm2 / exact_norm2)
        kets.append(v.astype(complex))
    return kets[0], kets[1], discarded


def gkp_code(delta: float, space: FockSpace) -> BosonicCode:
    """Finite-energy square-lattice GKP code with damping factor delta.

    The damped peak sums are symmetrically (Loewdin) orthogonalized, which
    preserves the even-parity structure while meeting the orthonormality
    contract at moderate delta.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    raw0, raw1, discarded = _gkp_raw_kets(delta, space)
    if discarded > 1e-8:
        raise CutoffExceeded(
            f"GKP(delta={delta}) drops weight {discarded:.3e} at cutoff {space.dim}"
        )
    v0 = raw0 / np.linalg.norm(raw0)
    v1 = raw1 / np.linalg.norm(raw1)
    basis = np.stack([v0, v1], axis=1)
    overlap = basis.conj().T @ basis
    evals, evecs = np.linalg.eigh(overlap)
    if evals.min() < 1e-12:
        raise NonOrthogonal("GKP codewords are (numerically) linearly dependent")
    s_inv_half = evecs @ np.diag(evals**-0.5) @ evecs.conj().T
    ortho = basis @ s_inv_half
    return code_from_kets("gkp", space, ortho[:, 0], ortho[:, 1], {"delta": delta})


def code_moments(code: BosonicCode) -> tuple[float, float, complex]:
    """(<a†a>, <(a†a)²>, <a²>) with respect to the codespace identity C_L."""
    cl = code.codespace_identity
    nmat = number(code.space).mat
    a = np.zeros_like(nmat)
    ks = np.arange(1, code.space.dim)
    a[ks - 1, ks] = np.sqrt(ks)
    m1 = float(np.trace(cl @ nmat).real)
    m2 = float(np.trace(cl @ nmat @ nmat).real)
    a2 = complex(np.trace(cl @ a @ a))
    return m1, m2, a2


_CODE_BUILDERS = {
    "cat": (cat_code, (("n", int), ("alpha", float))),
    "bin": (binomial_code, (("n", int), ("kappa", int))),
    "gkp": (gkp_code, (("delta", float),)),
}


def parse_code_spec(spec: str) -> tuple[str, dict]:
    """Parse a specifier like ``cat:n=6,alpha=1.916`` into (family, params)."""
    m = re.fullmatch(r"(\w+):([\w=.,+-]+)", spec.strip())
    if not m or m.group(1) not in _CODE_BUILDERS:
        raise ValueError(f"unrecognized code specifier {spec!r}")
    family = m.group(1)
    _, fields = _CODE_BUILDERS[family]
    wanted = dict(fields)
    params = {}
    for item in m.group(2).split(","):
        key, _, val = item.partition("=")
        if key not in wanted:
            raise ValueError(f"unknown parameter {key!r} for code family {family!r}")
        params[key] = wanted[key](val)
    missing = set(wanted) - set(params)
    if missing:
        raise ValueError(f"code specifier {spec!r} missing {sorted(missing)}")
    return family, params


def build_code(spec: str, space: FockSpace) -> BosonicCode:
    family, params = parse_code_spec(spec)
    builder, _ = _CODE_BUILDERS[family]
    return builder(space=space, **params)
