"""Truncated Fock-space linear algebra.

States and operators live on a single bosonic mode truncated to Fock levels
0..N-1, optionally tensored with one or two qubit factors.  Everything is
dense complex numpy; all values are immutable after construction and every
operation is a pure function.

Factor ordering for hybrid objects is CV (x) qubit_0 [(x) qubit_1], i.e. the
flat index is (n * 2 + q0) * 2 + q1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

HERMITICITY_TOL = 1e-12
UNITARITY_TOL = 1e-12
POSITIVITY_TOL = -1e-10
COHERENT_TAIL_WARN = 1e-10
COHERENT_TAIL_ERROR = 1e-6


class FockError(Exception):
    """Base error for this package."""


class TailTooLarge(FockError):
    """A continuous-variable state lost too much weight to the cutoff."""


class DimensionMismatch(FockError):
    """Operands built on incompatible spaces."""


@dataclass(frozen=True)
class FockSpace:
    """Truncated single-mode Fock space with levels 0..cutoff-1."""

    cutoff: int

    def __post_init__(self):
        if self.cutoff < 2:
            raise ValueError(f"cutoff must be >= 2, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff

    def levels(self) -> np.ndarray:
        """Integer array [0, 1, ..., cutoff-1]."""
        return np.arange(self.cutoff)


@dataclass(frozen=True)
class FockOperator:
    """Dense operator on a FockSpace, carrying its cutoff.

    ``hermitian``/``unitary`` flags are verified at construction when set
    through the checked constructors below.
    """

    space: FockSpace
    mat: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatch(
                f"operator shape {m.shape} does not match cutoff {self.space.dim}"
            )
        object.__setattr__(self, "mat", m)
        m.setflags(write=False)
        if self.hermitian and max_abs(m - m.conj().T) > HERMITICITY_TOL:
            raise ValueError("operator asserted hermitian is not")
        if self.unitary:
            # Unitarity is only meaningful on the sub-block the truncation
            # leaves intact; diagonal operators are intact everywhere.
            d = unitarity_defect(m)
            if d > UNITARITY_TOL:
                raise ValueError(f"operator asserted unitary is not (defect {d:.2e})")

    def dag(self) -> "FockOperator":
        return FockOperator(self.space, self.mat.conj().T, hermitian=self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            if other.space != self.space:
                raise DimensionMismatch("operators on different spaces")
            return FockOperator(self.space, self.mat @ other.mat)
        return self.mat @ np.asarray(other)

    def __array__(self, dtype=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


def max_abs(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def unitarity_defect(m: np.ndarray, sub_dim: int | None = None) -> float:
    """max-abs of M†M - 1, optionally restricted to the leading sub-block."""
    g = m.conj().T @ m - np.eye(m.shape[0])
    if sub_dim is not None:
        g = g[:sub_dim, :sub_dim]
    return max_abs(g)


def annihilation(space: FockSpace) -> FockOperator:
    """Ladder operator a with <n-1|a|n> = sqrt(n)."""
    n = space.dim
    m = np.zeros((n, n), dtype=complex)
    ks = np.arange(1, n)
    m[ks - 1, ks] = np.sqrt(ks)
    return FockOperator(space, m)


def creation(space: FockSpace) -> FockOperator:
    return annihilation(space).dag()


def number(space: FockSpace) -> FockOperator:
    return FockOperator(space, np.diag(space.levels().astype(complex)), hermitian=True)


def number_power_diag(space: FockSpace, f) -> FockOperator:
    """Diagonal operator diag(f(0), ..., f(N-1)) for a scalar function f.

    Covers the rescaling operators x^(a†a), photon-number parity (-1)^(a†a),
    cos(pi a†a / 2), and friends.
    """
    vals = np.asarray([f(int(k)) for k in space.levels()], dtype=complex)
    return FockOperator(space, np.diag(vals))


def rotation(space: FockSpace, theta: float) -> FockOperator:
    """Phase-space rotation exp(i theta a†a); diagonal and unitary."""
    vals = np.exp(1j * theta * space.levels())
    return FockOperator(space, np.diag(vals), unitary=True)


def parity(space: FockSpace) -> FockOperator:
    """Photon-number parity (-1)^(a†a); equals rotation by pi."""
    vals = (-1.0) ** space.levels()
    return FockOperator(space, np.diag(vals.astype(complex)), hermitian=True, unitary=True)


def identity(space: FockSpace) -> FockOperator:
    return FockOperator(space, np.eye(space.dim, dtype=complex), hermitian=True, unitary=True)


def fock_ket(space: FockSpace, n: int) -> np.ndarray:
    if not 0 <= n < space.dim:
        raise DimensionMismatch(f"Fock level {n} outside cutoff {space.dim}")
    v = np.zeros(space.dim, dtype=complex)
    v[n] = 1.0
    return v


def coherent_ket(space: FockSpace, alpha: complex) -> np.ndarray:
    """Coherent state |alpha>, renormalized to unit norm after truncation.

    Raises TailTooLarge when the discarded Fock tail exceeds 1e-6 of the norm;
    warns above 1e-10.
    """
    ns = space.levels()
    # e^{-|a|^2/2} alpha^n / sqrt(n!) evaluated in log space to dodge overflow
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, space.dim)))))
    amp = np.abs(alpha)
    if amp == 0.0:
        return fock_ket(space, 0)
    log_mag = -amp**2 / 2 + ns * np.log(amp) - log_fact / 2
    phase = np.exp(1j * np.angle(alpha) * ns)
    v = np.exp(log_mag) * phase
    discarded = 1.0 - float(np.vdot(v, v).real)
    if discarded > COHERENT_TAIL_ERROR:
        raise TailTooLarge(
            f"coherent |alpha|^2={amp**2:.3g} loses weight {discarded:.3g} at cutoff {space.dim}"
        )
    if discarded > COHERENT_TAIL_WARN:
        warnings.warn(
            f"coherent-state tail beyond cutoff carries weight {discarded:.3g}",
            stacklevel=2,
        )
    return v / np.linalg.norm(v)


def tensor(*mats) -> np.ndarray:
    """Kronecker product of operators/vectors, left to right."""
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def dm(ket: np.ndarray) -> np.ndarray:
    """|ket><ket| as a dense matrix."""
    k = np.asarray(ket, dtype=complex)
    return np.outer(k, k.conj())


@dataclass(frozen=True)
class HybridState:
    """Density operator on (Fock space) (x) zero, one, or two qubits.

    ``matrix`` may be unnormalized (heralded branches keep their weight in the
    trace).  Positivity/hermiticity are checked on demand via ``validate``.
    """

    cv_space: FockSpace
    qubit_count: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.qubit_count not in (0, 1, 2):
            raise ValueError("qubit_count must be 0, 1, or 2")
        d = self.cv_space.dim * 2**self.qubit_count
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (d, d):
            raise DimensionMismatch(f"state shape {m.shape}, expected {(d, d)}")
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "HybridState":
        t = np.trace(self.matrix)
        if abs(t) == 0.0:
            raise ValueError("cannot normalize a zero-trace state")
        return HybridState(self.cv_space, self.qubit_count, self.matrix / t)

    def validate(self, herm_tol: float = HERMITICITY_TOL, pos_tol: float = POSITIVITY_TOL):
        """Raise if the matrix is not Hermitian/PSD within tolerances."""
        h = max_abs(self.matrix - self.matrix.conj().T)
        if h > herm_tol:
            raise ValueError(f"state hermiticity defect {h:.2e}")
        lo = float(np.linalg.eigvalsh(self.matrix)[0])
        if lo < pos_tol * max(1.0, abs(self.trace)):
            raise ValueError(f"state has negative eigenvalue {lo:.2e}")
        return self

    def _as_tensor(self) -> np.ndarray:
        q = self.qubit_count
        shape = (self.cv_space.dim,) + (2,) * q
        return self.matrix.reshape(shape + shape)


def hybrid_state(rho_cv: np.ndarray, *qubit_states, space: FockSpace) -> HybridState:
    """rho_cv (x) qubit factors; qubit factors may be kets or 2x2 matrices."""
    mats = [np.asarray(rho_cv, dtype=complex)]
    for qs in qubit_states:
        qs = np.asarray(qs, dtype=complex)
        mats.append(dm(qs) if qs.ndim == 1 else qs)
    return HybridState(space, len(qubit_states), tensor(*mats))


def _qubit_indices(state: HybridState, which) -> tuple[int, ...]:
    if which is None:
        idx = tuple(range(state.qubit_count))
    elif isinstance(which, int):
        idx = (which,)
    else:
        idx = tuple(which)
    for i in idx:
        if not 0 <= i < state.qubit_count:
            raise DimensionMismatch(f"state has no qubit factor {i}")
    if len(set(idx)) != len(idx):
        raise DimensionMismatch("repeated qubit factor")
    return idx


def partial_trace_qubits(state: HybridState, which=None) -> HybridState:
    """Trace out the given qubit factor(s) (all of them by default)."""
    idx = _qubit_indices(state, which)
    t = state._as_tensor()
    nfac = 1 + state.qubit_count
    # Trace highest axes first so lower axis numbers stay valid.
    for i in sorted(idx, reverse=True):
        ax = 1 + i
        t = np.trace(t, axis1=ax, axis2=ax + nfac)
        nfac -= 1
    q_left = state.qubit_count - len(idx)
    d = state.cv_space.dim * 2**q_left
    return HybridState(state.cv_space, q_left, t.reshape(d, d))


def project_qubits(state: HybridState, ket: np.ndarray, which=None) -> HybridState:
    """<ket| rho |ket> over the selected qubit factor(s), unnormalized.

    The trace of the result is the herald probability of measuring ``ket``.
    """
    idx = _qubit_indices(state, which)
    k = np.asarray(ket, dtype=complex).reshape((2,) * len(idx))
    t = state._as_tensor()
    nfac = 1 + state.qubit_count
    row_axes = [1 + i for i in idx]
    col_axes = [nfac + 1 + i for i in idx]
    t = np.tensordot(k.conj(), t, axes=(tuple(range(len(idx))), tuple(row_axes)))
    # tensordot moved contracted axes to the front; column axes shifted down.
    col_axes = [c - len(idx) for c in col_axes]
    t = np.tensordot(t, k, axes=(tuple(col_axes), tuple(range(len(idx)))))
    q_left = state.qubit_count - len(idx)
    d = state.cv_space.dim * 2**q_left
    return HybridState(state.cv_space, q_left, t.reshape(d, d))
