"""Haar averages over codespace-encoded qubit states.

The closed-form evaluators reduce averages of products tr(rho_L M_1) ...
tr(rho_L M_t) over Haar-random pure logical states to permutation sums over
S_t; the paper's protocol only needs t <= 3 at codespace dimension d = 2.
A seeded sampler provides the Monte-Carlo cross-check.
"""

from __future__ import annotations

import itertools

import numpy as np

from .fock import FockError


class UnsupportedMomentOrder(FockError):
    """Moment order t outside the implemented range."""


def logical_observable(code, x: np.ndarray) -> np.ndarray:
    """Compress a CV operator X to the 2x2 codespace matrix <mu_L|X|nu_L>."""
    k0, k1 = code.kets()
    basis = np.stack([k0, k1], axis=1)
    return basis.conj().T @ np.asarray(x, dtype=complex) @ basis


def _cycles(perm: tuple) -> list:
    seen = [False] * len(perm)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        j = start
        while not seen[j]:
            seen[j] = True
            cyc.append(j)
            j = perm[j]
        cycles.append(cyc)
    return cycles


def haar_average(t: int, observables, d: int = 2) -> complex:
    """E[prod_j tr(rho M_j)] for a Haar-random pure state in dimension d.

    Evaluates the permutation-sum formula (sum over S_t of per-cycle trace
    products, divided by the rising factorial d(d+1)...(d+t-1)).  Only
    t in {1, 2, 3} is exposed, matching what the protocol analysis uses.
    """
    ms = [np.asarray(m, dtype=complex) for m in observables]
    if t not in (1, 2, 3):
        raise UnsupportedMomentOrder(f"moment order {t} not supported")
    if len(ms) != t:
        raise ValueError(f"expected {t} observables, got {len(ms)}")
    rising = 1.0
    for j in range(t):
        rising *= d + j
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(t)):
        prod = 1.0 + 0.0j
        for cyc in _cycles(perm):
            m = np.eye(d, dtype=complex)
            for j in cyc:
                m = m @ ms[j]
            prod *= np.trace(m)
        total += prod
    return total / rising


def haar_sample(seed: int, count: int) -> np.ndarray:
    """(count, 2) array of Haar-uniform pure qubit amplitudes (c0, c1).

    c0 is made real and nonnegative by fixing the global phase, matching the
    average over real c0 and complex c1 on the Bloch sphere.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(count, 2)) + 1j * rng.normal(size=(count, 2))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    phase = np.exp(-1j * np.angle(z[:, 0]))
    return z * phase[:, None]


def two_design_states() -> np.ndarray:
    """The six Pauli eigenstates; averaging over them matches Haar exactly
    for functionals at most quadratic in the density matrix."""
    s = 1.0 / np.sqrt(2.0)
    return np.array(
        [
            [1, 0],
            [0, 1],
            [s, s],
            [s, -s],
            [s, 1j * s],
            [s, -1j * s],
        ],
        dtype=complex,
    )
