"""Deviation density matrices and their real unknown-vector flattening.

The unknown vector holds ``N**2 - 1`` reals: the first ``N - 1`` diagonal
elements, then ``Re <m|rho|m'>`` for ``m < m'`` in lexicographic order, then
``Im <m|rho|m'>`` in the same order.  The last diagonal element follows from
tracelessness.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class StateError(ValueError):
    """Raised for matrices that are not valid deviation density matrices."""


def dim_from_unknowns(count: int) -> int:
    N = int(round(np.sqrt(count + 1)))
    if N * N - 1 != count or N < 2 or N & (N - 1):
        raise StateError(f"{count} is not N**2 - 1 for a qubit register")
    return N


def offdiag_pairs(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle in ``(m, m')`` lexicographic order."""
    return np.triu_indices(N, 1)


def check_state(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise StateError(f"density matrix must be square, got shape {rho.shape}")
    N = rho.shape[0]
    if N < 2 or N & (N - 1):
        raise StateError(f"dimension {N} is not a power of two")
    scale = max(1.0, float(np.abs(rho).max()))
    if np.abs(rho - rho.conj().T).max() > tol * scale:
        raise StateError("density matrix is not Hermitian")
    if abs(np.trace(rho)) > tol * scale * N:
        raise StateError(f"density matrix is not traceless (trace = {np.trace(rho):.3g})")
    return rho


def pack(rho: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    rho = check_state(rho, tol)
    N = rho.shape[0]
    iu, ju = offdiag_pairs(N)
    off = rho[iu, ju]
    return np.concatenate([rho.diagonal()[:-1].real, off.real, off.imag])


def unpack(values: Sequence[float]) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(-1)
    N = dim_from_unknowns(v.size)
    iu, ju = offdiag_pairs(N)
    n_off = iu.size
    rho = np.zeros((N, N), dtype=complex)
    diag = v[: N - 1]
    rho[np.arange(N - 1), np.arange(N - 1)] = diag
    rho[N - 1, N - 1] = -diag.sum()
    off = v[N - 1 : N - 1 + n_off] + 1j * v[N - 1 + n_off :]
    rho[iu, ju] = off
    rho[ju, iu] = off.conj()
    return rho


def unknown_labels(N: int) -> list[str]:
    """Column ids in unknown-vector order: ``d0``, ``R0,1``, ``S0,1`` ..."""
    iu, ju = offdiag_pairs(N)
    return (
        [f"d{m}" for m in range(N - 1)]
        + [f"R{m},{mp}" for m, mp in zip(iu, ju)]
        + [f"S{m},{mp}" for m, mp in zip(iu, ju)]
    )


def basis_element(N: int, k: int) -> np.ndarray:
    """Matrix selected by the k-th unknown when it is 1 and all others are 0."""
    e = np.zeros(N * N - 1)
    e[k] = 1.0
    return unpack(e)


def probe_matrices(N: int) -> np.ndarray:
    """All ``N**2 - 1`` basis elements stacked as an array of shape (P, N, N)."""
    iu, ju = offdiag_pairs(N)
    n_off = iu.size
    out = np.zeros((N * N - 1, N, N), dtype=complex)
    m = np.arange(N - 1)
    out[m, m, m] = 1.0
    out[m, N - 1, N - 1] = -1.0
    k = np.arange(n_off)
    out[N - 1 + k, iu, ju] = 1.0
    out[N - 1 + k, ju, iu] = 1.0
    out[N - 1 + n_off + k, iu, ju] = 1j
    out[N - 1 + n_off + k, ju, iu] = -1j
    return out


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Normalised Hilbert-Schmidt overlap ``Tr(a^H b) / sqrt(Tr(a^H a) Tr(b^H b))``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise StateError(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.vdot(a, a).real
    nb = np.vdot(b, b).real
    if na == 0 or nb == 0:
        raise StateError("fidelity undefined for a zero matrix")
    return float(np.clip(np.vdot(a, b).real / np.sqrt(na * nb), -1.0, 1.0))


def pauli_string(ops: str) -> np.ndarray:
    try:
        mats = [PAULI[c] for c in ops.upper()]
    except KeyError as exc:
        raise StateError(f"unknown Pauli letter {exc.args[0]!r} in {ops!r}") from None
    return reduce(np.kron, mats)


def from_pauli_terms(terms: Iterable[tuple[complex, str]]) -> np.ndarray:
    """Sum of ``coeff * P_1 (x) P_2 ...`` over terms like ``(0.5, "ZI")``.

    Coefficients must be real so the result stays Hermitian.
    """
    terms = list(terms)
    if not terms:
        raise StateError("no Pauli terms given")
    n = len(terms[0][1])
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for coeff, ops in terms:
        if len(ops) != n:
            raise StateError(f"term {ops!r} has {len(ops)} letters, expected {n}")
        if set(ops.upper()) <= {"I"}:
            raise StateError("identity-only term would break tracelessness")
        if abs(np.imag(coeff)) > 0:
            raise StateError(f"coefficient {coeff!r} of {ops!r} is not real")
        rho += float(np.real(coeff)) * pauli_string(ops)
    return rho


def pauli_decompose(rho: np.ndarray, tol: float = 1e-12) -> list[tuple[float, str]]:
    """Real Pauli-string coefficients of a Hermitian matrix, dropping |c| <= tol."""
    rho = np.asarray(rho, dtype=complex)
    n = int(np.log2(rho.shape[0]))
    out = []
    for letters in np.ndindex(*(4,) * n):
        ops = "".join("IXYZ"[i] for i in letters)
        coeff = np.trace(pauli_string(ops) @ rho).real / 2**n
        if abs(coeff) > tol:
            out.append((float(coeff), ops))
    return out


def random_state(n_qubits: int, seed=None) -> np.ndarray:
    """Random traceless Hermitian matrix with unit Frobenius norm."""
    rng = np.random.default_rng(seed)
    N = 2**n_qubits
    g = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    h = g + g.conj().T
    h -= np.trace(h) / N * np.eye(N)
    return h / np.linalg.norm(h)


def partial_trace_ancilla(rho_tilde: np.ndarray, N: int, N_anc: int) -> np.ndarray:
    """Trace out the trailing ancilla factor of an ``(N*N_anc)``-dim matrix."""
    return np.einsum("iaja->ij", np.asarray(rho_tilde).reshape(N, N_anc, N, N_anc))
