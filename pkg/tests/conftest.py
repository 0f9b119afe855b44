from functools import reduce

import numpy as np
import pytest

from aaqst import fixtures
from aaqst.model import RegisterLayout, SpinSystem

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def embed_1q(op, q, n):
    """Single-qubit operator on qubit q (0-based, 0 = most significant)."""
    return reduce(np.kron, [op if i == q else I2 for i in range(n)])


def dense_hamiltonian(sys):
    """Weak-coupling Hamiltonian built term by term from Kronecker products."""
    n = sys.n_qubits
    H = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        H -= 2 * np.pi * sys.shift_hz[i] * embed_1q(Z, i, n) / 2
        for j in range(i + 1, n):
            H += 2 * np.pi * sys.coupling_hz[i, j] * embed_1q(Z, i, n) @ embed_1q(Z, j, n) / 4
    return H


def random_system(n_qubits, rng):
    shifts = rng.uniform(-3000, 3000, n_qubits)
    J = np.zeros((n_qubits, n_qubits))
    iu = np.triu_indices(n_qubits, 1)
    J[iu] = rng.uniform(-200, 200, iu[0].size)
    return SpinSystem([f"S{i}" for i in range(n_qubits)], shifts, J + J.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def liquid():
    return fixtures.LIQUID.load()


@pytest.fixture(scope="session")
def oriented():
    return fixtures.ORIENTED.load()


@pytest.fixture
def one_spin():
    return SpinSystem(["A"], [100.0], [[0.0]]), RegisterLayout(1, 0)
