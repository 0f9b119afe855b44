"""Register geometry, weak-coupling spin systems and transition bookkeeping.

Conventions
-----------
- Qubit 1 is the most significant bit of a basis index.  In a combined
  register the input qubits come first, so ``rho_tilde = rho (x) 1/N_anc``.
- ``|0>`` is the +1 eigenstate of sigma_z.
- Frequencies are in Hz at every interface; energies are in rad/s.
- A line of qubit ``j`` connects ``lower`` (bit j clear) to ``upper`` (bit j
  set) and sits at ``(E_upper - E_lower) / 2pi``.  With the Zeeman term
  ``-omega sigma_z / 2`` a bare spin with shift ``nu`` therefore appears at
  ``+nu``, and each coupling splits it by ``+-J/2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class RegisterLayout:
    """Input/ancilla qubit counts and the dimensions derived from them."""

    n_input: int
    n_ancilla: int = 0

    def __post_init__(self):
        if int(self.n_input) != self.n_input or self.n_input < 1:
            raise ValueError(f"n_input must be a positive integer, got {self.n_input!r}")
        if int(self.n_ancilla) != self.n_ancilla or self.n_ancilla < 0:
            raise ValueError(f"n_ancilla must be a non-negative integer, got {self.n_ancilla!r}")

    @property
    def n(self) -> int:
        return self.n_input

    @property
    def N(self) -> int:
        return 2**self.n_input

    @property
    def n_anc(self) -> int:
        return self.n_ancilla

    @property
    def N_anc(self) -> int:
        return 2**self.n_ancilla

    @property
    def n_total(self) -> int:
        return self.n_input + self.n_ancilla

    @property
    def N_total(self) -> int:
        return 2**self.n_total

    @property
    def n_unknowns(self) -> int:
        return self.N**2 - 1

    @property
    def n_lines(self) -> int:
        """Number of single-quantum lines of the combined register."""
        return self.n_total * self.N_total // 2


@dataclass(frozen=True)
class SpinSystem:
    """Chemical shifts and scalar couplings of a weakly coupled register.

    For oriented samples ``coupling_hz`` holds the effective ``J + 2D`` values.
    """

    labels: tuple[str, ...]
    shift_hz: np.ndarray
    coupling_hz: np.ndarray
    species: tuple[str, ...] = field(default=())

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        shift = np.array(self.shift_hz, dtype=float).reshape(-1)
        n = len(labels)
        if n < 1:
            raise ValueError("spin system needs at least one qubit")
        if shift.shape != (n,):
            raise ValueError(f"shift_hz has {shift.size} entries, expected {n}")
        coup = np.array(self.coupling_hz, dtype=float)
        if coup.size == 0 and n == 1:
            coup = np.zeros((1, 1))
        if coup.shape != (n, n):
            raise ValueError(f"coupling_hz has shape {coup.shape}, expected {(n, n)}")
        if not np.allclose(coup, coup.T, rtol=0, atol=1e-9):
            raise ValueError("coupling_hz must be symmetric")
        if np.any(np.diag(coup) != 0):
            raise ValueError("coupling_hz must have a zero diagonal")
        if not (np.all(np.isfinite(shift)) and np.all(np.isfinite(coup))):
            raise ValueError("shifts and couplings must be finite")
        species = tuple(str(s) for s in self.species) if self.species else tuple("" for _ in labels)
        if len(species) != n:
            raise ValueError(f"species has {len(species)} entries, expected {n}")
        shift.setflags(write=False)
        coup.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "shift_hz", shift)
        object.__setattr__(self, "coupling_hz", coup)
        object.__setattr__(self, "species", species)

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def check_layout(self, layout: RegisterLayout) -> None:
        if self.n_qubits != layout.n_total:
            raise ValueError(
                f"spin system has {self.n_qubits} qubits but layout needs {layout.n_total}"
            )

    def resolve_targets(self, targets) -> tuple[int, ...]:
        """Map a target selector to sorted zero-based qubit indices.

        ``targets`` may be ``"all"``, a species tag, a label, an int (1-based
        qubit number) or a sequence of these.
        """
        if isinstance(targets, (str, int, np.integer)):
            targets = [targets]
        picked: set[int] = set()
        for t in targets:
            if isinstance(t, (int, np.integer)) and not isinstance(t, bool):
                if not 1 <= t <= self.n_qubits:
                    raise ValueError(f"qubit number {t} outside 1..{self.n_qubits}")
                picked.add(int(t) - 1)
            elif t == "all":
                picked.update(range(self.n_qubits))
            elif t in self.labels:
                picked.add(self.labels.index(t))
            elif t in self.species:
                picked.update(i for i, s in enumerate(self.species) if s == t)
            else:
                raise ValueError(f"unknown pulse target {t!r}")
        if not picked:
            raise ValueError("pulse targets are empty")
        return tuple(sorted(picked))


@dataclass(frozen=True)
class TransitionIndex:
    qubit: int  # 1-based, 1 = most significant bit
    nu: int
    lower: int
    upper: int
    frequency_hz: float


def _bits(n_qubits: int) -> np.ndarray:
    """(2**n, n) array of basis-state bits, column 0 = most significant."""
    idx = np.arange(2**n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    return (idx[:, None] >> shifts[None, :]) & 1


def hamiltonian_energies(sys: SpinSystem) -> np.ndarray:
    """Diagonal of the weak-coupling Hamiltonian in rad/s.

    ``H = -sum_i w_i Z_i / 2 + sum_{i<j} 2 pi J_ij Z_i Z_j / 4``
    """
    z = 1 - 2 * _bits(sys.n_qubits)  # +1 for bit 0
    omega = 2 * np.pi * sys.shift_hz
    zeeman = -0.5 * z @ omega
    coup = np.triu(sys.coupling_hz, 1)
    scalar = 0.5 * np.pi * np.einsum("mi,ij,mj->m", z, coup, z)
    return zeeman + scalar


def line_pairs(n_qubits: int) -> np.ndarray:
    """(n * 2**(n-1), 3) array of (qubit, lower, upper) in canonical line order."""
    rows = []
    for j in range(1, n_qubits + 1):
        pos = n_qubits - j
        for nu in range(2 ** (n_qubits - 1)):
            high = nu >> pos
            low = nu & ((1 << pos) - 1)
            lower = (high << (pos + 1)) | low
            rows.append((j, lower, lower | (1 << pos)))
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def transitions(sys: SpinSystem, layout: RegisterLayout) -> list[TransitionIndex]:
    """All single-quantum transitions ordered by qubit, then by ``nu``."""
    sys.check_layout(layout)
    energies = hamiltonian_energies(sys)
    per_qubit = layout.N_total // 2
    out = []
    for row, (j, lo, up) in enumerate(line_pairs(layout.n_total)):
        freq = (energies[up] - energies[lo]) / (2 * np.pi)
        out.append(TransitionIndex(int(j), row % per_qubit, int(lo), int(up), float(freq)))
    return out


def check_resolution(trans: Sequence[TransitionIndex], linewidth_hz: float) -> list[list[TransitionIndex]]:
    """Group lines closer than ``linewidth_hz`` (single-linkage on sorted frequency).

    Returns only groups with more than one member; an empty list means every
    line is resolved.
    """
    if linewidth_hz <= 0:
        raise ValueError("linewidth_hz must be positive")
    ordered = sorted(trans, key=lambda t: t.frequency_hz)
    groups: list[list[TransitionIndex]] = []
    current: list[TransitionIndex] = []
    for t in ordered:
        if current and t.frequency_hz - current[-1].frequency_hz > linewidth_hz:
            groups.append(current)
            current = []
        current.append(t)
    if current:
        groups.append(current)
    return [g for g in groups if len(g) > 1]
