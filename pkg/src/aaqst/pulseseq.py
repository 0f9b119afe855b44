"""Pulse sequences and their unitaries on the combined register.

Elements are listed in the order they are applied in time; the synthesized
matrix is the product in reverse order.  Pulses are ideal instantaneous
rotations and delays evolve under the diagonal weak-coupling Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence, Union

import numpy as np

from .model import RegisterLayout, SpinSystem, hamiltonian_energies

X_PHASE = 0.0
Y_PHASE = np.pi / 2

# Dense synthesis is capped here: 4096 x 4096 complex128 is 256 MiB per matrix.
MAX_QUBITS = 12


@dataclass(frozen=True)
class Rotation:
    angle: float
    phase: float = X_PHASE
    targets: Union[str, int, tuple] = "all"

    def __post_init__(self):
        if not (np.isfinite(self.angle) and np.isfinite(self.phase)):
            raise ValueError("rotation angle and phase must be finite")
        if isinstance(self.targets, list):
            object.__setattr__(self, "targets", tuple(self.targets))
        if self.targets == () or self.targets == "":
            raise ValueError("rotation targets are empty")


@dataclass(frozen=True)
class Delay:
    tau: float

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError(f"delay must be finite and non-negative, got {self.tau!r}")


@dataclass(frozen=True, eq=False)
class Controlled:
    """``(1 (x) V) sum_a U_a (x) |a><a|`` with one input-register unitary per ancilla state."""

    unitaries: tuple
    ancilla_unitary: np.ndarray | None = None

    def __post_init__(self):
        mats = tuple(np.asarray(u, dtype=complex) for u in self.unitaries)
        if not mats:
            raise ValueError("controlled element needs at least one block")
        shape = mats[0].shape
        if len(shape) != 2 or shape[0] != shape[1] or any(m.shape != shape for m in mats):
            raise ValueError("controlled blocks must be square and of equal size")
        object.__setattr__(self, "unitaries", mats)
        if self.ancilla_unitary is not None:
            v = np.asarray(self.ancilla_unitary, dtype=complex)
            if v.shape != (len(mats), len(mats)):
                raise ValueError(f"ancilla unitary must be {len(mats)}x{len(mats)}")
            object.__setattr__(self, "ancilla_unitary", v)

    def matrix(self) -> np.ndarray:
        n_anc = len(self.unitaries)
        out = sum(np.kron(u, np.diag(np.eye(n_anc)[a])) for a, u in enumerate(self.unitaries))
        if self.ancilla_unitary is not None:
            out = np.kron(np.eye(self.unitaries[0].shape[0]), self.ancilla_unitary) @ out
        return out


PulseElement = Union[Rotation, Delay, Controlled]


@dataclass(frozen=True)
class PulseSequence:
    elements: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self):
        return len(self.elements)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        return PulseSequence(self.elements + other.elements)


def rotation_1q(angle: float, phase: float) -> np.ndarray:
    """``exp(-i angle (cos(phase) X + sin(phase) Y) / 2)``."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array(
        [[c, -1j * s * np.exp(-1j * phase)], [-1j * s * np.exp(1j * phase), c]],
        dtype=complex,
    )


def _resolve(targets, sys: SpinSystem, layout: RegisterLayout | None) -> tuple[int, ...]:
    if targets in ("input", "ancilla"):
        if layout is None:
            raise ValueError(f"target {targets!r} needs a register layout")
        if targets == "input":
            return tuple(range(layout.n_input))
        if layout.n_ancilla == 0:
            raise ValueError("layout has no ancilla qubits")
        return tuple(range(layout.n_input, layout.n_total))
    return sys.resolve_targets(targets)


def rotation_matrix(rot: Rotation, sys: SpinSystem, layout: RegisterLayout | None = None) -> np.ndarray:
    picked = set(_resolve(rot.targets, sys, layout))
    r = rotation_1q(rot.angle, rot.phase)
    eye = np.eye(2, dtype=complex)
    return reduce(np.kron, [r if q in picked else eye for q in range(sys.n_qubits)])


def delay_phases(tau: float, energies: np.ndarray) -> np.ndarray:
    return np.exp(-1j * energies * tau)


def synthesize(seq: PulseSequence, sys: SpinSystem, layout: RegisterLayout | None = None) -> np.ndarray:
    """Unitary of ``seq`` on the full register described by ``sys``."""
    if sys.n_qubits > MAX_QUBITS:
        raise ValueError(f"dense synthesis limited to {MAX_QUBITS} qubits")
    if layout is not None:
        sys.check_layout(layout)
    dim = 2**sys.n_qubits
    energies = None
    u = np.eye(dim, dtype=complex)
    for el in seq.elements:
        if isinstance(el, Delay):
            if energies is None:
                energies = hamiltonian_energies(sys)
            u = delay_phases(el.tau, energies)[:, None] * u
        elif isinstance(el, Rotation):
            u = rotation_matrix(el, sys, layout) @ u
        elif isinstance(el, Controlled):
            m = el.matrix()
            if m.shape != (dim, dim):
                raise ValueError(f"controlled element is {m.shape[0]}-dim, register is {dim}-dim")
            if layout is not None and len(el.unitaries) != layout.N_anc:
                raise ValueError(f"controlled element needs {layout.N_anc} blocks, got {len(el.unitaries)}")
            u = m @ u
        else:
            raise TypeError(f"unknown pulse element {el!r}")
    return u


def template_two_delay(tau1: float, tau2: float, phase1: float = X_PHASE, phase2: float = X_PHASE,
                       targets="all") -> PulseSequence:
    """``(pi/2)_phase2 U(tau2) (pi/2)_phase1 U(tau1)`` as a time-ordered sequence."""
    return PulseSequence(
        [Delay(tau1), Rotation(np.pi / 2, phase1, targets), Delay(tau2), Rotation(np.pi / 2, phase2, targets)]
    )


def template_three_delay(tau1: float, tau2: float, tau3: float,
                         phases: Sequence[float] = (X_PHASE, Y_PHASE, X_PHASE), targets="all") -> PulseSequence:
    els = []
    for tau, ph in zip((tau1, tau2, tau3), phases):
        els += [Delay(tau), Rotation(np.pi / 2, ph, targets)]
    return PulseSequence(els)


@dataclass(frozen=True)
class Template:
    """A family of sequences parametrised by free delays (seconds)."""

    name: str
    n_params: int
    build: Callable[..., PulseSequence]

    def __call__(self, params: Sequence[float]) -> PulseSequence:
        if len(params) != self.n_params:
            raise ValueError(f"template {self.name} takes {self.n_params} parameters, got {len(params)}")
        return self.build(*params)


TEMPLATES = {
    # two-qubit input + one ancilla experiment: x then y pulse
    "two_delay_xy": Template("two_delay_xy", 2, lambda t1, t2: template_two_delay(t1, t2, X_PHASE, Y_PHASE)),
    # three-qubit input + two ancilla experiment: both pulses along x
    "two_delay_xx": Template("two_delay_xx", 2, lambda t1, t2: template_two_delay(t1, t2, X_PHASE, X_PHASE)),
    # extra delay/pulse pair; reaches full rank where the two-delay forms fall short
    "three_delay_xyx": Template("three_delay_xyx", 3, lambda t1, t2, t3: template_three_delay(t1, t2, t3)),
}


def get_template(template_id: str) -> Template:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise ValueError(f"unknown template {template_id!r}; known: {sorted(TEMPLATES)}") from None


def experiment_sequences(template_id: str, params: Sequence[float], K: int) -> list[PulseSequence]:
    """Split a flat parameter vector into K independent instances of a template."""
    tpl = get_template(template_id)
    params = list(params)
    if len(params) != K * tpl.n_params:
        raise ValueError(f"{K} experiments of {template_id} need {K * tpl.n_params} parameters, got {len(params)}")
    return [tpl(params[k * tpl.n_params:(k + 1) * tpl.n_params]) for k in range(K)]


def state_prep_sequences() -> dict[str, PulseSequence]:
    """Preparation sequences used for the second test state of each experiment."""
    tau0 = 2.5e-3
    return {
        "identity": PulseSequence(),
        "pi4_pi4": PulseSequence([Rotation(np.pi / 4, np.pi / 4, "input")]),
        "U0": PulseSequence([
            Rotation(np.pi / 2, Y_PHASE, "F1"),
            Delay(tau0),
            Rotation(np.pi, X_PHASE, "H"),
            Delay(tau0),
            Rotation(np.pi / 2, X_PHASE, "F"),
        ]),
    }
