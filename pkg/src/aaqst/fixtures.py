"""Spin systems, states and delays of the two reference experiments.

The Hamiltonian tables of both molecules only exist as figures, so the
shipped parameter files are approximations (see their ``provenance`` field).
Delays, templates and target states are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import fileio
from .densmat import from_pauli_terms
from .measure import prepare
from .model import RegisterLayout, SpinSystem
from .pulseseq import state_prep_sequences


@dataclass(frozen=True)
class Scenario:
    name: str
    system_file: str
    template_id: str
    delays: tuple  # seconds
    reported_condition: float
    bounds: tuple  # optimiser delay bounds, seconds

    def load(self) -> tuple[SpinSystem, RegisterLayout]:
        return load_system(self.system_file)


LIQUID = Scenario("liquid", "c2f3i.json", "two_delay_xy", (6.7783e-3, 8.0182e-3), 17.3, (1e-4, 20e-3))
ORIENTED = Scenario("oriented", "btfb_mbba.json", "two_delay_xx", (431.2e-6, 511.5e-6), 14.6, (5e-5, 2e-3))
SCENARIOS = {s.name: s for s in (LIQUID, ORIENTED)}


def data_path(name: str):
    return resources.files("aaqst") / "data" / name


def load_system(name: str) -> tuple[SpinSystem, RegisterLayout]:
    with resources.as_file(data_path(name)) as p:
        return fileio.read_system(p)


def thermal_state(n_input: int) -> np.ndarray:
    """``sum_i Z_i / 2`` on the input register."""
    terms = [(0.5, "I" * i + "Z" + "I" * (n_input - i - 1)) for i in range(n_input)]
    return from_pauli_terms(terms)


def liquid_rho2_stated() -> np.ndarray:
    """Second liquid-state target as written: ``(X+X)/2 - (Y+Y)/2 + (Z+Z)/sqrt 2``."""
    return from_pauli_terms([
        (0.5, "XI"), (0.5, "IX"),
        (-0.5, "YI"), (-0.5, "IY"),
        (1 / np.sqrt(2), "ZI"), (1 / np.sqrt(2), "IZ"),
    ])


def liquid_rho2_simulated() -> np.ndarray:
    sys, layout = LIQUID.load()
    return prepare(thermal_state(layout.n_input), state_prep_sequences()["pi4_pi4"], sys, layout)


def oriented_rho2() -> np.ndarray:
    """``U0 rho1 U0^H`` with the heteronuclear preparation, ancilla traced out."""
    sys, layout = ORIENTED.load()
    return prepare(thermal_state(layout.n_input), state_prep_sequences()["U0"], sys, layout)


def generic_system(n_input: int, n_ancilla: int = 0, seed: int = 0) -> tuple[SpinSystem, RegisterLayout]:
    """Well-resolved weakly coupled register with all pairs coupled."""
    rng = np.random.default_rng(seed)
    layout = RegisterLayout(n_input, n_ancilla)
    n = layout.n_total
    shifts = np.linspace(-4000.0, 4000.0, n) + rng.uniform(-300, 300, n) if n > 1 else rng.uniform(-500, 500, 1)
    J = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    J[iu] = rng.uniform(20, 150, iu[0].size) * rng.choice([-1, 1], iu[0].size)
    J = J + J.T
    labels = [f"Q{i + 1}" for i in range(n)]
    return SpinSystem(labels, shifts, J), layout
