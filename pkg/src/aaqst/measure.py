"""Ancilla embedding, unitary evolution and single-quantum line readout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densmat import StateError, check_state, partial_trace_ancilla
from .model import RegisterLayout, SpinSystem, line_pairs, transitions
from .pulseseq import PulseSequence, synthesize

UNITARY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PeakList:
    """Complex line intensities in canonical (qubit, nu) order."""

    qubit: np.ndarray
    nu: np.ndarray
    frequency_hz: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        for name, dtype in (("qubit", np.int64), ("nu", np.int64), ("frequency_hz", float), ("intensity", complex)):
            arr = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.qubit.size
        if not (self.nu.size == self.frequency_hz.size == self.intensity.size == n):
            raise ValueError("peak list columns have different lengths")

    def __len__(self):
        return self.qubit.size

    def with_intensity(self, intensity) -> "PeakList":
        return PeakList(self.qubit, self.nu, self.frequency_hz, intensity)

    def stacked(self) -> np.ndarray:
        """Real parts followed by imaginary parts."""
        return np.concatenate([self.intensity.real, self.intensity.imag])

    def check_canonical(self, layout: RegisterLayout) -> None:
        expect = [(j, nu) for j in range(1, layout.n_total + 1) for nu in range(layout.N_total // 2)]
        have = list(zip(self.qubit.tolist(), self.nu.tolist()))
        if have != expect:
            missing = sorted(set(expect) - set(have))
            extra = sorted(set(have) - set(expect))
            detail = []
            if missing:
                detail.append(f"missing (j, nu) rows {missing[:10]}{' ...' if len(missing) > 10 else ''}")
            if extra:
                detail.append(f"unexpected rows {extra[:10]}")
            if not detail:
                detail.append("rows are not in canonical (j, nu) order")
            raise ValueError("peak list does not match register: " + "; ".join(detail))


def embed(rho: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    """``rho (x) 1/N_anc`` on the combined register (also for stacks of states)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != (layout.N, layout.N):
        raise StateError(f"state is {rho.shape[-1]}-dim, layout input register is {layout.N}-dim")
    if layout.n_ancilla == 0:
        return rho.copy()
    Na = layout.N_anc
    out = np.einsum("...ij,ab->...iajb", rho, np.eye(Na) / Na)
    return out.reshape(rho.shape[:-2] + (layout.N_total, layout.N_total))


def evolve(rho: np.ndarray, u: np.ndarray, check: bool = True) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != np.shape(rho)[-2:]:
        raise ValueError(f"unitary shape {u.shape} does not match state {np.shape(rho)}")
    if check:
        err = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
        if err > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max deviation {err:.2e})")
    return u @ rho @ u.conj().T


def line_elements(rho_tilde: np.ndarray, n_qubits: int) -> np.ndarray:
    """``<lower|rho|upper>`` for every line; works on stacks of matrices too."""
    pairs = line_pairs(n_qubits)
    return np.asarray(rho_tilde)[..., pairs[:, 1], pairs[:, 2]]


def measure_lines(rho_tilde: np.ndarray, sys: SpinSystem, layout: RegisterLayout) -> PeakList:
    sys.check_layout(layout)
    rho_tilde = np.asarray(rho_tilde)
    if rho_tilde.shape != (layout.N_total, layout.N_total):
        raise StateError(f"state is {rho_tilde.shape[0]}-dim, register is {layout.N_total}-dim")
    trans = transitions(sys, layout)
    return PeakList(
        [t.qubit for t in trans],
        [t.nu for t in trans],
        [t.frequency_hz for t in trans],
        line_elements(rho_tilde, layout.n_total),
    )


def simulate_spectrum(rho: np.ndarray, seq: PulseSequence, sys: SpinSystem, layout: RegisterLayout) -> PeakList:
    """Embed an input-register state, apply ``seq`` and read out every line."""
    u = synthesize(seq, sys, layout)
    return measure_lines(evolve(embed(rho, layout), u), sys, layout)


def prepare(rho: np.ndarray, seq: PulseSequence, sys: SpinSystem, layout: RegisterLayout) -> np.ndarray:
    """Input-register state after ``seq`` acts on ``rho (x) 1/N_anc``, ancilla traced out."""
    rho = check_state(rho)
    u = synthesize(seq, sys, layout)
    out = evolve(embed(rho, layout), u)
    return partial_trace_ancilla(out, layout.N, layout.N_anc)


def add_noise(peaks: PeakList, sigma_rel: float, seed=None) -> PeakList:
    """Add complex Gaussian noise of std ``sigma_rel * max|I|`` to each quadrature."""
    if sigma_rel < 0:
        raise ValueError("sigma_rel must be non-negative")
    if sigma_rel == 0 or len(peaks) == 0:
        return peaks.with_intensity(peaks.intensity)
    rng = np.random.default_rng(seed)
    scale = sigma_rel * np.abs(peaks.intensity).max()
    noise = rng.normal(scale=scale, size=(2, len(peaks)))
    return peaks.with_intensity(peaks.intensity + noise[0] + 1j * noise[1])
