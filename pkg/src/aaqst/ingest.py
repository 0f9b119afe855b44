"""Complex line amplitudes from frequency-domain spectra.

Line positions and a shared linewidth are known, so fitting reduces to linear
least squares against a complex Lorentzian basis
``L_t(f) = 1 / (1 + i (f - f_t) / (linewidth / 2))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measure import PeakList
from .model import TransitionIndex

MAX_BASIS_CONDITION = 1e8


class OverlapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    frequency_hz: np.ndarray
    values: np.ndarray
    linewidth_hz: float | None = None
    reference_scale: float | None = None

    def __post_init__(self):
        f = np.array(self.frequency_hz, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=complex).reshape(-1)
        if f.size < 2:
            raise ValueError("a trace needs at least two samples")
        if v.size != f.size:
            raise ValueError("frequency and value arrays differ in length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("trace frequencies must be strictly increasing")
        object.__setattr__(self, "frequency_hz", f)
        object.__setattr__(self, "values", v)


def lorentzian(freq: np.ndarray, center: float, linewidth_hz: float) -> np.ndarray:
    return 1.0 / (1.0 + 1j * (np.asarray(freq) - center) / (linewidth_hz / 2))


def basis(freq: np.ndarray, centers: Sequence[float], linewidth_hz: float) -> np.ndarray:
    freq = np.asarray(freq, dtype=float)
    centers = np.asarray(centers, dtype=float)
    return 1.0 / (1.0 + 1j * (freq[:, None] - centers[None, :]) / (linewidth_hz / 2))


def _colliding(trans: Sequence[TransitionIndex], vt_last: np.ndarray) -> list[tuple[int, int]]:
    weights = np.abs(vt_last)
    picked = np.argsort(weights)[::-1][:2]
    return [(trans[i].qubit, trans[i].nu) for i in sorted(picked)]


def fit_amplitudes(trace: SpectrumTrace, trans: Sequence[TransitionIndex],
                   linewidth_hz: float | None = None) -> PeakList:
    """One complex amplitude per transition; output in the order of ``trans``."""
    lw = linewidth_hz if linewidth_hz is not None else trace.linewidth_hz
    if lw is None or lw <= 0:
        raise ValueError("a positive linewidth is required")
    centers = np.array([t.frequency_hz for t in trans])
    f = trace.frequency_hz
    outside = [(t.qubit, t.nu) for t in trans if not f[0] <= t.frequency_hz <= f[-1]]
    if outside:
        raise ValueError(f"transitions {outside} lie outside the trace span [{f[0]}, {f[-1]}] Hz")
    B = basis(f, centers, lw)
    u, sv, vt = np.linalg.svd(B, full_matrices=False)
    if sv.size and (sv[-1] == 0 or sv[0] / sv[-1] > MAX_BASIS_CONDITION):
        raise OverlapError(f"lines too close to separate, e.g. (j, nu) {_colliding(trans, vt[-1])}")
    amps = vt.conj().T @ ((u.conj().T @ trace.values) / sv)
    if trace.reference_scale is not None:
        amps = amps * trace.reference_scale
    return PeakList([t.qubit for t in trans], [t.nu for t in trans], centers, amps)


def synthesize_trace(peaks: PeakList, linewidth_hz: float, grid: Sequence[float]) -> SpectrumTrace:
    """Sum of complex Lorentzians with the peak amplitudes on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if linewidth_hz <= 0:
        raise ValueError("linewidth_hz must be positive")
    if len(peaks) and (peaks.frequency_hz.min() < grid.min() or peaks.frequency_hz.max() > grid.max()):
        raise ValueError("grid does not cover every peak frequency")
    values = np.zeros(grid.size, dtype=complex)
    for f, amp in zip(peaks.frequency_hz, peaks.intensity):
        values += amp * lorentzian(grid, f, linewidth_hz)
    return SpectrumTrace(grid, values, linewidth_hz)


def default_grid(peaks_or_freqs, linewidth_hz: float, points_per_linewidth: int = 4, margin: float = 20.0) -> np.ndarray:
    """Uniform grid spanning all lines plus ``margin`` linewidths on each side."""
    freqs = peaks_or_freqs.frequency_hz if isinstance(peaks_or_freqs, PeakList) else np.asarray(peaks_or_freqs)
    lo = freqs.min() - margin * linewidth_hz
    hi = freqs.max() + margin * linewidth_hz
    n = int(np.ceil((hi - lo) / linewidth_hz * points_per_linewidth)) + 1
    return np.linspace(lo, hi, n)
