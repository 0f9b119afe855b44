"""Solving the linear tomography system and planning experiment counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constraint import ConditioningReport, ConstraintMatrix, build_probe, conditioning, merge_overlaps, overlap_operator
from .densmat import unpack
from .measure import PeakList
from .model import RegisterLayout, SpinSystem, check_resolution, transitions
from .pulseseq import PulseSequence


class IdentifiabilityError(ValueError):
    """The constraint matrix has a null space, so the state is not determined."""

    def __init__(self, null_dim: int, rank: int, n_unknowns: int):
        self.null_dim = null_dim
        self.rank = rank
        self.n_unknowns = n_unknowns
        super().__init__(
            f"constraint matrix rank {rank} < {n_unknowns} unknowns "
            f"(null space dimension {null_dim}); add experiments or ancilla qubits"
        )


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho: np.ndarray
    unknowns: np.ndarray
    residual_norm: float
    condition: ConditioningReport
    sensitivity: np.ndarray


def solve(M: ConstraintMatrix, intensities: Sequence[float], require_full_rank: bool = True) -> ReconstructionResult:
    """Least-squares solution of ``M x = s`` through the SVD.

    With ``require_full_rank=False`` a rank-deficient system returns the
    minimum-norm solution: identifiable combinations are exact, the null
    space is set to zero.
    """
    s = np.asarray(intensities, dtype=float).reshape(-1)
    if s.size != M.shape[0]:
        raise ValueError(f"intensity vector has {s.size} entries, constraint matrix has {M.shape[0]} rows")
    report = conditioning(M)
    n = M.n_unknowns
    if not report.full_rank and require_full_rank:
        raise IdentifiabilityError(n - report.rank, report.rank, n)
    u, sv, vt = np.linalg.svd(M.values, full_matrices=False)
    keep = sv > report.tolerance
    u, sv, vt = u[:, keep], sv[keep], vt[keep]
    x = vt.T @ ((u.T @ s) / sv)
    residual = float(np.linalg.norm(M.values @ x - s))
    sensitivity = (vt.T**2) @ (1.0 / sv**2)
    return ReconstructionResult(unpack(x), x, residual, report, sensitivity)


def stack_intensities(peak_lists: Sequence[PeakList]) -> np.ndarray:
    """All real parts (experiment by experiment), then all imaginary parts."""
    re = [p.intensity.real for p in peak_lists]
    im = [p.intensity.imag for p in peak_lists]
    return np.concatenate(re + im)


def tomo(sys: SpinSystem, layout: RegisterLayout, sequences: Sequence[PulseSequence],
         peak_lists: Sequence[PeakList], linewidth_hz: float | None = None) -> ReconstructionResult:
    """Reconstruct the input-register state from K measured spectra.

    With ``linewidth_hz`` set, lines closer than one linewidth are treated as a
    single observed line whose intensity is the sum of its members.
    """
    if len(peak_lists) != len(sequences):
        raise ValueError(f"{len(sequences)} sequences but {len(peak_lists)} peak lists")
    for k, peaks in enumerate(peak_lists):
        try:
            peaks.check_canonical(layout)
        except ValueError as exc:
            raise ValueError(f"experiment {k}: {exc}") from None
    M = build_probe(sys, layout, sequences)
    s = stack_intensities(peak_lists)
    if linewidth_hz is not None:
        groups = check_resolution(transitions(sys, layout), linewidth_hz)
        if groups:
            S, _ = overlap_operator(M.row_map, groups)
            M, s = merge_overlaps(M, groups), S @ s
    return solve(M, s)


@dataclass(frozen=True)
class ExperimentPlan:
    n_input: int
    n_ancilla: int
    K_min: int
    rank_verified: bool = False
    bound: int = 0
    condition: float | None = None
    params: tuple = field(default=())


def counting_bound(n_input: int, n_ancilla: int) -> int:
    """``ceil((N**2 - 1) / (n_total * N_total))``."""
    lay = RegisterLayout(n_input, n_ancilla)
    return math.ceil(lay.n_unknowns / (lay.n_total * lay.N_total))


def plan(n_input: int, n_ancilla: int, sys: SpinSystem | None = None, template_id: str | None = None,
         config=None) -> ExperimentPlan:
    """Minimum experiment count, optionally verified by optimising a template.

    Verification starts at the counting bound and adds experiments until the
    optimised constraint matrix reaches full rank, up to the ancilla-free bound.
    """
    bound = counting_bound(n_input, n_ancilla)
    if sys is None or template_id is None:
        return ExperimentPlan(n_input, n_ancilla, bound, False, bound)
    from .optimize import OptimizationFailed, optimize_delays

    layout = RegisterLayout(n_input, n_ancilla)
    ceiling = max(bound, math.ceil(layout.n_unknowns / (layout.n_input * layout.N)))
    for K in range(bound, ceiling + 1):
        try:
            res = optimize_delays(sys, layout, template_id, K, config)
        except OptimizationFailed:
            continue
        return ExperimentPlan(n_input, n_ancilla, K, True, bound, res.report.condition, tuple(res.params))
    return ExperimentPlan(n_input, n_ancilla, ceiling, False, bound)
