"""Constraint matrix mapping state unknowns to line intensities.

Rows: all real-part rows, then all imaginary-part rows; inside each block
experiment ``k`` varies slowest, then qubit ``j``, then ``nu``.  Columns
follow the unknown-vector order of :mod:`aaqst.densmat`.

Two builders exist.  :func:`build_probe` sets one unknown at a time, pushes
that probe state through the simulated experiment and reads the lines.
:func:`build_direct` evaluates the matrix-element products
``<lower|U|m><m'|U^H|upper>`` summed over the mixed ancilla.  They are
computed independently and must agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import measure
from .densmat import offdiag_pairs, probe_matrices, unknown_labels
from .model import RegisterLayout, SpinSystem, TransitionIndex, line_pairs
from .pulseseq import PulseSequence, synthesize

SINGULAR_SENTINEL = np.inf


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    values: np.ndarray
    row_map: tuple  # (k, j, nu, "Re" | "Im"); merged rows carry a tuple of (j, nu)
    col_map: tuple
    n_input: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_unknowns(self) -> int:
        return 4**self.n_input - 1


@dataclass(frozen=True, eq=False)
class ConditioningReport:
    singular_values: np.ndarray
    rank: int
    condition: float
    tolerance: float
    n_unknowns: int

    @property
    def full_rank(self) -> bool:
        return self.rank >= self.n_unknowns

    def as_dict(self) -> dict:
        return {
            "condition": None if not np.isfinite(self.condition) else float(self.condition),
            "rank": int(self.rank),
            "n_unknowns": int(self.n_unknowns),
            "full_rank": bool(self.full_rank),
            "tolerance": float(self.tolerance),
            "singular_values": [float(s) for s in self.singular_values],
        }


def row_map(layout: RegisterLayout, K: int) -> tuple:
    pairs = line_pairs(layout.n_total)
    per_qubit = layout.N_total // 2
    rows = []
    for quad in ("Re", "Im"):
        for k in range(K):
            for i, (j, _, _) in enumerate(pairs):
                rows.append((k, int(j), i % per_qubit, quad))
    return tuple(rows)


def _assemble(blocks: list[np.ndarray], layout: RegisterLayout) -> ConstraintMatrix:
    """blocks[k] is the complex (lines, unknowns) response of experiment k."""
    stacked = np.concatenate(blocks, axis=0)
    values = np.concatenate([stacked.real, stacked.imag], axis=0)
    return ConstraintMatrix(
        np.ascontiguousarray(values),
        row_map(layout, len(blocks)),
        tuple(unknown_labels(layout.N)),
        layout.n_input,
    )


def _unitaries(sys, layout, sequences) -> list[np.ndarray]:
    sys.check_layout(layout)
    if len(sequences) < 1:
        raise ValueError("need at least one experiment")
    return [synthesize(seq, sys, layout) for seq in sequences]


def probe_responses(u: np.ndarray, layout: RegisterLayout, probes: np.ndarray | None = None) -> np.ndarray:
    """(lines, unknowns) complex intensities of every probe state after ``u``."""
    if probes is None:
        probes = probe_matrices(layout.N)
    rho_tilde = measure.embed(probes, layout)
    evolved = measure.evolve(rho_tilde, u)
    return measure.line_elements(evolved, layout.n_total).T


def build_probe(sys: SpinSystem, layout: RegisterLayout, sequences: Sequence[PulseSequence]) -> ConstraintMatrix:
    probes = probe_matrices(layout.N)
    blocks = [probe_responses(u, layout, probes) for u in _unitaries(sys, layout, sequences)]
    return _assemble(blocks, layout)


def direct_response(u: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    N, Na = layout.N, layout.N_anc
    pairs = line_pairs(layout.n_total)
    lower = u[pairs[:, 1]].reshape(-1, N, Na)
    upper = u[pairs[:, 2]].reshape(-1, N, Na)
    # g[l, m, m'] = (1/Na) sum_a <lower_l|U|m,a> <m',a|U^H|upper_l>
    g = np.einsum("lma,lna->lmn", lower, upper.conj()) / Na
    iu, ju = offdiag_pairs(N)
    diag = np.arange(N - 1)
    a_b = g[:, diag, diag] - g[:, N - 1, N - 1][:, None]
    c_d = g[:, iu, ju] + g[:, ju, iu]
    e_f = 1j * g[:, iu, ju] - 1j * g[:, ju, iu]
    return np.concatenate([a_b, c_d, e_f], axis=1)


def build_direct(sys: SpinSystem, layout: RegisterLayout, sequences: Sequence[PulseSequence]) -> ConstraintMatrix:
    blocks = [direct_response(u, layout) for u in _unitaries(sys, layout, sequences)]
    return _assemble(blocks, layout)


def conditioning(M: ConstraintMatrix | np.ndarray, n_unknowns: int | None = None) -> ConditioningReport:
    """Singular values, numerical rank and condition number ``s_max / s_min``.

    The rank tolerance is ``max(rows, cols) * s_max * 1e-12``.  A matrix with
    fewer than ``n_unknowns`` singular values above tolerance gets an
    infinite condition number.
    """
    values = M.values if isinstance(M, ConstraintMatrix) else np.asarray(M, dtype=float)
    if n_unknowns is None:
        n_unknowns = M.n_unknowns if isinstance(M, ConstraintMatrix) else values.shape[1]
    if values.size == 0:
        raise ValueError("empty constraint matrix")
    sv = np.linalg.svd(values, compute_uv=False)
    smax = sv[0] if sv.size else 0.0
    tol = max(values.shape) * smax * 1e-12
    rank = int(np.sum(sv > tol)) if smax > 0 else 0
    if rank < n_unknowns or sv.size < n_unknowns:
        cond = SINGULAR_SENTINEL
    else:
        cond = float(smax / sv[n_unknowns - 1])
    return ConditioningReport(sv, rank, cond, float(tol), int(n_unknowns))


def overlap_operator(rows: Sequence[tuple], groups: Sequence[Sequence[TransitionIndex]]) -> tuple[np.ndarray, tuple]:
    """Row-summing matrix that merges lines of each overlap group.

    Returns ``(S, merged_row_map)``; apply as ``S @ M.values`` and ``S @ s``.
    """
    member = {}
    for gi, group in enumerate(groups):
        for t in group:
            member[(t.qubit, t.nu)] = gi
    new_rows: list[tuple] = []
    index: dict[tuple, int] = {}
    entries = []
    for r, (k, j, nu, quad) in enumerate(rows):
        gi = member.get((j, nu))
        key = (k, quad, gi) if gi is not None else (k, quad, j, nu)
        if key not in index:
            index[key] = len(new_rows)
            if gi is None:
                new_rows.append((k, j, nu, quad))
            else:
                lines = tuple((t.qubit, t.nu) for t in groups[gi])
                new_rows.append((k, lines, None, quad))
        entries.append((index[key], r))
    S = np.zeros((len(new_rows), len(rows)))
    for i, r in entries:
        S[i, r] = 1.0
    return S, tuple(new_rows)


def merge_overlaps(M: ConstraintMatrix, groups) -> ConstraintMatrix:
    if not groups:
        return M
    S, rows = overlap_operator(M.row_map, groups)
    return ConstraintMatrix(S @ M.values, rows, M.col_map, M.n_input)
