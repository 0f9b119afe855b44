import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aaqst import densmat, fixtures
from aaqst.constraint import (build_direct, build_probe, conditioning, merge_overlaps, overlap_operator,
                              probe_responses, row_map)
from aaqst.measure import embed, evolve, line_elements
from aaqst.model import RegisterLayout, SpinSystem, check_resolution, transitions
from aaqst.pulseseq import PulseSequence, experiment_sequences, get_template, synthesize

from conftest import random_system


def test_reference_shapes(liquid, oriented):
    for (sys, lay), sc, shape in ((liquid, fixtures.LIQUID, (24, 15)), (oriented, fixtures.ORIENTED, (160, 63))):
        M = build_probe(sys, lay, [get_template(sc.template_id)(sc.delays)])
        assert M.shape == shape
        assert len(M.row_map) == shape[0] and len(M.col_map) == shape[1]
        assert M.values.dtype == np.float64


def test_row_order():
    rows = row_map(RegisterLayout(1, 1), 2)
    assert rows[:4] == ((0, 1, 0, "Re"), (0, 1, 1, "Re"), (0, 2, 0, "Re"), (0, 2, 1, "Re"))
    assert rows[4] == (1, 1, 0, "Re")
    assert all(r[3] == "Re" for r in rows[:8]) and all(r[3] == "Im" for r in rows[8:])


def test_identity_selection_structure():
    n = 3
    lay = RegisterLayout(n, 0)
    sys = random_system(n, np.random.default_rng(0))
    M = build_probe(sys, lay, [PulseSequence()])
    N = 2**n
    labels = densmat.unknown_labels(N)
    n_lines = lay.n_lines
    assert not M.values[:, : N - 1].any()
    for row, t in enumerate(transitions(sys, lay)):
        r_col = labels.index(f"R{t.lower},{t.upper}")
        s_col = labels.index(f"S{t.lower},{t.upper}")
        expect_re = np.zeros(M.shape[1])
        expect_re[r_col] = 1
        expect_im = np.zeros(M.shape[1])
        expect_im[s_col] = 1
        np.testing.assert_array_equal(M.values[row], expect_re)
        np.testing.assert_array_equal(M.values[n_lines + row], expect_im)
    assert conditioning(M).rank == n * N


def test_identity_single_qubit_direct(one_spin):
    sys, lay = one_spin
    M = build_direct(sys, lay, [PulseSequence()])
    np.testing.assert_array_equal(M.values, [[0, 1, 0], [0, 0, 1]])


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 3), a=st.integers(0, 2), K=st.integers(1, 2), seed=st.integers(0, 10_000))
def test_probe_equals_direct(n, a, K, seed):
    rng = np.random.default_rng(seed)
    lay = RegisterLayout(n, a)
    sys = random_system(n + a, rng)
    tid = "two_delay_xy" if rng.random() < 0.5 else "two_delay_xx"
    seqs = experiment_sequences(tid, rng.uniform(0, 0.02, 2 * K), K)
    P, D = build_probe(sys, lay, seqs), build_direct(sys, lay, seqs)
    assert P.row_map == D.row_map and P.col_map == D.col_map
    np.testing.assert_allclose(P.values, D.values, rtol=0, atol=1e-10)


def test_reference_fixtures_probe_equals_direct(liquid, oriented):
    for (sys, lay), sc in ((liquid, fixtures.LIQUID), (oriented, fixtures.ORIENTED)):
        seqs = [get_template(sc.template_id)(sc.delays)]
        np.testing.assert_allclose(build_probe(sys, lay, seqs).values, build_direct(sys, lay, seqs).values,
                                   atol=1e-10)


def test_columns_are_linear(liquid):
    sys, lay = liquid
    u = synthesize(get_template("two_delay_xy")([2e-3, 3e-3]), sys, lay)
    probes = densmat.probe_matrices(4)
    np.testing.assert_allclose(probe_responses(u, lay, 2 * probes), 2 * probe_responses(u, lay, probes),
                               atol=1e-14)


def test_column_reproduces_forward_map(liquid, rng):
    """M @ pack(rho) equals simulated spectra for any state."""
    sys, lay = liquid
    seq = get_template("two_delay_xy")([2e-3, 3e-3])
    rho = densmat.random_state(2, 4)
    M = build_probe(sys, lay, [seq])
    u = synthesize(seq, sys, lay)
    lines = line_elements(evolve(embed(rho, lay), u), lay.n_total)
    np.testing.assert_allclose(M.values @ densmat.pack(rho), np.concatenate([lines.real, lines.imag]), atol=1e-14)


def test_permuting_experiments_permutes_blocks(liquid):
    sys, lay = liquid
    seqs = experiment_sequences("two_delay_xy", [1e-3, 2e-3, 5e-3, 7e-3], 2)
    a = build_probe(sys, lay, seqs).values
    b = build_probe(sys, lay, seqs[::-1]).values
    L = lay.n_lines
    perm = np.r_[L:2 * L, 0:L, 3 * L:4 * L, 2 * L:3 * L]
    np.testing.assert_array_equal(a[perm], b)


def test_conditioning_orthonormal_columns():
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(10, 4)))
    rep = conditioning(q)
    assert rep.condition == pytest.approx(1.0)
    assert rep.rank == 4 and rep.full_rank


def test_conditioning_zero_column():
    m = np.random.default_rng(1).normal(size=(10, 4))
    m[:, 2] = 0
    rep = conditioning(m)
    assert rep.rank == 3 and not rep.full_rank and rep.condition == np.inf


def test_conditioning_fewer_rows_than_unknowns():
    rep = conditioning(np.random.default_rng(2).normal(size=(3, 5)))
    assert rep.condition == np.inf


def test_conditioning_descending_and_tolerance():
    m = np.random.default_rng(3).normal(size=(8, 5))
    rep = conditioning(m)
    assert np.all(np.diff(rep.singular_values) <= 0)
    assert rep.tolerance == pytest.approx(8 * rep.singular_values[0] * 1e-12)
    assert rep.condition == pytest.approx(np.linalg.cond(m))


def test_overlap_merging_sums_rows():
    sys = SpinSystem(["a", "b"], [300.0, 300.0], np.zeros((2, 2)))
    lay = RegisterLayout(2, 0)
    groups = check_resolution(transitions(sys, lay), 0.1)
    M = build_probe(sys, lay, [get_template("two_delay_xx")([1e-3, 2e-3])])
    merged = merge_overlaps(M, groups)
    assert merged.shape == (2, 15)
    S, rows = overlap_operator(M.row_map, groups)
    np.testing.assert_allclose(merged.values, S @ M.values)
    np.testing.assert_allclose(merged.values[0], M.values[:4].sum(axis=0))
    assert rows[0][3] == "Re" and rows[1][3] == "Im"


def test_mismatched_system(liquid):
    sys, _ = liquid
    with pytest.raises(ValueError):
        build_probe(sys, RegisterLayout(3, 1), [PulseSequence()])
    with pytest.raises(ValueError):
        build_probe(sys, RegisterLayout(2, 1), [])
