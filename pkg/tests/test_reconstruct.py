import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aaqst import densmat, fixtures
from aaqst.constraint import build_probe
from aaqst.measure import PeakList, add_noise, simulate_spectrum
from aaqst.model import RegisterLayout, check_resolution, transitions
from aaqst.optimize import OptimizerConfig
from aaqst.pulseseq import PulseSequence, experiment_sequences, get_template
from aaqst.reconstruct import IdentifiabilityError, counting_bound, plan, solve, stack_intensities, tomo

from conftest import random_system


def _liquid_matrix(liquid):
    sys, lay = liquid
    return build_probe(sys, lay, [get_template("two_delay_xy")(fixtures.LIQUID.delays)])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_forward_round_trip(liquid, seed):
    M = _liquid_matrix(liquid)
    rho = densmat.random_state(2, seed)
    res = solve(M, M.values @ densmat.pack(rho))
    assert densmat.fidelity(res.rho, rho) >= 1 - 1e-9
    assert res.residual_norm < 1e-12


def test_zero_intensities(liquid):
    res = solve(_liquid_matrix(liquid), np.zeros(24))
    assert not res.rho.any() and res.residual_norm == 0


def test_rank_deficient_raises():
    lay = RegisterLayout(2, 0)
    sys = random_system(2, np.random.default_rng(0))
    M = build_probe(sys, lay, [get_template("two_delay_xy")([1e-3, 2e-3])])
    with pytest.raises(IdentifiabilityError) as info:
        solve(M, np.zeros(M.shape[0]))
    assert info.value.null_dim == 15 - info.value.rank > 0


def test_wrong_length(liquid):
    with pytest.raises(ValueError):
        solve(_liquid_matrix(liquid), np.zeros(5))


def test_normal_equations_agree(liquid):
    M = _liquid_matrix(liquid)
    s = np.random.default_rng(3).normal(size=24)
    x_ne = np.linalg.solve(M.values.T @ M.values, M.values.T @ s)
    np.testing.assert_allclose(solve(M, s).unknowns, x_ne, atol=1e-8)


def test_sensitivity_is_pinv_gram_diagonal(liquid):
    M = _liquid_matrix(liquid)
    res = solve(M, np.zeros(24))
    np.testing.assert_allclose(res.sensitivity, np.diag(np.linalg.inv(M.values.T @ M.values)), rtol=1e-8)


def _single_quantum_state(n, seed):
    rng = np.random.default_rng(seed)
    N = 2**n
    rho = np.zeros((N, N), dtype=complex)
    for j in range(n):
        for lo in range(N):
            up = lo | (1 << j)
            if up != lo:
                rho[lo, up] = rng.normal() + 1j * rng.normal()
                rho[up, lo] = np.conj(rho[lo, up])
    return rho


def test_identity_sequence_recovers_single_quantum_elements():
    n = 2
    lay = RegisterLayout(n, 0)
    sys = random_system(n, np.random.default_rng(1))
    rho = _single_quantum_state(n, 4)
    peaks = simulate_spectrum(rho, PulseSequence(), sys, lay)
    with pytest.raises(IdentifiabilityError):
        tomo(sys, lay, [PulseSequence()], [peaks])
    M = build_probe(sys, lay, [PulseSequence()])
    res = solve(M, stack_intensities([peaks]), require_full_rank=False)
    np.testing.assert_allclose(res.rho, rho, atol=1e-14)


@pytest.mark.parametrize("name, rho_fn", [
    ("liquid", lambda: fixtures.thermal_state(2)),
    ("liquid", fixtures.liquid_rho2_stated),
    ("oriented", lambda: fixtures.thermal_state(3)),
    ("oriented", fixtures.oriented_rho2),
])
def test_reference_scenarios_noiseless(name, rho_fn):
    sc = fixtures.SCENARIOS[name]
    sys, lay = sc.load()
    seqs = [get_template(sc.template_id)(sc.delays)]
    rho = rho_fn()
    peaks = [simulate_spectrum(rho, s, sys, lay) for s in seqs]
    res = tomo(sys, lay, seqs, peaks)
    assert densmat.fidelity(res.rho, rho) >= 0.999
    np.testing.assert_allclose(res.rho, rho, atol=1e-10)


def test_tomo_checks_shapes(liquid):
    sys, lay = liquid
    seq = get_template("two_delay_xy")([1e-3, 2e-3])
    peaks = simulate_spectrum(fixtures.thermal_state(2), seq, sys, lay)
    with pytest.raises(ValueError, match="peak lists"):
        tomo(sys, lay, [seq, seq], [peaks])
    bad = PeakList(peaks.qubit[1:], peaks.nu[1:], peaks.frequency_hz[1:], peaks.intensity[1:])
    with pytest.raises(ValueError, match=r"missing \(j, nu\) rows \[\(1, 0\)\]"):
        tomo(sys, lay, [seq], [bad])


def test_tomo_with_overlap_merging(liquid):
    sys, lay = liquid
    freqs = np.sort([t.frequency_hz for t in transitions(sys, lay)])
    width = np.diff(freqs).min() * 1.01  # merges exactly the closest pair
    groups = check_resolution(transitions(sys, lay), width)
    assert [len(g) for g in groups] == [2]
    seqs = [get_template("two_delay_xy")(fixtures.LIQUID.delays)]
    rho = densmat.random_state(2, 8)
    peaks = [simulate_spectrum(rho, s, sys, lay) for s in seqs]
    res = tomo(sys, lay, seqs, peaks, linewidth_hz=width)
    assert res.condition.rank == 15
    assert densmat.fidelity(res.rho, rho) > 1 - 1e-9


def test_noise_error_bounded_by_condition(liquid):
    sys, lay = liquid
    seqs = [get_template("two_delay_xy")(fixtures.LIQUID.delays)]
    M = build_probe(sys, lay, seqs)
    rho = densmat.random_state(2, 0)
    clean = simulate_spectrum(rho, seqs[0], sys, lay)
    x = densmat.pack(rho)
    errs = [np.linalg.norm(solve(M, stack_intensities([add_noise(clean, 0.01, s)])).unknowns - x) / np.linalg.norm(x)
            for s in range(200)]
    assert np.median(errs) <= solve(M, M.values @ x).condition.condition * 0.01


@pytest.mark.parametrize("n, a, k", [(2, 1, 1), (3, 2, 1), (2, 0, 2), (3, 0, 3), (1, 0, 2), (1, 1, 1)])
def test_counting_bound(n, a, k):
    assert counting_bound(n, a) == k
    assert plan(n, a).K_min == k and not plan(n, a).rank_verified


@pytest.mark.parametrize("n", range(1, 7))
def test_plan_monotone_in_ancilla(n):
    ks = [counting_bound(n, a) for a in range(0, 7)]
    assert all(b <= a for a, b in zip(ks, ks[1:]))


def test_plan_rank_verification_small():
    sys, lay = fixtures.generic_system(1, 0, seed=0)
    p = plan(1, 0, sys, "two_delay_xy", OptimizerConfig(population=10, generations=5, seed=1))
    assert p.rank_verified and p.K_min == 2 and np.isfinite(p.condition)
    seqs = experiment_sequences("two_delay_xy", p.params, p.K_min)
    rho = densmat.random_state(1, 2)
    res = tomo(sys, lay, seqs, [simulate_spectrum(rho, s, sys, lay) for s in seqs])
    assert densmat.fidelity(res.rho, rho) > 1 - 1e-8
