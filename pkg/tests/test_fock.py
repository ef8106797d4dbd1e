import cmath
import doctest
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleportsim import fock
from teleportsim.fock import (
    ANY,
    CLICK,
    CutoffError,
    DetectionPattern,
    FockBasisState,
    MixedState,
    ModeId,
    PureState,
    apply_beamsplitter,
    apply_phase,
    apply_two_mode_unitary,
    beamsplitter_matrix,
    exhaustive_patterns,
    fidelity,
    fock_state,
    inner,
    project,
    tensor,
    vacuum,
)

S2 = 1 / math.sqrt(2)


def amps_by_occupation(state):
    return {key.occupations: amp for key, amp in state.amplitudes.items()}


def permanent(m):
    n = len(m)
    return sum(math.prod(m[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def oracle_amplitude(u, n_in, n_out):
    """<n_out| U |n_in> for creation operators a_i† -> sum_j u[i][j] a_j†."""
    rows = [i for i, k in enumerate(n_in) for _ in range(k)]
    cols = [j for j, k in enumerate(n_out) for _ in range(k)]
    sub = [[u[r][c] for c in cols] for r in rows]
    norm = math.sqrt(math.prod(math.factorial(k) for k in (*n_in, *n_out)))
    return permanent(sub) / norm


def random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def random_state(rng, modes=(0, 1, 2), photons=2, internal_dim=2):
    slots = [(m, lab) for m in modes for lab in range(internal_dim)]
    amps = {}
    base = vacuum(modes, internal_dim)
    for combo in itertools.combinations_with_replacement(slots, photons):
        occ = [0] * len(slots)
        for m, lab in combo:
            occ[base.slot(ModeId(m, lab))] += 1
        amps[FockBasisState(tuple(occ))] = complex(rng.normal(), rng.normal())
    return base.replace(amps).normalize()


class TestBeamSplitter:
    def test_single_photon_splits_evenly(self):
        out = apply_beamsplitter(fock_state({0: 1}, (0, 1), internal_dim=1), 0, 1)
        assert amps_by_occupation(out) == pytest.approx({(1, 0): S2, (0, 1): S2})

    def test_identical_photons_bunch(self):
        out = apply_beamsplitter(fock_state({0: 1, 1: 1}, (0, 1), internal_dim=1), 0, 1)
        amps = amps_by_occupation(out)
        assert set(amps) == {(2, 0), (0, 2)}
        assert amps[(2, 0)] == pytest.approx(S2)
        assert amps[(0, 2)] == pytest.approx(-S2)
        assert project(out, DetectionPattern({0: 1, 1: 1})).probability == 0.0

    def test_orthogonal_photons_coincide_half_the_time(self):
        state = fock_state({ModeId(0, 0): 1, ModeId(1, 1): 1}, (0, 1))
        out = apply_beamsplitter(state, 0, 1)
        assert project(out, DetectionPattern({0: 1, 1: 1})).probability == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("n_in", [(1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (3, 0), (2, 2)])
    def test_amplitudes_match_permanent_oracle(self, n_in):
        rng = np.random.default_rng(sum(n_in) * 10 + n_in[0])
        u = random_unitary(rng)
        state = fock_state({0: n_in[0], 1: n_in[1]}, (0, 1), internal_dim=1, cutoff=4, total_cutoff=4)
        out = amps_by_occupation(apply_two_mode_unitary(state, 0, 1, u))
        total = sum(n_in)
        for k in range(total + 1):
            expected = oracle_amplitude(u, n_in, (k, total - k))
            assert out.get((k, total - k), 0.0) == pytest.approx(expected, abs=1e-12)

    def test_transmissivity_and_phase_match_oracle(self):
        t, theta = 0.3, 0.7
        u = beamsplitter_matrix(t, theta)
        state = fock_state({0: 1, 1: 1}, (0, 1), internal_dim=1)
        out = amps_by_occupation(apply_beamsplitter(state, 0, 1, t, theta))
        for n_out in [(2, 0), (1, 1), (0, 2)]:
            assert out.get(n_out, 0.0) == pytest.approx(oracle_amplitude(u, (1, 1), n_out), abs=1e-12)

    def test_acts_on_each_label_independently(self):
        # Two photons with different labels: the label-resolved amplitudes factorize.
        state = fock_state({ModeId(0, 0): 1, ModeId(1, 1): 1}, (0, 1))
        out = amps_by_occupation(apply_beamsplitter(state, 0, 1))
        # slots: (0,l0) (0,l1) (1,l0) (1,l1)
        assert out[(1, 1, 0, 0)] == pytest.approx(0.5)
        assert out[(0, 0, 1, 1)] == pytest.approx(-0.5)
        assert out[(1, 0, 0, 1)] == pytest.approx(-0.5)
        assert out[(0, 1, 1, 0)] == pytest.approx(0.5)

    def test_involution(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            psi = random_state(rng)
            twice = apply_beamsplitter(apply_beamsplitter(psi, 0, 2), 0, 2)
            assert abs(fidelity(twice, psi) - 1.0) < 1e-12

    def test_cutoff_overflow_is_an_error(self):
        state = fock_state({0: 2, 1: 1}, (0, 1), internal_dim=1, cutoff=2, total_cutoff=4)
        with pytest.raises(CutoffError):
            apply_beamsplitter(state, 0, 1)

    def test_same_mode_rejected(self):
        with pytest.raises(ValueError):
            apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 0)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 5)


class TestPhase:
    def test_single_photon(self):
        psi = apply_beamsplitter(fock_state({0: 1}, (0, 1), internal_dim=1), 0, 1)
        out = amps_by_occupation(apply_phase(psi, 0, 0.4))
        assert out[(1, 0)] == pytest.approx(cmath.exp(0.4j) * S2)
        assert out[(0, 1)] == pytest.approx(S2)

    def test_zero_phase_is_identity(self):
        psi = random_state(np.random.default_rng(1))
        assert apply_phase(psi, 1, 0.0).amplitudes == psi.amplitudes

    def test_two_photons_double_the_phase(self):
        out = apply_phase(fock_state({0: 2}, (0,)), 0, math.pi / 2)
        (amp,) = out.amplitudes.values()
        assert amp == pytest.approx(-1.0)

    def test_counts_all_labels(self):
        state = fock_state({ModeId(0, 0): 1, ModeId(0, 1): 1}, (0,))
        (amp,) = apply_phase(state, 0, 0.3).amplitudes.values()
        assert amp == pytest.approx(cmath.exp(0.6j))


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    t=st.floats(0.0, 1.0),
    theta=st.floats(-math.pi, math.pi),
    phi=st.floats(-10, 10),
)
def test_unitarity(seed, t, theta, phi):
    psi = random_state(np.random.default_rng(seed))
    assert apply_beamsplitter(psi, 0, 1, t, theta).norm() == pytest.approx(1.0, abs=1e-12)
    assert apply_phase(psi, 2, phi).norm() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), photons=st.integers(0, 2))
def test_completeness(seed, photons):
    psi = apply_beamsplitter(random_state(np.random.default_rng(seed), photons=photons), 1, 2)
    total = sum(project(psi, p).probability for p in exhaustive_patterns(psi.modes, psi.total_cutoff))
    assert total == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projection_is_idempotent(seed):
    psi = random_state(np.random.default_rng(seed))
    pattern = DetectionPattern({0: 1})
    first = project(psi, pattern, remove=False)
    if first.empty:
        return
    again = project(first.conditional, pattern, remove=False)
    assert again.probability == pytest.approx(1.0, abs=1e-10)


class TestTensor:
    def test_product_of_single_photons(self):
        out = tensor(fock_state({0: 1}, (0,)), fock_state({2: 1}, (2,)))
        assert out.modes == (0, 2)
        assert amps_by_occupation(out) == {(1, 0, 1, 0): 1.0}

    def test_norm(self):
        rng = np.random.default_rng(9)
        a = random_state(rng, modes=(0, 1), photons=1)
        b = random_state(rng, modes=(2, 3), photons=1)
        assert tensor(a, b).norm() == pytest.approx(1.0, abs=1e-12)

    def test_two_dual_rail_qubits(self):
        one = apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 1)
        two = apply_beamsplitter(fock_state({2: 1}, (2, 3)), 2, 3)
        out = tensor(one, two)
        assert len(out.amplitudes) == 4
        assert all(abs(a) ** 2 == pytest.approx(0.25) for a in out.amplitudes.values())

    def test_overlapping_modes_rejected(self):
        with pytest.raises(ValueError):
            tensor(fock_state({0: 1}, (0, 1)), fock_state({1: 1}, (1, 2)))

    def test_internal_dim_is_unified(self):
        out = tensor(fock_state({0: 1}, (0,), internal_dim=1), fock_state({ModeId(1, 2): 1}, (1,), internal_dim=3))
        assert out.internal_dim == 3


class TestProject:
    def test_single_photon(self):
        psi = apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 1)
        proj = project(psi, DetectionPattern({0: 1, 1: 0}))
        assert proj.probability == pytest.approx(0.5)
        assert proj.conditional.modes == ()

    def test_too_many_photons_is_empty(self):
        psi = apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 1)
        proj = project(psi, DetectionPattern({0: 2}))
        assert proj.probability == 0.0
        assert proj.empty

    def test_click_and_any(self):
        psi = apply_beamsplitter(fock_state({0: 1, 1: 1}, (0, 1), internal_dim=1), 0, 1)
        assert project(psi, DetectionPattern({0: CLICK})).probability == pytest.approx(0.5)
        assert project(psi, DetectionPattern({0: ANY})).probability == pytest.approx(1.0)

    def test_label_record_is_traced_out(self):
        # Photon in mode 0 with label 0 or 1, entangled with mode 1's label.
        a = fock_state({ModeId(0, 0): 1, ModeId(1, 0): 1}, (0, 1))
        b = fock_state({ModeId(0, 1): 1, ModeId(1, 1): 1}, (0, 1))
        amps = {**a.amplitudes, **b.amplitudes}
        psi = a.replace({k: S2 for k in amps})
        proj = project(psi, DetectionPattern({0: 1}))
        assert proj.probability == pytest.approx(1.0)
        assert len(proj.conditional) == 2

    def test_invalid_patterns(self):
        with pytest.raises(ValueError):
            DetectionPattern({})
        with pytest.raises(ValueError):
            DetectionPattern({0: -1})
        with pytest.raises(ValueError):
            DetectionPattern({0: "some"})
        with pytest.raises(ValueError):
            project(fock_state({0: 1}, (0,)), DetectionPattern({4: 1}))


class TestFidelity:
    def test_self(self):
        psi = random_state(np.random.default_rng(4))
        assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert fidelity(fock_state({0: 1}, (0, 1)), fock_state({1: 1}, (0, 1))) == 0.0

    def test_quarter_turn_of_relative_phase(self):
        plus = apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 1)
        rotated = apply_phase(plus, 1, math.pi / 2)
        assert fidelity(rotated, plus) == pytest.approx(0.5, abs=1e-12)

    def test_mixed_is_weighted(self):
        zero = fock_state({0: 1}, (0, 1))
        one = fock_state({1: 1}, (0, 1))
        mixed = MixedState.from_weighted([(0.3, zero), (0.7, one)])
        assert fidelity(mixed, zero) == pytest.approx(0.3)

    def test_trace_internal_ignores_shared_label(self):
        a = apply_beamsplitter(fock_state({ModeId(0, 1): 1}, (0, 1)), 0, 1)
        b = apply_beamsplitter(fock_state({0: 1}, (0, 1)), 0, 1)
        assert fidelity(a, b) == 0.0
        assert fidelity(a, b, trace_internal=True) == pytest.approx(1.0)

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            fidelity(fock_state({0: 1}, (0, 1)), fock_state({0: 1}, (0, 2)))

    def test_inner_product_convention(self):
        a = fock_state({0: 1}, (0, 1))
        b = apply_phase(a, 0, 0.5)
        assert inner(a, b) == pytest.approx(cmath.exp(0.5j))


class TestStateValidation:
    def test_mixed_weights_must_sum_to_one(self):
        psi = fock_state({0: 1}, (0,))
        with pytest.raises(ValueError):
            MixedState(((0.5, psi), (0.4, psi)))

    def test_occupation_cutoff_enforced(self):
        with pytest.raises(ValueError):
            fock_state({0: 3}, (0,))

    def test_wrong_width_rejected(self):
        with pytest.raises(ValueError):
            PureState((0, 1), {FockBasisState((1, 0)): 1.0})


def test_doctests():
    failures, _ = doctest.testmod(fock)
    assert failures == 0
