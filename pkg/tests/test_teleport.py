import itertools
import math

import numpy as np
import pytest

from teleportsim.elements import ImperfectionModel
from teleportsim.fock import DetectionPattern, apply_beamsplitter, apply_phase, fidelity, fock_state, project
from teleportsim.montecarlo import fit_contrast
from teleportsim.teleport import (
    MODE_B,
    OUTPUT_MODES,
    TeleportCircuit,
    cz_success,
    detector_statistics,
    dual_rail,
    fidelity_from_contrast,
    fringe_analytic,
    fringe_contrast,
    klm_success,
    predicted_contrast,
    prepare_ancilla,
    prepare_target,
    random_qubits,
    run_analytic,
    swap_check,
)

S2 = 1 / math.sqrt(2)
MEASURED = ImperfectionModel()
IDEAL = ImperfectionModel.ideal()


def amplitudes(state):
    return {key.occupations: amp for key, amp in state.amplitudes.items()}


def output_fidelity(mixed, alpha, beta):
    return fidelity(mixed, dual_rail(alpha, beta, OUTPUT_MODES), trace_internal=True)


class TestPreparation:
    def test_ancilla(self):
        anc = prepare_ancilla()
        assert anc.modes == (2, 3)
        values = sorted(amplitudes(anc).values(), key=abs)
        assert values == pytest.approx([S2, S2])
        assert project(anc, DetectionPattern({2: 1})).probability == pytest.approx(0.5)
        built = apply_beamsplitter(fock_state({2: 1}, (2, 3)), 2, 3)
        assert fidelity(anc, built) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("phi,second", [(0.0, S2), (math.pi, -S2), (math.pi / 2, 1j * S2)])
    def test_target(self, phi, second):
        tgt = prepare_target(phi)
        assert fidelity(tgt, dual_rail(S2, second, (0, 1))) == pytest.approx(1.0, abs=1e-12)

    def test_quarter_turn_target_overlap(self):
        assert fidelity(prepare_target(math.pi / 2), prepare_target(0.0)) == pytest.approx(0.5, abs=1e-12)

    def test_circuit_normalization(self):
        with pytest.raises(ValueError):
            TeleportCircuit(1.0, 1.0)


class TestIdealProtocol:
    @pytest.mark.parametrize("alpha,beta", random_qubits(7, 20))
    def test_heralded_outputs(self, alpha, beta):
        outcome = run_analytic(TeleportCircuit(alpha, beta))
        assert output_fidelity(outcome.out_c, alpha, beta) == pytest.approx(1.0, abs=1e-12)
        assert output_fidelity(outcome.out_d, alpha, -beta) == pytest.approx(1.0, abs=1e-12)
        assert outcome.p_success_c == pytest.approx(0.25, abs=1e-12)
        assert outcome.p_success_d == pytest.approx(0.25, abs=1e-12)
        assert outcome.p_fail == pytest.approx(0.5, abs=1e-12)

    def test_linearity(self):
        zero = run_analytic(TeleportCircuit(1.0, 0.0)).out_c.branches[0][1]
        one = run_analytic(TeleportCircuit(0.0, 1.0)).out_c.branches[0][1]
        for alpha, beta in random_qubits(8, 20):
            out = run_analytic(TeleportCircuit(alpha, beta)).out_c
            combined = zero.replace(
                {
                    k: alpha * zero.amplitudes.get(k, 0) + beta * one.amplitudes.get(k, 0)
                    for k in set(zero.amplitudes) | set(one.amplitudes)
                }
            ).normalize()
            assert fidelity(out, combined) == pytest.approx(1.0, abs=1e-12)

    def test_z_correction(self):
        for alpha, beta in random_qubits(9, 20):
            outcome = run_analytic(TeleportCircuit(alpha, beta))
            corrected = outcome.out_d.map(lambda s: apply_phase(s, MODE_B, math.pi))
            reference = outcome.out_c.branches[0][1]
            assert fidelity(corrected, reference) == pytest.approx(1.0, abs=1e-12)

    def test_failure_probability_sums(self):
        outcome = run_analytic(TeleportCircuit(S2, S2))
        assert outcome.p_success_c + outcome.p_success_d + outcome.p_fail == pytest.approx(1.0, abs=1e-9)


class TestImperfectProtocol:
    @pytest.mark.parametrize("model", [ImperfectionModel(g2=0.0), ImperfectionModel(v=0.2, v1=0.5, v2=0.3, g2=0.0)])
    def test_logical_zero_survives(self, model):
        outcome = run_analytic(TeleportCircuit(1.0, 0.0, model))
        assert output_fidelity(outcome.out_c, 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("model", [MEASURED, ImperfectionModel(v=0.3, g2=0.4), IDEAL])
    def test_c_and_d_equally_likely(self, model):
        for alpha, beta in random_qubits(10, 5):
            outcome = run_analytic(TeleportCircuit(alpha, beta, model))
            assert outcome.p_success_c == pytest.approx(outcome.p_success_d, abs=1e-12)

    def test_swap(self):
        assert swap_check() == pytest.approx(1.0, abs=1e-12)
        assert swap_check(ImperfectionModel(v=0.0, v1=1.0, v2=1.0, g2=0.0)) == pytest.approx(0.5, abs=1e-12)
        assert swap_check(ImperfectionModel(v=0.75, v1=1.0, v2=1.0, g2=0.0)) == pytest.approx(0.875, abs=1e-12)


class TestFringe:
    def test_ideal_points(self):
        assert fringe_analytic(0.0, IDEAL) == pytest.approx((0.25, 0.0), abs=1e-12)
        assert fringe_analytic(math.pi / 2, IDEAL) == pytest.approx((0.125, 0.125), abs=1e-12)

    @pytest.mark.parametrize("phi", np.linspace(0, 2 * math.pi, 7))
    def test_ideal_shape(self, phi):
        pa, pb = fringe_analytic(phi, IDEAL)
        assert pa == pytest.approx(math.cos(phi / 2) ** 2 / 4, abs=1e-12)
        assert pb == pytest.approx(math.sin(phi / 2) ** 2 / 4, abs=1e-12)

    @pytest.mark.parametrize("phi", np.linspace(0, 2 * math.pi, 7))
    def test_measured_model_shape(self, phi):
        c = predicted_contrast(0.75, 0.92, 0.91, 0.02)
        pa, _ = fringe_analytic(phi, MEASURED)
        assert pa == pytest.approx((1 + c * math.cos(phi)) / 8, abs=1e-12)

    @pytest.mark.parametrize("model", [MEASURED, ImperfectionModel(v=0.4, v1=0.6, v2=0.8, g2=0.5), IDEAL])
    def test_conservation(self, model):
        totals = [sum(fringe_analytic(phi, model)) for phi in np.linspace(0, 2 * math.pi, 9)]
        assert max(totals) - min(totals) < 1e-10

    def test_contrast_from_max_min(self):
        assert fringe_contrast(MEASURED) == pytest.approx(predicted_contrast(0.75, 0.92, 0.91, 0.02), abs=1e-12)

    def test_fit_of_analytic_fringe(self):
        points = {phi: fringe_analytic(phi, MEASURED)[0] for phi in np.linspace(0, 2 * math.pi, 12, endpoint=False)}
        assert fit_contrast(points).contrast == pytest.approx(predicted_contrast(0.75, 0.92, 0.91, 0.02), abs=1e-6)

    @pytest.mark.parametrize("v,v1,v2", list(itertools.product((0.0, 0.5, 1.0), (0.5, 1.0), (0.75,))))
    def test_no_d_click_with_c_and_output(self, v, v1, v2):
        model = ImperfectionModel(v=v, v1=v1, v2=v2, g2=0.0)
        for phi in (0.0, 1.0, 2.5):
            dist = detector_statistics(phi, model)
            assert sum(p for (c, d, a, b), p in dist.items() if c and d and (a or b)) == 0.0


class TestClosedForms:
    def test_predicted_contrast(self):
        assert predicted_contrast(0.75, 0.92, 0.91, 0.02) == pytest.approx(0.6217, abs=1e-4)
        assert predicted_contrast(1, 1, 1, 0) == 1.0
        assert predicted_contrast(0, 0.5, 0.5, 0.1) == 0.0

    def test_fidelity(self):
        assert fidelity_from_contrast(0.60) == 0.80
        assert fidelity_from_contrast(1.0) == 1.0
        assert fidelity_from_contrast(0.0) == 0.5
        with pytest.raises(ValueError):
            fidelity_from_contrast(1.2)

    def test_klm(self):
        assert klm_success(1) == 0.5
        assert cz_success(6) == pytest.approx(36 / 49, abs=1e-15)
        values = [klm_success(n) for n in range(1, 101)]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert 1 - values[-1] < 0.01
        with pytest.raises(ValueError):
            klm_success(0)
