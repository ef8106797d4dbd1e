"""Single-mode teleportation of one rail of a dual-rail qubit.

Mode layout (0-based): the target photon occupies modes 0 and 1, the ancilla
modes 2 and 3.  BS 1 mixes modes 1 and 2 in front of detectors C (mode 1) and
D (mode 2).  The output qubit lives on modes 0 and 3, which BS 2 mixes in front
of detectors A (mode 0) and B (mode 3).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .elements import (
    SIGNAL_LABEL,
    SOURCE_LABELS,
    ImperfectionModel,
    click_distribution,
    detect,
    mismatched_beamsplitter,
    source_ensemble,
)
from .fock import (
    NORM_TOL,
    DetectionPattern,
    MixedState,
    ModeId,
    PureState,
    apply_beamsplitter,
    apply_phase,
    fidelity,
    fock_state,
    tensor,
)

TARGET_MODES = (0, 1)
ANCILLA_MODES = (2, 3)
OUTPUT_MODES = (0, 3)
MODE_A, MODE_C, MODE_D, MODE_B = 0, 1, 2, 3
DETECTOR_MODES = {"C": MODE_C, "D": MODE_D, "A": MODE_A, "B": MODE_B}
# Order of the joint click tuples returned by detector_statistics.
DETECTOR_ORDER = ("C", "D", "A", "B")

PATTERN_C = DetectionPattern({MODE_C: 1, MODE_D: 0})
PATTERN_D = DetectionPattern({MODE_C: 0, MODE_D: 1})


@dataclass(frozen=True)
class TeleportCircuit:
    """Target qubit α|0>_L + β|1>_L sent through an imperfect setup."""

    alpha: complex = 1 / math.sqrt(2)
    beta: complex = 1 / math.sqrt(2)
    imperfections: ImperfectionModel = field(default_factory=ImperfectionModel.ideal)

    def __post_init__(self):
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"|alpha|^2 + |beta|^2 = {norm}, expected 1")

    @classmethod
    def from_phase(cls, phi: float, imperfections: ImperfectionModel | None = None) -> TeleportCircuit:
        return cls(
            1 / math.sqrt(2),
            cmath.exp(1j * phi) / math.sqrt(2),
            imperfections or ImperfectionModel.ideal(),
        )


@dataclass(frozen=True)
class TeleportOutcome:
    p_success_c: float
    p_success_d: float
    out_c: MixedState | None
    out_d: MixedState | None
    p_fail: float


def _space(label: int) -> dict:
    return {"internal_dim": max(SOURCE_LABELS, label + 1)}


def prepare_ancilla(label: int = SIGNAL_LABEL) -> PureState:
    """(|1>_3|0>_4 + |0>_3|1>_4)/√2 made by BS a acting on |1>_3|0>_4."""
    photon = fock_state({ModeId(ANCILLA_MODES[0], label): 1}, ANCILLA_MODES, **_space(label))
    return apply_beamsplitter(photon, *ANCILLA_MODES)


def prepare_target(phi: float, label: int = SIGNAL_LABEL) -> PureState:
    """(|1>_1|0>_2 + e^{iφ}|0>_1|1>_2)/√2: a 50-50 split followed by a phase on the second rail."""
    photon = fock_state({ModeId(TARGET_MODES[0], label): 1}, TARGET_MODES, **_space(label))
    return apply_phase(apply_beamsplitter(photon, *TARGET_MODES), TARGET_MODES[1], phi)


def dual_rail(alpha: complex, beta: complex, modes: tuple[int, int], label: int = SIGNAL_LABEL) -> PureState:
    """α|1,0> + β|0,1> on ``modes``."""
    first = fock_state({ModeId(modes[0], label): 1}, modes, **_space(label))
    second = fock_state({ModeId(modes[1], label): 1}, modes, **_space(label))
    amps = {}
    for coeff, s in ((alpha, first), (beta, second)):
        if coeff != 0:
            (key,) = s.amplitudes
            amps[key] = coeff
    return first.replace(amps)


def target_reference(circuit: TeleportCircuit) -> PureState:
    """The target qubit re-expressed on the output modes (0, 3)."""
    return dual_rail(circuit.alpha, circuit.beta, OUTPUT_MODES)


def source_state(circuit: TeleportCircuit) -> MixedState:
    """Four-mode input: target ⊗ ancilla, mixed over the source's label content."""
    branches = []
    for branch in source_ensemble(circuit.imperfections):
        target = dual_rail(circuit.alpha, circuit.beta, TARGET_MODES, branch.target_label)
        ancilla = prepare_ancilla(branch.ancilla_label)
        branches.append((branch.weight, tensor(target, ancilla)))
    return MixedState.from_weighted(branches)


def after_bell_measurement_optics(circuit: TeleportCircuit) -> MixedState:
    return mismatched_beamsplitter(source_state(circuit), MODE_C, MODE_D, circuit.imperfections.v1)


def run_analytic(circuit: TeleportCircuit) -> TeleportOutcome:
    """Partial Bell measurement with BS 1 and counters C/D.

    A lone click at C leaves modes (0, 3) in α|1,0> + β|0,1>; a lone click at
    D leaves α|1,0> - β|0,1>.  Every other outcome counts as a failure.
    """
    model = circuit.imperfections
    state = after_bell_measurement_optics(circuit)
    c = detect(state, PATTERN_C, model)
    d = detect(state, PATTERN_D, model)
    return TeleportOutcome(
        p_success_c=c.probability,
        p_success_d=d.probability,
        out_c=c.conditional,
        out_d=d.conditional,
        p_fail=1.0 - c.probability - d.probability,
    )


def output_fidelity(outcome_state: MixedState, circuit: TeleportCircuit) -> float:
    """Fidelity of an output state with the target qubit, wave-packet labels traced out."""
    return fidelity(outcome_state, target_reference(circuit), trace_internal=True)


def swap_check(imperfections: ImperfectionModel | None = None) -> float:
    """Fidelity of the C-heralded output with |ψ+>_14 for α = β = 1/√2."""
    circuit = TeleportCircuit(imperfections=imperfections or ImperfectionModel.ideal())
    outcome = run_analytic(circuit)
    bell = dual_rail(1 / math.sqrt(2), 1 / math.sqrt(2), OUTPUT_MODES)
    return fidelity(outcome.out_c, bell, trace_internal=True)


def _full_optics(phi: float, model: ImperfectionModel) -> MixedState:
    state = after_bell_measurement_optics(TeleportCircuit.from_phase(phi, model))
    return mismatched_beamsplitter(state, MODE_A, MODE_B, model.v2)


def detector_statistics(phi: float, model: ImperfectionModel) -> dict[tuple[bool, ...], float]:
    """Joint click distribution of detectors (C, D, A, B) for correctly timed photons."""
    modes = tuple(DETECTOR_MODES[name] for name in DETECTOR_ORDER)
    return click_distribution(_full_optics(phi, model), modes, model)


@lru_cache(maxsize=1024)
def branch_statistics(phi: float, model: ImperfectionModel) -> dict[str, dict[tuple[bool, ...], float]]:
    """Click distribution of each source-branch kind, normalized per kind."""
    modes = tuple(DETECTOR_MODES[name] for name in DETECTOR_ORDER)
    optics = {}
    for branch in source_ensemble(model):
        circuit = TeleportCircuit.from_phase(phi, model)
        target = dual_rail(circuit.alpha, circuit.beta, TARGET_MODES, branch.target_label)
        state = MixedState.pure(tensor(target, prepare_ancilla(branch.ancilla_label)))
        state = mismatched_beamsplitter(state, MODE_C, MODE_D, model.v1)
        state = mismatched_beamsplitter(state, MODE_A, MODE_B, model.v2)
        dist = click_distribution(state, modes, model)
        acc = optics.setdefault(branch.kind, [0.0, {}])
        acc[0] += branch.weight
        for clicks, p in dist.items():
            acc[1][clicks] = acc[1].get(clicks, 0.0) + branch.weight * p
    return {kind: {k: p / total for k, p in dist.items()} for kind, (total, dist) in optics.items()}


def coincidence_probabilities(stats: dict[tuple[bool, ...], float]) -> tuple[float, float]:
    """P(C ∧ A ∧ ¬B) and P(C ∧ B ∧ ¬A); D is not monitored."""
    p_a = sum(p for (c, _, a, b), p in stats.items() if c and a and not b)
    p_b = sum(p for (c, _, a, b), p in stats.items() if c and b and not a)
    return p_a, p_b


def fringe_analytic(phi: float, model: ImperfectionModel) -> tuple[float, float]:
    """C–A and C–B coincidence probabilities for a correctly timed photon pair.

    For the ideal setup these are cos²(φ/2)/4 and sin²(φ/2)/4.
    """
    return coincidence_probabilities(detector_statistics(phi, model))


def fringe_contrast(model: ImperfectionModel, n_phases: int = 12) -> float:
    """(max - min)/(max + min) of the C–A fringe sampled on a uniform grid over [0, 2π)."""
    values = [fringe_analytic(2 * math.pi * k / n_phases, model)[0] for k in range(n_phases)]
    hi, lo = max(values), min(values)
    return (hi - lo) / (hi + lo)


def predicted_contrast(v: float, v1: float, v2: float, g2: float) -> float:
    """Fringe contrast expected from photon overlap, mode matching and g2(0)."""
    for name, value in (("v", v), ("v1", v1), ("v2", v2)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    if g2 < 0.0:
        raise ValueError(f"g2 must be non-negative, got {g2}")
    return v * v1 * v2 / (1.0 + g2 / 2.0)


def fidelity_from_contrast(contrast: float) -> float:
    if not 0.0 <= contrast <= 1.0:
        raise ValueError(f"contrast must lie in [0, 1], got {contrast}")
    return (1.0 + contrast) / 2.0


def klm_success(n: int) -> float:
    """Success probability of single-mode teleportation with ``n`` ancillas."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return n / (n + 1)


def cz_success(n: int) -> float:
    """A controlled-sign gate needs two teleportations."""
    return klm_success(n) ** 2


def random_qubits(seed: int, count: int) -> list[tuple[complex, complex]]:
    """Haar-random (α, β) pairs from a seeded stream."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z /= np.linalg.norm(z)
        out.append((complex(z[0]), complex(z[1])))
    return out
