"""Imperfect source, mode-mismatched beam splitters and threshold detectors."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import product
from typing import Mapping, NamedTuple

import numpy as np

from .fock import (
    ANY,
    CLICK,
    DetectionPattern,
    MixedState,
    ModeId,
    PureState,
    State,
    apply_beamsplitter,
    as_mixed,
    fock_state,
    project,
    vacuum,
    tensor,
)

# Internal labels handed out by the source.  Contaminant photons get labels of
# their own so they never interfere with anything.
SIGNAL_LABEL = 0
DISTINCT_LABEL = 1
ANCILLA_CONTAMINANT_LABEL = 2
TARGET_CONTAMINANT_LABEL = 3
SOURCE_LABELS = 4


@dataclass(frozen=True)
class ImperfectionModel:
    """Measured imperfections of the teleportation setup.

    Attributes:
        v: two-photon overlap of consecutive photons, read as the HOM visibility.
        v1: first-order mode-matching visibility of BS 1.
        v2: first-order mode-matching visibility of BS 2.
        g2: g2(0) of the source; each pulse holds a second photon with
            probability g2 / 2.
        dark_rate: dark-click probability per detector and trial.
        transmission: probability that a photon survives to its detector.
    """

    v: float = 0.75
    v1: float = 0.92
    v2: float = 0.91
    g2: float = 0.02
    dark_rate: float = 0.0
    transmission: float = 1.0

    def __post_init__(self):
        for name in ("v", "v1", "v2", "dark_rate", "transmission"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 <= self.g2 <= 2.0:
            raise ValueError(f"g2 must lie in [0, 2], got {self.g2}")

    @classmethod
    def ideal(cls) -> ImperfectionModel:
        return cls(v=1.0, v1=1.0, v2=1.0, g2=0.0)

    @property
    def two_photon_probability(self) -> float:
        return self.g2 / 2.0

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> ImperfectionModel:
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown imperfection fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class SourcePulse:
    photon_count: int
    internal_states: tuple[int, ...]
    emission_slot: int = 0

    def __post_init__(self):
        if self.photon_count not in (0, 1, 2):
            raise ValueError("a pulse holds 0, 1 or 2 photons")
        if len(self.internal_states) != self.photon_count:
            raise ValueError("one internal label per photon")
        if self.photon_count == 2 and len(set(self.internal_states)) != 2:
            raise ValueError("the second photon of a pulse must be in an orthogonal label")

    @property
    def contaminated(self) -> bool:
        return self.photon_count == 2


class PulseDraws(NamedTuple):
    identical: np.ndarray
    ancilla_contaminated: np.ndarray
    target_contaminated: np.ndarray


def emit_pairs(model: ImperfectionModel, rng: np.random.Generator, size: int) -> PulseDraws:
    """Vectorized source draws for ``size`` trials; see :func:`emit_pair`."""
    u = rng.random((size, 3))
    p = model.two_photon_probability
    return PulseDraws(u[:, 0] < model.v, u[:, 1] < p, u[:, 2] < p)


def emit_pair(model: ImperfectionModel, rng: np.random.Generator, slot: int = 0) -> tuple[SourcePulse, SourcePulse]:
    """Draw the (ancilla, target) pulses of one trial.

    The target photon shares the ancilla's label with probability ``v`` and is
    orthogonal otherwise.  Each pulse independently carries an extra photon in a
    label of its own with probability ``g2 / 2``.
    """
    draws = emit_pairs(model, rng, 1)
    target_label = SIGNAL_LABEL if draws.identical[0] else DISTINCT_LABEL
    anc = (SIGNAL_LABEL, ANCILLA_CONTAMINANT_LABEL) if draws.ancilla_contaminated[0] else (SIGNAL_LABEL,)
    tgt = (target_label, TARGET_CONTAMINANT_LABEL) if draws.target_contaminated[0] else (target_label,)
    return (
        SourcePulse(len(anc), anc, emission_slot=2 * slot),
        SourcePulse(len(tgt), tgt, emission_slot=2 * slot + 1),
    )


def hom_coincidence(model: ImperfectionModel) -> float:
    """Coincidence probability behind a 50-50 beam splitter fed one photon per port.

    The second photon shares the first one's label with probability ``v``.
    """
    branches = []
    for weight, label in ((model.v, SIGNAL_LABEL), (1.0 - model.v, DISTINCT_LABEL)):
        photons = fock_state({ModeId(0, SIGNAL_LABEL): 1, ModeId(1, label): 1}, (0, 1))
        branches.append((weight, apply_beamsplitter(photons, 0, 1)))
    return project(MixedState.from_weighted(branches), DetectionPattern({0: 1, 1: 1})).probability


class SourceBranch(NamedTuple):
    weight: float
    ancilla_label: int
    target_label: int
    kind: str


def contaminant_fraction(model: ImperfectionModel) -> float:
    """Share of registered correct-timing pairs that involve a contaminant photon.

    Each pulse carries a contaminant with probability p = g2/2 and the
    contaminant takes the timing-correct path half the time, so contaminant
    pairs arrive at a rate p relative to the signal pair: p / (1 + p) of all
    registered pairs.
    """
    p = model.two_photon_probability
    return p / (1.0 + p)


def contaminant_registration_probability(model: ImperfectionModel) -> float:
    """Probability that a trial with at least one contaminated pulse registers a contaminant pair.

    Chosen so that sampling :func:`emit_pair` and then this Bernoulli gives
    exactly :func:`contaminant_fraction` per trial.
    """
    p = model.two_photon_probability
    if p == 0.0:
        return 0.0
    return contaminant_fraction(model) / (1.0 - (1.0 - p) ** 2)


def source_ensemble(model: ImperfectionModel) -> list[SourceBranch]:
    """Label content of the photon pair behind one registered coincidence.

    Clean pairs come with identical labels (weight ``v``) or orthogonal ones;
    contaminant pairs pair a contaminant with the other pulse's photon.
    Zero-weight branches are left out.
    """
    c = contaminant_fraction(model)
    branches = [
        SourceBranch((1.0 - c) * model.v, SIGNAL_LABEL, SIGNAL_LABEL, "identical"),
        SourceBranch((1.0 - c) * (1.0 - model.v), SIGNAL_LABEL, DISTINCT_LABEL, "distinct"),
        SourceBranch(c / 2.0, ANCILLA_CONTAMINANT_LABEL, SIGNAL_LABEL, "contaminant"),
        SourceBranch(c / 2.0, SIGNAL_LABEL, TARGET_CONTAMINANT_LABEL, "contaminant"),
    ]
    return [b for b in branches if b.weight > 0.0]


def _tag_mode(state: PureState, mode: int, offset: int) -> PureState:
    d = state.internal_dim
    p = state.position(mode)
    amps = {}
    for key, amp in state.amplitudes.items():
        occ = list(key.occupations)
        for lab in range(d - 1, -1, -1):
            n = occ[p * d + lab]
            if n:
                occ[p * d + lab] = 0
                occ[p * d + lab + offset] = n
        amps[tuple(occ)] = amp
    return state.replace(amps)


def mismatched_beamsplitter(state: State, a: int, b: int, visibility: float) -> MixedState:
    """50-50 beam splitter whose inputs overlap only with weight ``visibility``.

    The mismatched branch moves photons arriving at input ``b`` onto fresh
    internal labels before mixing, which removes every interference term
    involving that port while conserving photon number.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility}")
    mixed = as_mixed(state)
    ideal = [(w * visibility, apply_beamsplitter(s, a, b)) for w, s in mixed]
    if visibility == 1.0:
        return MixedState(tuple(ideal))
    offset = mixed.max_label() + 1
    dim = max(mixed.internal_dim, 2 * offset)
    tagged = [
        (w * (1.0 - visibility), apply_beamsplitter(_tag_mode(s.with_internal_dim(dim), b, offset), a, b))
        for w, s in mixed
    ]
    return MixedState.from_weighted(ideal + tagged)


def _with_loss(state: MixedState, modes: tuple[int, ...], transmission: float) -> tuple[MixedState, tuple[int, ...]]:
    """Route each monitored mode through a virtual beam splitter into a fresh loss mode."""
    if transmission == 1.0:
        return state, ()
    first = max(state.modes) + 1
    loss_modes = tuple(range(first, first + len(modes)))

    def lossy(s: PureState) -> PureState:
        s = tensor(s, vacuum(loss_modes, s.internal_dim, s.cutoff, s.total_cutoff))
        for m, lm in zip(modes, loss_modes):
            s = apply_beamsplitter(s, m, lm, transmissivity=transmission)
        return s

    return state.map(lossy), loss_modes


class Detection(NamedTuple):
    outcome: Mapping[int, object]
    probability: float
    conditional: MixedState | None


def _dark_patterns(pattern: DetectionPattern, dark_rate: float):
    """Photon-level patterns and their probabilities once dark clicks are accounted for.

    A dark click adds one count on its detector.
    """
    modes = pattern.modes
    if dark_rate == 0.0:
        yield 1.0, dict(pattern.requirements)
        return
    for darks in product((False, True), repeat=len(modes)):
        weight = 1.0
        reqs = {}
        possible = True
        for mode, dark in zip(modes, darks):
            weight *= dark_rate if dark else 1.0 - dark_rate
            req = pattern.requirements[mode]
            if not dark or req == ANY:
                reqs[mode] = req
            elif req == CLICK:
                reqs[mode] = ANY
            elif req == 0:
                possible = False
            else:
                reqs[mode] = req - 1
        if possible and weight > 0.0:
            yield weight, reqs


def _detect_pattern(state: MixedState, pattern: DetectionPattern, model: ImperfectionModel) -> tuple[float, MixedState | None]:
    lossy, loss_modes = _with_loss(state, pattern.modes, model.transmission)
    probability = 0.0
    parts = []
    for weight, reqs in _dark_patterns(pattern, model.dark_rate):
        reqs.update({lm: ANY for lm in loss_modes})
        proj = project(lossy, DetectionPattern(reqs))
        if proj.empty:
            continue
        probability += weight * proj.probability
        parts.extend((weight * proj.probability * w, s) for w, s in proj.conditional)
    if probability <= 0.0:
        return 0.0, None
    return probability, MixedState.from_weighted(parts)


def click_distribution(state: State, modes: tuple[int, ...], model: ImperfectionModel) -> dict[tuple[bool, ...], float]:
    """Joint threshold-click distribution of ``modes`` (loss and dark clicks included)."""
    mixed = as_mixed(state)
    lossy, _ = _with_loss(mixed, tuple(modes), model.transmission)
    photon: dict[tuple[bool, ...], float] = {}
    for w, s in lossy:
        for key, amp in s.amplitudes.items():
            clicks = tuple(s.mode_occupation(key, m) > 0 for m in modes)
            photon[clicks] = photon.get(clicks, 0.0) + w * abs(amp) ** 2
    if model.dark_rate == 0.0:
        return photon
    dark = model.dark_rate
    observed: dict[tuple[bool, ...], float] = {}
    for clicks, p in photon.items():
        free = [i for i, c in enumerate(clicks) if not c]
        for extra in product((False, True), repeat=len(free)):
            out = list(clicks)
            q = p
            for i, e in zip(free, extra):
                out[i] = e
                q *= dark if e else 1.0 - dark
            observed[tuple(out)] = observed.get(tuple(out), 0.0) + q
    return observed


def detect(
    state: State,
    pattern: DetectionPattern,
    model: ImperfectionModel,
    rng: np.random.Generator | None = None,
) -> Detection:
    """Lossy, noisy detection of the modes monitored by ``pattern``.

    Without ``rng`` the result is analytic: the probability that ``pattern`` is
    observed and the conditional state.  With ``rng`` a threshold outcome
    (click or not per monitored mode) is sampled and returned along with its
    probability and conditional state.
    """
    mixed = as_mixed(state)
    if rng is None:
        probability, conditional = _detect_pattern(mixed, pattern, model)
        return Detection(dict(pattern.requirements), probability, conditional)
    modes = pattern.modes
    dist = sorted(click_distribution(mixed, modes, model).items())
    probs = np.array([p for _, p in dist])
    pick = int(rng.choice(len(dist), p=probs / probs.sum()))
    clicks = dict(zip(modes, dist[pick][0]))
    sampled = DetectionPattern({m: CLICK if c else 0 for m, c in clicks.items()})
    probability, conditional = _detect_pattern(mixed, sampled, model)
    return Detection(clicks, probability, conditional)
