"""Trial-by-trial sampling of the teleportation experiment and its start-stop histograms.

Each trial sends two consecutively emitted photons through a delay stage where
each one independently takes the long (L) or short (S) path.  Only the
combination "first photon long, second short" (``LS``) makes the two photons
meet at BS 1; the other three combinations produce coincidences displaced in
time.  Detector C starts the clock, A or B stops it.

All times are handled as integer picoseconds so that binning is exact.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .elements import (
    ImperfectionModel,
    SourcePulse,
    contaminant_registration_probability,
    emit_pairs,
    hom_coincidence,
)
from .teleport import DETECTOR_ORDER, branch_statistics

COMBOS = ("LS", "SS", "LL", "SL")
CORRECT_COMBO = 0
BLOCK_SIZE = 1 << 16
# Detector indices used for wrong-combination photons.
DET_A, DET_B, DET_C, DET_D = range(4)
NO_CLICK = np.iinfo(np.int64).max


def to_ps(value_ns: float, name: str = "time") -> int:
    ps = value_ns * 1000.0
    whole = round(ps)
    if abs(ps - whole) > 1e-6:
        raise ValueError(f"{name} = {value_ns} ns is not a whole number of picoseconds")
    return int(whole)


def default_phases(n: int = 12) -> tuple[float, ...]:
    return tuple(2 * math.pi * k / n for k in range(n))


@dataclass(frozen=True)
class ExperimentConfig:
    imperfections: ImperfectionModel = field(default_factory=ImperfectionModel)
    phases: tuple[float, ...] = field(default_factory=default_phases)
    trials_per_phase: int = 1_000_000
    rep_period_ns: float = 13.0
    # Arrival-time difference between the two photons for each wrong combination.
    delay_offsets_ns: Mapping[str, float] = field(default_factory=lambda: {"SS": 2.5, "LL": 2.5, "SL": 4.0})
    central_window_ns: tuple[float, float] = (-1.0, 1.0)
    broad_window_ns: tuple[float, float] = (-5.0, 5.0)
    bin_width_ns: float = 0.1
    rate_calibration_hz: float = 12800.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        object.__setattr__(self, "delay_offsets_ns", dict(self.delay_offsets_ns))
        object.__setattr__(self, "central_window_ns", tuple(float(x) for x in self.central_window_ns))
        object.__setattr__(self, "broad_window_ns", tuple(float(x) for x in self.broad_window_ns))
        if not self.phases:
            raise ValueError("at least one phase is required")
        if self.trials_per_phase <= 0:
            raise ValueError("trials_per_phase must be positive")
        if set(self.delay_offsets_ns) != set(COMBOS[1:]):
            raise ValueError(f"delay_offsets_ns needs exactly the keys {COMBOS[1:]}")
        for combo, value in self.delay_offsets_ns.items():
            to_ps(value, f"delay offset {combo}")
        if self.rep_period_ns <= 0 or self.rate_calibration_hz <= 0:
            raise ValueError("rep_period_ns and rate_calibration_hz must be positive")
        width = to_ps(self.bin_width_ns, "bin_width_ns")
        if width <= 0:
            raise ValueError("bin_width_ns must be positive")
        (clo, chi), (blo, bhi) = self.central_ps, self.broad_ps
        if not (clo < chi and blo < bhi):
            raise ValueError("windows must have lower < upper")
        if not (blo <= clo and chi <= bhi):
            raise ValueError("the central window must lie inside the broad window")
        for edge in (clo, chi, bhi):
            if (edge - blo) % width:
                raise ValueError("bin_width_ns must divide the window spans and offsets")

    @property
    def central_ps(self) -> tuple[int, int]:
        return tuple(to_ps(x, "central_window_ns") for x in self.central_window_ns)

    @property
    def broad_ps(self) -> tuple[int, int]:
        return tuple(to_ps(x, "broad_window_ns") for x in self.broad_window_ns)

    @property
    def bin_width_ps(self) -> int:
        return to_ps(self.bin_width_ns)

    @property
    def n_bins(self) -> int:
        lo, hi = self.broad_ps
        return (hi - lo) // self.bin_width_ps

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TrialEvent:
    """One repetition: which photon was delayed, which detectors clicked and when."""

    path_combo: str
    clicks: Mapping[str, int]
    accepted: bool
    pulses: tuple[SourcePulse, SourcePulse] | None = None

    @property
    def pair(self) -> str | None:
        if not self.accepted:
            return None
        return "AC" if "A" in self.clicks else "BC"

    @property
    def tau_ps(self) -> int | None:
        """Stop minus start time, defined only for a C click with exactly one of A/B."""
        if not self.accepted:
            return None
        stop = self.clicks["A"] if "A" in self.clicks else self.clicks["B"]
        return stop - self.clicks["C"]


@dataclass(frozen=True)
class CoincidenceHistogram:
    pair: str
    lower_ps: int
    bin_width_ps: int
    counts: tuple[int, ...]

    @property
    def bin_centers_ns(self) -> np.ndarray:
        edges = self.lower_ps + self.bin_width_ps * np.arange(len(self.counts))
        return (edges + self.bin_width_ps / 2) / 1000.0

    def window_total(self, window_ps: tuple[int, int]) -> int:
        lo = (window_ps[0] - self.lower_ps) // self.bin_width_ps
        hi = (window_ps[1] - self.lower_ps) // self.bin_width_ps
        return int(sum(self.counts[max(lo, 0) : min(hi, len(self.counts))]))

    @property
    def total(self) -> int:
        return int(sum(self.counts))


class _Tally(NamedTuple):
    ac: np.ndarray
    bc: np.ndarray
    registered: int
    correct_timing: int


def _pattern_tables(phi: float, model: ImperfectionModel):
    stats = branch_statistics(phi, dataclasses.replace(model, dark_rate=0.0))
    tables = {}
    for kind, dist in stats.items():
        patterns = sorted(dist)
        probs = np.array([dist[p] for p in patterns])
        tables[kind] = (np.array(patterns, dtype=bool), np.cumsum(probs) / probs.sum())
    return tables


_KINDS = ("identical", "distinct", "contaminant")
_C, _A, _B = (DETECTOR_ORDER.index(name) for name in ("C", "A", "B"))


def _sample_block(config: ExperimentConfig, phi: float, rng: np.random.Generator, n: int) -> dict[str, np.ndarray]:
    """Sample ``n`` trials; returns per-trial combos, source draws and click times for A, B, C."""
    model = config.imperfections
    combo = rng.integers(0, 4, n)
    pulses = emit_pairs(model, rng, n)
    u_register = rng.random(n)
    u_pattern = rng.random(n)
    routes = rng.integers(0, 4, (n, 2))
    survive = rng.random((n, 2)) < model.transmission
    dark = rng.random((n, 3)) < model.dark_rate
    half = to_ps(config.rep_period_ns) // 2
    dark_times = rng.integers(-half, half, (n, 3))

    any_contaminant = pulses.ancilla_contaminated | pulses.target_contaminated
    contaminant = any_contaminant & (u_register < contaminant_registration_probability(model))
    kind = np.where(contaminant, 2, np.where(pulses.identical, 0, 1))

    times = np.full((n, 3), NO_CLICK, dtype=np.int64)  # columns A, B, C

    correct = combo == CORRECT_COMBO
    tables = _pattern_tables(phi, model)
    for k, name in enumerate(_KINDS):
        rows = correct & (kind == k)
        if not rows.any():
            continue
        patterns, cdf = tables[name]
        idx = np.minimum(np.searchsorted(cdf, u_pattern[rows], side="right"), len(cdf) - 1)
        chosen = patterns[idx]
        for col, det in ((0, _A), (1, _B), (2, _C)):
            times[np.flatnonzero(rows)[chosen[:, det]], col] = 0

    offsets = np.zeros(4, dtype=np.int64)
    for i, name in enumerate(COMBOS[1:], start=1):
        offsets[i] = to_ps(config.delay_offsets_ns[name])
    wrong = ~correct
    arrival = np.stack([np.zeros(n, dtype=np.int64), offsets[combo]], axis=1)
    for photon in range(2):
        for col, det in ((0, DET_A), (1, DET_B), (2, DET_C)):
            hit = wrong & survive[:, photon] & (routes[:, photon] == det)
            times[hit, col] = np.minimum(times[hit, col], arrival[hit, photon])

    times = np.where(dark, np.minimum(times, dark_times), times)
    return {
        "combo": combo,
        "kind": kind,
        "identical": pulses.identical,
        "ancilla_contaminated": pulses.ancilla_contaminated,
        "target_contaminated": pulses.target_contaminated,
        "times": times,
    }


def _registered(times: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    has_a, has_b, has_c = (times[:, i] != NO_CLICK for i in range(3))
    ac = has_c & has_a & ~has_b
    bc = has_c & has_b & ~has_a
    return ac, bc, has_c


def sample_trial(config: ExperimentConfig, phi: float, rng: np.random.Generator) -> TrialEvent:
    """Sample a single trial at target phase ``phi``."""
    draw = _sample_block(config, phi, rng, 1)
    times = draw["times"][0]
    clicks = {name: int(t) for name, t in zip("ABC", times) if t != NO_CLICK}
    ac, bc, _ = _registered(draw["times"])
    target_label = 0 if draw["identical"][0] else 1
    anc = (0, 2) if draw["ancilla_contaminated"][0] else (0,)
    tgt = (target_label, 3) if draw["target_contaminated"][0] else (target_label,)
    pulses = (SourcePulse(len(anc), anc, 0), SourcePulse(len(tgt), tgt, 1))
    return TrialEvent(COMBOS[int(draw["combo"][0])], clicks, bool(ac[0] or bc[0]), pulses)


def block_rng(seed: int, phase_index: int, block_index: int) -> np.random.Generator:
    """Independent stream for one block of trials, fixed by (seed, phase, block)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(phase_index, block_index))))


def _run_block(config: ExperimentConfig, phase_index: int, block_index: int, n: int) -> _Tally:
    phi = config.phases[phase_index]
    draw = _sample_block(config, phi, block_rng(config.seed, phase_index, block_index), n)
    ac, bc, _ = _registered(draw["times"])
    times = draw["times"]
    lo, hi = config.broad_ps
    width = config.bin_width_ps

    def histogram(mask: np.ndarray, stop_col: int) -> np.ndarray:
        tau = times[mask, stop_col] - times[mask, 2]
        tau = tau[(tau >= lo) & (tau < hi)]
        return np.bincount((tau - lo) // width, minlength=config.n_bins).astype(np.int64)

    return _Tally(
        histogram(ac, 0),
        histogram(bc, 1),
        int(ac.sum() + bc.sum()),
        int((draw["combo"] == CORRECT_COMBO).sum()),
    )


def _run_task(args) -> _Tally:
    return _run_block(*args)


@dataclass(frozen=True)
class PhaseResult:
    phi: float
    trials: int
    correct_timing: int
    registered: int
    histogram_ac: CoincidenceHistogram
    histogram_bc: CoincidenceHistogram
    window_totals: Mapping[str, int]
    p_a: float
    p_b: float
    p_a_err: float
    p_b_err: float
    central_rate_hz: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    phases: tuple[PhaseResult, ...]

    def fringe_points(self, channel: str = "A") -> dict[float, float]:
        return {r.phi: (r.p_a if channel == "A" else r.p_b) for r in self.phases}


def _summarize(config: ExperimentConfig, phi: float, tallies: Sequence[_Tally]) -> PhaseResult:
    ac = np.sum([t.ac for t in tallies], axis=0)
    bc = np.sum([t.bc for t in tallies], axis=0)
    lo = config.broad_ps[0]
    h_ac = CoincidenceHistogram("AC", lo, config.bin_width_ps, tuple(int(x) for x in ac))
    h_bc = CoincidenceHistogram("BC", lo, config.bin_width_ps, tuple(int(x) for x in bc))
    central = config.central_ps
    totals = {
        "AC_central": h_ac.window_total(central),
        "BC_central": h_bc.window_total(central),
        "AC_broad": h_ac.total,
        "BC_broad": h_bc.total,
    }
    broad = totals["AC_broad"] + totals["BC_broad"]

    def ratio(count: int) -> tuple[float, float]:
        if broad == 0:
            return 0.0, 0.0
        y = count / broad
        return y, math.sqrt(y * (1.0 - y) / broad)

    p_a, p_a_err = ratio(totals["AC_central"])
    p_b, p_b_err = ratio(totals["BC_central"])
    trials = config.trials_per_phase
    seconds = trials / config.rate_calibration_hz
    return PhaseResult(
        phi=phi,
        trials=trials,
        correct_timing=sum(t.correct_timing for t in tallies),
        registered=sum(t.registered for t in tallies),
        histogram_ac=h_ac,
        histogram_bc=h_bc,
        window_totals=totals,
        p_a=p_a,
        p_b=p_b,
        p_a_err=p_a_err,
        p_b_err=p_b_err,
        central_rate_hz=(totals["AC_central"] + totals["BC_central"]) / seconds,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Accumulate histograms and normalized fringe points for every phase.

    A fringe point is the central-window count of one channel divided by the
    broad-window count of both channels.  Trials are split into fixed-size
    blocks with their own random streams, so results do not depend on
    ``workers``.
    """
    tasks = []
    for i in range(len(config.phases)):
        full, rest = divmod(config.trials_per_phase, BLOCK_SIZE)
        sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
        tasks.extend((config, i, b, n) for b, n in enumerate(sizes))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(_run_task, tasks, chunksize=4))
    else:
        tallies = [_run_task(t) for t in tasks]
    grouped: dict[int, list[_Tally]] = {}
    for (_, i, _, _), tally in zip(tasks, tallies):
        grouped.setdefault(i, []).append(tally)
    return ExperimentResult(
        config,
        tuple(_summarize(config, config.phases[i], grouped[i]) for i in range(len(config.phases))),
    )


class ContrastFit(NamedTuple):
    contrast: float
    phase: float
    stderr: float
    degenerate: bool = False


def fit_contrast(points: Mapping[float, float]) -> ContrastFit:
    """Least-squares fit of y(φ) = y0 (1 + C cos(φ + φ0)).

    Returns C >= 0 with φ0 folded into [0, 2π).  Flat data gives a flagged
    zero-contrast result.
    """
    phis = np.array(list(points), dtype=float)
    ys = np.array([points[p] for p in points], dtype=float)
    if len(np.unique(np.mod(phis, 2 * math.pi))) < 4:
        raise ValueError("fit_contrast needs at least four distinct phases")
    scale = max(np.max(np.abs(ys)), 1e-300)
    if np.ptp(ys) <= 1e-12 * scale:
        return ContrastFit(0.0, 0.0, 0.0, True)
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    y0, b, c = coef
    if y0 <= 0.0:
        return ContrastFit(0.0, 0.0, 0.0, True)
    amplitude = math.hypot(b, c)
    contrast = amplitude / y0
    phase = math.atan2(-c, b) % (2 * math.pi)
    dof = len(ys) - 3
    if dof > 0 and amplitude > 0.0:
        resid = ys - design @ coef
        cov = (resid @ resid / dof) * np.linalg.inv(design.T @ design)
        grad = np.array([-contrast / y0, b / (amplitude * y0), c / (amplitude * y0)])
        stderr = math.sqrt(max(grad @ cov @ grad, 0.0))
    else:
        stderr = 0.0
    return ContrastFit(contrast, phase, stderr)


def hom_experiment(model: ImperfectionModel, trials: int, seed: int) -> int:
    """Number of coincidences behind a 50-50 beam splitter over seeded trials.

    Each trial draws the photon pair's label content from the source and then
    a coincidence with the exact probability for that content.
    """
    identical_p = hom_coincidence(dataclasses.replace(model, v=1.0))
    distinct_p = hom_coincidence(dataclasses.replace(model, v=0.0))
    rng = np.random.default_rng(seed)
    pulses = emit_pairs(dataclasses.replace(model, g2=0.0), rng, trials)
    p = np.where(pulses.identical, identical_p, distinct_p)
    return int((rng.random(trials) < p).sum())
