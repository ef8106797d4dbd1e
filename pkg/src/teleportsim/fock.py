"""Exact few-photon Fock states over (external mode, internal label) slots.

A basis state lists one occupation number per slot, mode-major: the slot of
``(mode, label)`` sits at ``position(mode) * internal_dim + label``.  External
modes carry global integer ids so that states built on different registers can
be tensored together and modes keep their identity after detection removes
their neighbours.

Internal labels model the wave-packet identity of a photon.  Linear optics acts
identically on every label, and detectors never resolve them.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

AMPLITUDE_EPS = 1e-14
NORM_TOL = 1e-10
MAX_BRANCHES = 4096

CLICK = "click"
ANY = "any"


class CutoffError(ValueError):
    """An operation would leave the truncated Fock space."""


class ModeId(NamedTuple):
    external: int
    internal: int = 0


@dataclass(frozen=True)
class FockBasisState:
    occupations: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.occupations)


@dataclass(frozen=True)
class PureState:
    """Sparse superposition of Fock basis states.

    ``amplitudes`` is copied into a read-only mapping; every key must have
    ``len(modes) * internal_dim`` occupations.
    """

    modes: tuple[int, ...]
    amplitudes: Mapping[FockBasisState, complex]
    internal_dim: int = 2
    cutoff: int = 2
    total_cutoff: int = 4

    def __post_init__(self):
        modes = tuple(int(m) for m in self.modes)
        if list(modes) != sorted(set(modes)) or any(m < 0 for m in modes):
            raise ValueError(f"modes must be sorted, unique and non-negative, got {modes}")
        if self.internal_dim < 1:
            raise ValueError("internal_dim must be positive")
        width = len(modes) * self.internal_dim
        amps = {}
        for key, amp in self.amplitudes.items():
            if not isinstance(key, FockBasisState):
                key = FockBasisState(tuple(key))
            if len(key.occupations) != width:
                raise ValueError(
                    f"basis state {key.occupations} has {len(key.occupations)} slots, expected {width}"
                )
            if any(n < 0 for n in key.occupations):
                raise ValueError(f"negative occupation in {key.occupations}")
            if max(key.occupations, default=0) > self.cutoff:
                raise CutoffError(f"occupation cutoff {self.cutoff} exceeded by {key.occupations}")
            if key.n > self.total_cutoff:
                raise CutoffError(f"total photon cutoff {self.total_cutoff} exceeded by {key.occupations}")
            amps[key] = complex(amp)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", MappingProxyType(amps))

    def position(self, mode: int) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ValueError(f"mode {mode} is not part of this state (modes {self.modes})") from None

    def slot(self, mode_id: ModeId) -> int:
        if not 0 <= mode_id.internal < self.internal_dim:
            raise ValueError(f"internal label {mode_id.internal} outside dimension {self.internal_dim}")
        return self.position(mode_id.external) * self.internal_dim + mode_id.internal

    def mode_occupation(self, key: FockBasisState, mode: int) -> int:
        """Photons in ``mode`` summed over internal labels."""
        start = self.position(mode) * self.internal_dim
        return sum(key.occupations[start : start + self.internal_dim])

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def normalize(self) -> PureState:
        norm = self.norm()
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self.replace({k: a / norm for k, a in self.amplitudes.items()})

    def replace(self, amplitudes: Mapping, modes: Sequence[int] | None = None, internal_dim: int | None = None) -> PureState:
        return PureState(
            modes=self.modes if modes is None else tuple(modes),
            amplitudes=amplitudes,
            internal_dim=self.internal_dim if internal_dim is None else internal_dim,
            cutoff=self.cutoff,
            total_cutoff=self.total_cutoff,
        )

    def max_label(self) -> int:
        """Highest internal label holding a photon, -1 for the vacuum."""
        d = self.internal_dim
        top = -1
        for key in self.amplitudes:
            for i, n in enumerate(key.occupations):
                if n and i % d > top:
                    top = i % d
        return top

    def with_internal_dim(self, internal_dim: int) -> PureState:
        """Embed into a larger internal-label space (labels keep their values)."""
        if internal_dim == self.internal_dim:
            return self
        if internal_dim < self.internal_dim and self.max_label() >= internal_dim:
            raise CutoffError(f"labels up to {self.max_label()} do not fit in dimension {internal_dim}")
        old, new = self.internal_dim, internal_dim
        amps = {}
        for key, amp in self.amplitudes.items():
            occ = [0] * (len(self.modes) * new)
            for p in range(len(self.modes)):
                for lab in range(min(old, new)):
                    occ[p * new + lab] = key.occupations[p * old + lab]
            amps[FockBasisState(tuple(occ))] = amp
        return self.replace(amps, internal_dim=new)

    def external_occupations(self, key: FockBasisState) -> tuple[int, ...]:
        d = self.internal_dim
        return tuple(sum(key.occupations[p * d : (p + 1) * d]) for p in range(len(self.modes)))

    def __len__(self) -> int:
        return len(self.amplitudes)


def vacuum(modes: Sequence[int], internal_dim: int = 2, cutoff: int = 2, total_cutoff: int = 4) -> PureState:
    width = len(modes) * internal_dim
    return PureState(tuple(modes), {FockBasisState((0,) * width): 1.0}, internal_dim, cutoff, total_cutoff)


def fock_state(
    occupied: Mapping[Union[ModeId, int], int],
    modes: Sequence[int],
    internal_dim: int = 2,
    cutoff: int = 2,
    total_cutoff: int = 4,
) -> PureState:
    """Single basis state; integer keys mean internal label 0.

    >>> fock_state({0: 1, ModeId(1, 1): 1}, modes=(0, 1)).amplitudes
    mappingproxy({FockBasisState(occupations=(1, 0, 0, 1)): (1+0j)})
    """
    state = vacuum(modes, internal_dim, cutoff, total_cutoff)
    occ = [0] * (len(state.modes) * internal_dim)
    for where, n in occupied.items():
        mode_id = where if isinstance(where, ModeId) else ModeId(int(where), 0)
        occ[state.slot(mode_id)] += int(n)
    return state.replace({FockBasisState(tuple(occ)): 1.0})


@lru_cache(maxsize=4096)
def _expand_pair(na: int, nb: int, u: tuple[complex, complex, complex, complex]) -> tuple[tuple[int, int, complex], ...]:
    """Output (k, l, coefficient) for |na, nb> under a† -> u00 a† + u01 b†, b† -> u10 a† + u11 b†."""
    u00, u01, u10, u11 = u
    out: dict[tuple[int, int], complex] = {}
    for i in range(na + 1):
        ci = math.comb(na, i) * u00**i * u01 ** (na - i)
        if ci == 0:
            continue
        for j in range(nb + 1):
            cj = math.comb(nb, j) * u10**j * u11 ** (nb - j)
            if cj == 0:
                continue
            k = i + j
            l = na + nb - k
            out[(k, l)] = out.get((k, l), 0.0) + ci * cj
    norm = math.sqrt(math.factorial(na) * math.factorial(nb))
    return tuple(
        (k, l, c * math.sqrt(math.factorial(k) * math.factorial(l)) / norm)
        for (k, l), c in out.items()
    )


def _finish(state: PureState, amps: dict[tuple[int, ...], complex]) -> PureState:
    kept = {}
    for occ, amp in amps.items():
        if abs(amp) < AMPLITUDE_EPS:
            continue
        if max(occ, default=0) > state.cutoff:
            raise CutoffError(
                f"output basis state {occ} exceeds the per-slot cutoff {state.cutoff}"
            )
        kept[FockBasisState(occ)] = amp
    return state.replace(kept)


def apply_two_mode_unitary(state: PureState, a: int, b: int, u: Sequence[Sequence[complex]]) -> PureState:
    """Apply a 2x2 mode transform to creation operators of modes ``a`` and ``b`` on every label."""
    if a == b:
        raise ValueError("beam splitter needs two distinct modes")
    pa, pb = state.position(a), state.position(b)
    d = state.internal_dim
    uu = (complex(u[0][0]), complex(u[0][1]), complex(u[1][0]), complex(u[1][1]))
    out: dict[tuple[int, ...], complex] = {}
    for key, amp in state.amplitudes.items():
        occ = key.occupations
        labels = [lab for lab in range(d) if occ[pa * d + lab] or occ[pb * d + lab]]
        options = [_expand_pair(occ[pa * d + lab], occ[pb * d + lab], uu) for lab in labels]
        for combo in product(*options):
            new = list(occ)
            coef = amp
            for lab, (k, l, c) in zip(labels, combo):
                new[pa * d + lab] = k
                new[pb * d + lab] = l
                coef *= c
            t = tuple(new)
            out[t] = out.get(t, 0.0) + coef
    return _finish(state, out)


def beamsplitter_matrix(transmissivity: float = 0.5, phase: float = 0.0) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    st = math.sqrt(transmissivity)
    sr = math.sqrt(1.0 - transmissivity)
    return ((st, sr * cmath.exp(1j * phase)), (sr * cmath.exp(-1j * phase), -st))


def apply_beamsplitter(state: PureState, a: int, b: int, transmissivity: float = 0.5, phase: float = 0.0) -> PureState:
    """Beam splitter between external modes ``a`` and ``b``.

    Creation operators map as a† -> √t a† + √(1-t) e^{iθ} b† and
    b† -> √(1-t) e^{-iθ} a† - √t b†.  With this sign convention a click at the
    first output port of the teleportation Bell measurement returns the target
    state without a phase flip.

    Raises:
        CutoffError: an output basis state would exceed the per-slot cutoff.
    """
    return apply_two_mode_unitary(state, a, b, beamsplitter_matrix(transmissivity, phase))


def apply_phase(state: PureState, mode: int, phi: float) -> PureState:
    """Multiply each basis state by exp(i n φ), n the photon number in ``mode``."""
    if phi == 0.0:
        return state
    amps = {
        key: amp * cmath.exp(1j * phi * state.mode_occupation(key, mode))
        for key, amp in state.amplitudes.items()
    }
    return state.replace(amps)


def tensor(a: PureState, b: PureState) -> PureState:
    overlap = set(a.modes) & set(b.modes)
    if overlap:
        raise ValueError(f"tensor product needs disjoint modes, both contain {sorted(overlap)}")
    d = max(a.internal_dim, b.internal_dim)
    a, b = a.with_internal_dim(d), b.with_internal_dim(d)
    modes = tuple(sorted(a.modes + b.modes))
    origin = {m: (a, a.position(m)) if m in a.modes else (b, b.position(m)) for m in modes}
    amps = {}
    for ka, xa in a.amplitudes.items():
        for kb, xb in b.amplitudes.items():
            occ = []
            for m in modes:
                src, p = origin[m]
                key = ka if src is a else kb
                occ.extend(key.occupations[p * d : (p + 1) * d])
            amps[FockBasisState(tuple(occ))] = xa * xb
    return PureState(
        modes,
        amps,
        d,
        max(a.cutoff, b.cutoff),
        max(a.total_cutoff, b.total_cutoff),
    )


@dataclass(frozen=True)
class MixedState:
    """Weighted ensemble of pure states sharing one mode structure."""

    branches: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        branches = tuple((float(w), s) for w, s in self.branches)
        if not branches:
            raise ValueError("a mixed state needs at least one branch")
        if len(branches) > MAX_BRANCHES:
            raise ValueError(f"{len(branches)} branches exceed the limit of {MAX_BRANCHES}")
        if any(w <= 0.0 for w, _ in branches):
            raise ValueError("branch weights must be positive")
        total = sum(w for w, _ in branches)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"branch weights sum to {total}, expected 1")
        modes = branches[0][1].modes
        if any(s.modes != modes for _, s in branches):
            raise ValueError("all branches must share the same modes")
        d = max(s.internal_dim for _, s in branches)
        branches = tuple((w, s.with_internal_dim(d)) for w, s in branches)
        object.__setattr__(self, "branches", branches)

    @classmethod
    def pure(cls, state: PureState) -> MixedState:
        return cls(((1.0, state),))

    @classmethod
    def from_weighted(cls, branches: Iterable[tuple[float, PureState]]) -> MixedState:
        """Build from positive weights, renormalizing them and dropping zero-weight entries."""
        kept = [(w, s) for w, s in branches if w > 0.0]
        total = sum(w for w, _ in kept)
        return cls(tuple((w / total, s) for w, s in kept))

    @property
    def modes(self) -> tuple[int, ...]:
        return self.branches[0][1].modes

    @property
    def internal_dim(self) -> int:
        return self.branches[0][1].internal_dim

    def map(self, fn: Callable[[PureState], PureState]) -> MixedState:
        return MixedState(tuple((w, fn(s)) for w, s in self.branches))

    def max_label(self) -> int:
        return max(s.max_label() for _, s in self.branches)

    def __iter__(self) -> Iterator[tuple[float, PureState]]:
        return iter(self.branches)

    def __len__(self) -> int:
        return len(self.branches)


State = Union[PureState, MixedState]


def as_mixed(state: State) -> MixedState:
    return state if isinstance(state, MixedState) else MixedState.pure(state)


Requirement = Union[int, str]


@dataclass(frozen=True)
class DetectionPattern:
    """Per-mode detection requirement.

    Values are an exact photon count ``k``, :data:`CLICK` (at least one photon)
    or :data:`ANY` (measured, outcome discarded).  Modes that do not appear are
    unmonitored.  Internal labels are never resolved.
    """

    requirements: Mapping[int, Requirement] = field(default_factory=dict)

    def __post_init__(self):
        reqs = dict(self.requirements)
        if not reqs:
            raise ValueError("a detection pattern must monitor at least one mode")
        for mode, req in reqs.items():
            if isinstance(req, str):
                if req not in (CLICK, ANY):
                    raise ValueError(f"unknown requirement {req!r} on mode {mode}")
            elif int(req) != req or req < 0:
                raise ValueError(f"photon count on mode {mode} must be a non-negative integer")
        object.__setattr__(self, "requirements", MappingProxyType(reqs))

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(sorted(self.requirements))

    def matches(self, mode: int, n: int) -> bool:
        req = self.requirements[mode]
        if req == CLICK:
            return n > 0
        if req == ANY:
            return True
        return n == req


class Projection(NamedTuple):
    probability: float
    conditional: MixedState | None

    @property
    def empty(self) -> bool:
        return self.conditional is None


def _project_pure(state: PureState, pattern: DetectionPattern, remove: bool) -> tuple[float, list[tuple[float, PureState]]]:
    d = state.internal_dim
    monitored = [state.position(m) for m in pattern.modes]
    kept_pos = [p for p in range(len(state.modes)) if p not in monitored or not remove]
    kept_modes = tuple(state.modes[p] for p in kept_pos)
    groups: dict[tuple[int, ...], dict[FockBasisState, complex]] = {}
    for key, amp in state.amplitudes.items():
        occ = key.occupations
        ok = True
        for mode, p in zip(pattern.modes, monitored):
            if not pattern.matches(mode, sum(occ[p * d : (p + 1) * d])):
                ok = False
                break
        if not ok:
            continue
        record = tuple(n for p in monitored for n in occ[p * d : (p + 1) * d])
        rest = FockBasisState(tuple(n for p in kept_pos for n in occ[p * d : (p + 1) * d]))
        group = groups.setdefault(record, {})
        group[rest] = group.get(rest, 0.0) + amp
    branches = []
    total = 0.0
    for group in groups.values():
        weight = sum(abs(a) ** 2 for a in group.values())
        if weight <= AMPLITUDE_EPS**2:
            continue
        total += weight
        scale = 1.0 / math.sqrt(weight)
        branches.append((weight, state.replace({k: a * scale for k, a in group.items()}, modes=kept_modes)))
    return total, branches


def project(state: State, pattern: DetectionPattern, remove: bool = True) -> Projection:
    """Probability of observing ``pattern`` and the post-measurement state.

    The label record of the detected photons is traced out, so the conditional
    state is in general mixed.  Monitored modes are dropped from it unless
    ``remove`` is false.  A pattern that cannot occur returns probability 0
    with an empty (``None``) conditional.
    """
    mixed = as_mixed(state)
    total_cutoff = mixed.branches[0][1].total_cutoff
    for mode, req in pattern.requirements.items():
        if mode not in mixed.modes:
            raise ValueError(f"pattern monitors mode {mode}, absent from state modes {mixed.modes}")
        if isinstance(req, int) and req > total_cutoff:
            raise ValueError(f"requested {req} photons on mode {mode}, above the total cutoff {total_cutoff}")
    probability = 0.0
    weighted = []
    for w, s in mixed:
        p, parts = _project_pure(s, pattern, remove)
        probability += w * p
        weighted.extend((w * pw, ps) for pw, ps in parts)
    if probability <= 0.0 or not weighted:
        return Projection(0.0, None)
    return Projection(min(probability, 1.0), MixedState.from_weighted(weighted))


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>."""
    if a.modes != b.modes:
        raise ValueError(f"mode mismatch: {a.modes} vs {b.modes}")
    d = max(a.internal_dim, b.internal_dim)
    a, b = a.with_internal_dim(d), b.with_internal_dim(d)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    acc = 0.0
    for key, amp in small.amplitudes.items():
        other = large.amplitudes.get(key)
        if other is not None:
            acc += (amp.conjugate() * other) if small is a else (other.conjugate() * amp)
    return complex(acc)


def _label_record(state: PureState, key: FockBasisState) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split a basis state into external occupations and photon labels in mode order."""
    d = state.internal_dim
    ext = []
    labels = []
    for p in range(len(state.modes)):
        chunk = key.occupations[p * d : (p + 1) * d]
        ext.append(sum(chunk))
        for lab, n in enumerate(chunk):
            labels.extend([lab] * n)
    return tuple(ext), tuple(labels)


def external_density(state: State) -> dict[tuple[tuple[int, ...], tuple[int, ...]], complex]:
    """Density matrix over external occupations with internal labels traced out.

    Photons are matched by their order across modes, which is the ordinary
    partial trace for the single-photon states this package compares.
    """
    rho: dict = {}
    for w, s in as_mixed(state):
        by_record: dict[tuple[int, ...], dict[tuple[int, ...], complex]] = {}
        for key, amp in s.amplitudes.items():
            ext, rec = _label_record(s, key)
            by_record.setdefault(rec, {})[ext] = by_record.get(rec, {}).get(ext, 0.0) + amp
        for vec in by_record.values():
            for e1, x1 in vec.items():
                for e2, x2 in vec.items():
                    rho[(e1, e2)] = rho.get((e1, e2), 0.0) + w * x1 * x2.conjugate()
    return rho


def fidelity(a: State, b: PureState, trace_internal: bool = False) -> float:
    """Overlap <b|ρ_a|b> of a (possibly mixed) state with a pure reference.

    With ``trace_internal`` the comparison is made on external modes only,
    after tracing internal labels out of both states; ``b`` must then reduce
    to a pure external state (true whenever its photons share one label).
    """
    mixed = as_mixed(a)
    if mixed.modes != b.modes:
        raise ValueError(f"mode mismatch: {mixed.modes} vs {b.modes}")
    if not trace_internal:
        value = sum(w * abs(inner(b, s)) ** 2 for w, s in mixed)
    else:
        rho_a = external_density(mixed)
        rho_b = external_density(b)
        value = sum((x * rho_b.get((e2, e1), 0.0)) for (e1, e2), x in rho_a.items()).real
    return float(min(max(value, 0.0), 1.0))


def exhaustive_patterns(modes: Sequence[int], max_photons: int) -> Iterator[DetectionPattern]:
    """Every exact-count pattern over ``modes`` with at most ``max_photons`` in total."""
    for counts in product(range(max_photons + 1), repeat=len(modes)):
        if sum(counts) <= max_photons:
            yield DetectionPattern(dict(zip(modes, counts)))
