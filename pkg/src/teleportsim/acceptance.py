"""Acceptance checks shared by ``teleportsim selftest`` and the test suite.

Each check returns a :class:`CheckResult`; :func:`run_all` runs them in order
and can echo one PASS/FAIL line per check.
"""

from __future__ import annotations

import cmath
import contextlib
import io
import itertools
import math
import tempfile
import time
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats

from .elements import ImperfectionModel, hom_coincidence
from .fock import fidelity
from .montecarlo import ExperimentConfig, default_phases, fit_contrast, hom_experiment, run_experiment
from .teleport import (
    OUTPUT_MODES,
    TeleportCircuit,
    cz_success,
    detector_statistics,
    dual_rail,
    fidelity_from_contrast,
    fringe_contrast,
    klm_success,
    predicted_contrast,
    random_qubits,
    run_analytic,
    swap_check,
)


class CheckResult(NamedTuple):
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:>2} {self.name}: {self.detail}"


def check_contrast_formula() -> CheckResult:
    c = predicted_contrast(0.75, 0.92, 0.91, 0.02)
    return CheckResult(1, "contrast formula", abs(c - 0.6217) <= 1e-4, f"C={c:.6f} (want 0.6217 +/- 1e-4)")


GRID_VISIBILITIES = (0.5, 0.75, 1.0)
GRID_G2 = (0.0, 0.02, 0.1)


def check_contrast_grid() -> CheckResult:
    started = time.perf_counter()
    worst = 0.0
    for v, v1, v2 in itertools.product(GRID_VISIBILITIES, repeat=3):
        for g2 in GRID_G2:
            model = ImperfectionModel(v=v, v1=v1, v2=v2, g2=g2)
            worst = max(worst, abs(fringe_contrast(model) - predicted_contrast(v, v1, v2, g2)))
    elapsed = time.perf_counter() - started
    return CheckResult(
        2,
        "fringe model vs contrast formula on 3^4 grid",
        worst <= 1e-6 and elapsed < 10.0,
        f"max |dC|={worst:.2e} (want <= 1e-6), {elapsed:.2f} s (want < 10 s)",
    )


def check_fidelity_from_contrast() -> CheckResult:
    f = fidelity_from_contrast(0.60)
    return CheckResult(3, "fidelity from contrast", f == 0.80, f"F(0.60)={f!r} (want 0.8)")


def check_ideal_protocol(count: int = 20, seed: int = 2024) -> CheckResult:
    worst_f = worst_p = worst_fail = 0.0
    for alpha, beta in random_qubits(seed, count):
        circuit = TeleportCircuit(alpha, beta)
        outcome = run_analytic(circuit)
        target = dual_rail(alpha, beta, OUTPUT_MODES)
        worst_f = max(worst_f, abs(1.0 - fidelity(outcome.out_c, target, trace_internal=True)))
        worst_p = max(worst_p, abs(outcome.p_success_c - 0.25), abs(outcome.p_success_d - 0.25))
        worst_fail = max(worst_fail, abs(outcome.p_fail - 0.5))
    ok = max(worst_f, worst_p, worst_fail) <= 1e-12
    return CheckResult(
        4,
        "ideal teleportation",
        ok,
        f"{count} random qubits: max |1-F|={worst_f:.1e}, max |p_C,D-1/4|={worst_p:.1e}, "
        f"max |p_fail-1/2|={worst_fail:.1e} (want <= 1e-12)",
    )


def check_swap() -> CheckResult:
    f = swap_check()
    return CheckResult(5, "entanglement swapping", abs(f - 1.0) <= 1e-12, f"F(psi+)={f:.15f} (want 1 +/- 1e-12)")


def _phase_gap(a: float, b: float) -> float:
    return abs(cmath.phase(cmath.exp(1j * (a - b))))


def check_montecarlo_fringe(trials: int = 1_000_000, seed: int = 20_050_101, workers: int = 1) -> CheckResult:
    started = time.perf_counter()
    config = ExperimentConfig(phases=default_phases(12), trials_per_phase=trials, seed=seed)
    result = run_experiment(config, workers=workers)
    fit_a = fit_contrast(result.fringe_points("A"))
    fit_b = fit_contrast(result.fringe_points("B"))
    gap = _phase_gap(fit_a.phase, fit_b.phase)
    # Central A+B totals should be flat in phi: Pearson chi-square against their mean.
    totals = np.array([r.window_totals["AC_central"] + r.window_totals["BC_central"] for r in result.phases], float)
    chi2 = float(((totals - totals.mean()) ** 2 / totals.mean()).sum())
    p_value = float(stats.chi2.sf(chi2, len(totals) - 1))
    elapsed = time.perf_counter() - started
    ok = abs(fit_a.contrast - 0.62) <= 0.02 and abs(gap - math.pi) <= 0.05 and p_value > 0.01
    return CheckResult(
        6,
        "Monte Carlo fringe",
        ok,
        f"C={fit_a.contrast:.4f}+/-{fit_a.stderr:.4f} (want 0.62 +/- 0.02), "
        f"A/B phase gap={gap:.4f} (want pi +/- 0.05), "
        f"flat A+B chi2={chi2:.2f}/{len(totals) - 1} p={p_value:.3f} (want > 0.01), {elapsed:.1f} s",
    )


HOM_VISIBILITIES = (0.0, 0.25, 0.5, 0.75, 1.0)


def check_hom(trials: int = 200_000, seed: int = 77) -> CheckResult:
    worst_analytic = 0.0
    worst_sigma = 0.0
    for i, v in enumerate(HOM_VISIBILITIES):
        model = ImperfectionModel(v=v, v1=1.0, v2=1.0, g2=0.0)
        expected = (1.0 - v) / 2.0
        worst_analytic = max(worst_analytic, abs(hom_coincidence(model) - expected))
        hits = hom_experiment(model, trials, seed + i)
        sigma = math.sqrt(trials * expected * (1.0 - expected))
        deviation = abs(hits - trials * expected)
        z = deviation / sigma if sigma > 0 else (0.0 if deviation == 0 else math.inf)
        worst_sigma = max(worst_sigma, z)
    return CheckResult(
        7,
        "HOM sweep",
        worst_analytic <= 1e-12 and worst_sigma <= 3.0,
        f"V in {HOM_VISIBILITIES}: analytic max error {worst_analytic:.1e} (want <= 1e-12), "
        f"Monte Carlo max deviation {worst_sigma:.2f} sigma (want <= 3)",
    )


def check_klm() -> CheckResult:
    k1 = klm_success(1)
    cz6 = cz_success(6)
    ok = abs(k1 - 0.5) <= 1e-15 and abs(cz6 - 36 / 49) <= 1e-15 and round(cz6, 4) == 0.7347
    return CheckResult(8, "KLM closed forms", ok, f"klm_success(1)={k1!r}, cz_success(6)={cz6:.6f} (want 0.5, 36/49)")


def check_d_silence() -> CheckResult:
    worst = 0.0
    models = [
        ImperfectionModel.ideal(),
        ImperfectionModel(g2=0.0),
        ImperfectionModel(v=0.3, v1=0.5, v2=0.6, g2=0.0),
        ImperfectionModel(v=0.0, v1=0.0, v2=0.0, g2=0.0),
    ]
    for model in models:
        for phi in default_phases(8):
            dist = detector_statistics(phi, model)
            joint = sum(p for (c, d, a, b), p in dist.items() if c and d and (a or b))
            worst = max(worst, joint)
    return CheckResult(
        9, "D-silence", worst == 0.0, f"max P(C and D and (A or B))={worst!r} over {len(models)} models x 8 phases (want 0)"
    )


def check_determinism(trials: int = 40_000, seed: int = 5) -> CheckResult:
    from .cli import main

    config_text = f"n_phases = 6\ntrials_per_phase = {trials}\nseed = {seed}\n"
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        (root / "run.cfg").write_text(config_text)
        for run, workers in enumerate((1, 2)):
            out = root / f"run{run}"
            with contextlib.redirect_stdout(io.StringIO()):
                codes = [
                    main(["fringe", "--config", str(root / "run.cfg"), "--montecarlo", "--out", str(out), "--workers", str(workers)]),
                    main(["histogram", "--config", str(root / "run.cfg"), "--phi", "0", "--out", str(out), "--workers", str(workers)]),
                ]
            if any(codes):
                return CheckResult(10, "determinism", False, f"CLI exit codes {codes}")
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outputs[0] == outputs[1] and len(outputs[0]) == 3
    return CheckResult(
        10,
        "determinism",
        same,
        f"{len(outputs[0])} CSV files byte-identical across two runs (1 and 2 workers): {same}",
    )


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_contrast_formula,
    check_contrast_grid,
    check_fidelity_from_contrast,
    check_ideal_protocol,
    check_swap,
    check_montecarlo_fringe,
    check_hom,
    check_klm,
    check_d_silence,
    check_determinism,
)


def run_all(echo: bool = False) -> list[CheckResult]:
    results = []
    for check in CHECKS:
        result = check()
        if echo:
            print(result.line(), flush=True)
        results.append(result)
    return results
