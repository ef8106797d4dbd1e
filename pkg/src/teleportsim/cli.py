"""Command-line interface: ``teleportsim {predict,fringe,histogram,klm,selftest}``.

Exit codes: 0 success, 1 failed self-test, 2 usage or configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

from . import report
from .config import ConfigError, config_to_mapping, load_config
from .elements import ImperfectionModel
from .fock import CutoffError
from .montecarlo import ExperimentConfig, fit_contrast, run_experiment
from .teleport import (
    TeleportCircuit,
    cz_success,
    fidelity_from_contrast,
    fringe_analytic,
    klm_success,
    predicted_contrast,
    run_analytic,
)

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="teleportsim", description="Post-selected single-mode teleportation simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="contrast and fidelity expected from the measured imperfections")
    defaults = ImperfectionModel()
    p.add_argument("--v", type=float, default=defaults.v, help="photon overlap (default %(default)s)")
    p.add_argument("--v1", type=float, default=defaults.v1, help="BS 1 visibility (default %(default)s)")
    p.add_argument("--v2", type=float, default=defaults.v2, help="BS 2 visibility (default %(default)s)")
    p.add_argument("--g2", type=float, default=defaults.g2, help="source g2(0) (default %(default)s)")

    for name, help_text in (
        ("fringe", "fringe versus target phase, analytic or Monte Carlo"),
        ("histogram", "start-stop histograms at one target phase"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="experiment file (key = value) or run summary JSON")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo")
        p.add_argument("--svg", action="store_true", help="also write an SVG plot")
        if name == "fringe":
            mode = p.add_mutually_exclusive_group()
            mode.add_argument("--analytic", dest="mode", action="store_const", const="analytic")
            mode.add_argument("--montecarlo", dest="mode", action="store_const", const="montecarlo")
            p.set_defaults(mode="analytic")
        else:
            p.add_argument("--phi", type=float, required=True, help="target phase in radians")

    p = sub.add_parser("klm", help="closed-form KLM teleportation and C-Z success probabilities")
    p.add_argument("--n", type=int, required=True, help="number of ancillas")

    sub.add_parser("selftest", help="run the acceptance checks")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _success_probabilities(model: ImperfectionModel) -> dict[str, float]:
    outcome = run_analytic(TeleportCircuit(imperfections=model))
    return {"p_success_C": outcome.p_success_c, "p_success_D": outcome.p_success_d, "p_fail": outcome.p_fail}


def _fit_record(points) -> dict:
    fit = fit_contrast(points)
    return {"C": float(fit.contrast), "phi0_rad": fit.phase, "stderr": fit.stderr, "degenerate": fit.degenerate}


def cmd_predict(args) -> int:
    model = ImperfectionModel(v=args.v, v1=args.v1, v2=args.v2, g2=args.g2)
    contrast = predicted_contrast(model.v, model.v1, model.v2, model.g2)
    print(f"C={contrast:.4f}")
    print(f"F={fidelity_from_contrast(contrast):.4f}")
    return 0


def cmd_fringe(args) -> int:
    started = time.perf_counter()
    config = _load(args)
    model = config.imperfections
    if args.mode == "analytic":
        rows = [(phi, *fringe_analytic(phi, model), 0.0, 0.0) for phi in config.phases]
    else:
        result = run_experiment(config, workers=args.workers)
        rows = [(r.phi, r.p_a, r.p_b, r.p_a_err, r.p_b_err) for r in result.phases]
    fit_a = _fit_record({r[0]: r[1] for r in rows}) if len(set(config.phases)) >= 4 else {}
    fit_b = _fit_record({r[0]: r[2] for r in rows}) if len(set(config.phases)) >= 4 else {}
    predicted = predicted_contrast(model.v, model.v1, model.v2, model.g2)
    summary = report.RunSummary(
        command="fringe",
        mode=args.mode,
        config=config_to_mapping(config),
        fringe=[dict(zip(report.FRINGE_HEADER, row)) for row in rows],
        fit={"A": fit_a, "B": fit_b},
        predicted_contrast=predicted,
        fidelity=fidelity_from_contrast(min(fit_a["C"], 1.0)) if fit_a else None,
        success_probabilities=_success_probabilities(model),
    )
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "fringe.csv").write_text(report.fringe_csv(rows))
    if args.svg:
        phis = [r[0] for r in rows]
        svg = report.svg_plot(
            {"C-A": (phis, [r[1] for r in rows]), "C-B": (phis, [r[2] for r in rows])},
            "target phase (rad)",
            "normalized coincidences",
            title=f"fringe ({args.mode})",
        )
        (args.out / "fringe.svg").write_text(svg)
    summary.duration_s = time.perf_counter() - started
    (args.out / "summary.json").write_text(summary.to_json())
    if fit_a:
        print(f"C={fit_a['C']:.4f} (predicted {predicted:.4f})")
    return 0


def cmd_histogram(args) -> int:
    started = time.perf_counter()
    config = _load(args).replace(phases=(args.phi,))
    result = run_experiment(config, workers=args.workers).phases[0]
    args.out.mkdir(parents=True, exist_ok=True)
    for hist in (result.histogram_ac, result.histogram_bc):
        (args.out / f"histogram_{hist.pair}.csv").write_text(report.histogram_csv(hist))
    if args.svg:
        centers = list(result.histogram_ac.bin_centers_ns)
        svg = report.svg_plot(
            {"A-C": (centers, list(result.histogram_ac.counts)), "B-C": (centers, list(result.histogram_bc.counts))},
            "tau (ns)",
            "counts",
            title=f"start-stop histograms, phi = {args.phi:.3f} rad",
        )
        (args.out / "histogram.svg").write_text(svg)
    summary = report.RunSummary(
        command="histogram",
        mode="montecarlo",
        config=config_to_mapping(config),
        window_totals={
            **result.window_totals,
            "trials": result.trials,
            "correct_timing": result.correct_timing,
            "registered": result.registered,
            "central_rate_hz": result.central_rate_hz,
        },
        predicted_contrast=predicted_contrast(
            config.imperfections.v, config.imperfections.v1, config.imperfections.v2, config.imperfections.g2
        ),
        duration_s=time.perf_counter() - started,
    )
    (args.out / "summary.json").write_text(summary.to_json())
    totals = result.window_totals
    print(f"A-C central={totals['AC_central']} broad={totals['AC_broad']}")
    print(f"B-C central={totals['BC_central']} broad={totals['BC_broad']}")
    return 0


def cmd_klm(args) -> int:
    if args.n < 1:
        print("teleportsim klm: error: --n must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    print("n,klm_success,cz_success")
    for n in range(1, args.n + 1):
        print(f"{n},{klm_success(n):.6f},{cz_success(n):.6f}")
    return 0


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(echo=True)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "predict": cmd_predict,
    "fringe": cmd_fringe,
    "histogram": cmd_histogram,
    "klm": cmd_klm,
    "selftest": cmd_selftest,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"teleportsim: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        if isinstance(exc, CutoffError):
            print(f"teleportsim: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        print(f"teleportsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"teleportsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
