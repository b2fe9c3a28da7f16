"""Command-line interface: simulate, fit, gof, report.

All commands are deterministic for a fixed seed: no timestamps or
machine identifiers enter any output, so re-running a command reproduces
its files byte for byte. Exit codes: 0 for a clean result, 1 for a
flagged result (fit did not converge, or the fit quality is
unacceptable), 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from bmcmc import chain
from bmcmc.fitting import FitResult, fit_model
from bmcmc.gof import CONSISTENCY_GUIDE, classify_fit, gof
from bmcmc.io import (
    OUT_DIR_ENV,
    FitConfig,
    parameter_names,
    read_counts,
    read_parameters,
    write_counts,
    write_parameters,
)
from bmcmc.models import ModelVariant, probability_matrix, to_vector
from bmcmc.simulate import simulate_matrix

_VARIANTS = {v.value: v for v in ModelVariant}


def _variant(text: str) -> ModelVariant:
    return _VARIANTS[text]


def _out_dir(argument) -> Path:
    if argument:
        return Path(argument)
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def _fmt(x: float) -> str:
    return repr(float(x))


def cmd_simulate(args) -> int:
    params = read_parameters(args.params)
    variant = _variant(args.variant)
    rng = np.random.default_rng(args.seed)
    matrix = simulate_matrix(params, variant, args.trials, rng)
    out = Path(args.out) if args.out else _out_dir(args.out_dir) / "counts.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_counts(matrix, out)
    print(f"wrote {out}")
    return 0


def _gof_block(report, classification: str) -> str:
    lines = [
        f"rmsd: {_fmt(report.rmsd)} (guide < 0.025)",
        f"r_squared: {_fmt(report.r_squared)}",
        f"b0: {_fmt(report.b0)} +- {_fmt(report.b0_halfwidth)} (half-width guide < 0.0075)",
        f"b1: {_fmt(report.b1)} +- {_fmt(report.b1_halfwidth)} (half-width guide < 0.05)",
        f"kl_divergence_bits: {_fmt(report.kl_divergence)} (guide < 0.175)",
        "kl zero-proportion floor: 1/(2*Tr_h*N)",
        f"classification: {classification}",
    ]
    return "\n".join(lines)


def _fit_report_text(result: FitResult, config: FitConfig) -> str:
    params = result.parameters
    names = parameter_names(params.n_signals, params.n_criteria)
    vector = to_vector(params)
    lines = [
        "rating-model fit report",
        f"variant: {result.variant.value}",
        f"seed: {config.seed}",
        f"restarts: {config.restarts}",
        f"requested samples: {config.n_samples}",
        f"confidence level: {_fmt(config.confidence_level)}",
        f"soft sigma penalty: {'on' if config.include_soft_penalty else 'off'}",
        "engine: initial-temperature {0} target-temperature 1.0 cooling {1} "
        "target-acceptance {2} bootstrap-fraction {3} reset-margin {4}".format(
            _fmt(config.initial_temperature),
            _fmt(chain.ANNEAL_GAMMA),
            _fmt(chain.TARGET_ACCEPTANCE),
            _fmt(chain.BOOTSTRAP_FRACTION),
            _fmt(chain.RESET_MARGIN),
        ),
        f"converged: {'yes' if result.converged else 'no'}",
        f"proposals: {result.total_proposals}",
        f"samples archived: {result.samples.shape[0]}",
        f"log_likelihood: {_fmt(result.log_likelihood)}",
        f"log_likelihood_soft: {_fmt(result.log_likelihood_soft)}",
        "restart_log_likelihoods: "
        + " ".join(_fmt(v) for v in result.restart_log_likelihoods),
        f"consistency: {_fmt(result.consistency)} (guide < {CONSISTENCY_GUIDE})",
        _gof_block(result.gof, result.classification),
        "",
        "parameters (value [lower, upper]):",
    ]
    for k, name in enumerate(names):
        lines.append(
            f"{name} {_fmt(vector[k])} [{_fmt(result.limits[0, k])}, {_fmt(result.limits[1, k])}]"
        )
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    data = read_counts(args.counts)
    variant = _variant(args.variant)
    template = read_parameters(args.start) if args.start else None
    config = FitConfig(
        variant=variant,
        seed=args.seed,
        restarts=args.restarts,
        n_samples=args.samples,
        include_soft_penalty=not args.no_soft_penalty,
    )
    result = fit_model(data, config, template=template)
    out_dir = _out_dir(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_parameters(result.parameters, out_dir / "fitted_parameters.txt")
    report_text = _fit_report_text(result, config)
    (out_dir / "fit_report.txt").write_text(report_text)
    print(report_text, end="")
    flagged = (not result.converged) or result.classification == "unacceptable"
    return 1 if flagged else 0


def _evaluate_gof(args):
    data = read_counts(args.counts)
    params = read_parameters(args.params)
    variant = _variant(args.variant)
    predicted = probability_matrix(params, variant)
    report = gof(data, predicted)
    return data, params, variant, predicted, report


def cmd_gof(args) -> int:
    _, _, _, _, report = _evaluate_gof(args)
    classification = classify_fit(report)
    print(_gof_block(report, classification))
    return 1 if classification == "unacceptable" else 0


def cmd_report(args) -> int:
    data, params, variant, predicted, report = _evaluate_gof(args)
    classification = classify_fit(report)
    lines = [
        "rating-model report",
        f"variant: {variant.value}",
        f"stimuli: {data.n_stimuli}  responses: {data.n_responses}",
        "",
        "observed proportions vs model probabilities:",
    ]
    proportions = data.proportions()
    for h in range(data.n_stimuli):
        lines.append(f"stimulus {h + 1} (trials {int(data.trials_per_stimulus[h])}):")
        lines.append("  observed:  " + " ".join(f"{p:.6f}" for p in proportions[h]))
        lines.append("  predicted: " + " ".join(f"{p:.6f}" for p in predicted[h]))
    lines.append("")
    lines.append(_gof_block(report, classification))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text, end="")
    return 1 if classification == "unacceptable" else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmcmc",
        description="Bootstrap Markov-chain fitting of Gaussian rating-scale models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    variants = sorted(_VARIANTS)

    p_sim = sub.add_parser("simulate", help="simulate a rating matrix")
    p_sim.add_argument("--params", required=True, help="parameter file")
    p_sim.add_argument("--variant", required=True, choices=variants)
    p_sim.add_argument("--trials", required=True, type=int, help="trials per stimulus")
    p_sim.add_argument("--seed", required=True, type=int)
    p_sim.add_argument("--out", help="output counts CSV (default <out-dir>/counts.csv)")
    p_sim.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit a model to a counts file")
    p_fit.add_argument("--counts", required=True, help="counts CSV")
    p_fit.add_argument("--variant", required=True, choices=variants)
    p_fit.add_argument("--start", help="optional starting parameter file")
    p_fit.add_argument("--seed", required=True, type=int)
    p_fit.add_argument("--samples", type=int, default=4000, help="posterior samples to archive")
    p_fit.add_argument("--restarts", type=int, default=3)
    p_fit.add_argument("--no-soft-penalty", action="store_true",
                       help="drop the soft barrier keeping free sigmas positive")
    p_fit.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p_fit.set_defaults(func=cmd_fit)

    p_gof = sub.add_parser("gof", help="goodness of fit of parameters against counts")
    p_gof.add_argument("--counts", required=True)
    p_gof.add_argument("--params", required=True)
    p_gof.add_argument("--variant", required=True, choices=variants)
    p_gof.set_defaults(func=cmd_gof)

    p_rep = sub.add_parser("report", help="full observed-vs-predicted report")
    p_rep.add_argument("--counts", required=True)
    p_rep.add_argument("--params", required=True)
    p_rep.add_argument("--variant", required=True, choices=variants)
    p_rep.add_argument("--out", help="also write the report to this file")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
