#!/usr/bin/env python3
"""
survey-auc command line

Subcommands:
  fit              pseudo-likelihood logistic fit
  auc              weighted AUC of fitted probabilities or a score column
  ci               AUC with replicate variance and confidence intervals
  compare-indep    Wald test of equal AUCs on two independent samples
  compare-paired   Wald test of two models' AUCs on one sample
  simulate         Monte Carlo study of a bundled scenario
  dump-replicates  write replicate weights as CSV

Results go to stdout as JSON (or to --output); logs go to stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from config import (
    BOOTSTRAP_METHODS,
    DEFAULT_ALPHAS,
    DEFAULT_B,
    DEFAULT_SEED,
    METHODS,
    ColumnSchema,
    RunConfig,
    __version__,
)
from data_loader import SurveyDataLoader, load_survey_csv, write_survey_csv
from errors import EXIT_INPUT, EXIT_OK, ConfigError, SurveyAucError
from inference.compare import compare_independent_frames, compare_paired_models
from inference.estimators import Construction, Reference, confidence_interval, estimate_auc
from replicates import ResampleRng, dump_replicates, replicate_weights
from simulation.monte_carlo import (
    MonteCarloReport,
    MonteCarloTracker,
    generate_populations,
    population_summary,
    run_rng,
    run_scenario,
)
from simulation.population import draw_sample
from simulation.scenarios import load_scenario
from survey_frame import SurveyFrame, validate_for_replication
from wauc import AucInput, weighted_auc
from wlogit import fit_pseudo_likelihood

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("fit", "auc", "ci", "compare-indep", "compare-paired", "simulate", "dump-replicates")


def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _alpha_list(text: str) -> List[float]:
    try:
        alphas = [float(a) for a in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"alphas must be numbers, got '{text}'")
    if not alphas or any(not 0.0 < a < 1.0 for a in alphas):
        raise argparse.ArgumentTypeError(f"alphas must lie in (0, 1), got '{text}'")
    return alphas


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    common.add_argument("--threads", type=int, default=1, help="joblib workers (results do not depend on it)")
    common.add_argument("--output", help="write the JSON result here instead of stdout")

    columns = argparse.ArgumentParser(add_help=False)
    columns.add_argument("--stratum-col", default="stratum")
    columns.add_argument("--psu-col", default="psu")
    columns.add_argument("--weight-col", default="weight")
    columns.add_argument("--outcome-col", default="y")
    columns.add_argument("--covariate-cols", type=_csv_list, default=[], help="comma-separated, e.g. a,b,c")
    columns.add_argument("--unit-id-col")

    resampling = argparse.ArgumentParser(add_help=False)
    resampling.add_argument("--method", choices=METHODS, default="jkn")
    resampling.add_argument("--B", type=int, default=DEFAULT_B, help="bootstrap replicates")
    resampling.add_argument("--seed", type=int, default=DEFAULT_SEED)
    resampling.add_argument("--alpha", type=_alpha_list, default=list(DEFAULT_ALPHAS),
                            help="comma-separated significance levels")
    resampling.add_argument("--reference", choices=[r.value for r in Reference], default=Reference.T.value,
                            help="t with design degrees of freedom, or z, for Wald intervals and tests")

    parser = argparse.ArgumentParser(prog="survey-auc", description="Design-based AUC inference for survey data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", parents=[common, columns], help="fit the weighted logistic model")
    p.add_argument("input")

    p = sub.add_parser("auc", parents=[common, columns], help="weighted AUC")
    p.add_argument("input")
    p.add_argument("--score-col", help="use this column as the score instead of fitting a model")

    p = sub.add_parser("ci", parents=[common, columns, resampling], help="AUC confidence intervals")
    p.add_argument("input")
    p.add_argument("--ci", choices=[c.value for c in Construction], default=Construction.NORMAL.value)
    p.add_argument("--dump-replicates", metavar="PATH", help="also write the replicate weights used")

    p = sub.add_parser("compare-indep", parents=[common, columns, resampling],
                       help="compare AUCs of two independent samples")
    p.add_argument("input1")
    p.add_argument("input2")

    p = sub.add_parser("compare-paired", parents=[common, columns, resampling],
                       help="compare two models' AUCs on one sample")
    p.add_argument("input")
    p.add_argument("--covariates1", type=_csv_list, required=True)
    p.add_argument("--covariates2", type=_csv_list, required=True)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study of a scenario")
    p.add_argument("--scenario", type=int, required=True)
    p.add_argument("--runs", type=int, help="runs per sampling scheme (default from the registry)")
    p.add_argument("--B", type=int, help="bootstrap replicates (default from the registry)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--alpha", type=_alpha_list)
    p.add_argument("--reference", choices=[r.value for r in Reference], default=Reference.T.value)
    p.add_argument("--out", default="simulation_out", help="output directory")
    p.add_argument("--methods", type=_csv_list, default=list(METHODS))
    p.add_argument("--clusters", type=_csv_list, help="clusters per stratum to run, e.g. 2,10")
    p.add_argument("--sizes", type=_csv_list, help="sample sizes to run, e.g. n1")
    p.add_argument("--registry", help="alternative scenario registry JSON")
    p.add_argument("--population-only", action="store_true",
                   help="generate the population(s) and write meta.json only")
    p.add_argument("--export-sample", metavar="PATH",
                   help="write one sample of the first selected scheme as CSV")

    p = sub.add_parser("dump-replicates", parents=[common, columns, resampling], help="write replicate weights")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="CSV path")

    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """Turn parsed arguments into a RunConfig"""
    schema = ColumnSchema(
        stratum=getattr(args, "stratum_col", "stratum"),
        psu=getattr(args, "psu_col", "psu"),
        weight=getattr(args, "weight_col", "weight"),
        outcome=getattr(args, "outcome_col", "y"),
        covariates=tuple(getattr(args, "covariate_cols", ())),
        unit_id=getattr(args, "unit_id_col", None),
    )
    inputs = tuple(v for v in (getattr(args, name, None) for name in ("input", "input1", "input2")) if v)

    options: Dict[str, Any] = {}
    for name in ("score_col", "dump_replicates", "covariates1", "covariates2", "scenario", "runs",
                 "methods", "clusters", "sizes", "registry", "population_only", "export_sample", "out"):
        value = getattr(args, name, None)
        if value is not None:
            options[name] = value
    if args.subcommand == "simulate":
        # registry defaults apply unless overridden on the command line
        if args.B is not None:
            options["B"] = args.B
        if args.alpha:
            options["alphas"] = args.alpha

    alpha = getattr(args, "alpha", None)
    return RunConfig(
        subcommand=args.subcommand,
        inputs=inputs,
        schema=schema,
        method=getattr(args, "method", "jkn"),
        ci=getattr(args, "ci", Construction.NORMAL.value),
        reference=getattr(args, "reference", Reference.T.value),
        alphas=tuple(alpha) if alpha else DEFAULT_ALPHAS,
        B=args.B if getattr(args, "B", None) is not None else DEFAULT_B,
        seed=getattr(args, "seed", DEFAULT_SEED),
        output=getattr(args, "output", None),
        threads=args.threads,
        options=options,
    )


def _emit(result: Dict[str, Any], config: RunConfig) -> None:
    """Write a single-analysis JSON result with version and config echo"""
    document = {"version": __version__, "seed": config.seed, "config": config.to_dict(), "result": result}
    text = json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n"
    if config.output:
        Path(config.output).write_text(text, encoding="utf-8")
        logger.info("wrote %s", config.output)
    else:
        sys.stdout.write(text)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _load(config: RunConfig, index: int = 0) -> SurveyFrame:
    return load_survey_csv(config.inputs[index], config.schema)


def _covariates(config: RunConfig) -> Optional[Sequence[str]]:
    return list(config.schema.covariates) or None


def _design(frame: SurveyFrame) -> Dict[str, Any]:
    return {"n": frame.n, "H": frame.H, "a": frame.a, "q": frame.q}


def cmd_fit(config: RunConfig) -> int:
    frame = _load(config)
    model = fit_pseudo_likelihood(frame, _covariates(config))
    _emit({"design": _design(frame), "model": model.to_dict()}, config)
    return EXIT_OK


def cmd_auc(config: RunConfig) -> int:
    score_col = config.options.get("score_col")
    if score_col:
        schema = ColumnSchema(config.schema.stratum, config.schema.psu, config.schema.weight,
                              config.schema.outcome, (score_col,), config.schema.unit_id)
        frame = load_survey_csv(config.inputs[0], schema)
        scores = frame.covariates[:, 0]
        result: Dict[str, Any] = {"score_column": score_col}
    else:
        frame = _load(config)
        model = fit_pseudo_likelihood(frame, _covariates(config))
        scores = model.probs
        result = {"model": model.to_dict()}
    result["auc"] = weighted_auc(AucInput(scores, frame.weights, frame.outcomes))
    result["design"] = _design(frame)
    _emit(result, config)
    return EXIT_OK


def _check_interval_flags(config: RunConfig) -> None:
    if config.ci == Construction.PERCENTILE.value and config.method not in BOOTSTRAP_METHODS:
        raise ConfigError(f"--ci percentile needs a bootstrap method (rb, rbn, trb), not {config.method}")


def cmd_ci(config: RunConfig) -> int:
    _check_interval_flags(config)
    frame = _load(config)
    summary = validate_for_replication(frame)
    model = fit_pseudo_likelihood(frame, _covariates(config))
    rng = ResampleRng(config.seed)
    estimate = estimate_auc(frame, model.probs, config.method, config.B, rng, n_jobs=config.threads)
    intervals = [confidence_interval(estimate, alpha, config.ci, config.reference).to_dict()
                 for alpha in config.alphas]

    dump_path = config.options.get("dump_replicates")
    if dump_path:
        # regenerated from the same keyed stream, so identical to the set used above
        dump_replicates(replicate_weights(frame, config.method, config.B, rng, n_jobs=config.threads), frame,
                        dump_path, config.to_dict())

    _emit({"design": {"H": summary.H, "a": summary.a, "n": summary.n},
           "model": model.to_dict(), "estimate": estimate.to_dict(), "intervals": intervals}, config)
    return EXIT_OK


def _tests_by_alpha(result, alphas: Sequence[float]) -> List[Dict[str, Any]]:
    return [{"alpha": alpha, "reject": result.p_value < alpha} for alpha in alphas]


def cmd_compare_indep(config: RunConfig) -> int:
    if len(config.inputs) != 2:
        raise ConfigError("compare-indep needs two input files")
    frames = [_load(config, 0), _load(config, 1)]
    result, est1, est2 = compare_independent_frames(frames[0], frames[1], _covariates(config), config.method,
                                                    config.B, ResampleRng(config.seed),
                                                    alpha=config.alphas[0], n_jobs=config.threads,
                                                    reference=config.reference)
    _emit({"test": result.to_dict(), "decisions": _tests_by_alpha(result, config.alphas),
           "estimates": [est1.to_dict(), est2.to_dict()]}, config)
    return EXIT_OK


def cmd_compare_paired(config: RunConfig) -> int:
    frame = _load(config)
    result, model1, model2 = compare_paired_models(frame, config.options["covariates1"],
                                                   config.options["covariates2"], config.method, config.B,
                                                   ResampleRng(config.seed), alpha=config.alphas[0],
                                                   n_jobs=config.threads, reference=config.reference)
    _emit({"test": result.to_dict(), "decisions": _tests_by_alpha(result, config.alphas),
           "models": [model1.to_dict(), model2.to_dict()]}, config)
    return EXIT_OK


def cmd_dump_replicates(config: RunConfig) -> int:
    frame = _load(config)
    replicates = replicate_weights(frame, config.method, config.B, ResampleRng(config.seed),
                                   n_jobs=config.threads)
    sidecar = dump_replicates(replicates, frame, config.options["out"], config.to_dict())
    _emit({"scheme": replicates.scheme.value, "replicates": replicates.count, "n": replicates.n,
           "path": config.options["out"], "meta": str(sidecar)}, config)
    return EXIT_OK


def cmd_simulate(config: RunConfig) -> int:
    options = config.options
    loader = SurveyDataLoader(registry_path=options.get("registry"))
    spec = load_scenario(options["scenario"], loader)
    clusters = [int(c) for c in options["clusters"]] if options.get("clusters") else None
    spec = spec.select_schemes(clusters, options.get("sizes"))
    out_dir = Path(options["out"])

    populations = generate_populations(spec, config.seed)
    if options.get("export_sample"):
        scheme = spec.schemes[0]
        sample = draw_sample(populations[0], scheme, ResampleRng(run_rng(config.seed, scheme, 0).seed, 0))
        write_survey_csv(sample, options["export_sample"])

    if options.get("population_only"):
        report = MonteCarloReport(spec=spec, R=0, B=config.B, seed=config.seed,
                                  methods=tuple(options.get("methods", METHODS)), alphas=config.alphas,
                                  reference=Reference(config.reference),
                                  populations=population_summary(populations))
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "meta.json", 'w', encoding='utf-8') as f:
            json.dump(report.meta(config.to_dict()), f, indent=2, sort_keys=True)
            f.write("\n")
        _emit({"populations": report.populations, "out": str(out_dir)}, config)
        return EXIT_OK

    tracker = MonteCarloTracker()
    tracker.on_scheme_complete(
        lambda label, done, failed: logger.info("scheme %s: %d runs complete, %d failed", label, done, failed))
    tracker.on_run_failed(lambda failure: logger.warning("%s", failure))

    report = run_scenario(spec, R=options.get("runs"), B=options.get("B"),
                          seed=config.seed, methods=options.get("methods", METHODS), n_jobs=config.threads,
                          alphas=options.get("alphas"), tracker=tracker, populations=populations,
                          reference=config.reference)
    paths = report.write(out_dir, config.to_dict())
    _emit({"runs_completed": len(report.records), "runs_failed": len(report.failures),
           "files": {k: str(v) for k, v in paths.items()}}, config)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "fit": cmd_fit,
    "auc": cmd_auc,
    "ci": cmd_ci,
    "compare-indep": cmd_compare_indep,
    "compare-paired": cmd_compare_paired,
    "simulate": cmd_simulate,
    "dump-replicates": cmd_dump_replicates,
}


def dispatch(config: RunConfig) -> int:
    """
    Run one subcommand

    Returns:
        Process exit status: 0 on success, the error's exit code for named errors,
        2 for unreadable input
    """
    if config.subcommand not in COMMANDS:
        logger.error("unknown subcommand '%s' (have: %s)", config.subcommand, ", ".join(SUBCOMMANDS))
        return EXIT_INPUT
    try:
        return COMMANDS[config.subcommand](config)
    except SurveyAucError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except (FileNotFoundError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_INPUT


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return dispatch(build_config(args))


if __name__ == "__main__":
    sys.exit(main())
