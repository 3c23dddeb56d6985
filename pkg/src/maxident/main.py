"""Command-line front-end: simulate, evaluate, recover, diagnose and explore.

Usage: python -m src.maxident.main <command> --config <path> [--out <path>] [--seed <int>] ...

Exit codes: 0 success, 1 config/hypothesis violation, 2 I/O or malformed input,
3 recovery ambiguity, 4 check failure.
"""
import argparse
import logging
import sys
import uuid
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config.settings import settings
from .distributions.univariate import empirical_cdf, resolve_grid
from .exceptions import ConfigurationError, MaxIdentError
from .identification.common import truth_errors
from .identification.diagnostics import ratio_diagnostics
from .identification.kotlarski import recover_kotlarski
from .identification.maxind import recover_maxind
from .identification.quotient import recover_region_quotient
from .identification.solver import recover_positive_general
from .max_independence.generator import validate_generator
from .max_model.joint import JointCdf2D, joint_cdf, joint_cdf_kotlarski, sample_joint, sample_kotlarski
from .models.config import RecoveryMethod, RunConfig
from .models.reports import RecoveryResult
from .models.specs import DependenceMode, DistributionSpec, GeneratorSpec, Regime
from .nonuniqueness.mixed_sign import explore_candidates
from .utils.logger import RunLogger
from .utils.serialization import (
    config_hash,
    dumps,
    load_model,
    load_model_list,
    read_probes_csv,
    read_samples_csv,
    report_envelope,
    write_csv,
    write_json,
    write_samples_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_AMBIGUOUS = 3
EXIT_CHECK_FAILED = 4

DEFAULT_OUTPUTS = {
    "simulate": "samples.csv",
    "cdf": "cdf.csv",
    "recover": "recovery.json",
    "diagnose": "diagnostics.csv",
    "counterexample": "candidates.json",
    "validate-generator": "generator_report.json",
}

CommandResult = Tuple[int, Dict[str, Any]]


def _grid(config: RunConfig, reference: Optional[DistributionSpec] = None) -> np.ndarray:
    """Config grid; quantile spacing refers to fz1 unless another reference is given"""
    return resolve_grid(config.grid, config.system.fz1 if reference is None else reference)


def _seed(args: argparse.Namespace, config: RunConfig) -> int:
    return config.seed if args.seed is None else args.seed


def _envelope(command: str, config: RunConfig, result: Any) -> Dict[str, Any]:
    return report_envelope(command, __version__, config_hash(config), result)


def cmd_simulate(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Draw sample_size pairs (U, V) and write them as a "u,v" CSV"""
    seed = _seed(args, config)
    system = config.system
    if config.recovery.kotlarski_collapse:
        pairs = sample_kotlarski(system.fz1, system.fx, system.fy, config.sample_size, seed)
    else:
        pairs = sample_joint(system, config.coefficients, config.sample_size, seed)
    rows = write_samples_csv(args.out, pairs)
    return EXIT_OK, {
        "n": rows,
        "seed": seed,
        "regime": config.coefficients.regime.value,
        "dependence": system.dependence.mode.value,
        "out": args.out,
        "config_hash": config_hash(config),
        "tool_version": __version__,
    }


def cmd_cdf(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Evaluate G at probe pairs (a probe file, or the grid lattice) and write "t1,t2,g" rows"""
    regime = config.coefficients.regime
    if args.regime is not None and args.regime != regime.value:
        raise ConfigurationError(
            f"requested the {args.regime} joint CDF but the coefficients are in the {regime.value} regime"
        )
    if args.probes:
        probes = read_probes_csv(args.probes)
        t1, t2 = probes[:, 0], probes[:, 1]
    else:
        nodes = _grid(config)
        t1 = np.repeat(nodes, nodes.size)
        t2 = np.tile(nodes, nodes.size)
    system = config.system
    if config.recovery.kotlarski_collapse:
        values = joint_cdf_kotlarski(system.fz1, system.fx, system.fy, t1, t2)
    else:
        values = joint_cdf(system, config.coefficients, t1, t2)
    values = np.atleast_1d(np.asarray(values, dtype=float))
    rows = write_csv(args.out, ["t1", "t2", "g"], zip(map(float, t1), map(float, t2), map(float, values)))
    return EXIT_OK, {"rows": rows, "regime": regime.value, "out": args.out, "config_hash": config_hash(config)}


def _recovery_input(args: argparse.Namespace, config: RunConfig) -> Tuple[JointCdf2D, np.ndarray]:
    system = config.system
    if args.samples:
        pairs = read_samples_csv(args.samples)
        g = JointCdf2D.from_samples(pairs, bandwidth=config.recovery.bandwidth)
        return g, _grid(config, empirical_cdf(pairs.reshape(-1)))
    if config.recovery.kotlarski_collapse:
        return JointCdf2D.from_kotlarski(system.fz1, system.fx, system.fy), _grid(config)
    return JointCdf2D.from_system(system, config.coefficients), _grid(config)


def run_recovery(args: argparse.Namespace, config: RunConfig) -> RecoveryResult:
    """Pick and run the recovery method the config asks for"""
    coeffs = config.coefficients
    if coeffs.regime != Regime.ALL_POSITIVE:
        raise ConfigurationError(
            "mixed-sign coefficients do not identify the components; use the counterexample command"
        )
    method = config.recovery.method
    collapse = config.recovery.kotlarski_collapse
    if method == RecoveryMethod.KOTLARSKI and not collapse:
        raise ConfigurationError("kotlarski recovery needs recovery.kotlarski_collapse")
    if collapse and method not in (RecoveryMethod.AUTO, RecoveryMethod.KOTLARSKI):
        raise ConfigurationError(f"kotlarski_collapse cannot be combined with the {method.value} method")

    g, grid = _recovery_input(args, config)
    floor = config.solver.floor
    if collapse:
        return recover_kotlarski(g, grid, floor)
    if config.system.dependence.mode == DependenceMode.MAX_INDEPENDENT:
        if method == RecoveryMethod.REGION_QUOTIENT:
            raise ConfigurationError("region quotient recovery needs independent components")
        return recover_maxind(g, coeffs, config.system.generator, grid, config.solver)
    if method == RecoveryMethod.REGION_QUOTIENT:
        return recover_region_quotient(g, coeffs, grid, floor)
    return recover_positive_general(g, coeffs, grid, config.solver)


def cmd_recover(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Recover the component CDFs; exit 3 when the multistarts disagree"""
    result = run_recovery(args, config)
    result.truth_errors = truth_errors(result, config.system)
    write_json(args.out, _envelope("recover", config, result))
    code = EXIT_AMBIGUOUS if result.ambiguous else EXIT_OK
    return code, {
        "method": result.method,
        "sup_residual": result.sup_residual,
        "ambiguous": result.ambiguous,
        "notes": result.notes,
        "out": args.out,
    }


def _pairs_path(out: str) -> str:
    path = Path(out)
    return str(path.with_name(f"{path.stem}_pairs{path.suffix or '.csv'}"))


def cmd_diagnose(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Ratio tables of two systems; exit 4 when their joint CDFs differ on the grid"""
    if not args.compare:
        raise ConfigurationError("diagnose needs a second config via --compare")
    other = load_model(args.compare, RunConfig)
    report = ratio_diagnostics(config.system, other.system, config.coefficients, _grid(config), config.solver.floor)
    threshold = config.diagnostics_threshold or settings.diagnostics_threshold

    anti = dict(zip(report.antiperiodic_nodes, report.residual_antiperiodic))
    node_rows = (
        (t, e1, e2, e3, z, anti.get(t))
        for t, e1, e2, e3, z in zip(report.eta1.nodes, report.eta1.values, report.eta2.values,
                                    report.eta3.values, report.zeta.values)
    )
    write_csv(args.out, ["t", "eta1", "eta2", "eta3", "zeta", "antiperiodic_residual"], node_rows)
    pairs_out = _pairs_path(args.out)
    write_csv(pairs_out, ["t1", "t2", "residual"], zip(report.probe_t1, report.probe_t2, report.residual_product))

    equivalent = report.max_residual_product <= threshold
    if not equivalent:
        logger.warning(f"Systems differ: product-identity residual {report.max_residual_product:.3e} "
                       f"at {report.witness_product} exceeds {threshold:.1e}")
    return (EXIT_OK if equivalent else EXIT_CHECK_FAILED), {
        "max_residual": report.max_residual_product,
        "witness": report.witness_product,
        "max_antiperiodic_residual": report.max_residual_antiperiodic,
        "threshold": threshold,
        "skipped": report.skipped_nodes,
        "out": [args.out, pairs_out],
    }


def cmd_counterexample(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Build and test alternative mixed-sign systems for each candidate shock"""
    if config.coefficients.regime != Regime.MIXED_SIGN:
        raise ConfigurationError("counterexample needs mixed-sign coefficients (a > 0, b < 0, c > 0, d < 0)")
    if args.candidates:
        candidates: List[DistributionSpec] = load_model_list(args.candidates, DistributionSpec)
    else:
        candidates = [config.system.fz1]
    report = explore_candidates(config.system, config.coefficients, candidates, _grid(config))
    write_json(args.out, _envelope("counterexample", config, report))
    return EXIT_OK, {
        "summary": report.summary,
        "valid": report.valid_count,
        "equivalent": report.equivalent_count,
        "non_identity_equivalent": report.non_identity_equivalent,
        "out": args.out,
    }


def cmd_validate_generator(args: argparse.Namespace, config: RunConfig) -> CommandResult:
    """Lattice validation of a generator against the config marginals; exit 4 on failure"""
    if args.generator:
        generator = load_model(args.generator, GeneratorSpec)
    elif config.system.generator is not None:
        generator = config.system.generator
    else:
        raise ConfigurationError("validate-generator needs --generator or a max-independent config")
    report = validate_generator(generator, config.system.marginals)
    write_json(args.out, _envelope("validate-generator", config, report))
    return (EXIT_OK if report.passed else EXIT_CHECK_FAILED), {
        "family": report.family,
        "passed": report.passed,
        "failures": report.failures,
        "witness": report.range_witness or report.rectangle_witness,
        "out": args.out,
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "cdf": cmd_cdf,
    "recover": cmd_recover,
    "diagnose": cmd_diagnose,
    "counterexample": cmd_counterexample,
    "validate-generator": cmd_validate_generator,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxident", description="Identifiability toolkit for maxima with common shocks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=COMMANDS[name].__doc__)
        cmd.add_argument("--config", required=True, help="RunConfig JSON document")
        cmd.add_argument("--out", default=None, help=f"Output path (default {DEFAULT_OUTPUTS[name]})")
        cmd.add_argument("--seed", type=int, default=None, help="Override the config seed")
        if name == "cdf":
            cmd.add_argument("--probes", default=None, help='CSV of probe pairs with header "t1,t2"')
            cmd.add_argument("--regime", choices=[r.value for r in Regime], default=None,
                             help="Fail unless the coefficients are in this regime")
        if name == "recover":
            cmd.add_argument("--samples", default=None, help='CSV of (U, V) pairs with header "u,v"')
        if name == "diagnose":
            cmd.add_argument("--compare", default=None, help="RunConfig of the second system")
        if name == "counterexample":
            cmd.add_argument("--candidates", default=None, help="JSON list of candidate shock distributions")
        if name == "validate-generator":
            cmd.add_argument("--generator", default=None, help="GeneratorSpec JSON document")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=settings.log_level, stream=sys.stderr)
    if args.out is None:
        args.out = DEFAULT_OUTPUTS[args.command]
    for name in ("probes", "samples", "compare", "candidates", "generator"):
        if not hasattr(args, name):
            setattr(args, name, None)

    run_id = str(uuid.uuid4())
    run_logger = RunLogger(settings.run_log_db) if settings.run_log_enabled() else None
    arguments = {k: v for k, v in vars(args).items() if v is not None}
    if run_logger:
        run_logger.log_run_start(run_id, args.command, arguments, seed=args.seed)

    try:
        config = load_model(args.config, RunConfig)
        if run_logger:
            run_logger.log_run_config(run_id, config_hash(config), seed=_seed(args, config))
        code, summary = COMMANDS[args.command](args, config)
    except MaxIdentError as e:
        code = e.exit_code
        logger.error(f"{args.command} failed: {e}")
        if run_logger:
            run_logger.log_run_error(run_id, code, str(e))
        return code
    except ValidationError as e:
        logger.error(f"{args.command} failed on an invalid input model: {e}")
        if run_logger:
            run_logger.log_run_error(run_id, 1, str(e))
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed on I/O: {e}")
        if run_logger:
            run_logger.log_run_error(run_id, 2, str(e))
        return 2

    print(dumps(summary, indent=None))
    if run_logger:
        run_logger.log_run_success(run_id, code, summary)
    return code


if __name__ == "__main__":
    sys.exit(main())
