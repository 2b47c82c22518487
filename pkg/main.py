#!/usr/bin/env python3
"""
Main entry point for WMLG Lab.
Command-line interface for weighted mean loss statistics: index values,
time series, asymptotic covariances, variation reports, Monte Carlo
experiments and hypothesis diagnostics.

Exit codes: 0 success, 1 data or computation error (or a failed experiment),
2 usage or configuration error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.asymptotics.covariance import covariance_analytic, covariance_plugin
from src.asymptotics.diagnostics import format_diagnostics, hypothesis_diagnostics
from src.asymptotics.limits import LimitFunctions
from src.asymptotics.models import DistributionModel, GaussianCopula, Uniform
from src.display.progress import ProgressTracker, console_callback
from src.display.tables import format_matrix, format_table
from src.errors import ConfigError, WMLGError
from src.indices.core import index_series
from src.indices.cost import get_cost_function
from src.indices.spec import IndexKind, IndexSpec
from src.indices.weights import WeightScheme
from src.inference.variation import format_variation_table, variation_report
from src.montecarlo.experiments import (
    EXPERIMENTS,
    arbitration_experiment,
    clt_experiment,
    consistency_experiment,
    coverage_experiment,
    default_arbitration_cases,
    plugin_convergence,
    representation_check,
)
from src.montecarlo.process import ProcessModel
from src.panel.dataset import PanelDataset, ThresholdSchedule
from src.panel.loader import ColumnMapping, load_panel
from src.wmlg_io.config import ConfigManager, RunSettings, create_default_config_file
from src.wmlg_io.logger import RunLogger

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Sample sizes and replications for the convergence experiments unless given
CONVERGENCE_N_LIST = [500, 2000, 8000]
CONVERGENCE_REPLICATIONS = 50

logger = logging.getLogger("cli")


def setup_logging(verbose: bool = False, quiet: bool = False, log_file: Optional[Path] = None):
    """Setup logging configuration."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', '-c', type=Path, metavar='FILE',
                        help='Run configuration (.yaml or key=value); flags override it')
    parser.add_argument('--json', action='store_true', help='Emit machine-readable JSON on stdout')
    parser.add_argument('--out', '-o', type=Path, metavar='FILE', help='Write the result to FILE')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--quiet', '-q', action='store_true', help='Warnings and errors only')
    parser.add_argument('--log-file', type=Path, metavar='FILE', help='Also log to FILE')


def _add_index(parser: argparse.ArgumentParser):
    parser.add_argument('--index', choices=[k.value for k in IndexKind], help='Index kind')
    parser.add_argument('--k', type=int, help='Kakwani parameter (k >= 1)')
    parser.add_argument('--alpha-exp', '--alpha', dest='alpha_exp', type=float, help='FGT exponent (>= 0)')
    parser.add_argument('--cost', choices=['identity', 'power', 'piecewise'], help='Cost function d')
    parser.add_argument('--cost-exp', type=float, help='Exponent of the power cost')
    parser.add_argument('--knots', type=Path, metavar='FILE', help='u,d knots file for the piecewise cost')
    parser.add_argument('--mu', help='General index weight coefficients mu1,mu2,mu3,mu4')
    z = parser.add_mutually_exclusive_group()
    z.add_argument('--z', type=float, help='Constant threshold Z')
    z.add_argument('--z-file', type=Path, metavar='FILE', help='time,z threshold schedule')
    parser.add_argument('--times', help='Comma-separated grid times (default: all)')


def _add_data(parser: argparse.ArgumentParser, model: bool = False):
    parser.add_argument('--input', '-i', type=Path, metavar='FILE', help='Long-format panel CSV (id,time,value)')
    if model:
        parser.add_argument('--model', type=Path, metavar='FILE', help='Distribution model (YAML)')


def create_parser() -> argparse.ArgumentParser:
    """Create command-line argument parser."""
    parser = argparse.ArgumentParser(
        description="WMLG Lab - weighted mean loss statistics and their asymptotics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s compute --input panel.csv --index fgt --alpha 1 --z 10
  %(prog)s series --input panel.csv --index kakwani --k 2 --z-file z.csv --json
  %(prog)s cov --input panel.csv --index shorrocks --z 10 --out cov.csv
  %(prog)s cov --model model.yaml --index shorrocks --z 0.5 --method analytic
  %(prog)s variation --input panel.csv --index thon --z 10 --times 1,2 --target -0.5
  %(prog)s simulate --experiment clt --index shorrocks --z 0.5 --seed 7
  %(prog)s check --input panel.csv --z 10
  %(prog)s create-config config/run.yaml
        """
    )
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('compute', help='Index value per requested time')
    _add_common(p), _add_index(p), _add_data(p)

    p = sub.add_parser('series', help='Index time series over the panel grid')
    _add_common(p), _add_index(p), _add_data(p)

    p = sub.add_parser('cov', help='Asymptotic covariance matrix Gamma(t, s)')
    _add_common(p), _add_index(p), _add_data(p, model=True)
    p.add_argument('--method', choices=['plugin', 'analytic'], default=None,
                   help='plugin (from --input) or analytic (from --model)')
    p.add_argument('--workers', type=int, help='Threads for off-diagonal cells')

    p = sub.add_parser('variation', help='Change of the index between two times')
    _add_common(p), _add_index(p), _add_data(p, model=True)
    p.add_argument('--level', type=float, help='Interval level alpha (default 0.05)')
    p.add_argument('--target', type=float, help='Relative-change target for the verdict')
    p.add_argument('--cov-method', choices=['plugin', 'analytic'], default='plugin')

    p = sub.add_parser('simulate', help='Monte Carlo experiment')
    _add_common(p), _add_index(p), _add_data(p, model=True)
    p.add_argument('--experiment', required=True, help=f"One of {', '.join(EXPERIMENTS)}")
    p.add_argument('--seed', type=int, help='Random seed (required here or in the config file)')
    p.add_argument('--n', type=int, help='Sample size per replication')
    p.add_argument('--n-list',
                   help='Comma-separated sample sizes for representation, consistency and plugin_convergence')
    p.add_argument('--replications', '-R', type=int, help='Number of replications')
    p.add_argument('--level', type=float, help='Interval level alpha for coverage')
    p.add_argument('--variance-override', type=float, help='Replace Gamma_5 in the coverage experiment')
    p.add_argument('--workers', type=int, help='Threads for replications')
    p.add_argument('--events', type=Path, metavar='FILE', help='Export the run log events as JSON')

    p = sub.add_parser('check', help='Hypothesis diagnostics on a panel or a model')
    _add_common(p), _add_index(p), _add_data(p, model=True)
    p.add_argument('--r', type=float, default=0.25, help='Hölder exponent r in (0, 1/2)')
    p.add_argument('--max-quotient', type=float, help='Flag any Hölder quotient above this value')

    p = sub.add_parser('create-config', help='Write the default configuration file and exit')
    p.add_argument('path', type=Path)
    p.add_argument('--verbose', '-v', action='store_true')
    p.add_argument('--quiet', '-q', action='store_true')
    p.add_argument('--log-file', type=Path)

    return parser


# Option resolution

def _settings(args) -> RunSettings:
    manager = ConfigManager()
    if getattr(args, 'config', None):
        if not args.config.exists():
            raise ConfigError(f"Config file not found: {args.config}")
        manager.load_config(args.config)
    args._manager = manager
    return manager.settings()


def _option(args, name: str, key: str, default: Any = None) -> Any:
    value = getattr(args, name, None)
    if value is not None:
        return value
    return args._manager.get(key, default)


def _parse_floats(text: Optional[str], what: str) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in str(text).split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"{what}: expected comma-separated numbers, got '{text}'") from e


def build_spec(args) -> IndexSpec:
    """IndexSpec from flags, falling back to the `index` config section."""
    kind = _option(args, 'index', 'index.kind', 'kakwani')
    cost_name = _option(args, 'cost', 'index.cost', 'identity')
    knots = _option(args, 'knots', 'index.knots')
    if knots is not None and not Path(knots).exists():
        raise ConfigError(f"Knots file not found: {knots}")
    cost = get_cost_function(cost_name, _option(args, 'cost_exp', 'index.cost_exp'),
                             Path(knots) if knots else None)
    k = _option(args, 'k', 'index.k', 1)

    try:
        kind = IndexKind(kind)
    except ValueError as e:
        raise ConfigError(f"unknown index kind '{kind}'") from e
    if kind is IndexKind.KAKWANI:
        return IndexSpec.kakwani(int(k), cost)
    if kind is IndexKind.SEN:
        return IndexSpec.sen(cost)
    if kind is IndexKind.SHORROCKS:
        return IndexSpec.shorrocks(cost)
    if kind is IndexKind.THON:
        return IndexSpec.thon(cost)
    if kind is IndexKind.FGT:
        return IndexSpec.fgt(float(_option(args, 'alpha_exp', 'index.alpha', 1.0)))

    mu = tuple(int(v) for v in _parse_floats(_option(args, 'mu', 'index.mu', '0,1,1,1'), 'mu'))
    power = int(k)
    scheme = WeightScheme(f"power({power})", lambda j: np.power(j.astype(float), power), mu)
    limit = LimitFunctions.kakwani(power) if mu == (0, 1, 1, 1) else None
    return IndexSpec.general(scheme, cost, limit)


def build_thresholds(args, times: Sequence[float]) -> ThresholdSchedule:
    z_file = _option(args, 'z_file', 'threshold.file')
    if z_file is not None:
        if not Path(z_file).exists():
            raise ConfigError(f"Threshold file not found: {z_file}")
        return ThresholdSchedule.from_csv(Path(z_file))
    z = _option(args, 'z', 'threshold.z')
    if z is None:
        raise ConfigError("a threshold is required: use --z or --z-file")
    return ThresholdSchedule.constant(float(z), times)


def build_panel(args) -> PanelDataset:
    path = _option(args, 'input', 'panel.input')
    if path is None:
        raise ConfigError("--input is required for this command")
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Input file not found: {path}")
    mapping = ColumnMapping(
        args._manager.get('panel.id_column', 'id'),
        args._manager.get('panel.time_column', 'time'),
        args._manager.get('panel.value_column', 'value'),
    )
    return load_panel(path, mapping)


DEFAULT_MODEL = {
    "times": [1.0, 2.0],
    "marginals": {"law": "uniform", "low": 0.0, "high": 1.0},
    "copula": {"structure": "exchangeable", "rho": 0.6},
}


def build_model(args, required: bool = True) -> Optional[DistributionModel]:
    path = _option(args, 'model', 'model.file')
    if path is None:
        inline = args._manager.get('model')
        if isinstance(inline, dict) and 'times' in inline:
            return DistributionModel.from_dict(inline)
        if required:
            return DistributionModel.from_dict(DEFAULT_MODEL)
        return None
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Model file not found: {path}")
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: model file must be a mapping")
    try:
        return DistributionModel.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"{path}: invalid model: {e}") from e


def _select_times(args, available: Sequence[float]) -> List[float]:
    requested = _parse_floats(_option(args, 'times', 'index.times'), 'times')
    return list(available) if not requested else requested


def _emit(args, payload: Dict[str, Any], text: str):
    """Print text or JSON; --out writes the same content to a file."""
    content = json.dumps(payload, indent=2, default=float) if args.json else text
    print(content)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(content + "\n", encoding="utf-8")
        logger.info(f"💾 Output written to {args.out}")


# Subcommands

def cmd_compute(args) -> int:
    """J_n(t) at every requested time."""
    _settings(args)
    panel = build_panel(args)
    spec = build_spec(args)
    times = _select_times(args, panel.times.tolist())
    thresholds = build_thresholds(args, panel.times.tolist())
    series = index_series(panel, thresholds, spec, times)

    rows = [{"time": t, "z": thresholds.at(t), "J": j} for t, j in series]
    payload = {"command": "compute", "index": spec.label, "n": panel.n, "values": rows}
    text = "\n".join([f"📊 {spec.label} on {panel.source} (n={panel.n})",
                      format_table(["time", "Z", "J_n"], [[f"{r['time']:g}", r["z"], r["J"]] for r in rows])])
    _emit(args, payload, text)
    return EXIT_OK


def cmd_series(args) -> int:
    """Index series over the panel grid, CSV-ready."""
    settings = _settings(args)
    panel = build_panel(args)
    spec = build_spec(args)
    times = _select_times(args, panel.times.tolist())
    thresholds = build_thresholds(args, panel.times.tolist())
    series = index_series(panel, thresholds, spec, times, workers=settings.experiment.workers)

    payload = {"command": "series", "index": spec.label, "n": panel.n,
               "series": [{"time": t, "J": j} for t, j in series]}
    text = "time,J\n" + "\n".join(f"{t:.17g},{j:.17g}" for t, j in series)
    _emit(args, payload, text)
    return EXIT_OK


def cmd_cov(args) -> int:
    """Gamma(t, s) by plug-in (panel) or quadrature (model)."""
    settings = _settings(args)
    spec = build_spec(args)
    method = args.method or ('analytic' if args.model and not args.input else 'plugin')

    if method == 'plugin':
        panel = build_panel(args)
        times = _select_times(args, panel.times.tolist())
        thresholds = build_thresholds(args, panel.times.tolist())
        cov = covariance_plugin(panel, times, thresholds, spec, settings.quadrature.centered_kappa)
    else:
        model = build_model(args)
        times = _select_times(args, model.times)
        thresholds = build_thresholds(args, model.times)
        cov = covariance_analytic(model, times, thresholds, spec, settings.quadrature,
                                  workers=args.workers or settings.experiment.workers)

    if args.out and not args.json and args.out.suffix.lower() == '.csv':
        cov.to_csv(args.out)
        args.out = None
    labels = [f"{t:g}" for t in cov.times]
    text = "\n".join([f"📐 Gamma for {spec.label} ({cov.method})",
                      format_matrix(labels, cov.matrix("gamma"), "Gamma")])
    _emit(args, {"command": "cov", "index": spec.label, **cov.to_dict()}, text)
    return EXIT_OK


def cmd_variation(args) -> int:
    """Variation report between two times, with a verdict when a target is given."""
    settings = _settings(args)
    panel = build_panel(args)
    spec = build_spec(args)
    times = _select_times(args, panel.times.tolist())
    if len(times) != 2:
        raise ConfigError(f"variation needs exactly two times (--times t,s), got {times}")
    thresholds = build_thresholds(args, panel.times.tolist())
    level = _option(args, 'level', 'variation.level', settings.variation.level)
    # Only an explicit target (flag or config file) asks for a verdict
    target = _option(args, 'target', 'variation.target')
    model = build_model(args, required=False) if args.cov_method == 'analytic' else None

    report = variation_report(panel, thresholds, spec, times[0], times[1], alpha=float(level),
                              cov_method=args.cov_method,
                              target=None if target is None else float(target), model=model,
                              settings=settings.quadrature)
    _emit(args, {"command": "variation", **report.report_dict()}, format_variation_table([report]))
    return EXIT_OK


def _run_experiment(args, experiment: str, seed: int, settings: RunSettings, run_logger: RunLogger,
                    progress: Optional[ProgressTracker]):
    exp = settings.experiment
    if experiment == 'arbitration':
        k = int(_option(args, 'k', 'index.k', 2))
        return arbitration_experiment(default_arbitration_cases(seed), exp.sample_size, exp.replications,
                                      max(k, 1), exp, settings.quadrature, run_logger, progress)

    model = build_model(args)
    spec = build_spec(args)
    thresholds = build_thresholds(args, model.times)
    process = ProcessModel(model, seed, args.model.stem if args.model else "default")
    times = _select_times(args, model.times)
    if experiment == 'clt':
        return clt_experiment(process, exp.sample_size, exp.replications, thresholds, spec, times[0],
                              exp, settings.quadrature, run_logger, progress)
    if experiment == 'representation':
        n_list = [int(v) for v in (_parse_floats(args.n_list, 'n-list') or [250, 1000, 4000])]
        return representation_check(process, n_list, exp.replications, thresholds, spec, times[0],
                                    exp, settings.quadrature, run_logger, progress)
    if experiment == 'consistency':
        n_list = [int(v) for v in (_parse_floats(args.n_list, 'n-list') or CONVERGENCE_N_LIST)]
        return consistency_experiment(process, n_list, args.replications or CONVERGENCE_REPLICATIONS, thresholds,
                                      spec, times[0], exp, settings.quadrature, run_logger, progress)
    if len(times) < 2:
        raise ConfigError(f"{experiment} needs two times (--times t,s)")
    if experiment == 'plugin_convergence':
        n_list = [int(v) for v in (_parse_floats(args.n_list, 'n-list') or CONVERGENCE_N_LIST)]
        return plugin_convergence(process, n_list, args.replications or CONVERGENCE_REPLICATIONS, thresholds,
                                  spec, times[0], times[1], exp, settings.quadrature, run_logger, progress)
    level = float(_option(args, 'level', 'variation.level', settings.variation.level))
    return coverage_experiment(process, exp.sample_size, exp.replications, thresholds, spec,
                               times[0], times[1], level, args.variance_override,
                               exp, settings.quadrature, run_logger, progress)


def cmd_simulate(args) -> int:
    """Run one experiment; exit 1 when its pass criterion fails."""
    settings = _settings(args)
    experiment = args.experiment
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}', choose from {', '.join(EXPERIMENTS)}")
    seed = _option(args, 'seed', 'experiment.seed')
    if seed is None:
        raise ConfigError("simulate needs an explicit --seed (or experiment.seed in the config)")

    exp = settings.experiment
    if args.n:
        exp.sample_size = args.n
    if args.replications:
        exp.replications = args.replications
    if args.workers:
        exp.workers = args.workers

    run_logger = RunLogger(experiment)
    progress = None
    if not args.quiet and not args.json:
        progress = ProgressTracker()
        progress.add_callback(console_callback(sys.stderr))

    try:
        result = _run_experiment(args, experiment, int(seed), settings, run_logger, progress)
    except WMLGError as e:
        run_logger.log_error(type(e).__name__, str(e), {"experiment": experiment, "seed": seed})
        raise
    finally:
        if args.events:
            run_logger.export_events_json(args.events, provenance={"config_hash": settings.config_hash()})

    result.provenance["config_hash"] = settings.config_hash()
    payload = {"command": "simulate", **result.to_dict()}
    payload.pop("statistics", None)
    status = "✅ PASSED" if result.passed else "❌ FAILED"
    text = "\n".join([f"🎲 Experiment {result.experiment}: {status}",
                      json.dumps(result.summary, indent=2, default=float)])
    _emit(args, payload, text)
    return EXIT_OK if result.passed else EXIT_FAILURE


def cmd_check(args) -> int:
    """Hypothesis diagnostics; never fails on violations."""
    settings = _settings(args)
    if args.input or args._manager.get('panel.input'):
        source = build_panel(args)
        grid = source.times.tolist()
        spec = None
    else:
        source = build_model(args)
        grid = list(source.times)
        spec = build_spec(args)
    if not 0 < args.r < 0.5:
        raise ConfigError(f"--r must lie in (0, 1/2), got {args.r}")
    times = _select_times(args, grid)
    thresholds = build_thresholds(args, grid)
    report = hypothesis_diagnostics(source, times, thresholds, r=args.r, spec=spec,
                                    settings=settings.quadrature, quotient_ceiling=args.max_quotient)
    _emit(args, {"command": "check", **report.to_dict()}, format_diagnostics(report))
    return EXIT_OK


COMMANDS = {
    'compute': cmd_compute,
    'series': cmd_series,
    'cov': cmd_cov,
    'variation': cmd_variation,
    'simulate': cmd_simulate,
    'check': cmd_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    setup_logging(args.verbose, args.quiet, args.log_file)

    if args.command == 'create-config':
        print(f"📝 Creating default configuration: {args.path}")
        if create_default_config_file(args.path):
            print("✅ Configuration file created successfully!")
            return EXIT_OK
        print("❌ Failed to create configuration file")
        return EXIT_FAILURE

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except WMLGError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
