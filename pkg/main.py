#!/usr/bin/env python3
"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Main script that serves as the entry point for the toolkit. It parses the    ║
║   command line, loads the configuration and dispatches to the gen, fit, eval,  ║
║   tune, experiment, mpd and export commands.                                   ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import os
import sys
import json
import argparse
import logging

# Set up logging
import colorlog


def setup_logger(verbose=False, debug=False):
    """Set up colorized logging"""
    handler = colorlog.StreamHandler()
    handler.setFormatter(colorlog.ColoredFormatter(
        '%(log_color)s%(levelname)s:%(message)s',
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
    ))

    root_logger = logging.getLogger()

    # Default level is WARNING; --verbose gives INFO and --debug gives DEBUG
    if debug:
        root_logger.setLevel(logging.DEBUG)
    else:
        root_logger.setLevel(logging.INFO if verbose else logging.WARNING)
    root_logger.handlers = []  # Remove any existing handlers
    root_logger.addHandler(handler)

    # Silence specific loggers
    logging.getLogger('joblib').setLevel(logging.WARNING)

    return root_logger

# Logger will be initialized in main() with verbose flag
logger = logging.getLogger(__name__)

# Import from lib
from lib.config.config_manager import ConfigManager
from lib.config.experiment_config import DEFAULT_GRID, load_experiment_config
from lib.data.dataset_io import read_dataset_csv, write_dataset_csv
from lib.data.generators import OutlierSpec, make_dataset
from lib.exceptions import ConfigError, DroToolkitError
from lib.harness.experiment import run_experiment
from lib.harness.methods import METHODS, fit_method, method_spec, tuning_grid
from lib.harness.tuning import cv_tune
from lib.losses import RESIDUAL_LOSSES
from lib.metrics import evaluate_model, mpd
from lib.models.fitted import load_model, save_model
from lib.utils import export_results_to_excel


def add_common_arguments(parser):
    """Options accepted by every subcommand"""
    parser.add_argument(
        '--seed',
        type=int,
        help='Random seed (default: DRO_SEED or 0)'
    )

    parser.add_argument(
        '--config', '-c',
        type=str,
        help='Path to configuration file (default: dro.ini)'
    )

    parser.add_argument(
        '--verbose', '-v',
        action='store_true',
        help='Enable verbose output (INFO-level logging)'
    )

    parser.add_argument(
        '--debug',
        action='store_true',
        help='Enable DEBUG-level logging'
    )


def parse_hyperparameter(args):
    """The one hyperparameter value given on the command line, if any"""
    given = [v for v in (args.epsilon, args.lam, args.n_components) if v is not None]
    if len(given) > 1:
        raise ConfigError("Give at most one of --epsilon, --lambda, --n-components")
    return given[0] if given else None


def parse_grid(text):
    try:
        grid = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid '{text}', expected comma-separated numbers")
    if not grid:
        raise argparse.ArgumentTypeError("grid is empty")
    return grid


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        description='Wasserstein distributionally robust multivariate and multiclass regression'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    gen = subparsers.add_parser('gen', help='Generate a synthetic dataset CSV')
    gen.add_argument('--family', choices=['MLR', 'MLG'], default='MLR', help='Regression or classification data')
    gen.add_argument('--p', type=int, default=5, help='Number of predictors')
    gen.add_argument('--K', type=int, default=3, help='Number of responses or classes')
    gen.add_argument('--n', type=int, default=100, help='Number of samples')
    gen.add_argument('--outlier-kind', choices=['none', 'response', 'covariate'], default='none')
    gen.add_argument('--fraction', type=float, default=0.0, help='Share of outlier rows')
    gen.add_argument('--rho', type=float, help='AR(1) parameter of the outlier noise')
    gen.add_argument('--run', type=int, default=0, help='Replication index of the random stream')
    gen.add_argument('--purpose', default='data', help="Stream tag, e.g. 'train' or 'test'")
    gen.add_argument('--output', '-o', required=True, help='Dataset CSV to write')

    fit = subparsers.add_parser('fit', help='Fit a model to a dataset CSV')
    fit.add_argument('--data', required=True, help='Training dataset CSV')
    fit.add_argument('--method', required=True, choices=sorted(METHODS), help='Method key')
    fit.add_argument('--epsilon', type=float, help='Wasserstein radius (robust methods)')
    fit.add_argument('--lambda', dest='lam', type=float, help='Penalty weight (ridge and LASSO)')
    fit.add_argument('--n-components', type=int, help='Principal components (pcr, mlg_pcc)')
    fit.add_argument('--r', default='2', help='Transport norm order (1, 2, ..., inf)')
    fit.add_argument('--standardize-scores', action='store_true', help='Standardize PCC scores')
    fit.add_argument('--loss', choices=sorted(RESIDUAL_LOSSES), default='l2', help='Residual loss of mlr_sr and mlr_1s')
    fit.add_argument('--restarts', type=int, default=0, help='Extra random starting points of robust fits')
    fit.add_argument('--folds', type=int, help='Folds when the hyperparameter is tuned')
    fit.add_argument('--output', '-o', required=True, help='Model JSON to write')

    evaluate = subparsers.add_parser('eval', help='Evaluate a model on a dataset CSV')
    evaluate.add_argument('--model', required=True, help='Model JSON')
    evaluate.add_argument('--data', required=True, help='Test dataset CSV')
    evaluate.add_argument('--alpha', type=float, help='CVaR level (default from config)')
    evaluate.add_argument('--delta', type=float, help='Bound failure probability (default from config)')
    evaluate.add_argument('--per-sample', action='store_true', help='Include per-sample losses')

    tune = subparsers.add_parser('tune', help='Cross-validate a hyperparameter')
    tune.add_argument('--data', required=True, help='Training dataset CSV')
    tune.add_argument('--method', required=True, choices=sorted(METHODS), help='Method key')
    tune.add_argument('--grid', type=parse_grid, help='Comma-separated candidate values')
    tune.add_argument('--folds', type=int, help='Number of folds (default from config)')
    tune.add_argument('--r', default='2', help='Transport norm order')

    experiment = subparsers.add_parser('experiment', help='Run a replication experiment')
    experiment.add_argument('experiment_config', help='Experiment JSON file')
    experiment.add_argument('--output', '-o', help='Report folder (default from config)')
    experiment.add_argument('--workers', '-w', type=int, help='Parallel runs (default from config)')
    experiment.add_argument('--database', help='Also append the rows to this SQLite ledger')

    perturbation = subparsers.add_parser('mpd', help='Minimal perturbation distance of a classifier')
    perturbation.add_argument('--model', required=True, help='Classification model JSON')
    perturbation.add_argument('--data', required=True, help='Dataset CSV')

    export = subparsers.add_parser('export', help='Export the results ledger to Excel')
    export.add_argument('--database', help='SQLite ledger (default from config)')
    export.add_argument('--output', '-o', help='Folder for the workbook')

    for subparser in subparsers.choices.values():
        add_common_arguments(subparser)

    return parser.parse_args(argv)


def command_gen(args, config_manager, seed):
    spec = OutlierSpec(args.outlier_kind, args.fraction, args.rho)
    dataset = make_dataset(args.family, args.p, args.K, args.n, spec, seed=seed, run=args.run, purpose=args.purpose)
    write_dataset_csv(dataset, args.output)
    print(f"Dataset: {args.output} ({dataset.N} samples, {dataset.n_outliers} outliers)")
    return 0


def command_fit(args, config_manager, seed):
    data = read_dataset_csv(args.data, method_spec(args.method).family)
    solver_cfg = config_manager.get_solver_config()
    value = parse_hyperparameter(args)
    tuned = method_spec(args.method).tuned
    if tuned is not None and value is None:
        folds = args.folds or config_manager.get_experiment_defaults()['folds']
        grid = tuning_grid(args.method, DEFAULT_GRID, data.p)
        value = cv_tune(data, args.method, grid, folds, seed, r=args.r, solver_cfg=solver_cfg,
                        standardize_scores=args.standardize_scores, loss=args.loss)
        logger.info(f"Selected {tuned}={value} by {folds}-fold cross-validation")

    model = fit_method(args.method, data, value, r=args.r, solver_cfg=solver_cfg,
                       standardize_scores=args.standardize_scores, seed=seed, loss=args.loss,
                       restarts=args.restarts)
    save_model(model, args.output)
    status = 'converged' if model.converged else 'iteration cap'
    print(f"Model: {args.output} ({args.method}, objective {model.objective:.6g}, {model.iterations} iterations, {status})")
    return 0


def command_eval(args, config_manager, seed):
    defaults = config_manager.get_experiment_defaults()
    model = load_model(args.model)
    data = read_dataset_csv(args.data, model.family)
    report = evaluate_model(
        model, data,
        alpha=args.alpha if args.alpha is not None else defaults['alpha'],
        delta=args.delta if args.delta is not None else defaults['delta'],
    )
    payload = report.to_dict()
    if not args.per_sample:
        payload.pop('per_sample_losses')
    print(json.dumps(payload, indent=2))
    return 0


def command_tune(args, config_manager, seed):
    data = read_dataset_csv(args.data, method_spec(args.method).family)
    folds = args.folds or config_manager.get_experiment_defaults()['folds']
    grid = args.grid or DEFAULT_GRID
    if method_spec(args.method).tuned == 'n_components' and args.grid is None:
        grid = tuning_grid(args.method, grid, data.p)
    best = cv_tune(data, args.method, grid, folds, seed, r=args.r,
                   solver_cfg=config_manager.get_solver_config())
    print(best)
    return 0


def command_experiment(args, config_manager, seed):
    cfg = load_experiment_config(args.experiment_config)
    if args.seed is not None:
        cfg.seed = seed
    defaults = config_manager.get_experiment_defaults()
    output_dir = args.output or config_manager.get_output_folder()
    report = run_experiment(
        cfg,
        output_dir=output_dir,
        solver_cfg=config_manager.get_solver_config(),
        workers=args.workers or defaults['workers'],
        database_path=args.database or config_manager.get_database_path(),
        show_progress=args.verbose or args.debug,
    )
    print(f"Results: {report.csv_path}")
    print(f"Summary: {report.summary_path}")
    return 0


def command_mpd(args, config_manager, seed):
    model = load_model(args.model)
    data = read_dataset_csv(args.data, model.family)
    print(repr(mpd(model, data.X)))
    return 0


def command_export(args, config_manager, seed):
    db_path = args.database or config_manager.get_database_path()
    if not db_path:
        raise ConfigError("No results database given (--database or [output] database)")
    if not os.path.exists(db_path):
        raise ConfigError(f"Results database not found: {db_path}")
    excel_path = export_results_to_excel(db_path, args.output)
    if not excel_path:
        return 1
    print(f"Excel export: {excel_path}")
    return 0


COMMANDS = {
    'gen': command_gen,
    'fit': command_fit,
    'eval': command_eval,
    'tune': command_tune,
    'experiment': command_experiment,
    'mpd': command_mpd,
    'export': command_export,
}


def main(argv=None):
    """Main entry point"""
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        return e.code

    # Initialize logger with verbose flag
    setup_logger(args.verbose, args.debug)

    try:
        config_manager = ConfigManager(args.config)
        logger.info("Configuration loaded successfully")
        seed = args.seed if args.seed is not None else (config_manager.get_seed() or 0)
        return COMMANDS[args.command](args, config_manager, seed)
    except DroToolkitError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
