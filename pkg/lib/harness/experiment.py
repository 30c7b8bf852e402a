"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Experiment orchestration: generates contaminated data per run, tunes and     ║
║   fits every method, evaluates it on the test set and writes the results       ║
║   CSV with a JSON summary of per-method means and deviations.                  ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict

import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from lib.data.dataset_io import FLOAT_FORMAT
from lib.data.generators import OutlierSpec, draw_coefficients, make_dataset, make_rng
from lib.database.models import save_results
from lib.exceptions import DroToolkitError
from lib.harness.methods import fit_method, method_spec, tuning_grid
from lib.harness.tuning import cv_tune
from lib.metrics import evaluate_model

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    'run', 'seed', 'fraction', 'method',
    'wmse', 'cvar_wmse', 'ccr', 'logloss', 'cvar_logloss', 'mpd', 'bound',
    'epsilon', 'lambda',
    'n_components', 'error',
]

METRIC_COLUMNS = ['wmse', 'cvar_wmse', 'ccr', 'logloss', 'cvar_logloss', 'mpd', 'bound']


@dataclass
class ExperimentReport:
    results: pd.DataFrame
    summary: Dict[str, Any]
    csv_path: str = None
    summary_path: str = None


@dataclass
class _MethodFit:
    model: Any = None
    value: Any = None
    error: str = ''


def _fold_seed(seed, run):
    return int(make_rng(seed, run, 'folds').integers(0, 2 ** 31 - 1))


def fit_methods(cfg, train, run, solver_cfg):
    """Tune and fit every configured method on one training set"""
    fits = {}
    fit_options = {'r': cfg.r, 'solver_cfg': solver_cfg, 'standardize_scores': cfg.standardize_scores}
    for method in cfg.methods:
        spec = method_spec(method)
        fit = _MethodFit()
        try:
            if spec.tuned == 'n_components' and cfg.n_components is not None:
                fit.value = cfg.n_components
            elif spec.tuned is not None:
                grid = tuning_grid(method, cfg.grid, train.p)
                fit.value = cv_tune(train, method, grid, cfg.folds, _fold_seed(cfg.seed, run), **fit_options)
            fit.model = fit_method(method, train, fit.value, seed=cfg.seed, **fit_options)
        except DroToolkitError as e:
            logger.error(f"Run {run}: fitting {method} failed: {e}")
            fit.error = f"{type(e).__name__}: {e}"
        fits[method] = fit
    return fits


def _result_row(cfg, run, fraction, method, fit, test):
    # seed is the master seed; with run it names every random stream of the row.
    tuned = method_spec(method).tuned
    row = {
        'run': run,
        'seed': cfg.seed,
        'fraction': fraction,
        'method': method,
        **{column: math.nan for column in METRIC_COLUMNS},
        'epsilon': fit.value if tuned == 'epsilon' else math.nan,
        'lambda': fit.value if tuned == 'lambda' else math.nan,
        'n_components': fit.value if tuned == 'n_components' else math.nan,
        'error': fit.error,
    }
    if fit.model is None:
        return row
    try:
        report = evaluate_model(fit.model, test, alpha=cfg.alpha, delta=cfg.delta)
        row.update(report.to_row())
    except DroToolkitError as e:
        logger.error(f"Run {run}: evaluating {method} failed: {e}")
        row['error'] = f"{type(e).__name__}: {e}"
    return row


def run_replication(cfg, run, solver_cfg):
    """
    All rows of one run, ordered by (fraction, method)

    Test-set contamination fits once on clean training data and evaluates
    against one test set per fraction; train and both placements refit per
    fraction.
    """
    true_B = draw_coefficients(cfg.p, cfg.K, cfg.seed, run)
    clean = OutlierSpec()

    def dataset(n, spec, purpose):
        data = make_dataset(cfg.family, cfg.p, cfg.K, n, spec, seed=cfg.seed, run=run,
                            true_B=true_B, purpose=purpose)
        return data.with_intercept() if cfg.intercept else data

    rows = []
    fits = None
    if cfg.placement == 'test':
        fits = fit_methods(cfg, dataset(cfg.n_train, clean, 'train'), run, solver_cfg)

    for index, fraction in enumerate(cfg.outlier_fractions):
        contaminated = OutlierSpec(cfg.outlier_kind, fraction, cfg.outlier_rho)
        if cfg.placement != 'test':
            fits = fit_methods(cfg, dataset(cfg.n_train, contaminated, f'train-{index}'), run, solver_cfg)
        test_spec = clean if cfg.placement == 'train' else contaminated
        test = dataset(cfg.n_test, test_spec, f'test-{index}')
        for method in cfg.methods:
            rows.append(_result_row(cfg, run, fraction, method, fits[method], test))
    logger.info(f"Run {run} finished ({len(rows)} rows)")
    return rows


def summarize_results(results):
    """
    Mean and standard deviation of every metric per (fraction, method)

    Returns:
        list: One entry per group in first-appearance order
    """
    summary = []
    if results.empty:
        return summary
    grouped = results.groupby(['fraction', 'method'], sort=False)
    for (fraction, method), group in grouped:
        entry = {'fraction': float(fraction), 'method': method, 'runs': int(len(group)),
                 'failures': int((group['error'] != '').sum())}
        for column in METRIC_COLUMNS:
            values = group[column].astype(float).dropna()
            entry[column] = {
                'mean': float(values.mean()) if len(values) else None,
                'std': float(values.std()) if len(values) > 1 else None,
            }
        summary.append(entry)
    return summary


def write_results_csv(results, path):
    """Write result rows with a fixed column order; NaN becomes an empty field"""
    results[RESULT_COLUMNS].to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep='', lineterminator='\n')
    return path


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_json_safe(item) for item in value]
    return value


def run_experiment(cfg, output_dir=None, solver_cfg=None, workers=1, database_path=None, show_progress=False):
    """
    Run every replication of an experiment and write its reports

    Args:
        cfg: ExperimentConfig
        output_dir: Folder for <kind>.csv and <kind>_summary.json (no files when None)
        solver_cfg: Base SolverConfig; the experiment's solver overrides apply on top
        workers: Parallel runs (joblib processes)
        database_path: SQLite results ledger to append to, if any
        show_progress: Display a progress bar over runs

    Returns:
        ExperimentReport: Result rows, summary and written paths
    """
    solver_cfg = cfg.solver_config(solver_cfg)
    logger.info(f"Experiment {cfg.kind}: {cfg.n_runs} runs, methods {', '.join(cfg.methods)}")

    runs = tqdm(range(cfg.n_runs), desc=cfg.kind, unit='run', disable=not show_progress)
    if workers > 1:
        per_run = Parallel(n_jobs=workers)(delayed(run_replication)(cfg, run, solver_cfg) for run in runs)
    else:
        per_run = [run_replication(cfg, run, solver_cfg) for run in runs]

    rows = [row for run_rows in per_run for row in run_rows]
    results = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    summary = {'experiment': cfg.to_dict(), 'solver': solver_cfg.settings(), 'summary': summarize_results(results)}
    report = ExperimentReport(results=results, summary=summary)

    failures = int((results['error'] != '').sum()) if not results.empty else 0
    if failures:
        logger.warning(f"{failures} of {len(results)} rows recorded an error")

    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        report.csv_path = write_results_csv(results, os.path.join(output_dir, f"{cfg.kind}.csv"))
        report.summary_path = os.path.join(output_dir, f"{cfg.kind}_summary.json")
        with open(report.summary_path, 'w') as f:
            json.dump(_json_safe(summary), f, indent=2)
        logger.info(f"Wrote {len(results)} rows to {report.csv_path}")

    if database_path:
        save_results(database_path, cfg, results)

    return report
