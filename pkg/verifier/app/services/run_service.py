"""
Run orchestration: executes one configured command and produces its report
"""
import logging
import time
from contextlib import contextmanager

import numpy as np

from app.config import current_config
from app.middleware.error_handler import CheckFailure, ConfigValidationError, EXIT_OK
from app.models import CheckResult, RunConfig, RunReport
from app.services.field_service import build_grid, field_report, gap_verdict
from app.services.gallery_service import expected_invariants, make_immersion
from app.services.matrixineq_service import minimize_gap, run_trials
from app.services.report_service import write_point_table, write_report
from app.utils.validators import suggest_key, validate_positive

logger = logging.getLogger(__name__)

WHITNEY_VARIANTS = ('whitney-cn', 'whitney-cpn')

# Checks holding on every Lagrangian immersion, sup <= tolerance
LAGRANGIAN_CHECKS = {
    'lagrangian_defect': 'lagrangian_defect',
    'norm_identity_residual': 'norm_identity_residual',
    'h_symmetry': 'h_symmetry_defect',
    'b_trace': 'b_trace_defect',
    'b_symmetry': 'b_symmetry_defect',
    'gauss_residual': 'gauss_residual',
}


def resolve_tolerances(overrides):
    """Default tolerances updated by overrides; identities of the theory may only be tightened"""
    cfg = current_config()
    tolerances = dict(cfg.TOLERANCES)
    for name, value in (overrides or {}).items():
        if name not in tolerances:
            raise ConfigValidationError(f'tolerances.{name}', f"unknown check{suggest_key(name, tolerances)}")
        ok, message = validate_positive(value)
        if not ok:
            raise ConfigValidationError(f'tolerances.{name}', message)
        if name in cfg.IDENTITY_TOLERANCES and value > tolerances[name]:
            raise ConfigValidationError(
                f'tolerances.{name}', f"may only be tightened below the default {tolerances[name]:g}, got {value:g}")
        tolerances[name] = float(value)
    return tolerances


def _finite_sup(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    return float(finite.max()) if finite.size else float('nan')


def _upper(name, value, tolerance, detail=None):
    return CheckResult(name, value, tolerance, bool(np.isfinite(value) and value <= tolerance), '<=', detail)


def _lower(name, value, tolerance, detail=None):
    """value >= -tolerance"""
    return CheckResult(name, value, tolerance, bool(np.isfinite(value) and value >= -tolerance), '>=-', detail)


@contextmanager
def _timed(report, phase):
    start = time.perf_counter()
    try:
        yield
    finally:
        report.timings[phase] = time.perf_counter() - start


def _expected_error(spec, inv):
    """Largest relative deviation from the closed-form targets, or None"""
    expected = expected_invariants(spec)
    if expected is None:
        return None
    errors = []
    for key, target in expected.items():
        if key == 'h_norm2_to_H_norm2':
            scale = max(1.0, _finite_sup(inv.h_norm2))
            errors.append(_finite_sup(np.abs(inv.h_norm2 - target * inv.H_norm2)) / scale)
        else:
            errors.append(_finite_sup(np.abs(getattr(inv, key) - target)) / max(1.0, abs(target)))
    return max(errors)


def _geometric_checks(config, imap, grid, fr, tolerances):
    """Every applicable check of an analyze run, keyed by name"""
    inv = grid.pointwise.invariants
    checks = {}
    if not imap.lagrangian:
        defect = _finite_sup(inv.lagrangian_defect)
        checks['lagrangian_defect'] = CheckResult(
            'lagrangian_defect', defect, tolerances['lagrangian_defect'], defect > tolerances['lagrangian_defect'],
            '>', 'non-Lagrangian control: the defect must be detected')
        return checks

    for name, field in LAGRANGIAN_CHECKS.items():
        checks[name] = _upper(name, _finite_sup(getattr(inv, field)), tolerances[name])
    checks['codazzi_h'] = _upper('codazzi_h', fr.codazzi['h'], tolerances['codazzi_h'])
    if config.example.variant in WHITNEY_VARIANTS:
        checks['b_norm2_whitney'] = _upper('b_norm2_whitney', _finite_sup(inv.B_norm2),
                                           tolerances['b_norm2_whitney'])
    if imap.conformal_maslov:
        checks['maslov_defect'] = _upper('maslov_defect', fr.maslov['sup_defect'], tolerances['maslov_defect'])
        checks['maslov_equivalence'] = _upper('maslov_equivalence', fr.maslov['equivalence_residual'],
                                              tolerances['maslov_equivalence'])
        checks['codazzi_b'] = _upper('codazzi_b', fr.codazzi['b'], tolerances['codazzi_b'])
        checks['simons_margin'] = _lower('simons_margin', fr.simons['margin'], tolerances['simons_margin'])
    if all(grid.periodic):
        volume = fr.integrals['volume']
        checks['divergence_integral'] = _upper(
            'divergence_integral', abs(fr.integrals['laplacian_B_norm2']) / volume, tolerances['divergence_integral'],
            'relative to the volume')
    if grid.atlas_volumes is not None:
        checks['chart_split_volume'] = _upper('chart_split_volume', grid.atlas_volumes['relative_difference'],
                                              tolerances['chart_split_volume'], 'north + south against polar volume')
    if fr.gap is not None:
        checks['threshold_equivalence'] = _upper('threshold_equivalence', fr.gap.threshold_equivalence,
                                                 tolerances['threshold_equivalence'])
    error = _expected_error(config.example, inv)
    if error is not None:
        checks['expected_invariants'] = _upper('expected_invariants', error, tolerances['expected_invariants'])
    return checks


def _select(report, config, checks):
    """Record the configured checks in order; a listed check with no measurement fails"""
    names = config.checks if config.checks is not None else list(checks)
    for name in names:
        if name in checks:
            report.add_check(checks[name])
        else:
            report.add_check(CheckResult(name, None, None, False, detail='not applicable to this run'))


def analyze(config, report, tolerances):
    with _timed(report, 'build'):
        imap = make_immersion(config.example)
    with _timed(report, 'pointwise'):
        grid = build_grid(imap, config.resolution, config.engine)
    with _timed(report, 'field'):
        fr = field_report(imap, grid, config.derivative, tolerances['gap_verdict'])
    report.field = fr
    report.results['example'] = imap.describe()
    report.results['grid'] = {'chart': grid.chart, 'shape': list(grid.shape), 'points': grid.size}
    _select(report, config, _geometric_checks(config, imap, grid, fr, tolerances))
    return grid


def gap_check(config, report, tolerances):
    with _timed(report, 'build'):
        imap = make_immersion(config.example)
    with _timed(report, 'pointwise'):
        grid = build_grid(imap, config.resolution, config.engine)
    with _timed(report, 'verdict'):
        verdict = gap_verdict(grid.pointwise.invariants, imap.n, imap.target.c, tolerances['gap_verdict'])
    report.results['example'] = imap.describe()
    report.results['gap'] = verdict.to_dict()
    checks = {'threshold_equivalence': _upper('threshold_equivalence', verdict.threshold_equivalence,
                                              tolerances['threshold_equivalence'])}
    _select(report, config, checks)
    return grid


def lili(config, report, tolerances):
    with _timed(report, 'trials'):
        summary = run_trials(config.p, config.dim, config.trials, config.seed, tolerances['lili_gap'])
    report.results['trials'] = summary.to_dict()
    checks = {'lili_gap': _lower('lili_gap', summary.min_ratio, tolerances['lili_gap'],
                                 f"worst trial {summary.worst_trial}")}
    _select(report, config, checks)


def lili_search(config, report, tolerances):
    with _timed(report, 'search'):
        result = minimize_gap(config.p, config.dim, config.seed, config.iterations, config.restarts)
    report.results['search'] = result.to_dict()
    checks = {'lili_gap': _lower('lili_gap', result.ratio, tolerances['lili_gap'])}
    _select(report, config, checks)


def register_commands(app):
    """Install the command table on the app"""
    app.command('analyze')(analyze)
    app.command('gap-check')(gap_check)
    app.command('lili')(lili)
    app.command('lili-search')(lili_search)


def run(app, config: RunConfig, write=True):
    """Execute config.command; returns (report, exit_status). Partial reports are written on failure."""
    report = RunReport(config, app.version, app.config['REPORT_SCHEMA_VERSION'])
    out_dir = config.out or app.config['OUTPUT_DIR']
    grid = None
    status = EXIT_OK
    start = time.perf_counter()
    try:
        tolerances = resolve_tolerances(config.tolerances)
        logger.info(f"Running {config.command}")
        grid = app.commands[config.command](config, report, tolerances)
        if not report.passed:
            failed = ', '.join(check.name for check in report.checks if not check.passed)
            raise CheckFailure(f"Checks failed: {failed}")
        report.status = 'passed'
    except Exception as error:
        payload, status = app.handle_exception(error)
        report.status = 'failed'
        report.error = payload
    report.timings['total'] = time.perf_counter() - start

    if write:
        try:
            if grid is not None:
                write_point_table(grid, out_dir)
            write_report(report, out_dir)
        except OSError as error:
            payload, status = app.handle_exception(error)
            report.status = 'failed'
            report.error = payload
    return report, status
