import json
import os
import sys
import tempfile
import unittest
from pathlib import Path

# Add verifier directory to path so we can import app modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app import create_app
from app.config import TestingConfig
from app.middleware.error_handler import (
    CheckFailure, ConfigParseError, ConfigValidationError, DomainError, EXIT_CHECK_FAILED, EXIT_CONFIG_ERROR,
    EXIT_INTERNAL_ERROR, EXIT_OK
)
from app.models import RunConfig
from app.routes.cli import main, parse_config
from app.services.report_service import render_report
from app.services.run_service import run
from app.utils.cache import clear_cache


class TestParseConfig(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)

    def test_minimal_analyze(self):
        config = parse_config('{"command": "analyze", "example": {"name": "flat-torus", "radii": [1, 1]}}')
        self.assertEqual(config.command, 'analyze')
        self.assertEqual(config.resolution, TestingConfig.DEFAULT_RESOLUTION)
        self.assertEqual(config.engine, 'exact')
        self.assertEqual(config.derivative, 'jet')
        self.assertEqual(config.example.params['n'], 2)

    def test_negative_radius(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            parse_config('{"command": "analyze", "example": {"name": "flat-torus", "radii": [1, -1]}}')
        self.assertEqual(ctx.exception.field, 'example.radii')

    def test_unknown_keys_are_rejected(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            parse_config('{"command": "analyze", "example": {"name": "flat-torus", "radius": [1, 1]}}')
        self.assertIn('"radii"', str(ctx.exception))
        with self.assertRaises(ConfigValidationError) as ctx:
            parse_config('{"command": "lili", "trails": 10}')
        self.assertIn('"trials"', str(ctx.exception))

    def test_malformed_text(self):
        with self.assertRaises(ConfigParseError) as ctx:
            parse_config('{"command": "lili",\n "p": 2,,\n}')
        self.assertEqual(ctx.exception.line, 2)
        self.assertIsNotNone(ctx.exception.column)

    def test_tolerances_only_tighten(self):
        tight = parse_config('{"command": "lili", "tolerances": {"lili_gap": 1e-14}}')
        self.assertEqual(tight.tolerances['lili_gap'], 1e-14)
        loose = parse_config('{"command": "lili", "tolerances": {"codazzi_h": 1e-3}}')
        self.assertEqual(loose.tolerances['codazzi_h'], 1e-3)
        with self.assertRaises(ConfigValidationError) as ctx:
            parse_config('{"command": "lili", "tolerances": {"lili_gap": 1e-6}}')
        self.assertEqual(ctx.exception.field, 'tolerances.lili_gap')
        with self.assertRaises(ConfigValidationError):
            parse_config('{"command": "lili", "tolerances": {"codazzi_h": -1}}')

    def test_command_specific_fields(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            parse_config('{"command": "gap-check"}')
        self.assertEqual(ctx.exception.field, 'example')
        with self.assertRaises(ConfigValidationError):
            parse_config('{"command": "lili", "p": 1}')
        with self.assertRaises(ConfigValidationError):
            parse_config('{"command": "analyze", "example": {"name": "flat-plane", "n": 2}, "resolution": 2}')


class TestRun(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        clear_cache()
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def analyze_torus(self, **overrides):
        text = json.dumps(dict({'command': 'analyze', 'example': {'name': 'flat-torus', 'radii': [1, 1]},
                                'resolution': 16, 'out': str(self.out)}, **overrides))
        return run(self.app, parse_config(text))

    def test_flat_torus_report(self):
        report, status = self.analyze_torus()
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(report.status, 'passed')
        self.assertEqual(report.field.gap.verdict, 'gap-violated')
        self.assertAlmostEqual(report.field.gap.ratio, 3.0, delta=1e-6)
        self.assertAlmostEqual(report.field.stats['B_norm2']['sup'], 0.5, delta=1e-8)
        names = [check.name for check in report.checks]
        self.assertEqual(len(names), len(set(names)))
        self.assertIn('divergence_integral', names)

        saved = json.loads((self.out / 'report.json').read_text())
        self.assertEqual(saved['schema_version'], TestingConfig.REPORT_SCHEMA_VERSION)
        rows = (self.out / 'points.csv').read_text().strip().splitlines()
        self.assertEqual(len(rows), 16 * 16 + 1)
        self.assertTrue(rows[0].startswith('chart,affine_chart,i0,i1,u0,u1,h_norm2'))

    def test_reports_are_deterministic(self):
        first, _ = self.analyze_torus()
        clear_cache()
        second, _ = self.analyze_torus()
        self.assertEqual(render_report(first, include_timings=False), render_report(second, include_timings=False))

    def test_whitney_analysis(self):
        text = json.dumps({'command': 'analyze', 'example': {'name': 'whitney-cn', 'n': 2, 'r': 1.0},
                           'resolution': 24, 'out': str(self.out)})
        report, status = run(self.app, parse_config(text))
        self.assertEqual(report.field.gap.verdict, 'whitney-consistent')
        self.assertLess(report.field.stats['B_norm2']['sup'], 1e-9)
        self.assertIn('b_norm2_whitney', [check.name for check in report.checks])
        split = {check.name: check for check in report.checks}['chart_split_volume']
        self.assertTrue(split.passed)
        self.assertIn('chart_split', report.field.integrals)

    def test_gap_check_is_verdict_only(self):
        text = json.dumps({'command': 'gap-check', 'example': {'name': 'flat-torus', 'radii': [1, 1]},
                           'resolution': 16, 'out': str(self.out)})
        report, status = run(self.app, parse_config(text))
        self.assertEqual(status, EXIT_OK)
        self.assertIsNone(report.field)
        self.assertEqual(report.results['gap']['verdict'], 'gap-violated')

    def test_listed_check_that_cannot_run_fails(self):
        report, status = self.analyze_torus(checks=['b_norm2_whitney', 'norm_identity_residual'])
        self.assertEqual(status, EXIT_CHECK_FAILED)
        self.assertEqual([check.name for check in report.checks], ['b_norm2_whitney', 'norm_identity_residual'])
        self.assertFalse(report.checks[0].passed)
        self.assertTrue(report.checks[1].passed)
        self.assertEqual(report.status, 'failed')
        self.assertEqual(report.error['error'], 'Check Failed')
        self.assertTrue((self.out / 'report.json').exists())

    def test_configuration_error_writes_partial_report(self):
        config = RunConfig('lili', p=2, dim=2, trials=10, out=str(self.out), tolerances={'lili_gap': 1.0})
        report, status = run(self.app, config)
        self.assertEqual(status, EXIT_CONFIG_ERROR)
        saved = json.loads((self.out / 'report.json').read_text())
        self.assertEqual(saved['status'], 'failed')
        self.assertEqual(saved['error']['field'], 'tolerances.lili_gap')

    def test_lili_command(self):
        config = parse_config(json.dumps({'command': 'lili', 'p': 4, 'dim': 5, 'trials': 2000, 'seed': 42,
                                          'out': str(self.out)}))
        report, status = run(self.app, config)
        self.assertEqual(status, EXIT_OK)
        self.assertGreaterEqual(report.results['trials']['min_ratio'], 0.0)


class TestErrorDispatch(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)

    def test_closest_registered_class_wins(self):
        payload, status = self.app.handle_exception(ConfigValidationError('example.n', 'too small'))
        self.assertEqual(status, EXIT_CONFIG_ERROR)
        self.assertEqual(payload['field'], 'example.n')
        self.assertEqual(self.app.handle_exception(CheckFailure('1 check failed'))[1], EXIT_CHECK_FAILED)
        payload, status = self.app.handle_exception(DomainError('outside the box', location=(3,)))
        self.assertEqual(status, EXIT_INTERNAL_ERROR)
        self.assertEqual(payload['error'], 'DomainError')
        self.assertEqual(payload['location'], '(3,)')
        self.assertEqual(self.app.handle_exception(ValueError('boom'))[0]['error'], 'Internal Error')

    def test_unregistered_errors_propagate(self):
        with self.assertRaises(KeyboardInterrupt):
            self.app.handle_exception(KeyboardInterrupt())

    def test_command_table(self):
        self.assertEqual(set(self.app.commands), {'analyze', 'gap-check', 'lili', 'lili-search'})


class TestMain(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_flags(self):
        status = main(['lili', '--p', '2', '--dim', '3', '--trials', '50', '--seed', '1', '--out', self.tmp.name],
                      app=self.app)
        self.assertEqual(status, EXIT_OK)
        saved = json.loads(Path(self.tmp.name, 'report.json').read_text())
        self.assertEqual(saved['config']['trials'], 50)

    def test_config_file_supersedes_flags(self):
        path = Path(self.tmp.name, 'run.json')
        path.write_text(json.dumps({'command': 'lili-search', 'p': 2, 'dim': 2, 'iterations': 40,
                                    'out': self.tmp.name}))
        status = main(['--config', str(path)], app=self.app)
        self.assertEqual(status, EXIT_OK)
        saved = json.loads(Path(self.tmp.name, 'report.json').read_text())
        self.assertEqual(saved['config']['iterations'], 40)

    def test_bad_example_flag(self):
        status = main(['analyze', '--example', 'flat-torus', '--radii', '1,-1', '--out', self.tmp.name], app=self.app)
        self.assertEqual(status, EXIT_CONFIG_ERROR)


if __name__ == '__main__':
    unittest.main()
