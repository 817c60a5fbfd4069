"""
Command-line routes: argument parsing, config files and dispatch
"""
import argparse
import json
import logging
import sys

from app.config import current_config
from app.middleware.error_handler import ConfigParseError, ConfigValidationError
from app.models import ExampleSpec, RunConfig
from app.services.field_service import DERIVATIVES
from app.services.jet_service import ENGINES
from app.services.run_service import resolve_tolerances, run
from app.utils.validators import suggest_key, validate_choice, validate_int

logger = logging.getLogger(__name__)

CONFIG_KEYS = ('command', 'example', 'resolution', 'engine', 'derivative', 'tolerances', 'out', 'seed',
               'p', 'dim', 'trials', 'iterations', 'restarts', 'checks')

# (key, minimum) for integer fields
INTEGER_FIELDS = (('seed', 0), ('p', 2), ('dim', 1), ('trials', 1), ('iterations', 1), ('restarts', 1))


def _check(result, field):
    ok, message = result
    if not ok:
        raise ConfigValidationError(field, message)


def config_from_dict(data) -> RunConfig:
    """Validate a configuration mapping into a RunConfig (strict about keys)"""
    if not isinstance(data, dict):
        raise ConfigValidationError('config', 'top level must be an object')
    for key in data:
        if key not in CONFIG_KEYS:
            raise ConfigValidationError(key, f"unknown key{suggest_key(key, CONFIG_KEYS)}")
    data = {key: value for key, value in data.items() if value is not None}
    cfg = current_config()

    command = data.get('command')
    if command is None:
        raise ConfigValidationError('command', 'a command is required')
    _check(validate_choice(command, RunConfig.COMMANDS), 'command')

    kwargs = {'command': command}
    for key, minimum in INTEGER_FIELDS:
        if key in data:
            _check(validate_int(data[key], minimum), key)
            kwargs[key] = int(data[key])

    if command in ('analyze', 'gap-check'):
        if 'example' not in data:
            raise ConfigValidationError('example', f"'{command}' needs an example")
        example = data['example']
        if not isinstance(example, dict):
            raise ConfigValidationError('example', 'expected an object with a "name" key')
        kwargs['example'] = ExampleSpec.from_dict(example).validate()
        resolution = data.get('resolution', cfg.DEFAULT_RESOLUTION)
        _check(validate_int(resolution, cfg.MIN_RESOLUTION), 'resolution')
        kwargs['resolution'] = int(resolution)
        kwargs['engine'] = data.get('engine', cfg.DEFAULT_ENGINE)
        _check(validate_choice(kwargs['engine'], ENGINES), 'engine')
        kwargs['derivative'] = data.get('derivative', 'jet')
        _check(validate_choice(kwargs['derivative'], DERIVATIVES), 'derivative')

    tolerances = data.get('tolerances', {})
    if not isinstance(tolerances, dict):
        raise ConfigValidationError('tolerances', 'expected an object of check name to tolerance')
    resolve_tolerances(tolerances)
    kwargs['tolerances'] = {name: float(value) for name, value in tolerances.items()}

    if 'checks' in data:
        checks = data['checks']
        if not isinstance(checks, list) or len(set(checks)) != len(checks):
            raise ConfigValidationError('checks', 'expected a list of distinct check names')
        for name in checks:
            if name not in cfg.TOLERANCES:
                raise ConfigValidationError('checks', f"unknown check '{name}'{suggest_key(name, cfg.TOLERANCES)}")
        kwargs['checks'] = list(checks)
    if 'out' in data:
        kwargs['out'] = str(data['out'])
    return RunConfig(**kwargs)


def parse_config(text) -> RunConfig:
    """Parse JSON configuration text into a validated RunConfig"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Malformed configuration: {e.msg}", e.lineno, e.colno)
    return config_from_dict(data)


def _csv_floats(text, field):
    try:
        return [float(part) for part in text.split(',')]
    except ValueError:
        raise ConfigValidationError(field, f"expected comma-separated numbers, got '{text}'")


def _example_from_args(args):
    if args.example is None:
        return None
    params = {'name': args.example}
    for key in ('n', 'r', 'theta', 'c'):
        value = getattr(args, key)
        if value is not None:
            params[key] = value
    if args.radii is not None:
        params['radii'] = _csv_floats(args.radii, 'example.radii')
    if args.center is not None:
        params['A'] = _csv_floats(args.center, 'example.A')
    return params


def config_from_args(args) -> RunConfig:
    """RunConfig from parsed arguments; a --config file supersedes the flags"""
    if args.config:
        try:
            with open(args.config, encoding='utf-8') as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigValidationError('config', f"cannot read {args.config}: {e.strerror}")
        config = parse_config(text)
        if args.command and config.command != args.command:
            raise ConfigValidationError('command', f"file selects '{config.command}' but '{args.command}' was given")
        return config

    data = {'command': args.command, 'out': getattr(args, 'out', None), 'seed': getattr(args, 'seed', None)}
    if args.command in ('analyze', 'gap-check'):
        data.update({'example': _example_from_args(args), 'resolution': args.resolution,
                     'engine': args.engine, 'derivative': args.derivative})
    elif args.command in ('lili', 'lili-search'):
        data.update({'p': args.p, 'dim': args.dim})
        if args.command == 'lili':
            data['trials'] = args.trials
        else:
            data.update({'iterations': args.iters, 'restarts': args.restarts})
    return config_from_dict(data)


def build_parser():
    parser = argparse.ArgumentParser(prog='verifier', description='Lagrangian submanifold verification engine')
    parser.add_argument('--config', help='JSON configuration file (supersedes flags)')
    parser.add_argument('--profile', default='default', help='configuration profile')
    sub = parser.add_subparsers(dest='command')

    for name, help_text in (('analyze', 'full analysis of a gallery example'),
                            ('gap-check', 'gap verdict only')):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument('--example', help='gallery variant name')
        cmd.add_argument('--n', type=int)
        cmd.add_argument('--r', type=float)
        cmd.add_argument('--theta', type=float)
        cmd.add_argument('--radii', help='comma-separated radii')
        cmd.add_argument('--c', type=float)
        cmd.add_argument('--center', help='comma-separated Whitney center, 2n numbers')
        cmd.add_argument('--resolution', type=int)
        cmd.add_argument('--engine', choices=ENGINES)
        cmd.add_argument('--derivative', choices=DERIVATIVES)
        cmd.add_argument('--out')
        cmd.add_argument('--config', default=argparse.SUPPRESS, help='JSON configuration file (supersedes flags)')

    lili = sub.add_parser('lili', help='random trials of the commutator inequality')
    lili.add_argument('--trials', type=int, default=1000)
    search = sub.add_parser('lili-search', help='search for near-equality families')
    search.add_argument('--iters', type=int, default=2000)
    search.add_argument('--restarts', type=int, default=4)
    for cmd in (lili, search):
        cmd.add_argument('--p', type=int, default=2)
        cmd.add_argument('--dim', type=int, default=2)
        cmd.add_argument('--seed', type=int, default=0)
        cmd.add_argument('--out')
        cmd.add_argument('--config', default=argparse.SUPPRESS, help='JSON configuration file (supersedes flags)')
    return parser


def main(argv=None, app=None):
    """Entry point; returns the exit status"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if app is None:
        from app import create_app
        from app.config import config as profiles
        app = create_app(profiles.get(args.profile, profiles['default']))

    try:
        run_config = config_from_args(args)
    except Exception as error:
        payload, status = app.handle_exception(error)
        print(f"error: {payload['message']}", file=sys.stderr)
        return status

    report, status = run(app, run_config)
    for check in report.checks:
        mark = 'PASS' if check.passed else 'FAIL'
        print(f"{mark} {check.name}: {check.value} ({check.comparison} {check.tolerance})")
    if report.error:
        print(f"error: {report.error['message']}", file=sys.stderr)
    return status
