"""
Data models for configurations and reports
"""
from typing import Dict, List, Optional

from app.middleware.error_handler import ConfigValidationError
from app.utils.validators import (
    validate_bool, validate_int, validate_positive, validate_positive_list, validate_vector, suggest_key
)

# Parameters accepted by each gallery variant, with defaults (None: required)
VARIANT_PARAMS = {
    'whitney-cn': {'n': None, 'r': 1.0, 'A': None},
    'whitney-cpn': {'n': None, 'theta': 0.5, 'c': 1.0},
    'flat-torus': {'radii': None, 'n': None},
    'flat-plane': {'n': None},
    'flat-torus-cpn': {'radii': None, 'c': 1.0, 'n': None},
    'perturbed': {'base': None, 'amplitude': 0.05, 'seed': 0, 'lagrangian': True},
}


def _check(result, field):
    ok, message = result
    if not ok:
        raise ConfigValidationError(field, message)


class ExampleSpec:
    """A gallery example: variant name plus its parameters"""

    def __init__(self, variant: str, params: Optional[Dict] = None):
        self.variant = variant
        self.params = dict(params or {})

    @property
    def n(self) -> int:
        if self.variant == 'perturbed':
            return self.params['base'].n
        if self.variant == 'flat-torus':
            return len(self.params['radii'])
        if self.variant == 'flat-torus-cpn':
            return len(self.params['radii']) - 1
        return int(self.params['n'])

    def validate(self) -> 'ExampleSpec':
        """Check parameter invariants and fill defaults; raises ConfigValidationError"""
        if self.variant not in VARIANT_PARAMS:
            hint = suggest_key(self.variant, VARIANT_PARAMS)
            raise ConfigValidationError('example.name', f"unknown variant '{self.variant}'{hint}")
        allowed = VARIANT_PARAMS[self.variant]
        for key in self.params:
            if key not in allowed:
                raise ConfigValidationError(f'example.{key}', f"unknown parameter{suggest_key(key, allowed)}")
        for key, default in allowed.items():
            if self.params.get(key) is None and default is not None:
                self.params[key] = default

        p = self.params
        if self.variant == 'perturbed':
            base = p.get('base')
            if base is None:
                raise ConfigValidationError('example.base', 'perturbed examples need a base example')
            if isinstance(base, dict):
                base = ExampleSpec.from_dict(base)
            p['base'] = base.validate()
            _check(validate_positive(p['amplitude'], allow_zero=True), 'example.amplitude')
            _check(validate_int(p['seed'], minimum=0), 'example.seed')
            _check(validate_bool(p['lagrangian']), 'example.lagrangian')
            return self

        if self.variant in ('flat-torus', 'flat-torus-cpn'):
            _check(validate_positive_list(p.get('radii')), 'example.radii')
            p['radii'] = [float(r) for r in p['radii']]
            expected = len(p['radii']) - (1 if self.variant == 'flat-torus-cpn' else 0)
            if p.get('n') is not None and int(p['n']) != expected:
                raise ConfigValidationError('example.n', f"n = {p['n']} does not match {len(p['radii'])} radii")
            p['n'] = expected
        _check(validate_int(p.get('n'), minimum=2), 'example.n')
        p['n'] = int(p['n'])

        if self.variant == 'whitney-cn':
            _check(validate_positive(p['r']), 'example.r')
            if p.get('A') is None:
                p['A'] = [0.0] * (2 * p['n'])
            _check(validate_vector(p['A'], 2 * p['n']), 'example.A')
            p['A'] = [float(a) for a in p['A']]
            p['r'] = float(p['r'])
        elif self.variant == 'whitney-cpn':
            _check(validate_positive(p['theta']), 'example.theta')
            _check(validate_positive(p['c']), 'example.c')
            p['theta'], p['c'] = float(p['theta']), float(p['c'])
        elif self.variant == 'flat-torus-cpn':
            _check(validate_positive(p['c']), 'example.c')
            p['c'] = float(p['c'])
        return self

    def to_dict(self) -> Dict:
        params = dict(self.params)
        if isinstance(params.get('base'), ExampleSpec):
            params['base'] = params['base'].to_dict()
        return {'name': self.variant, **params}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExampleSpec':
        data = dict(data)
        if 'name' not in data:
            raise ConfigValidationError('example.name', 'example name is required')
        variant = data.pop('name')
        return cls(variant, data)


class CheckResult:
    """Outcome of one named check"""

    def __init__(self, name: str, value: Optional[float], tolerance: Optional[float], passed: bool,
                 comparison: str = '<=', detail: Optional[str] = None):
        self.name = name
        self.value = value
        self.tolerance = tolerance
        self.passed = passed
        self.comparison = comparison
        self.detail = detail

    def to_dict(self) -> Dict:
        return {
            'name': self.name,
            'value': self.value,
            'tolerance': self.tolerance,
            'comparison': self.comparison,
            'passed': self.passed,
            'detail': self.detail
        }


class GapVerdict:
    """Pointwise gap threshold comparison over a grid"""

    WHITNEY_CONSISTENT = 'whitney-consistent'
    GAP_VIOLATED = 'gap-violated'
    MINIMAL_EXCLUDED = 'minimal-excluded'

    def __init__(self, threshold_B, sup_excess: float, verdict: str, ratio: Optional[float],
                 threshold_equivalence: float, uniform_bound_excess: Optional[float] = None,
                 lower_bound_slack: Optional[float] = None):
        self.threshold_B = threshold_B
        self.sup_excess = sup_excess
        self.verdict = verdict
        self.ratio = ratio
        self.threshold_equivalence = threshold_equivalence
        self.uniform_bound_excess = uniform_bound_excess
        self.lower_bound_slack = lower_bound_slack

    def to_dict(self) -> Dict:
        return {
            'verdict': self.verdict,
            'sup_excess': self.sup_excess,
            'ratio': self.ratio,
            'threshold_equivalence': self.threshold_equivalence,
            'uniform_bound_excess': self.uniform_bound_excess,
            'lower_bound_slack': self.lower_bound_slack
        }


class FieldReport:
    """Grid-level aggregates of the pointwise and stencil passes"""

    def __init__(self, invariants, stats: Dict, maslov: Optional[Dict], codazzi: Optional[Dict],
                 simons: Optional[Dict], integrals: Dict, gap: Optional[GapVerdict], warnings: List[str]):
        self.invariants = invariants
        self.stats = stats
        self.maslov = maslov
        self.codazzi = codazzi
        self.simons = simons
        self.integrals = integrals
        self.gap = gap
        self.warnings = warnings

    def to_dict(self) -> Dict:
        return {
            'stats': self.stats,
            'maslov': self.maslov,
            'codazzi': self.codazzi,
            'simons': self.simons,
            'integrals': self.integrals,
            'gap': self.gap.to_dict() if self.gap else None,
            'warnings': self.warnings
        }


class RunConfig:
    """Validated run configuration"""

    COMMANDS = ('analyze', 'gap-check', 'lili', 'lili-search')

    def __init__(self, command: str, example: Optional[ExampleSpec] = None, resolution: int = 64,
                 engine: str = 'exact', derivative: str = 'jet', tolerances: Optional[Dict] = None,
                 out: Optional[str] = None, seed: int = 0, p: int = 2, dim: int = 2, trials: int = 1000,
                 iterations: int = 2000, restarts: int = 4, checks: Optional[List[str]] = None):
        self.command = command
        self.example = example
        self.resolution = resolution
        self.engine = engine
        self.derivative = derivative
        self.tolerances = tolerances or {}
        self.out = out
        self.seed = seed
        self.p = p
        self.dim = dim
        self.trials = trials
        self.iterations = iterations
        self.restarts = restarts
        self.checks = checks

    @property
    def geometric(self) -> bool:
        return self.command in ('analyze', 'gap-check')

    def to_dict(self) -> Dict:
        data = {'command': self.command, 'seed': self.seed, 'tolerances': dict(sorted(self.tolerances.items()))}
        if self.geometric:
            data.update({
                'example': self.example.to_dict() if self.example else None,
                'resolution': self.resolution,
                'engine': self.engine,
                'derivative': self.derivative,
            })
        else:
            data.update({'p': self.p, 'dim': self.dim})
            if self.command == 'lili':
                data['trials'] = self.trials
            else:
                data.update({'iterations': self.iterations, 'restarts': self.restarts})
        if self.checks is not None:
            data['checks'] = list(self.checks)
        return data


class RunReport:
    """Report written for every run, complete or partial"""

    def __init__(self, config: RunConfig, version: str, schema_version: str):
        self.config = config
        self.version = version
        self.schema_version = schema_version
        self.checks: List[CheckResult] = []
        self.field: Optional[FieldReport] = None
        self.results: Dict = {}
        self.timings: Dict[str, float] = {}
        self.status = 'running'
        self.error: Optional[Dict] = None

    def add_check(self, check: CheckResult):
        self.checks.append(check)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self, include_timings: bool = True) -> Dict:
        data = {
            'schema_version': self.schema_version,
            'tool_version': self.version,
            'config': self.config.to_dict(),
            'status': self.status,
            'checks': [check.to_dict() for check in self.checks],
            'field': self.field.to_dict() if self.field else None,
            'results': self.results,
            'error': self.error
        }
        if include_timings:
            data['timings'] = {k: round(v, 6) for k, v in self.timings.items()}
        return data
