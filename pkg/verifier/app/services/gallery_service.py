"""
Gallery of explicit immersions: Whitney spheres, flat tori, planes and
seeded perturbations of them.

Evaluation procedures are written against ``app.utils.dual`` so the same
code runs on plain arrays and on nested dual numbers.
"""
import logging
import math

import numpy as np

from app.middleware.error_handler import ConfigurationError
from app.models import ExampleSpec
from app.services.ambient_service import flat_space, projective_space
from app.services.jet_service import ImmersionMap, ParamChart
from app.utils import dual

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
STEREO_BOX = 10.0


# ---------------------------------------------------------------------------
# Sphere charts: each returns x in R^{n+1} with |x| = 1
# ---------------------------------------------------------------------------

def _sphere_polar(u, n):
    """Hyperspherical angles (theta_1..theta_{n-1}, phi)"""
    coords = []
    sin_prod = 1.0
    for k in range(n - 1):
        theta = u[..., k]
        coords.append(sin_prod * dual.cos(theta))
        sin_prod = sin_prod * dual.sin(theta)
    phi = u[..., n - 1]
    coords.append(sin_prod * dual.cos(phi))
    coords.append(sin_prod * dual.sin(phi))
    return coords


def _sphere_stereographic(u, n, sign):
    """Inverse stereographic projection; sign +1 projects from x_n = 1"""
    r2 = dual.sum(u * u, axis=-1)
    den = 1.0 + r2
    coords = [2.0 * u[..., k] / den for k in range(n)]
    coords.append(sign * (r2 - 1.0) / den)
    return coords


def _sphere_charts(n, embed):
    """Polar sampling chart plus two stereographic charts for a map of x in S^n"""
    lower = (0.0,) * (n - 1) + (0.0,)
    upper = (math.pi,) * (n - 1) + (TWO_PI,)
    periodic = (False,) * (n - 1) + (True,)
    box = (STEREO_BOX,) * n
    return [
        ParamChart('polar', lower, upper, lambda u: embed(_sphere_polar(u, n)), periodic),
        ParamChart('north', tuple(-b for b in box), box, lambda u: embed(_sphere_stereographic(u, n, 1.0))),
        ParamChart('south', tuple(-b for b in box), box, lambda u: embed(_sphere_stereographic(u, n, -1.0))),
    ]


# ---------------------------------------------------------------------------
# Variants
# ---------------------------------------------------------------------------

def _whitney_cn(n, r, A):
    A = np.asarray(A, dtype=float)

    def embed(x):
        x0 = x[0]
        scale = r / (1.0 + x0 * x0)
        re = [scale * x[k] + A[k - 1] for k in range(1, n + 1)]
        im = [scale * x0 * x[k] + A[n + k - 1] for k in range(1, n + 1)]
        return dual.stack(re + im, axis=-1)

    return ImmersionMap('whitney-cn', n, flat_space(n), _sphere_charts(n, embed),
                        params={'n': n, 'r': r, 'A': A.tolist()}, conformal_maslov=True)


def _whitney_cpn(n, theta, c):
    ch, sh = math.cosh(theta), math.sinh(theta)

    def embed(x):
        # x[0] plays the distinguished last coordinate of the sphere
        t = x[0]
        den = ch * ch + sh * sh * t * t
        re = [x[k] * ch / den for k in range(1, n + 1)]
        im = [-(x[k] * sh * t) / den for k in range(1, n + 1)]
        re.append(sh * ch * (1.0 + t * t) / den)
        im.append(t / den)
        return dual.stack(re + im, axis=-1)

    return ImmersionMap('whitney-cpn', n, projective_space(n, c), _sphere_charts(n, embed),
                        params={'n': n, 'theta': theta, 'c': c}, homogeneous=True, conformal_maslov=True)


def _flat_torus(radii):
    radii = [float(r) for r in radii]
    n = len(radii)

    def procedure(u):
        re = [radii[k] * dual.cos(u[..., k]) for k in range(n)]
        im = [radii[k] * dual.sin(u[..., k]) for k in range(n)]
        return dual.stack(re + im, axis=-1)

    chart = ParamChart('angles', (0.0,) * n, (TWO_PI,) * n, procedure, (True,) * n)
    return ImmersionMap('flat-torus', n, flat_space(n), [chart], params={'radii': radii}, conformal_maslov=True)


def _flat_plane(n):
    def procedure(u):
        return dual.stack([u[..., k] for k in range(n)] + [0.0 * u[..., k] for k in range(n)], axis=-1)

    chart = ParamChart('box', (-1.0,) * n, (1.0,) * n, procedure)
    return ImmersionMap('flat-plane', n, flat_space(n), [chart], params={'n': n}, conformal_maslov=True)


def _flat_torus_cpn(radii, c):
    radii = [float(r) for r in radii]
    n = len(radii) - 1

    def procedure(u):
        zero = 0.0 * u[..., 0]
        re = [radii[0] + zero] + [radii[k] * dual.cos(u[..., k - 1]) for k in range(1, n + 1)]
        im = [zero] + [radii[k] * dual.sin(u[..., k - 1]) for k in range(1, n + 1)]
        return dual.stack(re + im, axis=-1)

    chart = ParamChart('angles', (0.0,) * n, (TWO_PI,) * n, procedure, (True,) * n)
    clifford = bool(np.allclose(radii, radii[0]))
    return ImmersionMap('flat-torus-cpn', n, projective_space(n, c), [chart],
                        params={'radii': radii, 'c': c}, homogeneous=True, conformal_maslov=clifford)


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------

def _trig_terms(rng, dim, count=3):
    """Integer frequencies, amplitudes and phases of a seeded trigonometric sum"""
    freqs = rng.integers(-2, 3, size=(count, dim))
    for row in freqs:
        if not row.any():
            row[rng.integers(dim)] = 1
    coeffs = rng.uniform(0.5, 1.0, size=count)
    phases = rng.uniform(0.0, TWO_PI, size=count)
    return freqs.astype(float), coeffs, phases


def _potential_gradient(terms, x, amplitude):
    """Gradient of amplitude * sum_k a_k sin(<w_k, x> + phi_k) / |w_k|^2 as a list of components"""
    freqs, coeffs, phases = terms
    dim = freqs.shape[1]
    grad = [0.0 * x[..., 0] for _ in range(dim)]
    for w, a, phase in zip(freqs, coeffs, phases):
        arg = phase + dual.sum(x * w, axis=-1)
        wave = amplitude * a / float(w @ w) * dual.cos(arg)
        for j in range(dim):
            if w[j]:
                grad[j] = grad[j] + w[j] * wave
    return grad


def symplectic_shear(amplitude, seed, n):
    """(x, y) -> (x + grad G(y'), y') with y' = y + grad F(x); preserves omega"""
    rng = np.random.default_rng(seed)
    f_terms, g_terms = _trig_terms(rng, n), _trig_terms(rng, n)

    def apply(y):
        x, v = y[..., :n], y[..., n:]
        dF = _potential_gradient(f_terms, x, amplitude)
        v_new = dual.stack([v[..., j] + dF[j] for j in range(n)], axis=-1)
        dG = _potential_gradient(g_terms, v_new, amplitude)
        x_new = dual.stack([x[..., j] + dG[j] for j in range(n)], axis=-1)
        return dual.concatenate([x_new, v_new], axis=-1)

    return apply


def ambient_bumps(amplitude, seed, n):
    """y -> y + amplitude * sum_k a_k sin(<w_k, y> + phi_k) d_k along fixed unit directions"""
    rng = np.random.default_rng(seed)
    freqs, coeffs, phases = _trig_terms(rng, 2 * n)
    directions = rng.normal(size=(len(coeffs), 2 * n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    def apply(y):
        out = [y[..., a] for a in range(2 * n)]
        for w, a, phase, d in zip(freqs, coeffs, phases, directions):
            bump = amplitude * a * dual.sin(phase + dual.sum(y * w, axis=-1))
            out = [out[b] + d[b] * bump for b in range(2 * n)]
        return dual.stack(out, axis=-1)

    return apply


def _perturbed(base: ImmersionMap, amplitude, seed, lagrangian):
    if not base.target.is_flat or base.homogeneous:
        raise ConfigurationError("Perturbations are defined for immersions into C^n only")
    warp = (symplectic_shear if lagrangian else ambient_bumps)(amplitude, seed, base.n)
    charts = [ParamChart(ch.name, ch.lower, ch.upper, (lambda u, proc=ch.procedure: warp(proc(u))), ch.periodic)
              for ch in base.charts]
    label = base.name + ('+shear' if lagrangian else '+bumps')
    return ImmersionMap(label, base.n, base.target, charts,
                        params={'base': base.params, 'amplitude': amplitude, 'seed': seed, 'lagrangian': lagrangian},
                        lagrangian=lagrangian, conformal_maslov=amplitude == 0 and base.conformal_maslov)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def make_immersion(spec: ExampleSpec) -> ImmersionMap:
    """Build the ImmersionMap for a validated example spec"""
    spec.validate()
    p = spec.params
    if spec.variant == 'whitney-cn':
        imap = _whitney_cn(p['n'], p['r'], p['A'])
    elif spec.variant == 'whitney-cpn':
        imap = _whitney_cpn(p['n'], p['theta'], p['c'])
    elif spec.variant == 'flat-torus':
        imap = _flat_torus(p['radii'])
    elif spec.variant == 'flat-plane':
        imap = _flat_plane(p['n'])
    elif spec.variant == 'flat-torus-cpn':
        imap = _flat_torus_cpn(p['radii'], p['c'])
    elif spec.variant == 'perturbed':
        imap = _perturbed(make_immersion(p['base']), p['amplitude'], p['seed'], p['lagrangian'])
    else:
        raise ConfigurationError(f"Unknown example variant '{spec.variant}'")
    logger.debug(f"Built immersion {imap.name} with params {imap.params}")
    return imap


def custom_immersion(name, n, model, procedure, lower, upper, periodic=None,
                     homogeneous=False, lagrangian=True, conformal_maslov=False) -> ImmersionMap:
    """Wrap a user evaluation procedure u -> ambient chart coordinates"""
    if len(lower) != n or len(upper) != n:
        raise ConfigurationError("Chart box must have one interval per parameter")
    if any(lo >= hi for lo, hi in zip(lower, upper)):
        raise ConfigurationError("Chart box intervals must be non-empty")
    periodic = tuple(periodic) if periodic is not None else (False,) * n
    chart = ParamChart('custom', tuple(map(float, lower)), tuple(map(float, upper)), procedure, periodic)
    return ImmersionMap(name, n, model, [chart], params={'name': name}, homogeneous=homogeneous,
                        lagrangian=lagrangian, conformal_maslov=conformal_maslov)


def is_conformal_maslov(spec: ExampleSpec):
    return make_immersion(spec).conformal_maslov


def expected_invariants(spec: ExampleSpec):
    """Closed-form targets for gallery members, or None"""
    p = spec.params
    if spec.variant in ('whitney-cn', 'whitney-cpn'):
        n = p['n']
        # h_norm2 = ratio * H_norm2 pointwise
        return {'B_norm2': 0.0, 'h_norm2_to_H_norm2': 3.0 * n * n / (n + 2.0)}
    if spec.variant == 'flat-torus':
        radii = np.asarray(p['radii'], dtype=float)
        n = len(radii)
        H2 = float(np.sum(1.0 / radii ** 2)) / n ** 2
        return {'H_norm2': H2, 'h_norm2': float(np.sum(1.0 / radii ** 2)),
                'B_norm2': n * n * (n - 1) * H2 / (n + 2.0)}
    if spec.variant == 'flat-plane':
        return {'H_norm2': 0.0, 'h_norm2': 0.0, 'B_norm2': 0.0}
    if spec.variant == 'flat-torus-cpn' and np.allclose(p['radii'], p['radii'][0]):
        return {'H_norm2': 0.0}
    return None
