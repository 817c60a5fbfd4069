"""
Grid-level calculus over a sampled submanifold.

Work is split in two phases. ``build_grid`` runs the pointwise pass
(order-3 jets, frames, h, B, their exact covariant derivatives and the
per-point invariants) chunk by chunk. Stencil operations then read the
completed pass: the Laplace-Beltrami operator always, covariant
derivatives only when ``derivative='grid'`` is requested.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, NamedTuple, Optional

import numpy as np

from app.config import current_config
from app.middleware.error_handler import (
    ConfigurationError, UnsupportedAmbientError, VerifierError
)
from app.models import FieldReport, GapVerdict
from app.services.ambient_service import ambient_jet, metric_at, standard_complex_structure
from app.services.geometry_service import (
    PointInvariants, b_tensor, build_frame, covariant_derivative_h, gauss_residual_from, induced_metric_jet,
    lagrangian_defect, maslov_endomorphisms, point_invariants, second_fundamental_form
)
from app.services.jet_service import ImmersionMap, evaluate_jet
from app.utils.cache import get_cache, get_cache_key, set_cache

logger = logging.getLogger(__name__)

DERIVATIVES = ('jet', 'grid')
COARSE_GRID = 32


@dataclass
class PointwisePass:
    """Per-point results, every array shaped (*grid.shape, ...)"""
    invariants: PointInvariants
    h: np.ndarray
    b: np.ndarray
    Hstar: np.ndarray
    H: np.ndarray
    d1: np.ndarray
    e: np.ndarray
    estar: np.ndarray
    coord_to_frame: np.ndarray
    ambient_metric: np.ndarray
    ambient_gamma: np.ndarray
    sqrt_det_g: np.ndarray
    h3: np.ndarray
    A1: np.ndarray


@dataclass
class SampleGrid:
    """Structured product grid over one sampling chart"""
    imap: ImmersionMap
    chart: str
    axes: List[np.ndarray]
    periodic: tuple
    spacing: np.ndarray
    points: np.ndarray          # (*shape, n)
    weights: np.ndarray         # (*shape,)
    chart_ids: np.ndarray       # affine chart per point for CP^n targets, else 0
    engine: str
    key: str
    pointwise: Optional[PointwisePass] = None
    warnings: List[str] = field(default_factory=list)
    atlas_volumes: Optional[dict] = None

    @property
    def shape(self):
        return self.weights.shape

    @property
    def n(self):
        return self.imap.n

    @property
    def size(self):
        return int(self.weights.size)

    def axis_derivative(self, values, axis):
        """Three-point central difference along a grid axis; NaN where the stencil leaves the grid"""
        h = self.spacing[axis]
        if self.periodic[axis]:
            return (np.roll(values, -1, axis) - np.roll(values, 1, axis)) / (2.0 * h)
        out = np.full(values.shape, np.nan)
        inner = [slice(None)] * values.ndim
        ahead = [slice(None)] * values.ndim
        behind = [slice(None)] * values.ndim
        inner[axis], ahead[axis], behind[axis] = slice(1, -1), slice(2, None), slice(None, -2)
        out[tuple(inner)] = (values[tuple(ahead)] - values[tuple(behind)]) / (2.0 * h)
        return out

    def stencil_derivative(self, values, axis, points=None):
        """High-order first derivative along a grid axis.

        Periodic axes use the centered stencil everywhere; open axes shift the
        stencil inward near the ends, so every node gets a finite value.
        """
        points = points or current_config().GRID_STENCIL_POINTS
        h = self.spacing[axis]
        v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        count = v.shape[0]
        if count < points:
            raise ConfigurationError(f"Axis {axis} has {count} nodes, the stencil needs {points}")
        half = points // 2
        offsets = np.arange(-half, half + 1)
        centered = stencil_weights(offsets)
        if self.periodic[axis]:
            out = sum(w * np.roll(v, -s, axis=0) for s, w in zip(offsets, centered))
        else:
            out = np.empty_like(v)
            out[half:count - half] = sum(w * v[half + s:count - half + s] for s, w in zip(offsets, centered))
            for i in list(range(half)) + list(range(count - half, count)):
                start = min(max(i - half, 0), count - points)
                weights = stencil_weights(np.arange(start, start + points) - i)
                out[i] = np.tensordot(weights, v[start:start + points], axes=1)
        return np.moveaxis(out / h, 0, axis)

    def second_difference(self, coefficient, values, axis):
        """d_a(coefficient d_a values) from half-point fluxes; NaN at open ends"""
        h = self.spacing[axis]
        c = np.moveaxis(np.asarray(coefficient, dtype=float), axis, 0)
        v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        if self.periodic[axis]:
            flux = 0.5 * (c + np.roll(c, -1, axis=0)) * (np.roll(v, -1, axis=0) - v) / h
            out = (flux - np.roll(flux, 1, axis=0)) / h
        else:
            flux = 0.5 * (c[1:] + c[:-1]) * (v[1:] - v[:-1]) / h
            out = np.full(v.shape, np.nan)
            out[1:-1] = (flux[1:] - flux[:-1]) / h
        return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=64)
def _stencil_weights(offsets):
    s = np.asarray(offsets, dtype=float)
    vandermonde = s[None, :] ** np.arange(len(s))[:, None]
    rhs = np.zeros(len(s))
    rhs[1] = 1.0
    return np.linalg.solve(vandermonde, rhs)


def stencil_weights(offsets):
    """First-derivative weights (unit spacing) exact for polynomials of degree < len(offsets)"""
    return _stencil_weights(tuple(int(s) for s in offsets))


def _axis_nodes(lower, upper, count, periodic, margin):
    """Nodes, spacing and trapezoid weights of one grid axis"""
    if periodic:
        step = (upper - lower) / count
        return lower + step * np.arange(count), step, np.full(count, step)
    step = (upper - lower) / (count - 1 + 2 * margin)
    nodes = lower + step * (margin + np.arange(count))
    weights = np.full(count, step)
    weights[[0, -1]] *= 0.5
    return nodes, step, weights


def _resolution_list(resolution, n):
    if np.ndim(resolution) == 0:
        resolution = [resolution] * n
    resolution = [int(r) for r in resolution]
    if len(resolution) != n:
        raise ConfigurationError(f"Expected {n} axis resolutions, got {len(resolution)}")
    minimum = current_config().MIN_RESOLUTION
    if min(resolution) < minimum:
        raise ConfigurationError(f"Resolution must be at least {minimum} per axis, got {min(resolution)}")
    return resolution


def _pointwise_chunk(imap, chart, u, engine):
    model = imap.target
    jet = evaluate_jet(imap, u, 3, engine, chart)
    amb = ambient_jet(model, jet.value)
    frame = build_frame(model, jet, amb.metric)
    ff = second_fundamental_form(model, jet, frame, amb)
    bt = b_tensor(ff, imap.n)
    induced = induced_metric_jet(jet, amb)
    h3, mean_jet = covariant_derivative_h(model, jet, frame, amb, induced)
    A1, _ = maslov_endomorphisms(model, jet, frame, h3, mean_jet, amb)
    gauss = gauss_residual_from(model, jet, frame, ff, amb, induced)
    lag = lagrangian_defect(model, jet, amb.metric)
    inv = point_invariants(ff, bt, lag, gauss)
    ids = jet.chart_ids if jet.chart_ids is not None else np.zeros(u.shape[0], dtype=int)
    return {
        'invariants': inv, 'h': ff.h, 'b': bt.b, 'Hstar': ff.Hstar, 'H': ff.H, 'd1': jet.d1,
        'e': frame.e, 'estar': frame.estar, 'coord_to_frame': frame.coord_to_frame,
        'ambient_metric': frame.ambient_metric, 'ambient_gamma': amb.gamma,
        'sqrt_det_g': frame.volume_density, 'h3': h3, 'A1': A1, 'chart_ids': ids,
    }


def _run_pointwise(imap, chart, points, engine, shape):
    cfg = current_config()
    chunk = cfg.JET_CHUNK_SIZE
    starts = list(range(0, points.shape[0], chunk))

    def work(start):
        try:
            return _pointwise_chunk(imap, chart, points[start:start + chunk], engine)
        except VerifierError as error:
            # translate the chunk-local index into a grid index
            if isinstance(error.location, tuple) and error.location:
                flat = start + int(error.location[0])
                error.location = tuple(int(i) for i in np.unravel_index(flat, shape))
            raise

    with ThreadPoolExecutor(max_workers=cfg.WORKERS) as pool:
        parts = list(pool.map(work, starts))

    def stitch(key):
        return np.concatenate([p[key] for p in parts]).reshape(shape + parts[0][key].shape[1:])

    invariants = PointInvariants(**{
        name: np.concatenate([getattr(p['invariants'], name) for p in parts]).reshape(shape)
        for name in PointInvariants.FIELDS
    })
    pw = PointwisePass(invariants, *(stitch(k) for k in (
        'h', 'b', 'Hstar', 'H', 'd1', 'e', 'estar', 'coord_to_frame', 'ambient_metric', 'ambient_gamma',
        'sqrt_det_g', 'h3', 'A1')))
    return pw, stitch('chart_ids')


def _map_key(imap, resolution, engine, chart):
    return get_cache_key('grid', imap.token, tuple(resolution), engine, chart)


# ---------------------------------------------------------------------------
# Chart-split volume (sphere atlases)
# ---------------------------------------------------------------------------

SPHERE_ATLAS = ('polar', 'north', 'south')


def _gauss_axis(lower, upper, count, periodic):
    """Gauss-Legendre nodes on open axes, uniform nodes on periodic ones"""
    if periodic:
        step = (upper - lower) / count
        return lower + step * np.arange(count), np.full(count, step)
    nodes, weights = np.polynomial.legendre.leggauss(count)
    half = 0.5 * (upper - lower)
    return lower + half * (nodes + 1.0), half * weights


def _product_rule(axes):
    nodes = np.stack(np.meshgrid(*[a for a, _ in axes], indexing='ij'), axis=-1)
    weights = np.ones(nodes.shape[:-1])
    for k, (_, w) in enumerate(axes):
        weights = weights * w.reshape((1,) * k + (-1,) + (1,) * (len(axes) - k - 1))
    return nodes.reshape(-1, len(axes)), weights.reshape(-1)


def _volume_density(imap, chart, u, engine):
    jet = evaluate_jet(imap, u, 1, engine, chart)
    G = metric_at(imap.target, jet.value)
    g = np.einsum('...ai,...ab,...bj->...ij', jet.d1, G, jet.d1, optimize=True)
    return np.sqrt(np.linalg.det(g))


def _unit_ball_rule(n, resolution):
    """Points of the unit ball in R^n (radius, hyperspherical angles) and weights with the Jacobian"""
    axes = [_gauss_axis(0.0, 1.0, resolution[0], False)]
    axes += [_gauss_axis(0.0, np.pi, resolution[k + 1], False) for k in range(n - 2)]
    axes.append(_gauss_axis(0.0, 2.0 * np.pi, resolution[-1], True))
    nodes, weights = _product_rule(axes)

    rho = nodes[:, 0]
    jacobian = rho ** (n - 1)
    sin_prod = np.ones_like(rho)
    direction = []
    for k in range(n - 2):
        theta = nodes[:, k + 1]
        direction.append(sin_prod * np.cos(theta))
        jacobian = jacobian * np.sin(theta) ** (n - 2 - k)
        sin_prod = sin_prod * np.sin(theta)
    phi = nodes[:, -1]
    direction += [sin_prod * np.cos(phi), sin_prod * np.sin(phi)]
    return rho[:, None] * np.stack(direction, axis=-1), weights * jacobian


def atlas_volumes(imap: ImmersionMap, resolution=None, engine=None) -> Optional[dict]:
    """Volume from the polar chart against the sum over the two stereographic hemispheres.

    Each stereographic chart maps the unit ball onto one closed hemisphere, so
    the two patches partition the sphere without overlap. Returns None for
    maps without a sphere atlas.
    """
    if not set(SPHERE_ATLAS) <= {chart.name for chart in imap.charts}:
        return None
    cfg = current_config()
    resolution = _resolution_list(resolution or cfg.DEFAULT_RESOLUTION, imap.n)
    engine = engine or cfg.DEFAULT_ENGINE

    polar = imap.chart('polar')
    nodes, weights = _product_rule([_gauss_axis(polar.lower[k], polar.upper[k], resolution[k], polar.periodic[k])
                                    for k in range(imap.n)])
    volumes = {'polar': float(np.sum(weights * _volume_density(imap, 'polar', nodes, engine)))}
    ball, ball_weights = _unit_ball_rule(imap.n, resolution)
    for name in SPHERE_ATLAS[1:]:
        volumes[name] = float(np.sum(ball_weights * _volume_density(imap, name, ball, engine)))
    split = volumes['north'] + volumes['south']
    volumes['relative_difference'] = abs(split - volumes['polar']) / volumes['polar']
    logger.info(f"Chart-split volume of {imap.name}: polar {volumes['polar']:.12g}, "
                f"north + south {split:.12g}")
    return volumes


def build_grid(imap: ImmersionMap, resolution=None, engine=None, chart=0) -> SampleGrid:
    """Sample the immersion on a product grid and run the pointwise pass"""
    cfg = current_config()
    resolution = _resolution_list(resolution or cfg.DEFAULT_RESOLUTION, imap.n)
    engine = engine or cfg.DEFAULT_ENGINE
    key = _map_key(imap, resolution, engine, chart)
    cached = get_cache(key)
    if cached is not None:
        return cached

    param_chart = imap.chart(chart)
    axes, spacing, axis_weights = [], [], []
    for k in range(imap.n):
        nodes, step, weights = _axis_nodes(param_chart.lower[k], param_chart.upper[k], resolution[k],
                                           param_chart.periodic[k], cfg.POLAR_MARGIN_CELLS)
        axes.append(nodes)
        spacing.append(step)
        axis_weights.append(weights)
    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack(mesh, axis=-1)
    shape = points.shape[:-1]

    pw, chart_ids = _run_pointwise(imap, chart, points.reshape(-1, imap.n), engine, shape)
    weights = pw.sqrt_det_g
    for k, w in enumerate(axis_weights):
        weights = weights * w.reshape((1,) * k + (-1,) + (1,) * (imap.n - k - 1))

    grid = SampleGrid(imap, param_chart.name, axes, tuple(param_chart.periodic), np.asarray(spacing),
                      points, weights, chart_ids, engine, key, pw)
    if engine == 'fd':
        grid.warnings.append('finite-difference jets: third derivatives carry truncation error near 1e-6')
    grid.atlas_volumes = split = atlas_volumes(imap, resolution, engine)
    if split is not None and split['relative_difference'] > cfg.TOLERANCES['chart_split_volume']:
        message = f"chart-split volume differs from the polar volume by {split['relative_difference']:.2e} (relative)"
        logger.warning(message)
        grid.warnings.append(message)
    logger.info(f"Built grid for {imap.name}: {grid.size} points on chart '{param_chart.name}', engine {engine}")
    set_cache(key, grid)
    return grid


# ---------------------------------------------------------------------------
# Stencil pass (grid covariant derivatives)
# ---------------------------------------------------------------------------

@dataclass
class DerivativeFields:
    h3: np.ndarray
    b3: np.ndarray
    A1: np.ndarray
    warnings: List[str]


def _connection_forms(grid, vectors):
    """Omega[a][k, i] = <D_a v_i, v_k> along each grid axis"""
    pw = grid.pointwise
    forms = []
    for a in range(grid.n):
        dv = grid.stencil_derivative(vectors, a)
        dv = dv + np.einsum('...ABC,...B,...Ci->...Ai', pw.ambient_gamma, pw.d1[..., a], vectors, optimize=True)
        forms.append(np.einsum('...Ak,...AB,...Bi->...ki', vectors, pw.ambient_metric, dv, optimize=True))
    return forms


def _frame_covariant(grid, t, omega, omega_perp):
    """t3[m, i, j, k] for a frame 3-tensor t[m, i, j] with starred first index"""
    nabla = []
    for a in range(grid.n):
        d = grid.stencil_derivative(t, a)
        d = (d - np.einsum('...km,...kij->...mij', omega_perp[a], t)
             - np.einsum('...ki,...mkj->...mij', omega[a], t)
             - np.einsum('...kj,...mik->...mij', omega[a], t))
        nabla.append(d)
    nabla = np.stack(nabla, axis=-1)
    return np.einsum('...mija,...ak->...mijk', nabla, grid.pointwise.coord_to_frame)


def _jet_b3(h3, n):
    Hd = np.einsum('...miik->...mk', h3) / n
    eye = np.eye(n)
    return h3 - n / (n + 2.0) * (np.einsum('...mk,ij->...mijk', Hd, eye)
                                 + np.einsum('...ik,jm->...mijk', Hd, eye)
                                 + np.einsum('...jk,im->...mijk', Hd, eye))


def derivative_fields(grid: SampleGrid, derivative=None) -> DerivativeFields:
    """h3, b3 and the frame matrix of nabla(JH) from the chosen derivative engine"""
    derivative = derivative or 'jet'
    if derivative not in DERIVATIVES:
        raise ConfigurationError(f"Unknown derivative mode '{derivative}'")
    key = get_cache_key('derivatives', grid.key, derivative)
    cached = get_cache(key)
    if cached is not None:
        return cached

    pw = grid.pointwise
    warnings = list(grid.warnings)
    if derivative == 'jet':
        fields = DerivativeFields(pw.h3, _jet_b3(pw.h3, grid.n), pw.A1, warnings)
    else:
        if np.unique(grid.chart_ids).size > 1:
            raise ConfigurationError("Grid derivatives need the whole grid in one affine chart; use derivative='jet'")
        if min(grid.shape) < COARSE_GRID:
            message = f"grid derivatives on a coarse grid (resolution {min(grid.shape)}) are inaccurate"
            logger.warning(message)
            warnings.append(message)
        omega = _connection_forms(grid, pw.e)
        omega_perp = _connection_forms(grid, pw.estar)
        h3 = _frame_covariant(grid, pw.h, omega, omega_perp)
        b3 = _frame_covariant(grid, pw.b, omega, omega_perp)

        J = standard_complex_structure(grid.n)
        JH = np.einsum('ab,...b->...a', J, pw.H)
        columns = []
        for a in range(grid.n):
            dJH = grid.stencil_derivative(JH, a) + np.einsum('...ABC,...B,...C->...A', pw.ambient_gamma,
                                                          pw.d1[..., a], JH, optimize=True)
            columns.append(np.einsum('...A,...AB,...Bm->...m', dJH, pw.ambient_metric, pw.e, optimize=True))
        A1 = np.einsum('...ma,...al->...ml', np.stack(columns, axis=-1), pw.coord_to_frame)
        fields = DerivativeFields(h3, b3, A1, warnings)
        logger.info(f"Stencil pass over {grid.size} points of {grid.imap.name}")
    set_cache(key, fields)
    return fields


def _sup(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    return float(finite.max()) if finite.size else float('nan')


def _inf(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    return float(finite.min()) if finite.size else float('nan')


def _pointwise_max(t, axes):
    """max |t| over the given trailing axes, NaN kept"""
    return np.abs(t).max(axis=axes)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

class MaslovResult(NamedTuple):
    sup_defect: float
    equivalence_residual: float
    sign: int


def maslov_conformal_defect(imap: ImmersionMap, model, grid: SampleGrid, derivative=None) -> MaslovResult:
    """sup |nabla(JH) - div(JH)/n Id| and the agreement of both conformality criteria.

    The second criterion is sum_k h^{m*}_{kkl} = -div(JH) delta_ml; its residual
    R2 satisfies R2 = -n M1 when both computations agree, so the reported
    equivalence residual is sup |M1 + sign R2 / n| for the better sign.
    """
    fields = derivative_fields(grid, derivative)
    n = grid.n
    eye = np.eye(n)
    A1 = fields.A1
    M1 = A1 - np.einsum('...ii->...', A1)[..., None, None] / n * eye
    sup_defect = _sup(_pointwise_max(M1, (-1, -2)))

    A2 = -np.einsum('...miil->...ml', fields.h3) / n
    L2 = np.einsum('...mkkl->...ml', fields.h3)
    R2 = L2 + np.einsum('...ii->...', A2)[..., None, None] * eye
    residuals = {sign: _sup(_pointwise_max(M1 + sign * R2 / n, (-1, -2))) for sign in (1, -1)}
    sign = min(residuals, key=lambda s: (residuals[s], -s))
    logger.info(f"Maslov check on {imap.name}: sup defect {sup_defect:.3e}, equivalence {residuals[sign]:.3e}")
    return MaslovResult(sup_defect, residuals[sign], sign)


def codazzi_residual(imap: ImmersionMap, model, grid: SampleGrid, which='h', derivative=None) -> float:
    """sup over points of |t_{mijk} - t_{mikj}| for t = h or b"""
    if which not in ('h', 'b'):
        raise ConfigurationError(f"Codazzi check applies to 'h' or 'b', got '{which}'")
    fields = derivative_fields(grid, derivative)
    t3 = fields.h3 if which == 'h' else fields.b3
    residual = _sup(_pointwise_max(t3 - np.swapaxes(t3, -1, -2), (-1, -2, -3, -4)))
    logger.debug(f"Codazzi residual of {which} on {imap.name}: {residual:.3e}")
    return residual


def explicit_codazzi_form_residual(grid: SampleGrid, derivative=None) -> float:
    """sup |b_{mijk} - h_{mijk} - div(JH)/(n+2){d_km d_ij + d_ik d_jm + d_jk d_im}|"""
    fields = derivative_fields(grid, derivative)
    n = grid.n
    eye = np.eye(n)
    div = np.einsum('...ii->...', fields.A1)
    profile = (np.einsum('km,ij->mijk', eye, eye) + np.einsum('ik,jm->mijk', eye, eye)
               + np.einsum('jk,im->mijk', eye, eye))
    expected = fields.h3 + div[..., None, None, None, None] / (n + 2.0) * profile
    return _sup(_pointwise_max(fields.b3 - expected, (-1, -2, -3, -4)))


def laplace_beltrami(grid: SampleGrid, f) -> np.ndarray:
    """(1/sqrt g) d_i (sqrt g g^{ij} d_j f); NaN on the outermost layer of open axes.

    Diagonal terms use half-point fluxes, mixed terms nest three-point
    central differences along two different axes.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ConfigurationError(f"Field shape {f.shape} does not match grid shape {grid.shape}")
    pw = grid.pointwise
    P = pw.coord_to_frame
    coefficient = pw.sqrt_det_g[..., None, None] * np.einsum('...ik,...jk->...ij', P, P)
    grad = [grid.axis_derivative(f, j) for j in range(grid.n)]
    div = np.zeros(grid.shape)
    for i in range(grid.n):
        div = div + grid.second_difference(coefficient[..., i, i], f, i)
        for j in range(grid.n):
            if j != i:
                div = div + grid.axis_derivative(coefficient[..., i, j] * grad[j], i)
    return div / pw.sqrt_det_g


def integrate(grid: SampleGrid, f) -> float:
    """Quadrature sum over points where f is finite"""
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    mask = np.isfinite(f)
    return float(np.sum(grid.weights[mask] * f[mask]))


def simons_bracket(B2, H2, n, c):
    """(n+1)c|B|^2 + n^2/(n+2)|B|^2|H|^2 - 3(n+2)/4 |B|^4"""
    return (n + 1) * c * B2 + n * n / (n + 2.0) * B2 * H2 - 3.0 * (n + 2) / 4.0 * B2 * B2


class SimonsResult(NamedTuple):
    margin: float
    sharp_margin: float


def simons_terms(grid: SampleGrid, derivative=None) -> SimonsResult:
    inv = grid.pointwise.invariants
    n, c = grid.n, grid.imap.target.c
    half_lap = 0.5 * laplace_beltrami(grid, inv.B_norm2)
    slack = half_lap - simons_bracket(inv.B_norm2, inv.H_norm2, n, c)
    b3 = derivative_fields(grid, derivative).b3
    sharp = slack - np.sum(b3 ** 2, axis=(-1, -2, -3, -4))
    return SimonsResult(_inf(slack), _inf(sharp))


def simons_diagnostic(imap: ImmersionMap, model, grid: SampleGrid, derivative=None) -> float:
    """inf over interior points of 1/2 Delta|B|^2 minus the Simons-type lower bound"""
    margin = simons_terms(grid, derivative).margin
    logger.info(f"Simons margin on {imap.name}: {margin:.6g}")
    return margin


def gap_thresholds(H2, n, c):
    """Pointwise thresholds of the gap theorem in |B|^2 and |h|^2 form"""
    d = 3.0 * (n + 2) ** 2
    base = 4.0 * (n + 1) * c / (3.0 * (n + 2))
    return base + 4.0 * n * n * H2 / d, base + n * n * (9 * n + 22) * H2 / d


def gap_verdict(invariants: PointInvariants, n, c, tolerance=None) -> GapVerdict:
    """Compare |B|^2 against the pointwise gap threshold"""
    if c < 0:
        raise UnsupportedAmbientError("Gap verdicts are defined for c >= 0 only")
    tolerance = current_config().TOLERANCES['gap_verdict'] if tolerance is None else tolerance
    B2 = np.asarray(invariants.B_norm2, dtype=float)
    h2 = np.asarray(invariants.h_norm2, dtype=float)
    H2 = np.asarray(invariants.H_norm2, dtype=float)
    thr_B, thr_h = gap_thresholds(H2, n, c)

    sup_excess = _sup(B2 - thr_B)
    equivalence = _sup(np.abs((h2 - thr_h) - (B2 - thr_B)) / (1.0 + h2))
    positive = thr_B > 0
    ratio = _sup(B2[positive] / thr_B[positive]) if np.any(positive) else None
    lower_slack = _inf(h2 - 3.0 * n * n / (n + 2.0) * H2)
    uniform_excess = _sup(B2 - 4.0 * (n + 1) * c / (3.0 * (n + 2))) if c > 0 else None

    if c > 0 and _sup(np.sqrt(H2)) < tolerance:
        verdict = GapVerdict.MINIMAL_EXCLUDED
    elif sup_excess <= tolerance:
        verdict = GapVerdict.WHITNEY_CONSISTENT
    else:
        verdict = GapVerdict.GAP_VIOLATED
    return GapVerdict(thr_B, sup_excess, verdict, ratio, equivalence, uniform_excess, lower_slack)


def _stats(values):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if not finite.size:
        return {'sup': None, 'mean': None, 'inf': None}
    return {'sup': float(finite.max()), 'mean': float(finite.mean()), 'inf': float(finite.min())}


def field_report(imap: ImmersionMap, grid: SampleGrid, derivative=None, gap_tolerance=None) -> FieldReport:
    """Aggregate pointwise and stencil results into a FieldReport"""
    model = imap.target
    inv = grid.pointwise.invariants
    fields = derivative_fields(grid, derivative)
    stats = {name: _stats(values) for name, values in inv.to_dict().items()}

    maslov = maslov_conformal_defect(imap, model, grid, derivative)
    simons = simons_terms(grid, derivative)
    lap = laplace_beltrami(grid, inv.B_norm2)
    verdict = None if model.c < 0 else gap_verdict(inv, imap.n, model.c, gap_tolerance)
    report = FieldReport(
        invariants=inv,
        stats=stats,
        maslov={'sup_defect': maslov.sup_defect, 'equivalence_residual': maslov.equivalence_residual,
                'sign': maslov.sign},
        codazzi={'h': codazzi_residual(imap, model, grid, 'h', derivative),
                 'b': codazzi_residual(imap, model, grid, 'b', derivative),
                 'b_explicit_form': explicit_codazzi_form_residual(grid, derivative)},
        simons={'margin': simons.margin, 'sharp_margin': simons.sharp_margin},
        integrals={'volume': integrate(grid, 1.0), 'B_norm2': integrate(grid, inv.B_norm2),
                   'laplacian_B_norm2': integrate(grid, lap)},
        gap=verdict,
        warnings=list(fields.warnings),
    )
    if grid.atlas_volumes is not None:
        report.integrals['chart_split'] = dict(grid.atlas_volumes)
    logger.info(f"Field report for {imap.name}: verdict {verdict.verdict if verdict else 'n/a'}")
    return report
