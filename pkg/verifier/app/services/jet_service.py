"""
Immersion jets: value and derivatives up to order 3 at parameter points.

Two engines are provided. ``exact`` propagates nested dual numbers through
the chart's evaluation procedure; ``fd`` uses central differences with
power-of-two steps and serves as an independent oracle.
"""
import itertools
import logging
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from app.config import current_config
from app.middleware.error_handler import ConfigurationError, DomainError, EvaluationError, InvalidInputError
from app.services.ambient_service import AmbientModel, select_chart, to_affine
from app.utils import dual

logger = logging.getLogger(__name__)

ENGINES = ('exact', 'fd')


@dataclass(frozen=True)
class ParamChart:
    """One chart of an atlas: a domain box and an evaluation procedure"""
    name: str
    lower: tuple
    upper: tuple
    procedure: Callable
    periodic: tuple = ()

    def __post_init__(self):
        if not self.periodic:
            object.__setattr__(self, 'periodic', (False,) * len(self.lower))

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, u):
        """Mask of points inside the box (periodic axes always qualify)"""
        u = np.asarray(u, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        inside = (u >= lower) & (u <= upper)
        inside |= np.asarray(self.periodic, dtype=bool)
        return np.all(inside, axis=-1)


@dataclass(frozen=True)
class ImmersionMap:
    """An immersion psi: M^n -> target presented by a chart atlas

    When ``homogeneous`` is set the chart procedures return block-ordered
    homogeneous coordinates of CP^n, and the affine chart is picked per point.
    """
    name: str
    n: int
    target: AmbientModel
    charts: Sequence[ParamChart]
    params: dict = field(default_factory=dict)
    homogeneous: bool = False
    lagrangian: bool = True
    conformal_maslov: bool = False
    # cache identity, fresh for every constructed map
    token: str = field(default_factory=lambda: uuid.uuid4().hex, init=False, repr=False, compare=False)

    def chart(self, key=0):
        if isinstance(key, str):
            for chart in self.charts:
                if chart.name == key:
                    return chart
            raise DomainError(f"Immersion '{self.name}' has no chart named '{key}'")
        return self.charts[key]

    def evaluate(self, u, chart=0, ambient_chart=None):
        """Ambient chart coordinates of psi(u)"""
        u = _check_params(self, self.chart(chart), u)
        points = u.reshape(-1, self.n)
        raw = np.asarray(self.chart(chart).procedure(points), dtype=float)
        if self.homogeneous:
            ids = _affine_ids(self, raw, ambient_chart)
            out = np.empty((points.shape[0], 2 * self.n))
            for k in np.unique(ids):
                mask = ids == k
                out[mask] = to_affine(raw[mask], int(k), self.n)
            raw = out
        return raw.reshape(u.shape[:-1] + raw.shape[-1:])

    def describe(self):
        return {'name': self.name, 'n': self.n, 'target': self.target.describe(), 'params': self.params}


@dataclass
class Jet:
    """Value and derivatives of an immersion at a batch of parameter points"""
    order: int
    value: np.ndarray                 # (..., 2n)
    d1: np.ndarray                    # (..., 2n, n)
    d2: Optional[np.ndarray] = None   # (..., 2n, n, n)
    d3: Optional[np.ndarray] = None   # (..., 2n, n, n, n)
    engine: str = 'exact'
    chart_ids: Optional[np.ndarray] = None  # affine chart per point (CP^n targets)
    symmetry_defect: float = 0.0      # raw mixed-partial asymmetry before averaging

    @property
    def n(self):
        return self.d1.shape[-1]

    def take(self, index):
        """Sub-batch of the jet"""
        pick = (lambda a: None if a is None else a[index])
        return Jet(self.order, self.value[index], self.d1[index], pick(self.d2), pick(self.d3),
                   self.engine, pick(self.chart_ids), self.symmetry_defect)


def _full_shape(x):
    if isinstance(x, dual.Dual):
        return np.broadcast_shapes(_full_shape(x.real), _full_shape(x.eps))
    return np.shape(x)


def differentiate(fn, x, order):
    """Exact derivatives of fn at the rows of x up to the given order.

    ``x`` has shape (B, m); returns ``[value, d1, ..., d_order]`` where
    ``d_k`` has shape (B, *out, m, ..., m) with k trailing derivative axes.
    """
    x = np.asarray(x, dtype=float)
    count, m = x.shape
    if order == 0:
        return [np.asarray(fn(x), dtype=float)]
    combos = np.array(list(itertools.product(range(m), repeat=order)))
    eye = np.eye(m)
    directions = [eye[combos[:, level]][:, None, :] for level in range(order)]
    out = fn(dual.seed(x[None], directions))

    # leaves broadcast to (K, B, *out) with K = m**order seeded combinations
    shape = (len(combos), count) + _full_shape(out)[2:]
    result = []
    for d in range(order + 1):
        part = np.broadcast_to(dual.component(out, set(range(d)), order), shape)
        part = part.reshape((m,) * order + shape[1:])
        part = part[(slice(None),) * d + (0,) * (order - d)]
        result.append(np.moveaxis(part, tuple(range(d)), tuple(range(-d, 0))) if d else np.array(part))
    return result


def _check_params(imap, chart, u):
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != imap.n:
        raise InvalidInputError(f"Expected {imap.n} parameters, got {u.shape[-1]}")
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("Non-finite parameter point")
    outside = ~chart.contains(u)
    if np.any(outside):
        where = np.argwhere(np.atleast_1d(outside))[0]
        raise DomainError(f"Parameter point outside chart '{chart.name}' of '{imap.name}'",
                          location=tuple(int(i) for i in where))
    return u


def _affine_ids(imap, Z, ambient_chart):
    if ambient_chart is None:
        ambient_chart = imap.target.chart_id
    if ambient_chart is not None:
        return np.full(np.shape(Z)[:-1], int(ambient_chart))
    return select_chart(Z, imap.n)


def _exact_block(imap, chart, u, order, ambient_chart):
    """Exact jets for one chunk of points"""
    if not imap.homogeneous:
        return differentiate(chart.procedure, u, order), None
    Z = np.asarray(chart.procedure(u), dtype=float)
    ids = _affine_ids(imap, Z, ambient_chart)
    parts = [np.empty((u.shape[0], 2 * imap.n) + (imap.n,) * d) for d in range(order + 1)]
    for k in np.unique(ids):
        mask = ids == k
        block = differentiate(lambda p, k=int(k): to_affine(chart.procedure(p), k, imap.n), u[mask], order)
        for d in range(order + 1):
            parts[d][mask] = block[d]
    return parts, ids


def _power_of_two_steps(u, d):
    eps = np.finfo(float).eps
    raw = eps ** (1.0 / (d + 2)) * np.maximum(1.0, np.abs(u))
    return np.exp2(np.round(np.log2(raw)))


def _fd_block(imap, chart, u, order, ambient_chart):
    """Central-difference jets for one chunk of points"""
    Z0 = np.asarray(chart.procedure(u), dtype=float) if imap.homogeneous else None
    ids = _affine_ids(imap, Z0, ambient_chart) if imap.homogeneous else None

    def F(p):
        raw = np.asarray(chart.procedure(p), dtype=float)
        if not imap.homogeneous:
            return raw
        out = np.empty(raw.shape[:-1] + (2 * imap.n,))
        for k in np.unique(ids):
            mask = ids == k
            out[mask] = to_affine(raw[mask], int(k), imap.n)
        return out

    n = imap.n
    eye = np.eye(n)

    def first(p, h):
        cols = [(F(p + h[:, i:i + 1] * eye[i]) - F(p - h[:, i:i + 1] * eye[i])) / (2.0 * h[:, i:i + 1])
                for i in range(n)]
        return np.stack(cols, axis=-1)

    def second(p, h):
        center = F(p)
        out = np.empty(center.shape + (n, n))
        for i in range(n):
            hi = h[:, i:i + 1]
            ei = hi * eye[i]
            out[..., i, i] = (F(p + ei) - 2.0 * center + F(p - ei)) / (hi * hi)
            for j in range(i + 1, n):
                hj = h[:, j:j + 1]
                ej = hj * eye[j]
                mixed = (F(p + ei + ej) - F(p + ei - ej) - F(p - ei + ej) + F(p - ei - ej)) / (4.0 * hi * hj)
                out[..., i, j] = mixed
                out[..., j, i] = mixed
        return out

    parts = [F(u), first(u, _power_of_two_steps(u, 1))]
    if order >= 2:
        parts.append(second(u, _power_of_two_steps(u, 2)))
    if order >= 3:
        h3 = _power_of_two_steps(u, 3)
        d3 = np.empty(parts[0].shape + (n, n, n))
        for k in range(n):
            hk = h3[:, k:k + 1]
            ek = hk * eye[k]
            d3[..., k] = (second(u + ek, h3) - second(u - ek, h3)) / (2.0 * hk[..., None, None])
        parts.append(d3)
    return parts, ids


def _symmetrize(d2, d3):
    if d2 is not None:
        d2 = 0.5 * (d2 + np.swapaxes(d2, -1, -2))
    if d3 is not None:
        perms = itertools.permutations(range(3))
        base = d3.ndim - 3
        d3 = sum(np.transpose(d3, tuple(range(base)) + tuple(base + p for p in perm)) for perm in perms) / 6.0
    return d2, d3


def evaluate_jet(imap: ImmersionMap, u, order=2, engine=None, chart=0, ambient_chart=None) -> Jet:
    """Jet of the immersion at parameter point(s) u of the given atlas chart"""
    cfg = current_config()
    engine = engine or cfg.DEFAULT_ENGINE
    if engine not in ENGINES:
        raise ConfigurationError(f"Unknown jet engine '{engine}'")
    if order not in (1, 2, 3):
        raise ConfigurationError(f"Jet order must be 1, 2 or 3, got {order}")

    param_chart = imap.chart(chart)
    u = _check_params(imap, param_chart, u)
    single = u.ndim == 1
    points = u.reshape(-1, imap.n)
    block = _exact_block if engine == 'exact' else _fd_block
    chunk = cfg.JET_CHUNK_SIZE
    starts = range(0, points.shape[0], chunk)

    with ThreadPoolExecutor(max_workers=cfg.WORKERS) as pool:
        blocks = list(pool.map(lambda s: block(imap, param_chart, points[s:s + chunk], order, ambient_chart), starts))
    logger.debug(f"{engine} jets of order {order} for {points.shape[0]} points of '{imap.name}'")

    parts = [np.concatenate([b[0][d] for b in blocks]) for d in range(order + 1)]
    ids = None if blocks[0][1] is None else np.concatenate([b[1] for b in blocks])

    for d, arr in enumerate(parts):
        bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
        if np.any(bad):
            index = int(np.argmax(bad))
            raise EvaluationError(f"Non-finite derivative of order {d} for '{imap.name}'", location=(index,))

    defect = 0.0
    if order >= 2:
        defect = float(np.max(np.abs(parts[2] - np.swapaxes(parts[2], -1, -2)), initial=0.0))
    d2, d3 = _symmetrize(parts[2] if order >= 2 else None, parts[3] if order >= 3 else None)

    jet = Jet(order, parts[0], parts[1], d2, d3, engine, ids, defect)
    return jet.take(0) if single else jet


def jet_cross_check(imap: ImmersionMap, u, order=2, chart=0):
    """Max discrepancy between the exact and fd engines, normalized per order"""
    exact = evaluate_jet(imap, u, order, 'exact', chart)
    approx = evaluate_jet(imap, u, order, 'fd', chart)
    worst = 0.0
    for d, (a, b) in enumerate(zip((exact.value, exact.d1, exact.d2, exact.d3),
                                   (approx.value, approx.d1, approx.d2, approx.d3))):
        if d > order:
            break
        scale = max(1.0, float(np.max(np.abs(a))))
        worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    logger.debug(f"Jet cross-check for '{imap.name}' order {order}: {worst:.3e}")
    return worst
