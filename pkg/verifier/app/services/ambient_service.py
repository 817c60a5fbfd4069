"""
Complex space forms C^n (c = 0) and CP^n (c > 0) in real coordinate charts.

Chart coordinates are block ordered, y = (Re z_1..Re z_n, Im z_1..Im z_n).
CP^n is handled through its affine charts: chart k divides the homogeneous
vector by Z_k and drops it. In every affine chart the Fubini-Study metric
has the same closed form, scaled by 1/c so that the holomorphic sectional
curvature is 4c.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from app.config import current_config
from app.middleware.error_handler import (
    ChartConditioningError, ConfigurationError, InvalidInputError, UnsupportedAmbientError
)
from app.utils import dual
from app.utils.tensors import christoffel_symbols, christoffel_derivative, riemann_tensor, space_form_tensor

logger = logging.getLogger(__name__)

FLAT = 'flat'
FUBINI_STUDY = 'fubini-study'


@dataclass(frozen=True)
class AmbientModel:
    """A complex space form of complex dimension n in a real chart"""
    kind: str
    n: int
    c: float = 0.0
    chart_id: Optional[int] = None  # None: pick the best-conditioned chart per point

    def __post_init__(self):
        if self.kind not in (FLAT, FUBINI_STUDY):
            raise UnsupportedAmbientError(f"Unknown ambient kind '{self.kind}'")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"Complex dimension must be an integer of at least 2, got {self.n}")
        if self.kind == FLAT and self.c != 0:
            raise ConfigurationError("Flat ambient requires c = 0")
        if self.kind == FUBINI_STUDY and not self.c > 0:
            if self.c < 0:
                raise UnsupportedAmbientError("Complex hyperbolic ambients (c < 0) are not supported")
            raise ConfigurationError("Fubini-Study ambient requires c > 0")
        if self.chart_id is not None and not 0 <= self.chart_id <= self.n:
            raise ConfigurationError(f"Chart id must lie in 0..{self.n}, got {self.chart_id}")

    @property
    def real_dim(self):
        return 2 * self.n

    @property
    def is_flat(self):
        return self.kind == FLAT

    def with_chart(self, chart_id):
        return replace(self, chart_id=chart_id)

    def describe(self):
        return {'kind': self.kind, 'n': self.n, 'c': self.c}


def flat_space(n):
    return AmbientModel(FLAT, n, 0.0)


def projective_space(n, c=1.0, chart_id=None):
    return AmbientModel(FUBINI_STUDY, n, float(c), chart_id)


@dataclass
class AmbientJet:
    """Metric, its first two derivatives and the connection at a batch of points"""
    metric: np.ndarray        # (B, 2n, 2n)
    d_metric: np.ndarray      # (B, 2n, 2n, 2n), last index differentiates
    dd_metric: np.ndarray     # (B, 2n, 2n, 2n, 2n)
    gamma: np.ndarray         # (B, 2n, 2n, 2n)
    d_gamma: np.ndarray       # (B, 2n, 2n, 2n, 2n)


def _points(model, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.real_dim:
        raise InvalidInputError(f"Expected {model.real_dim} chart coordinates, got {y.shape[-1]}")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("Non-finite ambient coordinates")
    return y


def standard_complex_structure(n):
    """Block matrix (0, -I_n / I_n, 0)"""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def fubini_study_metric(y, n, c):
    """Closed-form Fubini-Study metric in an affine chart (dual compatible)"""
    x, v = y[..., :n], y[..., n:]
    s = 1.0 + dual.sum(x * x + v * v, axis=-1)
    s = s[..., None, None]
    outer_re = x[..., :, None] * x[..., None, :] + v[..., :, None] * v[..., None, :]
    outer_im = x[..., :, None] * v[..., None, :] - v[..., :, None] * x[..., None, :]
    p = (s * np.eye(n) - outer_re) / (s * s)
    q = -outer_im / (s * s)
    top = dual.concatenate([p, q], axis=-1)
    bottom = dual.concatenate([-q, p], axis=-1)
    return dual.concatenate([top, bottom], axis=-2) / c


def metric_at(model: AmbientModel, y):
    """Ambient metric matrix at chart points y (..., 2n)"""
    y = _points(model, y)
    if model.is_flat:
        return np.broadcast_to(np.eye(model.real_dim), y.shape[:-1] + (model.real_dim,) * 2).copy()
    return fubini_study_metric(y, model.n, model.c)


def complex_structure_at(model: AmbientModel, y):
    """Complex structure J; constant in every holomorphic chart"""
    y = _points(model, y)
    return np.broadcast_to(standard_complex_structure(model.n), y.shape[:-1] + (model.real_dim,) * 2).copy()


def kahler_form_at(model: AmbientModel, y):
    """omega_AB = g(e_A, J e_B)"""
    return metric_at(model, y) @ complex_structure_at(model, y)


def ambient_jet(model: AmbientModel, y) -> AmbientJet:
    """Exact metric derivatives and connection at a batch of points"""
    y = _points(model, y)
    batch_shape = y.shape[:-1]
    flat_y = y.reshape(-1, model.real_dim)
    dim = model.real_dim
    count = flat_y.shape[0]

    if model.is_flat:
        g = np.broadcast_to(np.eye(dim), (count, dim, dim)).copy()
        jet = AmbientJet(g, np.zeros((count,) + (dim,) * 3), np.zeros((count,) + (dim,) * 4),
                         np.zeros((count,) + (dim,) * 3), np.zeros((count,) + (dim,) * 4))
    else:
        # local import: the jet engine depends on this module for chart plumbing
        from app.services.jet_service import differentiate
        chunk = current_config().AMBIENT_CHUNK_SIZE
        parts = [differentiate(lambda p: fubini_study_metric(p, model.n, model.c), flat_y[start:start + chunk], 2)
                 for start in range(0, count, chunk)]
        g = np.concatenate([p[0] for p in parts])
        dg = np.concatenate([p[1] for p in parts])
        ddg = np.concatenate([p[2] for p in parts])
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        ddg = 0.5 * (ddg + np.swapaxes(ddg, -1, -2))
        g_inv = np.linalg.inv(g)
        jet = AmbientJet(g, dg, ddg, christoffel_symbols(g_inv, dg), christoffel_derivative(g_inv, dg, ddg))

    def restore(a):
        return a.reshape(batch_shape + a.shape[1:])

    return AmbientJet(*(restore(a) for a in (jet.metric, jet.d_metric, jet.dd_metric, jet.gamma, jet.d_gamma)))


def christoffels_at(model: AmbientModel, y):
    """Levi-Civita symbols Gamma^A_BC, symmetric in B, C"""
    gamma = ambient_jet(model, y).gamma
    return 0.5 * (gamma + np.swapaxes(gamma, -1, -2))


def check_chart_conditioning(model: AmbientModel, y):
    """Affine coordinates of a well-conditioned point have modulus <= 1"""
    if model.is_flat:
        return
    y = _points(model, y)
    n = model.n
    modulus2 = y[..., :n] ** 2 + y[..., n:] ** 2
    limit = current_config().CHART_CONDITION_LIMIT
    bad = np.argwhere(np.atleast_1d(modulus2.max(axis=-1) > limit ** 2))
    if bad.size:
        raise ChartConditioningError("Point is not well-conditioned in the active affine chart",
                                     location=tuple(int(i) for i in bad[0]))


def curvature_residual(model: AmbientModel, y):
    """Max-norm gap between the computed Riemann tensor and the space-form formula"""
    y = _points(model, y)
    check_chart_conditioning(model, y)
    if model.is_flat:
        return 0.0
    jet = ambient_jet(model, y)
    computed = riemann_tensor(jet.metric, jet.d_metric, jet.dd_metric)
    j_lower = jet.metric @ complex_structure_at(model, y)
    expected = space_form_tensor(model.c, jet.metric, j_lower)
    residual = float(np.max(np.abs(computed - expected)))
    logger.debug(f"Curvature residual {residual:.3e} over {y.reshape(-1, model.real_dim).shape[0]} points")
    return residual


def metric_compatibility_residual(model: AmbientModel, y):
    """max |nabla_C g_AB|"""
    jet = ambient_jet(model, y)
    covariant = (jet.d_metric
                 - np.einsum('...eca,...eb->...abc', jet.gamma, jet.metric)
                 - np.einsum('...ecb,...ae->...abc', jet.gamma, jet.metric))
    return float(np.max(np.abs(covariant)))


def complex_structure_residual(model: AmbientModel, y):
    """max |nabla_C J^A_B|; J is constant in the chart so only connection terms remain"""
    jet = ambient_jet(model, y)
    J = standard_complex_structure(model.n)
    covariant = (np.einsum('...ace,eb->...abc', jet.gamma, J)
                 - np.einsum('ae,...ecb->...abc', J, jet.gamma))
    return float(np.max(np.abs(covariant)))


def sectional_curvature(model: AmbientModel, y, X, Y):
    """Sectional curvature of span(X, Y) at y"""
    jet = ambient_jet(model, y)
    R = riemann_tensor(jet.metric, jet.d_metric, jet.dd_metric)
    g = jet.metric
    num = np.einsum('...abcd,a,b,c,d->...', R, X, Y, X, Y, optimize=True)
    gxx = np.einsum('...ab,a,b->...', g, X, X, optimize=True)
    gyy = np.einsum('...ab,a,b->...', g, Y, Y, optimize=True)
    gxy = np.einsum('...ab,a,b->...', g, X, Y, optimize=True)
    return num / (gxx * gyy - gxy ** 2)


# ---------------------------------------------------------------------------
# CP^n chart plumbing
# ---------------------------------------------------------------------------

def to_affine(Z, chart_id, n):
    """Affine coordinates of homogeneous Z (block ordered, 2(n+1) reals) in chart k"""
    re, im = Z[..., :n + 1], Z[..., n + 1:]
    s, t = re[..., chart_id], im[..., chart_id]
    den = s * s + t * t
    others = [a for a in range(n + 1) if a != chart_id]
    out_re = [(re[..., a] * s + im[..., a] * t) / den for a in others]
    out_im = [(im[..., a] * s - re[..., a] * t) / den for a in others]
    return dual.stack(out_re + out_im, axis=-1)


def from_affine(y, chart_id, n):
    """Homogeneous representative with Z_k = 1"""
    y = np.asarray(y, dtype=float)
    re = np.insert(y[..., :n], chart_id, 1.0, axis=-1)
    im = np.insert(y[..., n:], chart_id, 0.0, axis=-1)
    return np.concatenate([re, im], axis=-1)


def select_chart(Z, n):
    """Chart whose dividing coordinate has the largest modulus (lowest index on ties)"""
    Z = np.asarray(Z, dtype=float)
    modulus2 = Z[..., :n + 1] ** 2 + Z[..., n + 1:] ** 2
    return np.argmax(modulus2, axis=-1)


def change_chart(y, from_chart, to_chart, n):
    return to_affine(from_affine(y, from_chart, n), to_chart, n)
