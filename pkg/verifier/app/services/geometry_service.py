"""
Pointwise invariants of an immersed submanifold.

All functions accept jets with arbitrary leading batch axes. Frame
components use the adapted frame (e_1..e_n, e_1*..e_n*) with e_i* = J e_i;
index order of the second fundamental form is h[m, i, j] = h^{m*}_{ij},
and of its covariant derivative h3[m, i, j, k] = h^{m*}_{ijk} with k the
differentiating direction.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.config import current_config
from app.middleware.error_handler import ConfigurationError, DegenerateImmersionError
from app.services.ambient_service import AmbientJet, AmbientModel, ambient_jet, standard_complex_structure
from app.services.jet_service import Jet, evaluate_jet
from app.utils.tensors import christoffel_derivative, christoffel_symbols, riemann_tensor, space_form_tensor

logger = logging.getLogger(__name__)


@dataclass
class Frame:
    """Orthonormal tangent frame, its J-image and the induced metric"""
    e: np.ndarray               # (..., 2n, n) columns e_i in ambient coordinates
    estar: np.ndarray           # (..., 2n, n) columns J e_i
    g: np.ndarray               # (..., n, n) induced metric, coordinate basis
    g_inv: np.ndarray
    coord_to_frame: np.ndarray  # P with e_i = sum_j P[j, i] d_j psi
    ambient_metric: np.ndarray  # (..., 2n, 2n)

    @property
    def n(self):
        return self.g.shape[-1]

    @property
    def volume_density(self):
        return np.sqrt(np.linalg.det(self.g))


@dataclass
class FundForms:
    """Second fundamental form in frame components"""
    h: np.ndarray               # (..., n, n, n)
    H: np.ndarray               # (..., 2n) mean curvature vector
    Hstar: np.ndarray           # (..., n)
    Hnorm2: np.ndarray          # (...)
    normal_hessian: np.ndarray  # (..., 2n, n, n) normal part of D_i D_j psi, coordinate indices
    symmetry_defect: np.ndarray  # (...)


@dataclass
class BTensor:
    """Trace-free modified form b and its umbilic part"""
    b: np.ndarray
    c_part: np.ndarray
    trace_defect: np.ndarray
    symmetry_defect: np.ndarray


@dataclass
class PointInvariants:
    """Scalar invariants at each evaluated point"""
    h_norm2: np.ndarray
    B_norm2: np.ndarray
    H_norm2: np.ndarray
    norm_identity_residual: np.ndarray
    lagrangian_defect: np.ndarray
    h_symmetry_defect: np.ndarray
    b_trace_defect: np.ndarray
    b_symmetry_defect: np.ndarray
    gauss_residual: Optional[np.ndarray] = None

    FIELDS = ('h_norm2', 'B_norm2', 'H_norm2', 'norm_identity_residual', 'lagrangian_defect',
              'h_symmetry_defect', 'b_trace_defect', 'b_symmetry_defect', 'gauss_residual')

    def to_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS if getattr(self, name) is not None}


def _full_symmetry_defect(t):
    """max |t - t.transpose(perm)| over permutations of the last three axes"""
    base = t.ndim - 3
    worst = np.zeros(t.shape[:base])
    for perm in itertools.permutations(range(3)):
        moved = np.transpose(t, tuple(range(base)) + tuple(base + p for p in perm))
        worst = np.maximum(worst, np.abs(t - moved).reshape(t.shape[:base] + (-1,)).max(axis=-1))
    return worst


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def build_frame(model: AmbientModel, jet: Jet, G=None) -> Frame:
    """Gram-Schmidt on d_1 psi, ..., d_n psi in index order under the ambient metric"""
    if G is None:
        from app.services.ambient_service import metric_at
        G = metric_at(model, jet.value)
    T = jet.d1
    g = np.einsum('...ai,...ab,...bj->...ij', T, G, T, optimize=True)
    g = 0.5 * (g + np.swapaxes(g, -1, -2))

    limit = current_config().FRAME_CONDITION_LIMIT
    cond = np.linalg.cond(g)
    bad = ~(cond <= limit)
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0])
        raise DegenerateImmersionError(
            f"Induced metric condition number {float(np.max(np.where(np.isfinite(cond), cond, np.inf))):.3e} "
            f"exceeds {limit:.1e}", location=where)

    # Cholesky g = L L^T reproduces index-ordered Gram-Schmidt: e = T L^{-T}
    L = np.linalg.cholesky(g)
    P = np.swapaxes(np.linalg.inv(L), -1, -2)
    e = T @ P
    J = standard_complex_structure(model.n)
    estar = J @ e
    return Frame(e, estar, g, np.linalg.inv(g), P, G)


def frame_orthonormality_defect(frame: Frame):
    gram = np.einsum('...ai,...ab,...bj->...ij', frame.e, frame.ambient_metric, frame.e, optimize=True)
    return _scalar(np.abs(gram - np.eye(frame.n)).max(axis=(-1, -2)))


def lagrangian_defect(model: AmbientModel, jet: Jet, G=None):
    """max_{i<j} |omega(d_i psi, d_j psi)| / (|d_i psi| |d_j psi|)"""
    if G is None:
        from app.services.ambient_service import metric_at
        G = metric_at(model, jet.value)
    T = jet.d1
    omega = G @ standard_complex_structure(model.n)
    w = np.einsum('...ai,...ab,...bj->...ij', T, omega, T, optimize=True)
    lengths = np.sqrt(np.einsum('...ai,...ab,...bi->...i', T, G, T, optimize=True))
    normalized = np.abs(w) / (lengths[..., :, None] * lengths[..., None, :])
    n = jet.n
    if n < 2:
        return _scalar(np.zeros(T.shape[:-2]))
    iu = np.triu_indices(n, 1)
    return _scalar(normalized[..., iu[0], iu[1]].max(axis=-1))


def frame_complex_structure(model: AmbientModel, frame: Frame):
    """J in the adapted frame, J_AB = g(E_A, J E_B) with E = (e, estar)"""
    E = np.concatenate([frame.e, frame.estar], axis=-1)
    J = standard_complex_structure(model.n)
    return np.einsum('...aA,...ab,bc,...cB->...AB', E, frame.ambient_metric, J, E, optimize=True)


def _frame_metric(frame: Frame):
    E = np.concatenate([frame.e, frame.estar], axis=-1)
    return np.einsum('...aA,...ab,...bB->...AB', E, frame.ambient_metric, E, optimize=True)


def _normal_projector(frame: Frame, T):
    """I - T g^{-1} T^t G, acting on ambient vectors"""
    tangential = np.einsum('...ak,...kl,...bl,...bc->...ac', T, frame.g_inv, T, frame.ambient_metric, optimize=True)
    return np.eye(T.shape[-2]) - tangential


def second_fundamental_form(model: AmbientModel, jet: Jet, frame: Frame, amb: Optional[AmbientJet] = None) -> FundForms:
    """h^{m*}_{ij} = <D_{e_i} D_{e_j} psi, e_m*> and the mean curvature"""
    if jet.order < 2:
        raise ConfigurationError("Second fundamental form needs a jet of order >= 2")
    amb = amb if amb is not None else ambient_jet(model, jet.value)
    T = jet.d1
    D = jet.d2 + np.einsum('...abc,...bi,...cj->...aij', amb.gamma, T, T, optimize=True)
    N = _normal_projector(frame, T)
    hv = np.einsum('...ab,...bij->...aij', N, D)

    P = frame.coord_to_frame
    paired = np.einsum('...aij,...ab,...bm->...mij', hv, frame.ambient_metric, frame.estar, optimize=True)
    h = np.einsum('...mkl,...ki,...lj->...mij', paired, P, P, optimize=True)

    n = jet.n
    H = np.einsum('...ij,...aij->...a', frame.g_inv, hv) / n
    Hstar = np.einsum('...mii->...m', h) / n
    Hnorm2 = np.sum(Hstar ** 2, axis=-1)
    return FundForms(h, H, Hstar, Hnorm2, hv, _full_symmetry_defect(h))


def b_tensor(ff: FundForms, n: int) -> BTensor:
    """b = h - n/(n+2){H_m d_ij + H_i d_jm + H_j d_im}"""
    eye = np.eye(n)
    Hs = ff.Hstar
    c_part = n / (n + 2.0) * (np.einsum('...m,ij->...mij', Hs, eye)
                              + np.einsum('...i,jm->...mij', Hs, eye)
                              + np.einsum('...j,im->...mij', Hs, eye))
    b = ff.h - c_part
    trace_defect = np.abs(np.einsum('...mii->...m', b)).max(axis=-1)
    return BTensor(b, c_part, trace_defect, _full_symmetry_defect(b))


def point_invariants(ff: FundForms, b: BTensor, lag_defect=None, gauss=None) -> PointInvariants:
    n = ff.h.shape[-1]
    h_norm2 = np.sum(ff.h ** 2, axis=(-1, -2, -3))
    B_norm2 = np.sum(b.b ** 2, axis=(-1, -2, -3))
    eq3 = np.abs(B_norm2 - (h_norm2 - 3.0 * n * n / (n + 2.0) * ff.Hnorm2))
    if lag_defect is None:
        lag_defect = np.zeros_like(h_norm2)
    return PointInvariants(h_norm2, B_norm2, ff.Hnorm2, eq3, np.asarray(lag_defect, dtype=float),
                           ff.symmetry_defect, b.trace_defect, b.symmetry_defect,
                           None if gauss is None else np.asarray(gauss, dtype=float))


# ---------------------------------------------------------------------------
# Third-order quantities
# ---------------------------------------------------------------------------

@dataclass
class InducedJet:
    """Induced metric with two derivatives and its connection"""
    g: np.ndarray
    dg: np.ndarray      # (..., n, n, n), last index differentiates
    ddg: np.ndarray     # (..., n, n, n, n)
    gamma: np.ndarray
    d_gamma: np.ndarray


def induced_metric_jet(jet: Jet, amb: AmbientJet) -> InducedJet:
    """Derivatives of g_ij = <d_i psi, d_j psi>_G from an order-3 jet"""
    if jet.order < 3:
        raise ConfigurationError("Induced metric derivatives need a jet of order 3")
    G, dG, ddG = amb.metric, amb.d_metric, amb.dd_metric
    T, T2, T3 = jet.d1, jet.d2, jet.d3
    Gk = np.einsum('...abc,...ck->...abk', dG, T)
    Gkl = (np.einsum('...abcd,...ck,...dl->...abkl', ddG, T, T, optimize=True)
           + np.einsum('...abc,...ckl->...abkl', dG, T2))

    g = np.einsum('...ai,...ab,...bj->...ij', T, G, T, optimize=True)
    dg = (np.einsum('...aik,...ab,...bj->...ijk', T2, G, T, optimize=True)
          + np.einsum('...ai,...ab,...bjk->...ijk', T, G, T2, optimize=True)
          + np.einsum('...ai,...abk,...bj->...ijk', T, Gk, T, optimize=True))
    ddg = (np.einsum('...aikl,...ab,...bj->...ijkl', T3, G, T, optimize=True)
           + np.einsum('...aik,...abl,...bj->...ijkl', T2, Gk, T, optimize=True)
           + np.einsum('...aik,...ab,...bjl->...ijkl', T2, G, T2, optimize=True)
           + np.einsum('...ail,...ab,...bjk->...ijkl', T2, G, T2, optimize=True)
           + np.einsum('...ai,...abl,...bjk->...ijkl', T, Gk, T2, optimize=True)
           + np.einsum('...ai,...ab,...bjkl->...ijkl', T, G, T3, optimize=True)
           + np.einsum('...ail,...abk,...bj->...ijkl', T2, Gk, T, optimize=True)
           + np.einsum('...ai,...abkl,...bj->...ijkl', T, Gkl, T, optimize=True)
           + np.einsum('...ai,...abk,...bjl->...ijkl', T, Gk, T2, optimize=True))
    g_inv = np.linalg.inv(g)
    return InducedJet(g, dg, ddg, christoffel_symbols(g_inv, dg), christoffel_derivative(g_inv, dg, ddg))


def covariant_derivative_h(model: AmbientModel, jet: Jet, frame: Frame,
                           amb: Optional[AmbientJet] = None, induced: Optional[InducedJet] = None):
    """h^{m*}_{ijk} from an order-3 jet, plus the mean curvature vector jet.

    Returns ``(h3, (H, dH))`` where ``H`` is the ambient mean curvature
    vector and ``dH[..., A, a]`` its coordinate partial derivative along u_a.
    """
    amb = amb if amb is not None else ambient_jet(model, jet.value)
    induced = induced if induced is not None else induced_metric_jet(jet, amb)
    T, T2, T3 = jet.d1, jet.d2, jet.d3
    gam_t, dgam_t = amb.gamma, amb.d_gamma
    n = jet.n

    # D_ij = T2_ij + G~(T_i, T_j), its normal part hv = D - T_k Gamma^k_ij
    D = T2 + np.einsum('...abc,...bi,...cj->...aij', gam_t, T, T, optimize=True)
    dD = (T3
          + np.einsum('...abcd,...dk,...bi,...cj->...aijk', dgam_t, T, T, T, optimize=True)
          + np.einsum('...abc,...bik,...cj->...aijk', gam_t, T2, T, optimize=True)
          + np.einsum('...abc,...bi,...cjk->...aijk', gam_t, T, T2, optimize=True))
    hv = D - np.einsum('...al,...lij->...aij', T, induced.gamma)
    dhv = (dD
           - np.einsum('...alk,...lij->...aijk', T2, induced.gamma)
           - np.einsum('...al,...lijk->...aijk', T, induced.d_gamma))

    # ambient covariant derivative along d_k psi, then the induced-connection terms
    Dhv = dhv + np.einsum('...abc,...bk,...cij->...aijk', gam_t, T, hv, optimize=True)
    nabla = (Dhv
             - np.einsum('...lki,...alj->...aijk', induced.gamma, hv)
             - np.einsum('...lkj,...ail->...aijk', induced.gamma, hv))
    paired = np.einsum('...aijk,...ab,...bm->...mijk', nabla, frame.ambient_metric, frame.estar, optimize=True)
    P = frame.coord_to_frame
    h3 = np.einsum('...mabc,...ai,...bj,...ck->...mijk', paired, P, P, P, optimize=True)

    # mean curvature vector H = g^{ij} hv_ij / n and its ambient derivative
    g_inv = frame.g_inv
    d_ginv = -np.einsum('...ip,...pqk,...qj->...ijk', g_inv, induced.dg, g_inv, optimize=True)
    dH = (np.einsum('...ijk,...aij->...ak', d_ginv, hv) + np.einsum('...ij,...aijk->...ak', g_inv, dhv)) / n
    H = np.einsum('...ij,...aij->...a', g_inv, hv) / n
    return h3, (H, dH)


def maslov_endomorphisms(model: AmbientModel, jet: Jet, frame: Frame, h3, mean_jet, amb: AmbientJet):
    """Two independent frame matrices of nabla(JH)

    ``A1[m, l] = <nabla_{e_l} JH, e_m>`` from differentiating the ambient
    vector JH; ``A2 = -Hd`` with ``Hd[m, l] = (1/n) sum_i h^{m*}_{iil}``.
    """
    H, dH = mean_jet
    J = standard_complex_structure(model.n)
    JH = np.einsum('ab,...b->...a', J, H)
    DJH = np.einsum('ab,...bk->...ak', J, dH) + np.einsum('...abc,...bk,...c->...ak', amb.gamma, jet.d1, JH, optimize=True)
    paired = np.einsum('...ak,...ab,...bm->...mk', DJH, frame.ambient_metric, frame.e, optimize=True)
    A1 = np.einsum('...mk,...kl->...ml', paired, frame.coord_to_frame)
    n = jet.n
    Hd = np.einsum('...miil->...ml', h3) / n
    return A1, -Hd


def gauss_residual(model: AmbientModel, imap, u, engine=None, chart=0):
    """Larger max-norm residual of the Gauss and normal-curvature equations"""
    jet = evaluate_jet(imap, u, 3, engine, chart)
    amb = ambient_jet(model, jet.value)
    frame = build_frame(model, jet, amb.metric)
    ff = second_fundamental_form(model, jet, frame, amb)
    return _scalar(gauss_residual_from(model, jet, frame, ff, amb))


def gauss_residual_from(model: AmbientModel, jet: Jet, frame: Frame, ff: FundForms, amb: AmbientJet,
                        induced: Optional[InducedJet] = None):
    """Per-point Gauss residual from already computed pointwise data"""
    induced = induced if induced is not None else induced_metric_jet(jet, amb)
    n = jet.n
    R = riemann_tensor(induced.g, induced.dg, induced.ddg)
    P = frame.coord_to_frame
    R_frame = np.einsum('...abcd,...ai,...bj,...ck,...dl->...ijkl', R, P, P, P, P, optimize=True)

    K = space_form_tensor(model.c, _frame_metric(frame), frame_complex_structure(model, frame))
    h = ff.h
    tangential = K[..., :n, :n, :n, :n] + (np.einsum('...mjl,...mik->...ijkl', h, h)
                                          - np.einsum('...mil,...mjk->...ijkl', h, h))
    normal = K[..., n:, n:, :n, :n] + (np.einsum('...jlm,...imk->...ijkl', h, h)
                                      - np.einsum('...iml,...jmk->...ijkl', h, h))
    axes = (-1, -2, -3, -4)
    return np.maximum(np.abs(R_frame - tangential).max(axis=axes), np.abs(R_frame - normal).max(axis=axes))
