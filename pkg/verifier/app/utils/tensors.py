"""
Christoffel symbols and Riemann tensors from metric derivatives.

Index conventions (all arrays carry leading batch axes):
    dg[..., a, b, c]        = d_c g_ab
    ddg[..., a, b, c, d]    = d_d d_c g_ab
    gamma[..., a, b, c]     = Gamma^a_bc
    dgamma[..., a, b, c, d] = d_d Gamma^a_bc
    riemann[..., a, b, c, d] = <R(d_c, d_d) d_b, d_a>, so that
    riemann[a, b, a, b] is the sectional curvature times |d_a ^ d_b|^2.
"""
import numpy as np


def _first_kind(dg):
    # F_dbc = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    return 0.5 * (np.swapaxes(dg, -1, -2) + dg - np.einsum('...bcd->...dbc', dg))


def christoffel_symbols(g_inv, dg):
    """Levi-Civita symbols Gamma^a_bc"""
    return np.einsum('...ad,...dbc->...abc', g_inv, _first_kind(dg))


def christoffel_derivative(g_inv, dg, ddg):
    """d_e Gamma^a_bc from first and second metric derivatives"""
    first = _first_kind(dg)
    dfirst = 0.5 * (np.einsum('...dcbe->...dbce', ddg) + ddg - np.einsum('...bcde->...dbce', ddg))
    dg_inv = -np.einsum('...ap,...pqe,...qd->...ade', g_inv, dg, g_inv, optimize=True)
    return np.einsum('...ade,...dbc->...abce', dg_inv, first) + np.einsum('...ad,...dbce->...abce', g_inv, dfirst)


def riemann_tensor(g, dg, ddg):
    """Fully covariant Riemann tensor R_abcd"""
    g_inv = np.linalg.inv(g)
    gamma = christoffel_symbols(g_inv, dg)
    dgamma = christoffel_derivative(g_inv, dg, ddg)
    # R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
    mixed = (np.einsum('...adbc->...abcd', dgamma)
             - np.einsum('...acbd->...abcd', dgamma)
             + np.einsum('...ace,...edb->...abcd', gamma, gamma)
             - np.einsum('...ade,...ecb->...abcd', gamma, gamma))
    return np.einsum('...ae,...ebcd->...abcd', g, mixed)


def space_form_tensor(c, g, j_lower):
    """c{g_AC g_BD - g_AD g_BC + J_AC J_BD - J_AD J_BC + 2 J_AB J_CD}

    ``j_lower`` is J with its upper index lowered, J_AB = g(e_A, J e_B); in an
    orthonormal frame both ``g`` and ``j_lower`` are the plain matrices.
    """
    c = np.asarray(c, dtype=float)[..., None, None, None, None]
    gg = np.einsum('...ac,...bd->...abcd', g, g)
    jj = np.einsum('...ac,...bd->...abcd', j_lower, j_lower)
    return c * (gg - np.einsum('...abcd->...abdc', gg)
                + jj - np.einsum('...abcd->...abdc', jj)
                + 2.0 * np.einsum('...ab,...cd->...abcd', j_lower, j_lower))
