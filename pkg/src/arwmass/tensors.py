"""Pointwise tensor algebra on metric jets.

Everything here works on plain numpy arrays for a single point: the metric
``g``, its coordinate derivatives ``dg[c, a, b] = d_c g_ab`` and second
derivatives ``ddg[c, d, a, b] = d_c d_d g_ab``.  Index conventions:

    Gamma^a_bc   = 1/2 g^ad (d_b g_dc + d_c g_db - d_d g_bc)
    R^a_bcd      = d_c Gamma^a_bd - d_d Gamma^a_bc
                   + Gamma^a_ce Gamma^e_bd - Gamma^a_de Gamma^e_bc
    R_ab         = R^c_acb
    R            = g^ab R_ab
    G_ab         = R_ab - 1/2 R g_ab

With these signs the round unit n-sphere has scalar curvature n(n-1) > 0.
"""

from __future__ import annotations

import numpy as np


def christoffel(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Christoffel symbols Gamma[a, b, c] = Gamma^a_bc."""
    # bracket[d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
    bracket = np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    return 0.5 * np.einsum("ad,dbc->abc", g_inv, bracket)


def christoffel_derivative(
    g_inv: np.ndarray, dg: np.ndarray, ddg: np.ndarray
) -> np.ndarray:
    """Coordinate derivative dGamma[e, a, b, c] = d_e Gamma^a_bc."""
    bracket = np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    # d_e bracket[d,b,c] = dd_(e,b) g_dc + dd_(e,c) g_db - dd_(e,d) g_bc
    dbracket = (
        np.transpose(ddg, (0, 2, 1, 3))
        + np.transpose(ddg, (0, 2, 3, 1))
        - ddg
    )
    dg_inv = -np.einsum("am,emn,nd->ead", g_inv, dg, g_inv)
    return 0.5 * (
        np.einsum("ead,dbc->eabc", dg_inv, bracket)
        + np.einsum("ad,edbc->eabc", g_inv, dbracket)
    )


def riemann_up(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    """Riemann tensor R[a, b, c, d] = R^a_bcd."""
    term = np.transpose(dgamma, (1, 2, 0, 3))  # d_c Gamma^a_bd -> [a,b,c,d]
    quad = np.einsum("ace,ebd->abcd", gamma, gamma)
    r = term - np.transpose(term, (0, 1, 3, 2)) + quad - np.transpose(quad, (0, 1, 3, 2))
    return r


def ricci_from_riemann(riemann: np.ndarray) -> np.ndarray:
    return np.einsum("abad->bd", riemann)


def curvature_arrays(g: np.ndarray, dg: np.ndarray, ddg: np.ndarray):
    """Full curvature stack from metric jets.

    Returns (g_inv, gamma, riemann_up, riemann_lower, ricci, scalar, einstein).
    """
    g_inv = np.linalg.inv(g)
    gamma = christoffel(g_inv, dg)
    dgamma = christoffel_derivative(g_inv, dg, ddg)
    riem = riemann_up(gamma, dgamma)
    riem_low = np.einsum("ae,ebcd->abcd", g, riem)
    ricci = ricci_from_riemann(riem)
    scalar = float(np.einsum("bd,bd->", g_inv, ricci))
    einstein = ricci - 0.5 * scalar * g
    return g_inv, gamma, riem, riem_low, ricci, scalar, einstein
