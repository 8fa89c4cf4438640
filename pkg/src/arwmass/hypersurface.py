"""Spacelike graph hypersurfaces and their extrinsic geometry.

A graph M = { (u(theta1), theta) } over the spatial chart of a Gaussian-form
metric (geometry.py) is spacelike iff |Du|^2 = sigma^{ij} u_i u_j < 1.  All
quantities here refer to the past-directed unit normal, and the second
fundamental form is fixed by the Gaussian formula x^alpha_{;ij} = h_ij
nu^alpha; its tau-component gives

    e^{-psi_tilde} v^{-1} h_ij = -u_{;ij} - Gamma^0_00 u_i u_j
                                 - Gamma^0_0j u_i - Gamma^0_0i u_j
                                 - Gamma^0_ij

with u_{;ij} the Hessian of u in the induced metric.  With this orientation
a coordinate slice of an expanding chart has positive mean curvature.

Derivatives of the induced metric are exact: ambient jets (themselves exact)
composed with the symbolically differentiated graph function through the
chain rule.  The only finite differencing in the module is the surface
derivative of h entering the Codazzi residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import tensors
from .curvature import curvature_at
from .expr import Expression, differentiate, compile_expression, free_variables
from .fields import as_expression
from .geometry import (
    ARWSpec,
    GeometryError,
    SpacetimeMetric,
    _invert_metric,
    christoffel_at,
    metric_jets,
)

__all__ = [
    "HypersurfaceError",
    "GraphHypersurface",
    "ExtrinsicData",
    "SurfaceCurvature",
    "GaussCodazziResiduals",
    "graph_geometry",
    "second_fundamental",
    "intrinsic_curvature",
    "coordinate_slice_curvature",
    "gauss_codazzi_residuals",
    "conformal_extrinsic_residual",
]


class HypersurfaceError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class GraphHypersurface:
    """Rotationally symmetric graph u = u(theta1) over the spatial chart.

    ``u`` may be an Expression in theta1 or a plain number (a coordinate
    slice).  The time values u(theta1) must lie in the ambient chart's time
    domain; that is the caller's responsibility, while spacelikeness is
    checked pointwise by the geometry routines.
    """

    u: Expression
    ambient: SpacetimeMetric

    def __post_init__(self):
        u = as_expression(self.u)
        extra = free_variables(u) - {"theta1"}
        if extra:
            raise HypersurfaceError(
                f"graph function may depend on theta1 only, found {sorted(extra)}"
            )
        object.__setattr__(self, "u", u)

    @cached_property
    def _u_derivatives(self) -> tuple:
        exprs = [self.u]
        for _ in range(3):
            exprs.append(differentiate(exprs[-1], "theta1"))
        return tuple(compile_expression(e, ("theta1",)) for e in exprs)

    def u_jet(self, theta1: float) -> np.ndarray:
        """(u, u', u'', u''') at theta1."""
        return np.array([fn(theta1) for fn in self._u_derivatives])

    def event(self, node) -> np.ndarray:
        node = np.asarray(node, dtype=float)
        return np.concatenate(([self._u_derivatives[0](float(node[0]))], node))


@dataclass(frozen=True)
class ExtrinsicData:
    """Hypersurface data at one node of the spatial chart.

    ``h``, ``mean_curvature`` and ``norm_a_sq`` are populated by
    :func:`second_fundamental` and left None by :func:`graph_geometry`.
    """

    node: np.ndarray
    event: np.ndarray
    induced_metric: np.ndarray
    inverse: np.ndarray
    tilt: float  # v = sqrt(1 - |Du|^2)
    past_normal: np.ndarray  # nu^alpha
    tangents: np.ndarray  # x^alpha_i, shape (n+1, n)
    psi_tilde: float
    h: np.ndarray | None = None
    mean_curvature: float | None = None
    norm_a_sq: float | None = None


@dataclass(frozen=True)
class SurfaceCurvature:
    """Intrinsic curvature stack of the induced metric at one node."""

    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray
    riemann_lower: np.ndarray
    ricci: np.ndarray
    scalar: float


@dataclass(frozen=True)
class GaussCodazziResiduals:
    gauss_trace: float
    gauss_full: float
    codazzi: float


# ---------------------------------------------------------------------------
# First fundamental form


@dataclass(frozen=True)
class _Frame:
    node: np.ndarray
    event: np.ndarray
    u_jet: np.ndarray
    psi_tilde: float
    sigma: np.ndarray
    sigma_inv: np.ndarray
    tilt: float
    g: np.ndarray
    g_inv: np.ndarray
    nu: np.ndarray
    tangents: np.ndarray


def _frame(surface: GraphHypersurface, node) -> _Frame:
    node = np.asarray(node, dtype=float)
    n = surface.ambient.n
    if node.shape != (n,):
        raise HypersurfaceError(f"node must supply {n} angles, got shape {node.shape}")
    jet = surface.u_jet(float(node[0]))
    event = np.concatenate(([jet[0]], node))
    g_amb = metric_jets(surface.ambient, event, order=0)[0]
    p = surface.ambient.psi_tilde.partial(event, ())
    scale = math.exp(2.0 * p)
    sigma = g_amb[1:, 1:] / scale
    sigma_inv = _invert_metric(sigma, event)

    du = np.zeros(n)
    du[0] = jet[1]
    du_sq = float(du @ sigma_inv @ du)
    if du_sq >= 1.0:
        raise HypersurfaceError(
            f"graph not spacelike at node {node.tolist()}: |Du|^2 = {du_sq:.6f}"
        )
    v = math.sqrt(1.0 - du_sq)

    g = scale * (sigma - np.outer(du, du))
    g_inv = _invert_metric(g, event)
    nu = np.empty(n + 1)
    nu[0] = 1.0
    nu[1:] = sigma_inv @ du
    nu *= -1.0 / (v * math.exp(p))
    tangents = np.zeros((n + 1, n))
    tangents[0, :] = du
    tangents[1:, :] = np.eye(n)
    return _Frame(
        node=node,
        event=event,
        u_jet=jet,
        psi_tilde=p,
        sigma=sigma,
        sigma_inv=sigma_inv,
        tilt=v,
        g=g,
        g_inv=g_inv,
        nu=nu,
        tangents=tangents,
    )


def graph_geometry(surface: GraphHypersurface, node) -> ExtrinsicData:
    """Induced metric, tilt factor and past-directed unit normal at ``node``.

    Raises HypersurfaceError (naming node and |Du|^2) where the graph fails
    to be spacelike.
    """
    fr = _frame(surface, node)
    return ExtrinsicData(
        node=fr.node,
        event=fr.event,
        induced_metric=fr.g,
        inverse=fr.g_inv,
        tilt=fr.tilt,
        past_normal=fr.nu,
        tangents=fr.tangents,
        psi_tilde=fr.psi_tilde,
    )


# ---------------------------------------------------------------------------
# Exact jets of the induced metric


def _induced_jets(surface: GraphHypersurface, node, order: int = 2):
    """g_ij of the graph with surface-coordinate derivatives to ``order``.

    Writes the induced metric as F_ij(u(theta), theta) - T_ij with
    F_ij the ambient spatial block and T_ij = e^{2 psi_tilde} u_i u_j, and
    pushes exact ambient jets through the chain rule; u enters with up to
    three symbolic derivatives.
    """
    node = np.asarray(node, dtype=float)
    n = surface.ambient.n
    dim = n + 1
    jet = surface.u_jet(float(node[0]))
    event = np.concatenate(([jet[0]], node))
    g, dg, ddg = metric_jets(surface.ambient, event, order=order)
    fld = surface.ambient.psi_tilde
    p0 = fld.partial(event, ())
    E0 = math.exp(2.0 * p0)
    w, wp, wpp = jet[1], jet[2], jet[3]

    uk = np.zeros(n)
    uk[0] = w
    ukl = np.zeros((n, n))
    ukl[0, 0] = wp

    sp = slice(1, None)
    T0 = np.zeros((n, n))
    T0[0, 0] = E0 * w**2
    ghat = g[sp, sp] - T0
    if order < 1:
        return ghat, None, None

    p1 = np.array([fld.partial(event, (c,)) for c in range(dim)])
    phat = p1[0] * uk + p1[1:]
    dE = 2.0 * phat * E0

    dF = dg[0, sp, sp][None, :, :] * uk[:, None, None] + dg[sp, sp, sp]
    dT = np.zeros((n, n, n))
    dT[:, 0, 0] = dE * w**2
    dT[0, 0, 0] += E0 * 2.0 * w * wp
    dghat = dF - dT
    if order < 2:
        return ghat, dghat, None

    p2 = np.zeros((dim, dim))
    for c in range(dim):
        for d in range(c, dim):
            p2[c, d] = p2[d, c] = fld.partial(event, (c, d))
    phat2 = np.empty((n, n))
    for k in range(n):
        for l in range(n):
            phat2[k, l] = (
                p2[0, 0] * uk[k] * uk[l]
                + p2[0, l + 1] * uk[k]
                + p2[0, k + 1] * uk[l]
                + p1[0] * ukl[k, l]
                + p2[k + 1, l + 1]
            )
    ddE = (4.0 * np.outer(phat, phat) + 2.0 * phat2) * E0

    ddF = np.empty((n, n, n, n))
    for k in range(n):
        for l in range(n):
            ddF[k, l] = (
                ddg[0, 0, sp, sp] * uk[k] * uk[l]
                + ddg[0, l + 1, sp, sp] * uk[k]
                + ddg[0, k + 1, sp, sp] * uk[l]
                + dg[0, sp, sp] * ukl[k, l]
                + ddg[k + 1, l + 1, sp, sp]
            )
    ddT = np.zeros((n, n, n, n))
    ddT[:, :, 0, 0] = ddE * w**2
    ddT[0, :, 0, 0] += dE * 2.0 * w * wp
    ddT[:, 0, 0, 0] += dE * 2.0 * w * wp
    ddT[0, 0, 0, 0] += E0 * 2.0 * (wp**2 + w * wpp)
    ddghat = ddF - ddT
    return ghat, dghat, ddghat


def intrinsic_curvature(surface: GraphHypersurface, node) -> SurfaceCurvature:
    """Riemann/Ricci/scalar curvature of the induced metric, all exact."""
    fr = _frame(surface, node)  # validates spacelikeness
    ghat, dghat, ddghat = _induced_jets(surface, node, order=2)
    gamma = tensors.christoffel(fr.g_inv, dghat)
    dgamma = tensors.christoffel_derivative(fr.g_inv, dghat, ddghat)
    riem = tensors.riemann_up(gamma, dgamma)
    riem_low = np.einsum("ae,ebcd->abcd", ghat, riem)
    ricci = tensors.ricci_from_riemann(riem)
    scalar = float(np.einsum("bd,bd->", fr.g_inv, ricci))
    return SurfaceCurvature(
        g=ghat,
        g_inv=fr.g_inv,
        christoffel=gamma,
        riemann_lower=riem_low,
        ricci=ricci,
        scalar=scalar,
    )


# ---------------------------------------------------------------------------
# Second fundamental form


def second_fundamental(surface: GraphHypersurface, node) -> ExtrinsicData:
    """Extrinsic data including h_ij, H and |A|^2 at ``node``."""
    fr = _frame(surface, node)
    n = surface.ambient.n
    _, dghat, _ = _induced_jets(surface, node, order=1)
    gamma_hat = tensors.christoffel(fr.g_inv, dghat)

    uk = np.zeros(n)
    uk[0] = fr.u_jet[1]
    ukl = np.zeros((n, n))
    ukl[0, 0] = fr.u_jet[2]
    u_hess = ukl - np.einsum("kij,k->ij", gamma_hat, uk)

    g0 = christoffel_at(surface.ambient, fr.event)[0]
    rhs = -(
        u_hess
        + g0[0, 0] * np.outer(uk, uk)
        + np.outer(uk, g0[0, 1:])
        + np.outer(g0[0, 1:], uk)
        + g0[1:, 1:]
    )
    h = math.exp(fr.psi_tilde) * fr.tilt * rhs
    mixed = fr.g_inv @ h
    return ExtrinsicData(
        node=fr.node,
        event=fr.event,
        induced_metric=fr.g,
        inverse=fr.g_inv,
        tilt=fr.tilt,
        past_normal=fr.nu,
        tangents=fr.tangents,
        psi_tilde=fr.psi_tilde,
        h=h,
        mean_curvature=float(np.trace(mixed)),
        norm_a_sq=float(np.einsum("ij,ji->", mixed, mixed)),
    )


def coordinate_slice_curvature(metric: SpacetimeMetric, tau: float):
    """Second fundamental form field of the slice {tau = const}.

    Returns a callable node -> hbar_ij built from the slice formula

        hbar_ij = e^{psi_tilde} ( -sigma_dot_ij / 2 - psi_tilde_dot sigma_ij )

    which shares no code with the graph route in second_fundamental and so
    serves as an independent cross-check for u = const.
    """
    n = metric.n

    def field(node) -> np.ndarray:
        node = np.asarray(node, dtype=float)
        event = np.concatenate(([tau], node))
        p = metric.psi_tilde.partial(event, ())
        pdot = metric.psi_tilde.partial(event, (0,))
        sig = np.empty((n, n))
        sigdot = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                sig[i, j] = metric.sigma[i][j].partial(event, ())
                sigdot[i, j] = metric.sigma[i][j].partial(event, (0,))
        return math.exp(p) * (-0.5 * sigdot - pdot * sig)

    return field


# ---------------------------------------------------------------------------
# Gauss and Codazzi residuals


def gauss_codazzi_residuals(
    surface: GraphHypersurface, node, fd_step: float = 0.01
) -> GaussCodazziResiduals:
    """Residuals of the Gauss and Codazzi equations at ``node``.

    gauss_full:  max | R_ijkl + (h_ik h_jl - h_il h_jk) - Rbar pullback |
    gauss_trace: | R + (H^2 - |A|^2) - 2 G_ab nu^a nu^b |
    codazzi:     max | h_ij;k - h_ik;j - Rbar(nu, x_i, x_j, x_k) |

    Both sides of each identity are computed independently.  The partial
    derivative of h entering the Codazzi covariant derivative uses five-point
    central differences of step ``fd_step`` (error ~ fd_step^4), everything
    else is exact.
    """
    ext = second_fundamental(surface, node)
    curv = intrinsic_curvature(surface, node)
    amb = curvature_at(surface.ambient, ext.event)
    x = ext.tangents
    nu = ext.past_normal
    h = ext.h

    pull = np.einsum("abcd,ai,bj,ck,dl->ijkl", amb.riemann_lower, x, x, x, x)
    hh = np.einsum("ik,jl->ijkl", h, h) - np.einsum("il,jk->ijkl", h, h)
    gauss_full = float(np.max(np.abs(curv.riemann_lower + hh - pull)))

    g_nu_nu = float(nu @ amb.einstein @ nu)
    gauss_trace = abs(
        curv.scalar + (ext.mean_curvature**2 - ext.norm_a_sq) - 2.0 * g_nu_nu
    )

    n = surface.ambient.n
    dh = np.empty((n, n, n))
    for k in range(n):
        stencil = []
        for m in (-2, -1, 1, 2):
            shifted = np.array(node, dtype=float)
            shifted[k] += m * fd_step
            stencil.append(second_fundamental(surface, shifted).h)
        dh[k] = (stencil[0] - 8.0 * stencil[1] + 8.0 * stencil[2] - stencil[3]) / (
            12.0 * fd_step
        )
    grad_h = (
        dh
        - np.einsum("mki,mj->kij", curv.christoffel, h)
        - np.einsum("mkj,im->kij", curv.christoffel, h)
    )
    h_ij_k = grad_h.transpose(1, 2, 0)  # h_ij;k
    rbar_nu = np.einsum("abcd,a,bi,cj,dk->ijk", amb.riemann_lower, nu, x, x, x)
    codazzi = float(np.max(np.abs(h_ij_k - h_ij_k.transpose(0, 2, 1) - rbar_nu)))
    return GaussCodazziResiduals(
        gauss_trace=gauss_trace, gauss_full=gauss_full, codazzi=codazzi
    )


def conformal_extrinsic_residual(spec: ARWSpec, u, node) -> float:
    """Residual of the conformal relation between second fundamental forms.

    For the same graph read in the full metric and in the conformally
    rescaled chart metric -dtau^2 + sigma,

        e^{psi_tilde} h^j_i = htilde^j_i + psi_tilde_alpha nutilde^alpha delta^j_i,

    with nutilde the past-directed unit normal of the conformal chart.
    Returns the max-abs entry of the difference; both sides are evaluated
    through their own metrics.
    """
    surf = GraphHypersurface(u=u, ambient=spec.metric)
    surf_conf = GraphHypersurface(u=u, ambient=spec.conformal_metric)
    ext = second_fundamental(surf, node)
    ext_conf = second_fundamental(surf_conf, node)

    mixed = ext.inverse @ ext.h
    mixed_conf = ext_conf.inverse @ ext_conf.h
    fld = spec.metric.psi_tilde
    dpsi = np.array([fld.partial(ext.event, (c,)) for c in range(spec.n + 1)])
    drift = float(dpsi @ ext_conf.past_normal)
    res = math.exp(ext.psi_tilde) * mixed - mixed_conf - drift * np.eye(spec.n)
    return float(np.max(np.abs(res)))
