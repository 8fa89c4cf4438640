"""The mass functional and its invariance properties.

Slice and graph mass integrals

    I(tau) = int_M G_ab nu^a nu^b e^{omega f} e^{psi} dmu,

their extrapolated limit toward the singularity, the divergence-theorem
balance over a slab (which is the mechanism behind existence of the limit),
a monotonicity scan, the timelike convergence condition check, and the two
gauge moves (spatial normalization and time reparametrization) under which
the recovered mass must not change.

All spatial integrals exploit the rotational symmetry of the admitted
perturbations: integrands depend on theta1 only, so an n-dimensional slice
integral reduces to a one-dimensional Gauss-Legendre sum against the round
measure (geometry.integrate_rotationally_symmetric).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curvature import curvature_at
from .expr import Call, Num, Var, compile_expression, fold_constants, substitute
from .extrapolate import aitken_limit
from .fields import ExprField, ShiftedScaledTimeFunction, TimeFunction, as_time_function
from .geometry import (
    ARWSpec,
    ConditionReport,
    GeometryError,
    QuadratureGrid,
    SpacetimeMetric,
    geometric_schedule,
    integrate_rotationally_symmetric,
    quadrature_grid,
    sample_events,
    sphere_volume,
)
from .hypersurface import (
    ExtrinsicData,
    GraphHypersurface,
    coordinate_slice_curvature,
    graph_geometry,
)

__all__ = [
    "MassReport",
    "SlabBalance",
    "MonotonicityReport",
    "TccReport",
    "slice_mass_integral",
    "graph_mass_integral",
    "mass_limit",
    "slab_balance",
    "monotonicity_scan",
    "tcc_check",
    "normalize",
    "reparametrize_time",
]

# interior values for the angles a rotationally symmetric integrand ignores
_FILL_ANGLE = 1.1


@dataclass(frozen=True)
class MassReport:
    sample_times: tuple
    integrals: tuple
    limit: float
    m_hat: float
    error_estimate: float
    monotone: bool


@dataclass(frozen=True)
class SlabBalance:
    tau1: float
    tau2: float
    b1: float
    b2: float
    volume: float
    residual: float  # |B2 - B1 - V| / max(|B1|, |B2|, |V|, 1)


@dataclass(frozen=True)
class MonotonicityReport:
    sample_times: tuple
    integrals: tuple
    direction: str  # "increasing" | "decreasing" | "constant" | "none"
    monotone: bool
    probes: tuple


@dataclass(frozen=True)
class TccReport:
    minimum: float
    passed: bool
    samples: int
    violations: tuple  # (event, direction, value) triples


# ---------------------------------------------------------------------------
# Mass integrals


@dataclass(frozen=True)
class _Weights:
    """Weight data e^{omega f} e^{psi} shared by the mass integrands.

    A bare SpacetimeMetric is admitted for curvature-only checks (flat
    ambients and the like): the weight degenerates to 1 and no domain is
    enforced.
    """

    metric: SpacetimeMetric
    n: int
    omega: float
    f: TimeFunction
    psi: ExprField
    a: float | None

    def check_time(self, tau: float) -> None:
        if self.a is not None and not (self.a - 1e-12 <= tau < 0.0):
            raise GeometryError(f"tau = {tau} outside the domain [{self.a}, 0)")

    def log_weight(self, event: np.ndarray) -> float:
        return self.omega * self.f.value(event[0]) + self.psi.partial(event, ())


def _weights(obj) -> _Weights:
    if isinstance(obj, ARWSpec):
        return _Weights(
            metric=obj.metric,
            n=obj.n,
            omega=obj.omega,
            f=obj.f,
            psi=ExprField(obj.psi, obj.n + 1),
            a=obj.a,
        )
    if isinstance(obj, SpacetimeMetric):
        return _Weights(
            metric=obj,
            n=obj.n,
            omega=0.0,
            f=as_time_function(0.0),
            psi=ExprField(Num(0.0), obj.n + 1),
            a=None,
        )
    raise TypeError(f"expected an ARWSpec or SpacetimeMetric, got {type(obj).__name__}")


def slice_mass_integral(spec, tau: float, grid: QuadratureGrid | None = None) -> float:
    """I(tau) over the coordinate slice, with the slice unit normal.

    The integrand G_ab nu^a nu^b e^{omega f} e^{psi} is paired with the area
    element e^{n psi_tilde} sqrt(det sigma) of the slice.
    """
    w = _weights(spec)
    w.check_time(tau)
    grid = grid or quadrature_grid(w.n)
    metric = w.metric
    n = w.n

    def fn(theta1: float) -> float:
        event = np.full(n + 1, _FILL_ANGLE)
        event[0] = tau
        event[1] = theta1
        bundle = curvature_at(metric, event)
        p = metric.psi_tilde.partial(event, ())
        g_nu_nu = bundle.einstein[0, 0] * math.exp(-2.0 * p)
        sig11 = metric.sigma[0][0].partial(event, ())
        return (
            g_nu_nu
            * math.exp(w.log_weight(event))
            * math.exp(n * p)
            * sig11 ** (n / 2.0)
        )

    return integrate_rotationally_symmetric(grid, fn)


def _graph_integral(
    w: _Weights,
    surface: GraphHypersurface,
    grid: QuadratureGrid,
    factor: Callable[[ExtrinsicData], float],
) -> float:
    """sum of factor(ext) * e^{omega f} e^{psi} over the graph's area element.

    The graph area element is e^{n psi_tilde} v sqrt(det sigma); the round
    part of sqrt(det sigma) is supplied by the reduced quadrature.
    """
    n = w.n
    metric = surface.ambient

    def fn(theta1: float) -> float:
        node = np.full(n, _FILL_ANGLE)
        node[0] = theta1
        ext = graph_geometry(surface, node)
        w.check_time(ext.event[0])
        sig11 = metric.sigma[0][0].partial(ext.event, ())
        return (
            factor(ext)
            * math.exp(w.log_weight(ext.event))
            * math.exp(n * ext.psi_tilde)
            * ext.tilt
            * sig11 ** (n / 2.0)
        )

    return integrate_rotationally_symmetric(grid, fn)


def graph_mass_integral(
    spec, surface: GraphHypersurface, grid: QuadratureGrid | None = None
) -> float:
    """The mass integrand over a spacelike graph with its own normal."""
    w = _weights(spec)
    grid = grid or quadrature_grid(w.n)

    def factor(ext: ExtrinsicData) -> float:
        bundle = curvature_at(surface.ambient, ext.event)
        nu = ext.past_normal
        return float(nu @ bundle.einstein @ nu)

    return _graph_integral(w, surface, grid, factor)


def mass_limit(
    spec: ARWSpec,
    grid: QuadratureGrid | None = None,
    schedule=None,
) -> MassReport:
    """I(tau_k) on a geometric schedule, Aitken-extrapolated to the limit.

    m_hat = 2 I_infinity / (n(n-1)|S^n|); the error estimate is the size of
    the last Aitken correction, and the monotone flag records whether the
    sampled sequence is nondecreasing.
    """
    grid = grid or quadrature_grid(spec.n)
    if schedule is None:
        schedule = geometric_schedule(spec.a, 10)
    times = np.asarray(schedule, dtype=float)
    if times.size < 3:
        raise GeometryError("mass extrapolation needs at least 3 samples")
    integrals = np.array([slice_mass_integral(spec, t, grid) for t in times])
    limit, err = aitken_limit(integrals)
    scale = float(np.max(np.abs(integrals)))
    monotone = bool(np.all(np.diff(integrals) >= -1e-12 * max(scale, 1.0)))
    m_hat = 2.0 * limit / (spec.n * (spec.n - 1) * sphere_volume(spec.n))
    return MassReport(
        sample_times=tuple(times),
        integrals=tuple(integrals),
        limit=float(limit),
        m_hat=float(m_hat),
        error_estimate=float(err),
        monotone=monotone,
    )


# ---------------------------------------------------------------------------
# Slab balance (the divergence-theorem identity behind the limit)


def slab_balance(
    spec, tau1: float, tau2: float, grid: QuadratureGrid | None = None
) -> SlabBalance:
    """Balance B2 - B1 = V over the slab [tau1, tau2] x S_0.

    B_i are the mass integrals of the bounding slices, taken with the slice
    normal eta (the future-directed field (eta_alpha) = e^{psi_tilde}(-1,0,..);
    the integrand is even in the normal, so this agrees with the past-normal
    mass integrand).  V integrates

        [ G^{ij} hbar_ij + G^{00}(omega f' + psi') e^{psi_tilde} ] e^{omega f} e^{psi}

    against the spacetime volume element e^{(n+1) psi_tilde} sqrt(det sigma).
    The residual is |B2 - B1 - V| relative to max(|B1|, |B2|, |V|, 1).
    """
    w = _weights(spec)
    w.check_time(tau1)
    w.check_time(tau2)
    if not tau1 < tau2:
        raise GeometryError(f"need tau1 < tau2, got {tau1}, {tau2}")
    grid = grid or quadrature_grid(w.n)
    metric = w.metric
    n = w.n

    b1 = slice_mass_integral(spec, tau1, grid)
    b2 = slice_mass_integral(spec, tau2, grid)

    # Gauss-Legendre in tau across the slab
    x, gw = np.polynomial.legendre.leggauss(grid.nodes_per_axis)
    half = 0.5 * (tau2 - tau1)
    taus = tau1 + half * (x + 1.0)
    weights = half * gw

    volume = 0.0
    for tau, wt in zip(taus, weights):
        hbar = coordinate_slice_curvature(metric, float(tau))
        fp = w.f.derivative(float(tau), 1)

        def fn(theta1: float) -> float:
            event = np.full(n + 1, _FILL_ANGLE)
            event[0] = tau
            event[1] = theta1
            bundle = curvature_at(metric, event)
            g_up = bundle.g_inv @ bundle.einstein @ bundle.g_inv
            p = metric.psi_tilde.partial(event, ())
            psi_dot = w.psi.partial(event, (0,))
            spatial = float(np.einsum("ij,ij->", g_up[1:, 1:], hbar(event[1:])))
            time_part = g_up[0, 0] * (w.omega * fp + psi_dot) * math.exp(p)
            sig11 = metric.sigma[0][0].partial(event, ())
            return (
                (spatial + time_part)
                * math.exp(w.log_weight(event))
                * math.exp((n + 1) * p)
                * sig11 ** (n / 2.0)
            )

        volume += wt * integrate_rotationally_symmetric(grid, fn)

    residual = abs(b2 - b1 - volume) / max(abs(b1), abs(b2), abs(volume), 1.0)
    return SlabBalance(
        tau1=tau1, tau2=tau2, b1=b1, b2=b2, volume=volume, residual=residual
    )


# ---------------------------------------------------------------------------
# Monotonicity scan and the timelike convergence condition


def _direction(integrals: np.ndarray) -> str:
    scale = max(float(np.max(np.abs(integrals))), 1.0)
    diffs = np.diff(integrals)
    tol = 1e-11 * scale
    if np.all(np.abs(diffs) <= tol):
        return "constant"
    if np.all(diffs >= -tol):
        return "increasing"
    if np.all(diffs <= tol):
        return "decreasing"
    return "none"


def monotonicity_scan(
    spec: ARWSpec,
    schedule=None,
    grid: QuadratureGrid | None = None,
) -> MonotonicityReport:
    """I(tau_k) together with the sufficient-condition probes.

    The probes (f' < 0, G^00 >= 0, G^{ij} and hbar_ij positive semidefinite,
    omega = 0, psi = 0) are diagnostics only: they are sufficient for
    monotonicity, never necessary, and the report states the observed
    direction of I independently of them.
    """
    grid = grid or quadrature_grid(spec.n)
    if schedule is None:
        schedule = geometric_schedule(spec.a, 10)
    times = np.asarray(schedule, dtype=float)
    metric = spec.metric
    n = spec.n

    integrals = np.array([slice_mass_integral(spec, t, grid) for t in times])

    fp = np.array([spec.f.derivative(float(t), 1) for t in times])
    min_g00 = math.inf
    min_gij = math.inf
    min_hbar = math.inf
    for tau in times:
        hbar = coordinate_slice_curvature(metric, float(tau))
        for theta1 in grid.axis_nodes[0][::4]:
            event = np.full(n + 1, _FILL_ANGLE)
            event[0] = tau
            event[1] = theta1
            bundle = curvature_at(metric, event)
            g_up = bundle.g_inv @ bundle.einstein @ bundle.g_inv
            min_g00 = min(min_g00, float(g_up[0, 0]))
            min_gij = min(min_gij, float(np.linalg.eigvalsh(g_up[1:, 1:])[0]))
            min_hbar = min(min_hbar, float(np.linalg.eigvalsh(hbar(event[1:]))[0]))

    psi_zero = fold_constants(spec.psi) == Num(0.0)
    probes = (
        ConditionReport(
            name="lapse-negative",
            passed=bool(np.all(fp < 0.0)),
            detail=f"max f' = {fp.max():.3e}",
        ),
        ConditionReport(
            name="energy-density",
            passed=min_g00 >= -1e-10,
            detail=f"min G^00 = {min_g00:.3e}",
        ),
        ConditionReport(
            name="spatial-stress",
            passed=min_gij >= -1e-10,
            detail=f"min eig G^ij = {min_gij:.3e}",
        ),
        ConditionReport(
            name="slice-convexity",
            passed=min_hbar >= -1e-10,
            detail=f"min eig hbar = {min_hbar:.3e}",
        ),
        ConditionReport(
            name="omega-zero",
            passed=spec.omega == 0.0,
            detail=f"omega = {spec.omega}",
        ),
        ConditionReport(name="psi-zero", passed=psi_zero, detail=f"psi zero: {psi_zero}"),
    )
    direction = _direction(integrals)
    return MonotonicityReport(
        sample_times=tuple(times),
        integrals=tuple(integrals),
        direction=direction,
        monotone=direction != "none",
        probes=probes,
    )


def tcc_check(
    spec: ARWSpec,
    events=None,
    directions_per_event: int = 32,
    seed: int = 0,
    tol: float = 1e-9,
) -> TccReport:
    """Minimum of Ric(nu, nu) over random unit timelike directions.

    Directions are boost-parameterized in an orthonormal frame,
    nu = cosh(chi) e_0 + sinh(chi) d^i e_i with |d| = 1; chi = 0 (the slice
    normal itself) is always included.  Events below -tol are reported as
    violations of the timelike convergence condition.
    """
    if directions_per_event < 32:
        raise GeometryError("need at least 32 directions per event")
    if events is None:
        if not isinstance(spec, ARWSpec):
            raise GeometryError("events are required when passing a bare metric")
        events = sample_events(spec, 100, seed=seed)
    rng = np.random.default_rng(seed + 1)
    w = _weights(spec)
    metric = w.metric
    n = w.n

    minimum = math.inf
    samples = 0
    violations = []
    for event in np.asarray(events, dtype=float):
        bundle = curvature_at(metric, event)
        p = metric.psi_tilde.partial(event, ())
        frame = np.zeros((n + 1, n + 1))  # frame[k] = hatted basis vector k
        frame[0, 0] = math.exp(-p)
        for i in range(n):
            sig = metric.sigma[i][i].partial(event, ())
            frame[i + 1, i + 1] = math.exp(-p) / math.sqrt(sig)
        chis = np.concatenate(([0.0], rng.uniform(0.0, 2.5, directions_per_event - 1)))
        for chi in chis:
            d = rng.normal(size=n)
            d /= np.linalg.norm(d)
            nu = math.cosh(chi) * frame[0] + math.sinh(chi) * (d @ frame[1:])
            value = float(nu @ bundle.ricci @ nu)
            samples += 1
            if value < minimum:
                minimum = value
            if value < -tol:
                violations.append((tuple(event), tuple(nu), value))
    return TccReport(
        minimum=minimum,
        passed=minimum >= -tol,
        samples=samples,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# Gauge moves


def normalize(spec: ARWSpec, grid: QuadratureGrid | None = None):
    """Rescale the spatial metric to unit-sphere volume.

    Returns (spec', scale) with sigma_bar -> scale * sigma_bar.  Keeping the
    spacetime fixed as a tensor forces the companion moves

        f(tau) -> f(tau / sqrt(scale)) - log(scale)/2,   a -> sqrt(scale) a,

    i.e. the time coordinate stretches by sqrt(scale) while the conformal
    factor sheds the constant the spatial rescale absorbed.  psi and lambda
    are reparametrized accordingly.  The limiting spatial volume uses the
    lambda-profile at tau = 0, where admissible perturbations vanish.
    """
    grid = grid or quadrature_grid(spec.n)
    lam0 = fold_constants(substitute(spec.lam, "tau", Num(0.0)))
    lam_fn = compile_expression(lam0, ("theta1",))
    vol = integrate_rotationally_symmetric(
        grid,
        lambda t1: (spec.sigma_scale * math.exp(2.0 * lam_fn(t1))) ** (spec.n / 2.0),
    )
    scale = float((sphere_volume(spec.n) / vol) ** (2.0 / spec.n))
    if abs(scale - 1.0) < 1e-14:
        return spec, 1.0
    root = math.sqrt(scale)
    stretched = Var("tau") / Num(root)
    spec2 = ARWSpec(
        n=spec.n,
        omega=spec.omega,
        f=ShiftedScaledTimeFunction(spec.f, time_scale=root, shift=-0.5 * math.log(scale)),
        psi=fold_constants(substitute(spec.psi, "tau", stretched)),
        lam=fold_constants(substitute(spec.lam, "tau", stretched)),
        a=root * spec.a,
        sigma_scale=spec.sigma_scale * scale,
    )
    return spec2, scale


class _ReparametrizedTime(TimeFunction):
    """f o phibar + log phibar' for the quadratic change phibar(s) = s + eps s^2."""

    max_order = 3

    def __init__(self, base: TimeFunction, eps: float):
        self.base = base
        self.eps = eps

    def derivative(self, tau: float, order: int) -> float:
        e = self.eps
        phi = tau + e * tau * tau
        d1 = 1.0 + 2.0 * e * tau
        if order == 0:
            return self.base.value(phi) + math.log(d1)
        b1 = self.base.derivative(phi, 1)
        if order == 1:
            return b1 * d1 + 2.0 * e / d1
        b2 = self.base.derivative(phi, 2)
        if order == 2:
            return b2 * d1 * d1 + 2.0 * e * b1 - 4.0 * e * e / d1**2
        b3 = self.base.derivative(phi, 3)
        if order == 3:
            return b3 * d1**3 + 6.0 * e * b2 * d1 + 16.0 * e**3 / d1**3
        raise ValueError(f"derivative order {order} not available (max 3)")


def reparametrize_time(spec: ARWSpec, eps: float) -> ARWSpec:
    """Present the same spacetime in the time coordinate with tau = phibar(s).

    phibar(s) = s + eps s^2 must be increasing on the new domain.  The
    Gaussian form is restored by

        f~ = f o phibar + log phibar',   lambda~ = lambda o phibar - log phibar',
        psi~ = psi o phibar,

    which leaves omega and the recovered mass unchanged (phibar' -> 1 at the
    singularity).
    """
    if eps == 0.0:
        return spec
    disc = 1.0 + 4.0 * eps * spec.a
    if disc <= 0.0:
        raise GeometryError(f"phibar is not monotone over [{spec.a}, 0) for eps = {eps}")
    a_new = (-1.0 + math.sqrt(disc)) / (2.0 * eps)
    if 1.0 + 2.0 * eps * a_new <= 0.0:
        raise GeometryError(f"phibar is not monotone over [{spec.a}, 0) for eps = {eps}")

    phi = fold_constants(
        Var("tau") + Num(eps) * Var("tau") * Var("tau")
    )
    dphi = fold_constants(Num(1.0) + Num(2.0 * eps) * Var("tau"))
    return ARWSpec(
        n=spec.n,
        omega=spec.omega,
        f=_ReparametrizedTime(spec.f, eps),
        psi=fold_constants(substitute(spec.psi, "tau", phi)),
        lam=fold_constants(substitute(spec.lam, "tau", phi) - Call("log", dphi)),
        a=a_new,
        sigma_scale=spec.sigma_scale,
    )
