"""Spacetime metrics in Gaussian form, spec containers, quadrature, validation.

Metrics here are conformally split:

    ds^2 = e^{2 psi_tilde} ( -dtau^2 + sigma_ij dx^i dx^j )

with ``psi_tilde`` and the spatial components ``sigma_ij`` supplied as scalar
fields with exact derivatives (see fields.py).  The cosmological family of
interest has sigma_ij = e^{2 lambda} sigma_bar_ij with sigma_bar the round
unit n-sphere and psi_tilde = f(tau) + psi(tau, theta1); the future
singularity sits at tau = 0 with domain [a, 0), a < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import tensors
from .expr import Call, Expression, Num, fold_constants, free_variables, parse
from .fields import (
    COORD_NAMES,
    ConstField,
    ExprField,
    ExprTimeFunction,
    ScalarField,
    SumField,
    TimeField,
    TimeFunction,
    as_expression,
    as_time_function,
)

__all__ = [
    "GeometryError",
    "QuadratureError",
    "SpacetimeMetric",
    "MetricData",
    "ARWSpec",
    "make_spec",
    "rw_family_spec",
    "flat_chart_metric",
    "metric_at",
    "christoffel_at",
    "QuadratureGrid",
    "quadrature_grid",
    "integrate_slice",
    "integrate_rotationally_symmetric",
    "sphere_volume",
    "round_sphere_matrix",
    "geometric_schedule",
    "arw_validate",
    "sample_events",
]


class GeometryError(Exception):
    pass


class QuadratureError(Exception):
    pass


# ---------------------------------------------------------------------------
# Metric containers


@dataclass(frozen=True, eq=False)
class SpacetimeMetric:
    """Gaussian-form Lorentzian metric on an (n+1)-dimensional chart."""

    n: int
    psi_tilde: ScalarField
    sigma: tuple  # n x n tuple-of-tuples of ScalarField

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def labels(self) -> tuple[str, ...]:
        return COORD_NAMES[: self.dim]


@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray  # dg[c, a, b] = d_c g_ab


def _sigma_jets(metric: SpacetimeMetric, event, order: int):
    """Values / first / second coordinate derivatives of sigma_ij."""
    n, dim = metric.n, metric.dim
    s0 = np.zeros((n, n))
    s1 = np.zeros((dim, n, n)) if order >= 1 else None
    s2 = np.zeros((dim, dim, n, n)) if order >= 2 else None
    for i in range(n):
        for j in range(i, n):
            fld = metric.sigma[i][j]
            v = fld.partial(event, ())
            s0[i, j] = s0[j, i] = v
            if order >= 1:
                for c in range(dim):
                    d = fld.partial(event, (c,))
                    s1[c, i, j] = s1[c, j, i] = d
            if order >= 2:
                for c in range(dim):
                    for d in range(c, dim):
                        dd = fld.partial(event, (c, d))
                        s2[c, d, i, j] = s2[c, d, j, i] = dd
                        s2[d, c, i, j] = s2[d, c, j, i] = dd
    return s0, s1, s2


def _psi_jets(metric: SpacetimeMetric, event, order: int):
    dim = metric.dim
    fld = metric.psi_tilde
    p0 = fld.partial(event, ())
    p1 = np.array([fld.partial(event, (c,)) for c in range(dim)]) if order >= 1 else None
    p2 = None
    if order >= 2:
        p2 = np.zeros((dim, dim))
        for c in range(dim):
            for d in range(c, dim):
                p2[c, d] = p2[d, c] = fld.partial(event, (c, d))
    return p0, p1, p2


def metric_jets(metric: SpacetimeMetric, event, order: int = 2):
    """Metric g plus coordinate derivatives to the requested order.

    Returns (g, dg, ddg); entries beyond ``order`` are None.  All derivatives
    are exact (symbolic or closed-form chain rule), nothing is finite
    differenced here.
    """
    n, dim = metric.n, metric.dim
    p0, p1, p2 = _psi_jets(metric, event, order)
    s0, s1, s2 = _sigma_jets(metric, event, order)

    eta = np.zeros((dim, dim))
    eta[0, 0] = -1.0
    eta[1:, 1:] = s0
    scale = math.exp(2.0 * p0)
    g = scale * eta
    dg = ddg = None
    if order >= 1:
        deta = np.zeros((dim, dim, dim))
        deta[:, 1:, 1:] = s1
        dg = scale * (2.0 * p1[:, None, None] * eta[None, :, :] + deta)
    if order >= 2:
        ddeta = np.zeros((dim, dim, dim, dim))
        ddeta[:, :, 1:, 1:] = s2
        pp = 4.0 * np.einsum("c,d->cd", p1, p1) + 2.0 * p2
        ddg = scale * (
            pp[:, :, None, None] * eta[None, None, :, :]
            + 2.0 * p1[:, None, None, None] * deta[None, :, :, :]
            + 2.0 * p1[None, :, None, None] * deta[:, None, :, :]
            + ddeta
        )
    return g, dg, ddg


def _invert_metric(g: np.ndarray, event) -> np.ndarray:
    det = np.linalg.det(g)
    scale = float(np.max(np.abs(g))) ** g.shape[0]
    if not np.isfinite(det) or scale == 0.0 or abs(det) < 1e-14 * scale:
        raise GeometryError(f"degenerate metric at event {np.asarray(event).tolist()}")
    return np.linalg.inv(g)


def metric_at(metric: SpacetimeMetric, event) -> MetricData:
    """Metric, inverse, and first derivatives at ``event``.

    Raises GeometryError (with the offending coordinates) where the metric is
    non-invertible, e.g. at the poles of the angular chart.
    """
    g, dg, _ = metric_jets(metric, event, order=1)
    return MetricData(g=g, g_inv=_invert_metric(g, event), dg=dg)


def christoffel_at(metric: SpacetimeMetric, event) -> np.ndarray:
    """Christoffel symbols Gamma[a, b, c] = Gamma^a_bc at ``event``."""
    data = metric_at(metric, event)
    return tensors.christoffel(data.g_inv, data.dg)


def flat_chart_metric(n: int) -> SpacetimeMetric:
    """-dtau^2 + delta_ij dx^i dx^j on the coordinate box (a flat ambient)."""
    one = ConstField(1.0)
    zero = ConstField(0.0)
    sigma = tuple(
        tuple(one if i == j else zero for j in range(n)) for i in range(n)
    )
    return SpacetimeMetric(n=n, psi_tilde=ConstField(0.0), sigma=sigma)


# ---------------------------------------------------------------------------
# The spacetime container


def _sphere_diag_sources(n: int) -> list[str]:
    if n == 2:
        return ["1", "sin(theta1)^2"]
    if n == 3:
        return ["1", "sin(theta1)^2", "sin(theta1)^2 * sin(theta2)^2"]
    raise GeometryError(f"spatial dimension n={n} not supported (need 2 or 3)")


@dataclass(frozen=True, eq=False)
class ARWSpec:
    """Cosmological spacetime data: conformal split plus decay exponent omega.

    Fields are stored exactly as given; use :func:`make_spec` to apply the
    pole damping convention for angular perturbations.  ``sigma_scale``
    multiplies the round unit-sphere metric (1.0 means normalized).
    """

    n: int
    omega: float
    f: TimeFunction
    psi: Expression = field(default_factory=lambda: Num(0.0))
    lam: Expression = field(default_factory=lambda: Num(0.0))
    a: float = -1.0
    sigma_scale: float = 1.0

    def __post_init__(self):
        if self.n not in (2, 3):
            raise GeometryError(f"spatial dimension n={self.n} not supported (need 2 or 3)")
        if not self.a < 0.0:
            raise GeometryError(f"domain start a={self.a} must be negative")
        if not self.n + self.omega - 2.0 > 0.0:
            raise GeometryError(
                f"need n + omega - 2 > 0, got {self.n + self.omega - 2.0}"
            )
        if self.sigma_scale <= 0.0:
            raise GeometryError("sigma_scale must be positive")
        for name, e in (("psi", self.psi), ("lambda", self.lam)):
            extra = free_variables(e) - {"tau", "theta1"}
            if extra:
                raise GeometryError(
                    f"{name} may depend on tau and theta1 only, found {sorted(extra)}"
                )

    @property
    def gamma_tilde(self) -> float:
        return 0.5 * (self.n + self.omega - 2.0)

    @cached_property
    def _sigma_fields(self) -> tuple:
        dim = self.n + 1
        zero = ExprField(Num(0.0), dim)
        diag_sources = _sphere_diag_sources(self.n)
        rows = []
        for i in range(self.n):
            row = []
            for j in range(self.n):
                if i != j:
                    row.append(zero)
                    continue
                expr = parse(diag_sources[i])
                expr = Num(self.sigma_scale) * Call("exp", Num(2.0) * self.lam) * expr
                row.append(ExprField(fold_constants(expr), dim))
            rows.append(tuple(row))
        return tuple(rows)

    @cached_property
    def metric(self) -> SpacetimeMetric:
        dim = self.n + 1
        psi_tilde = SumField(TimeField(self.f), ExprField(self.psi, dim))
        return SpacetimeMetric(n=self.n, psi_tilde=psi_tilde, sigma=self._sigma_fields)

    @cached_property
    def conformal_metric(self) -> SpacetimeMetric:
        """Same chart with the conformal factor stripped: -dtau^2 + sigma."""
        return SpacetimeMetric(
            n=self.n, psi_tilde=ConstField(0.0), sigma=self._sigma_fields
        )

    def psi_tilde_field(self) -> ScalarField:
        return self.metric.psi_tilde


def make_spec(
    n: int,
    omega: float,
    f,
    a: float,
    psi=0.0,
    lam=0.0,
    sigma_scale: float = 1.0,
) -> ARWSpec:
    """Build a spec, damping angular perturbations at the chart poles.

    ``psi`` and ``lam`` may depend on tau and theta1; any theta1 dependence
    is multiplied by sin(theta1)^2 so the perturbation vanishes to second
    order at the poles.  Pure functions of tau pass through unchanged.
    """
    psi_e = as_expression(psi)
    lam_e = as_expression(lam)
    damp = parse("sin(theta1)^2")
    if "theta1" in free_variables(psi_e):
        psi_e = damp * psi_e
    if "theta1" in free_variables(lam_e):
        lam_e = damp * lam_e
    return ARWSpec(
        n=n,
        omega=omega,
        f=as_time_function(f),
        psi=psi_e,
        lam=lam_e,
        a=a,
        sigma_scale=sigma_scale,
    )


def rw_family_spec(n: int, omega: float, k: float = 1.0, a: float = -0.5) -> ARWSpec:
    """The exactly solvable family f = (1/gamma_tilde) log(-k tau).

    Its mass works out to k^2 / gamma_tilde^2 and every curvature quantity
    has a closed form, which makes it the main oracle family.
    """
    if k <= 0:
        raise GeometryError("k must be positive")
    gamma_tilde = 0.5 * (n + omega - 2.0)
    profile = Num(1.0 / gamma_tilde) * parse(f"log(-({k!r}) * tau)")
    return ARWSpec(n=n, omega=omega, f=ExprTimeFunction(fold_constants(profile)), a=a)


# ---------------------------------------------------------------------------
# Quadrature on the spatial sphere chart


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor-product Gauss-Legendre nodes on the polar chart of S^n.

    Axes theta_1..theta_{n-1} live on (0, pi), theta_n on (0, 2 pi); nodes
    are strictly interior so the chart poles are never touched.
    """

    n: int
    nodes_per_axis: int
    axis_nodes: tuple
    axis_weights: tuple


def _gauss_legendre(lo: float, hi: float, count: int):
    x, w = np.polynomial.legendre.leggauss(count)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def quadrature_grid(n: int, nodes_per_axis: int = 48) -> QuadratureGrid:
    if n < 2:
        raise GeometryError("grids require n >= 2")
    if nodes_per_axis < 2:
        raise GeometryError("need at least 2 nodes per axis")
    nodes, weights = [], []
    for axis in range(n):
        hi = 2.0 * math.pi if axis == n - 1 else math.pi
        x, w = _gauss_legendre(0.0, hi, nodes_per_axis)
        nodes.append(x)
        weights.append(w)
    return QuadratureGrid(
        n=n,
        nodes_per_axis=nodes_per_axis,
        axis_nodes=tuple(nodes),
        axis_weights=tuple(weights),
    )


def integrate_slice(
    grid: QuadratureGrid,
    integrand: Callable[[np.ndarray], float],
    volume_metric: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Sum of weights * integrand * sqrt(det volume_metric) over the grid.

    Deterministic: nodes are traversed in axis-major order.  Non-finite
    integrand values or non-positive metric determinants raise
    QuadratureError naming the node.
    """
    mesh = np.meshgrid(*grid.axis_nodes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*grid.axis_weights, indexing="ij")
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)

    total = 0.0
    for point, w in zip(points, weights):
        m = np.asarray(volume_metric(point), dtype=float)
        det = float(np.linalg.det(m))
        if not np.isfinite(det) or det <= 0.0:
            raise QuadratureError(f"volume metric degenerate at node {point.tolist()}")
        value = float(integrand(point))
        if not np.isfinite(value):
            raise QuadratureError(f"integrand not finite at node {point.tolist()}")
        total += w * value * math.sqrt(det)
    return total


def sphere_volume(n: int) -> float:
    """Volume of the round unit n-sphere: 2 pi^{(n+1)/2} / Gamma((n+1)/2)."""
    if n < 1:
        raise GeometryError("sphere dimension must be >= 1")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def round_sphere_matrix(n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Volume-metric callable for the round unit S^n in the polar chart."""

    def matrix(node: np.ndarray) -> np.ndarray:
        m = np.eye(n)
        s = 1.0
        for i in range(1, n):
            s *= math.sin(node[i - 1]) ** 2
            m[i, i] = s
        return m

    return matrix


def integrate_rotationally_symmetric(
    grid: QuadratureGrid, fn: Callable[[float], float]
) -> float:
    """Integrate an SO(n)-invariant integrand over S^n.

    ``fn(theta1)`` must contain every factor except the round measure; this
    evaluates |S^{n-1}| * sum w * fn(theta1) * sin(theta1)^{n-1}.  Exact for
    the same class of integrands as :func:`integrate_slice` restricted to
    theta1-dependent data (the perturbations admitted by ARWSpec).
    """
    lower = sphere_volume(grid.n - 1)
    nodes = grid.axis_nodes[0]
    weights = grid.axis_weights[0]
    total = 0.0
    for theta1, w in zip(nodes, weights):
        value = float(fn(float(theta1)))
        if not np.isfinite(value):
            raise QuadratureError(f"integrand not finite at theta1={theta1}")
        total += float(w) * value * math.sin(theta1) ** (grid.n - 1)
    return lower * total


# ---------------------------------------------------------------------------
# Sampling and schedules


def geometric_schedule(a: float, k_max: int = 10) -> np.ndarray:
    """tau_k = a 2^{-k}, k = 0..k_max (approaching the singularity at 0)."""
    if a >= 0:
        raise GeometryError("schedule start must be negative")
    if k_max < 2:
        raise GeometryError("need at least three schedule points")
    return a * np.power(2.0, -np.arange(k_max + 1, dtype=float))


def sample_events(spec: ARWSpec, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic interior sample of events (tau, theta...) for checks."""
    rng = np.random.default_rng(seed)
    dim = spec.n + 1
    events = np.empty((count, dim))
    events[:, 0] = rng.uniform(spec.a * 0.9, spec.a * 0.05, size=count)
    for axis in range(1, dim):
        if axis < dim - 1:
            events[:, axis] = rng.uniform(0.4, math.pi - 0.4, size=count)
        else:
            events[:, axis] = rng.uniform(0.3, 2.0 * math.pi - 0.3, size=count)
    return events


# ---------------------------------------------------------------------------
# Validation of the defining conditions


@dataclass(frozen=True)
class ConditionReport:
    name: str
    passed: bool
    detail: str
    values: tuple = ()


@dataclass(frozen=True)
class ArwValidation:
    n: int
    omega: float
    gamma_tilde: float
    sample_times: tuple
    conditions: tuple
    mass_estimate: float
    passed: bool

    def condition(self, name: str) -> ConditionReport:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def _decade_growth_flag(times, values, factor: float = 10.0) -> bool:
    """True when |values| grew by more than ``factor`` over the last decade."""
    t = np.abs(np.asarray(times, dtype=float))
    v = np.abs(np.asarray(values, dtype=float))
    target = t[-1] * 10.0
    candidates = np.nonzero(t >= target)[0]
    if candidates.size == 0:
        return False
    j = candidates[-1]
    floor = 1e-9 * (1.0 + float(v.max(initial=0.0)))
    return v[-1] > factor * max(v[j], floor)


def arw_validate(spec: ARWSpec, sample_times=None) -> ArwValidation:
    """Check the defining conditions of the cosmological family on samples.

    Evaluates, on a geometric schedule approaching tau = 0:
      * -f' > 0,
      * the mass sequence |f'|^2 e^{(n + omega - 2) f} with its extrapolated
        limit (must converge to a positive value; divergence is growth by
        more than 10x per decade),
      * boundedness of f'' + gamma_tilde |f'|^2,
      * the derivative ratios |f^{(m)}| / |f'|^m for m = 2, 3.
    """
    if sample_times is None:
        sample_times = geometric_schedule(spec.a, 12)
    times = np.asarray(sample_times, dtype=float)
    if np.any(times >= 0) or np.any(times < spec.a):
        raise GeometryError("sample times must lie in [a, 0)")
    gt = spec.gamma_tilde

    fp = np.array([spec.f.derivative(t, 1) for t in times])
    fpp = np.array([spec.f.derivative(t, 2) for t in times])
    fppp = np.array([spec.f.derivative(t, 3) for t in times])
    fv = np.array([spec.f.value(t) for t in times])

    conditions = []

    lapse_ok = bool(np.all(fp < 0.0))
    conditions.append(
        ConditionReport(
            name="negative-fprime",
            passed=lapse_ok,
            detail=f"max f' = {fp.max():.6e}",
            values=tuple(fp),
        )
    )

    mass_seq = np.abs(fp) ** 2 * np.exp((spec.n + spec.omega - 2.0) * fv)
    from .extrapolate import aitken_limit

    m_hat, m_err = aitken_limit(mass_seq)
    increments = np.abs(np.diff(mass_seq)) / max(abs(mass_seq[-1]), 1e-300)
    diverging = _decade_growth_flag(times, mass_seq)
    converged = bool(increments[-1] <= 1e-3) and not diverging
    mass_ok = converged and np.isfinite(m_hat) and m_hat > 0.0
    conditions.append(
        ConditionReport(
            name="mass-limit",
            passed=mass_ok,
            detail=(
                f"extrapolated {m_hat:.8e}, last increment {increments[-1]:.2e}, "
                f"diverging={diverging}"
            ),
            values=tuple(mass_seq),
        )
    )

    accel_seq = fpp + gt * fp**2
    accel_ok = not _decade_growth_flag(times, accel_seq)
    conditions.append(
        ConditionReport(
            name="accel-limit",
            passed=accel_ok,
            detail=f"last value {accel_seq[-1]:.6e}",
            values=tuple(accel_seq),
        )
    )

    for order, deriv in ((2, fpp), (3, fppp)):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.abs(deriv) / np.abs(fp) ** order
        bounded = bool(np.all(np.isfinite(ratios))) and not _decade_growth_flag(
            times, ratios
        )
        conditions.append(
            ConditionReport(
                name=f"derivative-ratio-{order}",
                passed=bounded,
                detail=f"sup ratio {np.max(ratios):.6e}",
                values=tuple(ratios),
            )
        )

    passed = all(c.passed for c in conditions)
    return ArwValidation(
        n=spec.n,
        omega=spec.omega,
        gamma_tilde=gt,
        sample_times=tuple(times),
        conditions=tuple(conditions),
        mass_estimate=float(m_hat),
        passed=passed,
    )
