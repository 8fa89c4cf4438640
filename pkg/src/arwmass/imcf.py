"""Inverse mean curvature flow toward the singularity.

For rotationally symmetric leaves (u independent of the angles) the flow
x_dot = -nu / H with past-directed nu reduces to the scalar ODE

    du/dt = e^{-psi_tilde(u)} / H(u),

where H(u) is the mean curvature of the coordinate slice {tau = u}.  A leaf
sequence of this kind runs straight into the singularity with |u| decaying
like e^{-gamma t}, gamma = gamma_tilde / n, and f(u(t)) asymptotically a
line of slope -1/n.  The mass integral along the leaves reproduces the
slice-limit mass.

The time stepper is a hand-rolled Dormand-Prince 5(4) pair with PI step
control.  scipy's solve_ivp is deliberately not used here: the flow needs
strict-step guards against stepping across tau = 0 (where the conformal
factor blows up), an FSAL loop costs a dozen lines, and the fixed-step mode
doubles as the convergence-order probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature import curvature_at
from .expr import Num, fold_constants, free_variables
from .fields import as_expression
from .geometry import (
    ARWSpec,
    GeometryError,
    QuadratureGrid,
    metric_at,
    quadrature_grid,
    sphere_volume,
)
from .hypersurface import (
    GraphHypersurface,
    coordinate_slice_curvature,
    intrinsic_curvature,
    second_fundamental,
)
from .mass import _weights

__all__ = [
    "FlowError",
    "FlowState",
    "ImcfTrajectory",
    "FlowMassSample",
    "imcf_run",
    "flow_diagnostics",
    "mass_along_flow",
]

_FILL_ANGLE = 1.1
_HALT_U = 1e-12

# Dormand-Prince 5(4) tableau (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


class FlowError(GeometryError):
    """The flow left its admissible regime (H <= 0, step failure, ...)."""


@dataclass(frozen=True)
class FlowState:
    t: float
    u: float
    mean_curvature: float
    f_of_u: float
    dfdt: float


@dataclass(frozen=True)
class ImcfTrajectory:
    states: tuple
    reached_singularity: bool
    tolerance: float

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def leaves(self) -> np.ndarray:
        return np.array([s.u for s in self.states])


@dataclass(frozen=True)
class FlowMassSample:
    t: float
    u: float
    mass_integral: float
    lemma_quantity: float
    mean_curvature_form: float


def _check_symmetric(spec: ARWSpec) -> None:
    if free_variables(spec.psi) - {"tau"}:
        raise FlowError("the scalar flow reduction needs psi = psi(tau)")
    if fold_constants(spec.lam) != Num(0.0):
        raise FlowError("the scalar flow reduction needs lambda = 0")


def _leaf_mean_curvature(spec: ARWSpec, u: float) -> float:
    """H of the slice {tau = u}, traced with the induced inverse metric."""
    metric = spec.metric
    event = np.full(spec.n + 1, _FILL_ANGLE)
    event[0] = u
    hbar = coordinate_slice_curvature(metric, u)(event[1:])
    g = metric_at(metric, event).g[1:, 1:]
    return float(np.trace(np.linalg.solve(g, hbar)))


def imcf_run(
    spec: ARWSpec,
    u0: float,
    t_end: float,
    tolerance: float = 1e-10,
    fixed_step: float | None = None,
    max_steps: int = 200_000,
) -> ImcfTrajectory:
    """Integrate the symmetric flow from the slice u0 up to flow time t_end.

    Stops early (flagged, not an error) once |u| < 1e-12; aborts with
    FlowError if a mean curvature H <= 0 is encountered.
    """
    _check_symmetric(spec)
    if not (spec.a < u0 < 0.0):
        raise FlowError(f"u0 = {u0} outside ({spec.a}, 0)")
    if tolerance <= 0.0:
        raise FlowError("tolerance must be positive")

    metric = spec.metric

    def rhs(u: float) -> float:
        if u >= -_HALT_U / 2:
            raise _StepAcross()
        h_mean = _leaf_mean_curvature(spec, u)
        if h_mean <= 0.0:
            raise FlowError(f"mean curvature {h_mean:.6e} <= 0 at u = {u:.6e}")
        event = np.full(spec.n + 1, _FILL_ANGLE)
        event[0] = u
        p = metric.psi_tilde.partial(event, ())
        return math.exp(-p) / h_mean

    def snapshot(t: float, u: float, du: float) -> FlowState:
        return FlowState(
            t=t,
            u=u,
            mean_curvature=_leaf_mean_curvature(spec, u),
            f_of_u=spec.f.value(u),
            dfdt=spec.f.derivative(u, 1) * du,
        )

    t, u = 0.0, float(u0)
    k = np.empty(7)
    k[0] = rhs(u)
    states = [snapshot(t, u, k[0])]
    reached = False

    h = fixed_step if fixed_step is not None else min(1e-3, t_end)
    err_prev = 1.0
    steps = 0
    while t < t_end and not reached:
        if steps >= max_steps:
            raise FlowError(f"no convergence within {max_steps} steps")
        steps += 1
        h_step = min(h, t_end - t)
        try:
            for i in range(1, 7):
                ui = u + h_step * sum(a * k[j] for j, a in enumerate(_A[i]))
                k[i] = rhs(ui)
            u_new = u + h_step * float(_B5 @ k)
            if u_new >= 0.0:
                raise _StepAcross()
        except _StepAcross:
            h = 0.5 * h_step
            if h < 1e-15:
                raise FlowError("step size underflow near the singularity")
            continue

        if fixed_step is None:
            scale = tolerance * (1.0 + max(abs(u), abs(u_new)))
            err = h_step * abs(float(_ERR @ k)) / scale + 1e-16
            if err > 1.0:  # reject and retry with a shorter step
                h = h_step * max(0.2, 0.9 * err**-0.2)
                continue
            h = h_step * min(5.0, max(0.2, 0.9 * err**-0.14 * err_prev**0.08))
            err_prev = err

        t += h_step
        u = u_new
        k[0] = k[6]  # FSAL: the last stage sits at the accepted point
        states.append(snapshot(t, u, k[0]))
        if u >= -_HALT_U:
            reached = True

    return ImcfTrajectory(
        states=tuple(states), reached_singularity=reached, tolerance=tolerance
    )


class _StepAcross(Exception):
    """Internal: a trial stage crossed tau = 0; halve the step."""


def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polynomial.polynomial.polyfit(x, y, 1)[1])


def flow_diagnostics(trajectory: ImcfTrajectory) -> tuple[float, float]:
    """(slope of f(u(t)), decay rate of log |u|), fitted over the final third.

    The contract values are slope -> -1/n and decay -> -gamma_tilde/n.
    Requires at least two decades of |u| decay so the transient is gone.
    """
    t = trajectory.times
    u = trajectory.leaves
    if len(t) < 8 or abs(u[0] / u[-1]) < 100.0:
        raise FlowError("trajectory too short: need two decades of |u| decay")
    tail = t >= t[-1] - (t[-1] - t[0]) / 3.0
    f_vals = np.array([s.f_of_u for s in trajectory.states])
    slope = _fit_slope(t[tail], f_vals[tail])
    decay = _fit_slope(t[tail], np.log(np.abs(u[tail])))
    return slope, decay


def _select_leaves(trajectory, max_leaves: int | None):
    if isinstance(trajectory, ImcfTrajectory):
        pairs = [(s.t, s.u) for s in trajectory.states]
    else:
        pairs = [(math.nan, float(u)) for u in trajectory]
    if max_leaves is not None and len(pairs) > max_leaves:
        idx = np.unique(np.linspace(0, len(pairs) - 1, max_leaves).round().astype(int))
        pairs = [pairs[i] for i in idx]
    return pairs


def mass_along_flow(
    spec,
    trajectory,
    grid: QuadratureGrid | None = None,
    max_leaves: int | None = 32,
) -> tuple:
    """Leaf-wise mass data: I(M(t)), the monotonicity lemma quantity

        int (R - [|A|^2 - H^2/n]) e^{omega f} e^{psi},

    and the mean-curvature form (n-1)/(2n) int H^2 e^{omega f} e^{psi}; the
    last two bracket I(M(t)) in the limit.  ``trajectory`` may also be a
    plain sequence of leaf coordinates u.  Long trajectories are subsampled
    to ``max_leaves`` evenly spaced leaves (pass None to integrate on all).
    """
    w = _weights(spec)
    grid = grid or quadrature_grid(w.n)
    n = w.n
    metric = w.metric
    lower = sphere_volume(n - 1)
    nodes = grid.axis_nodes[0]
    node_weights = grid.axis_weights[0]

    samples = []
    for t, u in _select_leaves(trajectory, max_leaves):
        surface = GraphHypersurface(as_expression(u), metric)
        totals = np.zeros(3)
        for theta1, wt in zip(nodes, node_weights):
            node = np.full(n, _FILL_ANGLE)
            node[0] = theta1
            ext = second_fundamental(surface, node)
            w.check_time(ext.event[0])
            bundle = curvature_at(metric, ext.event)
            nu = ext.past_normal
            g_nu_nu = float(nu @ bundle.einstein @ nu)
            scalar = intrinsic_curvature(surface, node).scalar
            lemma = scalar - (ext.norm_a_sq - ext.mean_curvature**2 / n)
            h_form = (n - 1) / (2.0 * n) * ext.mean_curvature**2
            sig11 = metric.sigma[0][0].partial(ext.event, ())
            common = (
                math.exp(w.log_weight(ext.event))
                * math.exp(n * ext.psi_tilde)
                * ext.tilt
                * sig11 ** (n / 2.0)
                * float(wt)
                * math.sin(theta1) ** (n - 1)
            )
            totals += common * np.array([g_nu_nu, lemma, h_form])
        totals *= lower
        samples.append(
            FlowMassSample(
                t=t,
                u=u,
                mass_integral=float(totals[0]),
                lemma_quantity=float(totals[1]),
                mean_curvature_form=float(totals[2]),
            )
        )
    return tuple(samples)
