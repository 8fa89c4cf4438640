"""Schwarzschild-anti-de Sitter interior as a cosmological spacetime.

The brane metric is ds^2 = e^{2f}(-(dx0)^2 + sigma_bar) with f = log r and

    h(r) = 1 - 2 Lambda r^2 / (n(n+1)) - m r^{-(n-1)},      h_tilde = -h,

valid inside the horizon r0 (where h < 0).  The time coordinate is
x0(r) = -int_0^r s^{-1} h_tilde^{-1/2} ds, which sends the curvature
singularity r = 0 to x0 = 0, so the chart runs on a negative time interval
exactly like the cosmological charts in geometry.py.

There is no closed form for x0 when Lambda < 0, so the time profile f is
carried parametrically in r: values invert x0(r) numerically while the
derivatives use the exact chain rule dr/dx0 = -r h_tilde^{1/2},

    f' = -h_tilde^{1/2},   f'' = r h_tilde'/2,
    f''' = -(r h_tilde^{1/2} / 2)(h_tilde' + r h_tilde'').

Everything else in the package then treats the spacetime like any other
spec; the closed forms collected here double as oracles for the mass
integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from scipy.integrate import quad

from .fields import TimeFunction
from .geometry import ARWSpec, GeometryError, sphere_volume

__all__ = [
    "SAdSParams",
    "Profile",
    "profile",
    "horizon",
    "x0_of_r",
    "r_of_x0",
    "SAdSTimeFunction",
    "as_arw_spec",
    "oracle_mass_integral",
]


@dataclass(frozen=True)
class SAdSParams:
    """Dimension, cosmological constant (<= 0) and mass parameter (> 0)."""

    n: int
    lam: float
    mass: float

    def __post_init__(self):
        if self.n < 2:
            raise GeometryError(f"need n >= 2, got {self.n}")
        if self.lam > 0.0:
            raise GeometryError(f"Lambda must be <= 0, got {self.lam}")
        if not self.mass > 0.0:
            raise GeometryError(f"mass parameter must be positive, got {self.mass}")


class Profile(NamedTuple):
    h: float
    h_tilde: float
    dh_dr: float


def profile(params: SAdSParams, r: float) -> Profile:
    """h, h_tilde = -h and dh/dr at radius r > 0."""
    if not r > 0.0:
        raise GeometryError(f"profile requires r > 0, got {r}")
    nn1 = params.n * (params.n + 1)
    h = 1.0 - 2.0 * params.lam * r**2 / nn1 - params.mass * r ** (1 - params.n)
    dh = -4.0 * params.lam * r / nn1 + (params.n - 1) * params.mass * r ** (-params.n)
    return Profile(h=h, h_tilde=-h, dh_dr=dh)


def _d2h_dr2(params: SAdSParams, r: float) -> float:
    nn1 = params.n * (params.n + 1)
    return -4.0 * params.lam / nn1 - params.n * (params.n - 1) * params.mass * r ** (
        -params.n - 1
    )


@lru_cache(maxsize=None)
def horizon(params: SAdSParams) -> float:
    """The unique r0 > 0 with h(r0) = 0, by bisection to ~1e-13.

    For Lambda <= 0 < m the profile h is strictly increasing from -inf, so
    the root exists and is simple; the bracketing loops below cannot fail.
    """
    lo = 1.0
    for _ in range(200):
        if profile(params, lo).h < 0.0:
            break
        lo *= 0.5
    else:
        raise AssertionError("no lower bracket for the horizon")
    hi = max(1.0, lo * 2.0)
    for _ in range(200):
        if profile(params, hi).h > 0.0:
            break
        hi *= 2.0
    else:
        raise AssertionError("no upper bracket for the horizon")
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if profile(params, mid).h < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _relative_defect(params: SAdSParams, s: float) -> float:
    """q(s) with h_tilde = m s^{1-n} (1 - q); q -> 0 at the singularity."""
    nn1 = params.n * (params.n + 1)
    return s ** (params.n - 1) / params.mass - 2.0 * params.lam * s ** (
        params.n + 1
    ) / (params.mass * nn1)


def x0_of_r(params: SAdSParams, r: float) -> float:
    """Time coordinate x0(r) = -int_0^r s^{-1} h_tilde^{-1/2} ds, r in (0, r0).

    The integrand equals m^{-1/2} s^{(n-3)/2} (1 - q)^{-1/2}; the leading
    power (integrable at s = 0) is integrated in closed form and only the
    remainder, which vanishes at the origin, goes to adaptive quadrature.
    """
    r0 = horizon(params)
    if not 0.0 < r < r0:
        raise GeometryError(f"r must lie in (0, {r0:.6g}), got {r}")
    n, m = params.n, params.mass
    rm = 1.0 / math.sqrt(m)
    leading = 2.0 / (n - 1.0) * rm * r ** ((n - 1.0) / 2.0)

    def remainder(s: float) -> float:
        return rm * s ** ((n - 3.0) / 2.0) * (1.0 / math.sqrt(1.0 - _relative_defect(params, s)) - 1.0)

    # full_output keeps quad quiet when 1e-13 is below what roundoff allows
    # (it happens just inside the horizon); the estimate is checked instead.
    out = quad(remainder, 0.0, r, epsabs=1e-13, epsrel=1e-12, limit=200, full_output=1)
    tail, abserr = out[0], out[1]
    if abserr > 1e-9 * max(1.0, abs(tail)):
        raise GeometryError(f"time-coordinate quadrature unreliable at r = {r}")
    return -(leading + tail)


def r_of_x0(params: SAdSParams, x0: float) -> float:
    """Invert x0_of_r by bisection plus a Newton polish.

    dr/dx0 = -r h_tilde^{1/2} gives the exact Newton step; the round trip
    r -> x0 -> r reproduces r to well below 1e-10.
    """
    r0 = horizon(params)
    if not x0 < 0.0:
        raise GeometryError(f"time coordinate must be negative, got {x0}")
    hi = r0 * (1.0 - 1e-9)
    if x0 <= x0_of_r(params, hi):
        raise GeometryError(f"x0 = {x0} lies beyond the horizon time {x0_of_r(params, hi):.6g}")
    lo = r0 * 1e-12
    # x0_of_r is strictly decreasing: x0(lo) > x0 > x0(hi)
    for _ in range(60):
        if hi - lo <= 1e-6 * r0:
            break
        mid = 0.5 * (lo + hi)
        if x0_of_r(params, mid) > x0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _ in range(40):
        step = (x0_of_r(params, r) - x0) * r * math.sqrt(profile(params, r).h_tilde)
        r = min(max(r + step, 0.5 * lo), r0 * (1.0 - 1e-12))
        if abs(step) <= 1e-15 * r:
            break
    return r


class SAdSTimeFunction(TimeFunction):
    """f = log r as a function of the brane time, via the exact chain rule."""

    max_order = 3

    def __init__(self, params: SAdSParams):
        self.params = params
        self._cache: dict[float, float] = {}

    def radius(self, tau: float) -> float:
        r = self._cache.get(tau)
        if r is None:
            r = r_of_x0(self.params, tau)
            self._cache[tau] = r
        return r

    def derivative(self, tau: float, order: int) -> float:
        r = self.radius(tau)
        if order == 0:
            return math.log(r)
        p = profile(self.params, r)
        dht = -p.dh_dr
        if order == 1:
            return -math.sqrt(p.h_tilde)
        if order == 2:
            return 0.5 * r * dht
        if order == 3:
            ddht = -_d2h_dr2(self.params, r)
            return -0.5 * r * math.sqrt(p.h_tilde) * (dht + r * ddht)
        raise ValueError(f"derivative order {order} not available (max 3)")


def as_arw_spec(params: SAdSParams) -> ARWSpec:
    """Package the interior as a cosmological spec with omega = 1.

    The domain is clipped to r <= 0.99 r0: near the horizon h_tilde -> 0
    makes f' vanish, and the decay conditions concern the r -> 0 end only.
    """
    r0 = horizon(params)
    a = x0_of_r(params, 0.99 * r0)
    return ARWSpec(n=params.n, omega=1.0, f=SAdSTimeFunction(params), a=a)


def oracle_mass_integral(params: SAdSParams, r: float) -> float:
    """Closed form of the slice mass integral at radius r.

    int_{M_r} G_ab nu^a nu^b e^f = n(n-1)/2 |S^n| (m + 2 Lambda r^{n+1}/(n(n+1))),
    constant in r for Lambda = 0 and increasing toward n(n-1)/2 |S^n| m as
    r -> 0 for Lambda < 0.
    """
    r0 = horizon(params)
    if not 0.0 < r < r0:
        raise GeometryError(f"r must lie in (0, {r0:.6g}), got {r}")
    n = params.n
    nn1 = n * (n + 1)
    return (
        0.5
        * n
        * (n - 1)
        * sphere_volume(n)
        * (params.mass + 2.0 * params.lam * r ** (n + 1) / nn1)
    )
