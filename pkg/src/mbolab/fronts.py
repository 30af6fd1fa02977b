"""Closed-form moving interfaces: circle and band on the torus, cap on the sphere.

Each front has an analytic signed distance and a closed-form weighted
mean-curvature evolution for uniform density; for the cosine-perturbed density
the straight front follows the drift ODE integrated in `drift_front_ode`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .manifolds import SPHERE, TORUS, DensitySpec, ManifoldSpec, geodesic_distance


class _Extinct:
    """Sentinel for a front that has vanished."""

    def __repr__(self):
        return "EXTINCT"


EXTINCT = _Extinct()


@dataclass(frozen=True)
class FrontDescriptor:
    manifold: ManifoldSpec
    kind: str  # 'circle' | 'band' | 'cap'
    center: tuple | None = None  # circle
    radius: float | None = None  # circle
    a: float | None = None  # band lower edge
    b: float | None = None  # band upper edge
    axis: int = 0  # band axis
    theta0: float | None = None  # cap colatitude
    pole: tuple = (0.0, 0.0, 1.0)  # cap center

    def __post_init__(self):
        L = self.manifold.side
        if self.kind == "circle":
            if not (self.radius is not None and 0 < self.radius < L / 2):
                raise ValueError("circle radius must lie in (0, L/2)")
        elif self.kind == "band":
            if not (self.a is not None and self.b is not None and 0 <= self.a < self.b < L):
                raise ValueError("band edges must satisfy 0 <= a < b < L")
        elif self.kind == "cap":
            if not (self.theta0 is not None and 0 < self.theta0 < np.pi):
                raise ValueError("cap colatitude must lie in (0, pi)")
        else:
            raise ValueError(f"unknown front kind {self.kind!r}")


def circle(manifold: ManifoldSpec, center, radius: float) -> FrontDescriptor:
    return FrontDescriptor(manifold, "circle", center=tuple(center), radius=radius)


def band(manifold: ManifoldSpec, a: float, b: float, axis: int = 0) -> FrontDescriptor:
    return FrontDescriptor(manifold, "band", a=a, b=b, axis=axis)


def cap(theta0: float, pole=(0.0, 0.0, 1.0)) -> FrontDescriptor:
    return FrontDescriptor(ManifoldSpec(SPHERE), "cap", theta0=theta0, pole=tuple(pole))


def _circ_dist(t: np.ndarray, a: float, L: float) -> np.ndarray:
    d = np.abs(t - a)
    return np.minimum(d, L - d)


def signed_distance(front: FrontDescriptor, x: np.ndarray) -> np.ndarray:
    """Signed geodesic distance to the front: positive inside, negative outside."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    m = front.manifold
    if front.kind == "circle":
        d = geodesic_distance(m, x, np.asarray(front.center))
        out = front.radius - d
    elif front.kind == "band":
        L = m.side
        t = np.mod(x[:, front.axis], L)
        da = _circ_dist(t, front.a, L)
        db = _circ_dist(t, front.b, L)
        inside = (t >= front.a) & (t <= front.b)
        out = np.where(inside, 1.0, -1.0) * np.minimum(da, db)
    else:  # cap
        theta = np.arccos(np.clip(x @ np.asarray(front.pole), -1.0, 1.0))
        out = front.theta0 - theta
    return out[0] if squeeze else out


def indicator(front: FrontDescriptor, x: np.ndarray) -> np.ndarray:
    """1 on the open region bounded by the front, 0 outside."""
    return (signed_distance(front, x) > 0).astype(float)


def analytic_front(front: FrontDescriptor, kappa: float, t: float):
    """Evolve a closed-form front by weighted MCF with uniform density for
    time t at diffusion coefficient kappa. Returns EXTINCT past extinction."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if front.kind == "band":
        return front  # flat front is stationary
    if front.kind == "circle":
        # dr/dt = -kappa/r  =>  r(t)^2 = r0^2 - 2*kappa*t
        rsq = front.radius**2 - 2.0 * kappa * t
        if rsq <= 0:
            return EXTINCT
        return FrontDescriptor(front.manifold, "circle", center=front.center, radius=float(np.sqrt(rsq)))
    # cap: dtheta/dt = -kappa*cot(theta)  =>  cos(theta(t)) = cos(theta0)*e^{kappa t}
    c = np.cos(front.theta0) * np.exp(kappa * t)
    if c >= 1.0:
        return EXTINCT
    if c <= -1.0:
        return EXTINCT  # complement vanished: cap swallowed the sphere
    return FrontDescriptor(front.manifold, "cap", theta0=float(np.arccos(c)), pole=front.pole)


def circle_extinction_time(r0: float, kappa: float) -> float:
    return r0**2 / (2.0 * kappa)


def cap_extinction_time(theta0: float, kappa: float) -> float:
    if not 0 < theta0 < np.pi / 2:
        raise ValueError("closed-form extinction requires theta0 in (0, pi/2)")
    return float(-np.log(np.cos(theta0)) / kappa)


def drift_front_ode(a0: float, manifold: ManifoldSpec, density: DensitySpec, kappa: float, t: float) -> float:
    """Position at time t of a straight front edge {x_axis = a} drifting down
    the density gradient: da/dt = -kappa * (d/dx log xi)(a)."""
    if manifold.kind != TORUS:
        raise ValueError("drift ODE is defined on the torus")

    def rhs(_t, a):
        return -kappa * density.grad_log_xi_1d(manifold, a)

    sol = solve_ivp(rhs, (0.0, t), [a0], rtol=1e-10, atol=1e-12, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"drift ODE integration failed: {sol.message}")
    return float(sol.y[0, -1])
