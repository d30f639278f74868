"""The two inviscid Burgers' instances with closed-form finite-time blow-up.

1D: u(x, t) = x / (t - 1) on [-1, 1] x [-1+delta, delta], blow-up at t = 1.
2D: u1 = (x1 + x2 - 2 x1 t) / (1 - 2 t^2), u2 = (x1 - x2 - 2 x2 t) / (1 - 2 t^2)
    on [0, 1]^2 x [-1/sqrt(2)+delta, delta], blow-up at t = 1/sqrt(2).

delta shifts the time window so its right end approaches the blow-up time; the
constructors reject values that would let the singularity inside the closed
window (a margin, default 1e-6, keeps 1-t resp. 1-2t^2 away from zero).

Surrogates are anything with ``eval_jet(points) -> (values, jets)`` where
points is (N, d+1), values (N, d) and jets (N, d, d+1) with the time derivative
in the last jacobian column.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .network import LossTerm, NetworkParams, forward_jet_batch
from .sampling import CollocationSet, gauss_legendre, tensor_quadrature

_DOMAIN_TOL = 1e-12


class DomainError(ValueError):
    """A point lies outside the problem's space-time domain."""


@dataclass(frozen=True)
class Face:
    """One spatial-boundary face: coordinate ``fixed_axis`` pinned to ``fixed_value``."""

    name: str
    fixed_axis: int          # index into (x..., t)
    fixed_value: float
    free_box: tuple          # (lo, hi) per remaining coordinate, time last
    component: int           # which velocity component the boundary data constrains
    g: Callable              # boundary data as a function of the free coordinates


class NetworkSurrogate:
    """Adapter letting NetworkParams act as a problem surrogate."""

    def __init__(self, params: NetworkParams):
        self.params = params

    # cap per-call batch size so dense evaluation grids stay within memory
    _CHUNK = 65536

    def eval_jet(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape[0] <= self._CHUNK:
            return forward_jet_batch(self.params, points)
        vals, jets = [], []
        for start in range(0, points.shape[0], self._CHUNK):
            v, j = forward_jet_batch(self.params, points[start:start + self._CHUNK])
            vals.append(v)
            jets.append(j)
        return np.concatenate(vals), np.concatenate(jets)


class CallableSurrogate:
    """Surrogate from closed-form value and jacobian closures (tests, exact solutions)."""

    def __init__(self, value_fn, jacobian_fn):
        self.value_fn = value_fn
        self.jacobian_fn = jacobian_fn

    def eval_jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.value_fn(points), self.jacobian_fn(points)


class Burgers1D:
    """1+1-dimensional inviscid Burgers with exact solution x/(t-1)."""

    spatial_dim = 1

    def __init__(self, delta: float, margin: float = 1e-6):
        if not 0.0 < delta <= 1.0 - margin:
            raise ValueError(
                f"delta={delta} inadmissible for the 1D problem: need 0 < delta <= {1.0 - margin} "
                f"(blow-up at t=1 must stay outside the time window)")
        self.delta = float(delta)
        self.margin = float(margin)
        self.t0 = -1.0 + delta
        self.t1 = delta
        self.spatial_box = ((-1.0, 1.0),)
        self.boundary_faces = (
            Face("x=-1", 0, -1.0, ((self.t0, self.t1),), 0,
                 lambda t: 1.0 / (1.0 - t)),
            Face("x=+1", 0, 1.0, ((self.t0, self.t1),), 0,
                 lambda t: 1.0 / (t - 1.0)),
        )

    # exact solution and derivatives
    def exact(self, x, t):
        return x / (t - 1.0)

    def exact_dx(self, x, t):
        return 1.0 / (t - 1.0) + 0.0 * x

    def exact_dt(self, x, t):
        return -x / (t - 1.0) ** 2

    def initial(self, x):
        return x / (-2.0 + self.delta)

    def exact_surrogate(self) -> CallableSurrogate:
        def values(points):
            return self.exact(points[:, 0], points[:, 1])[:, None]

        def jacobian(points):
            x, t = points[:, 0], points[:, 1]
            jac = np.empty((points.shape[0], 1, 2))
            jac[:, 0, 0] = self.exact_dx(x, t)
            jac[:, 0, 1] = self.exact_dt(x, t)
            return jac

        return CallableSurrogate(values, jacobian)

    def exact_l2_norm_sq(self) -> float:
        """Closed form of the space-time integral of u^2."""
        # int x^2 dx = 2/3; int dt / (t-1)^2 = 1/(1-t1) - 1/(1-t0)
        return (2.0 / 3.0) * (1.0 / (1.0 - self.t1) - 1.0 / (1.0 - self.t0))

    def sup_grad_exact(self) -> float:
        """sup |u_x| over the domain, attained at t = delta: 1/(1-delta)."""
        return 1.0 / (1.0 - self.delta)

    def check_domain(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, t = points[:, 0], points[:, 1]
        bad = ((x < -1.0 - _DOMAIN_TOL) | (x > 1.0 + _DOMAIN_TOL)
               | (t < self.t0 - _DOMAIN_TOL) | (t > self.t1 + _DOMAIN_TOL))
        if bad.any():
            raise DomainError(f"point {points[np.argmax(bad)]} outside the space-time domain")
        return points


class Burgers2D:
    """2+1-dimensional inviscid Burgers with the exact blow-up pair (u1, u2)."""

    spatial_dim = 2
    T_BLOWUP = 1.0 / np.sqrt(2.0)

    def __init__(self, delta: float, margin: float = 1e-6):
        if not 0.0 < delta <= self.T_BLOWUP - margin:
            raise ValueError(
                f"delta={delta} inadmissible for the 2D problem: need "
                f"0 < delta <= {self.T_BLOWUP - margin} (singularity of 1-2t^2 excluded)")
        self.delta = float(delta)
        self.margin = float(margin)
        self.t0 = -self.T_BLOWUP + delta
        self.t1 = delta
        self.spatial_box = ((0.0, 1.0), (0.0, 1.0))
        t_box = (self.t0, self.t1)
        self.boundary_faces = (
            # u1 constrained on the x1 faces, u2 on the x2 faces; free coords
            # are (other spatial coordinate, t)
            Face("x1=0", 0, 0.0, ((0.0, 1.0), t_box), 0,
                 lambda x2, t: x2 / (1.0 - 2.0 * t * t)),
            Face("x1=1", 0, 1.0, ((0.0, 1.0), t_box), 0,
                 lambda x2, t: (1.0 + x2 - 2.0 * t) / (1.0 - 2.0 * t * t)),
            Face("x2=0", 1, 0.0, ((0.0, 1.0), t_box), 1,
                 lambda x1, t: x1 / (1.0 - 2.0 * t * t)),
            Face("x2=1", 1, 1.0, ((0.0, 1.0), t_box), 1,
                 lambda x1, t: (x1 - 1.0 - 2.0 * t) / (1.0 - 2.0 * t * t)),
        )

    def exact(self, x1, x2, t):
        den = 1.0 - 2.0 * t * t
        u1 = (x1 + x2 - 2.0 * x1 * t) / den
        u2 = (x1 - x2 - 2.0 * x2 * t) / den
        return u1, u2

    def initial(self, x1, x2):
        d = self.delta
        den = 2.0 * d * (np.sqrt(2.0) - d)
        u1 = ((1.0 + np.sqrt(2.0) - 2.0 * d) * x1 + x2) / den
        u2 = (x1 - (1.0 - np.sqrt(2.0) + 2.0 * d) * x2) / den
        return u1, u2

    def exact_surrogate(self) -> CallableSurrogate:
        def values(points):
            u1, u2 = self.exact(points[:, 0], points[:, 1], points[:, 2])
            return np.stack([u1, u2], axis=1)

        def jacobian(points):
            x1, x2, t = points[:, 0], points[:, 1], points[:, 2]
            den = 1.0 - 2.0 * t * t
            jac = np.empty((points.shape[0], 2, 3))
            jac[:, 0, 0] = (1.0 - 2.0 * t) / den
            jac[:, 0, 1] = 1.0 / den
            jac[:, 0, 2] = (-2.0 * x1 * den + 4.0 * t * (x1 + x2 - 2.0 * x1 * t)) / den ** 2
            jac[:, 1, 0] = 1.0 / den
            jac[:, 1, 1] = -(1.0 + 2.0 * t) / den
            jac[:, 1, 2] = (-2.0 * x2 * den + 4.0 * t * (x1 - x2 - 2.0 * x2 * t)) / den ** 2
            return jac

        return CallableSurrogate(values, jacobian)

    def exact_l2_norm_sq(self) -> float:
        """Closed-form antiderivative of the spatial integral of |u|^2, at the endpoints."""
        def antiderivative(t):
            den = 12.0 * (1.0 - 2.0 * t * t)
            return (11.0 * t - 7.0) / den + (5.0 * t + 1.0) / den

        return antiderivative(self.t1) - antiderivative(self.t0)

    def sup_grad_exact(self) -> float:
        """Max row-sum of |spatial jacobian| of the exact pair, over the time endpoints."""
        vals = []
        for t in (self.t0, self.t1):
            den = 1.0 - 2.0 * t * t
            vals.append((abs(1.0 - 2.0 * t) + 1.0) / den)
            vals.append((1.0 + abs(1.0 + 2.0 * t)) / den)
        return max(vals)

    def check_domain(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2, t = points[:, 0], points[:, 1], points[:, 2]
        bad = ((x1 < -_DOMAIN_TOL) | (x1 > 1.0 + _DOMAIN_TOL)
               | (x2 < -_DOMAIN_TOL) | (x2 > 1.0 + _DOMAIN_TOL)
               | (t < self.t0 - _DOMAIN_TOL) | (t > self.t1 + _DOMAIN_TOL))
        if bad.any():
            raise DomainError(f"point {points[np.argmax(bad)]} outside the space-time domain")
        return points


def make_problem(kind: str, delta: float, margin: float = 1e-6):
    if kind == "burgers1d":
        return Burgers1D(delta, margin)
    if kind == "burgers2d":
        return Burgers2D(delta, margin)
    raise ValueError(f"unknown problem kind '{kind}' (expected burgers1d or burgers2d)")


# ---------------------------------------------------------------------------
# residual operators
# ---------------------------------------------------------------------------

def _interior_residual_from_jet(values, jets):
    """r_i = du_i/dt + sum_j u_j du_i/dx_j, shape (N, d)."""
    d = values.shape[1]
    return jets[:, :, d] + (jets[:, :, :d] * values[:, None, :]).sum(axis=2)


def residual_interior(problem, surrogate, points) -> np.ndarray:
    """PDE residual of the surrogate at interior points; (N, d) (squeezed for 1 point)."""
    points = problem.check_domain(points)
    values, jets = surrogate.eval_jet(points)
    return _interior_residual_from_jet(values, jets)


def residual_initial(problem, surrogate, x) -> np.ndarray:
    """u_theta(x, t0) - u(x, t0) at spatial points x, shape (N, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = problem.spatial_dim
    if x.shape[1] != d:
        raise DomainError(f"initial-time points must have {d} spatial coordinates")
    for k, (lo, hi) in enumerate(problem.spatial_box):
        if ((x[:, k] < lo - _DOMAIN_TOL) | (x[:, k] > hi + _DOMAIN_TOL)).any():
            raise DomainError(f"initial-time point outside the spatial domain: {x}")
    points = np.hstack([x, np.full((x.shape[0], 1), problem.t0)])
    values, _ = surrogate.eval_jet(points)
    if d == 1:
        target = problem.initial(x[:, 0])[:, None]
    else:
        u1, u2 = problem.initial(x[:, 0], x[:, 1])
        target = np.stack([u1, u2], axis=1)
    return values - target


def _face_by_name(problem, face_id: str) -> Face:
    for face in problem.boundary_faces:
        if face.name == face_id:
            return face
    raise DomainError(f"unknown boundary face '{face_id}' "
                      f"(have {[f.name for f in problem.boundary_faces]})")


def _face_target(face: Face, points) -> np.ndarray:
    free_axes = [ax for ax in range(points.shape[1]) if ax != face.fixed_axis]
    return face.g(*[points[:, ax] for ax in free_axes])


def residual_boundary(problem, surrogate, face_id: str, points) -> np.ndarray:
    """Constrained component minus the face's boundary data, shape (N,)."""
    face = _face_by_name(problem, face_id)
    points = problem.check_domain(points)
    if np.max(np.abs(points[:, face.fixed_axis] - face.fixed_value)) > _DOMAIN_TOL:
        raise DomainError(f"point not on face {face_id}")
    values, _ = surrogate.eval_jet(points)
    return values[:, face.component] - _face_target(face, points)


def empirical_loss(problem, surrogate, colloc: CollocationSet) -> float:
    """Mean squared residual per point family, summed with unit weights."""
    _require_families(colloc)
    r_int = residual_interior(problem, surrogate, colloc.interior)
    loss = float(np.mean(np.sum(r_int * r_int, axis=1)))
    r_tb = residual_initial(problem, surrogate, colloc.initial)
    loss += float(np.mean(np.sum(r_tb * r_tb, axis=1)))
    for name, pts in colloc.boundary.items():
        r_sb = residual_boundary(problem, surrogate, name, pts)
        loss += float(np.mean(r_sb * r_sb))
    return loss


def _require_families(colloc: CollocationSet):
    if colloc.interior.shape[0] == 0 or colloc.initial.shape[0] == 0:
        raise ValueError("collocation set has an empty point family")
    if not colloc.boundary or any(p.shape[0] == 0 for p in colloc.boundary.values()):
        raise ValueError("collocation set has an empty boundary family")


# ---------------------------------------------------------------------------
# training loss terms (value- and jet-gradients for the reverse sweep)
# ---------------------------------------------------------------------------

def loss_terms(problem, colloc: CollocationSet) -> list[LossTerm]:
    """The empirical PINN loss as differentiable terms for network training."""
    _require_families(colloc)
    d = problem.spatial_dim
    terms = []

    n_int = colloc.interior.shape[0]

    def interior_fn(values, jets, _n=n_int, _d=d):
        r = _interior_residual_from_jet(values, jets)
        loss = float(np.sum(r * r)) / _n
        scale = 2.0 / _n
        dv = scale * (r[:, :, None] * jets[:, :, :_d]).sum(axis=1)
        dj = np.empty_like(jets)
        dj[:, :, :_d] = scale * r[:, :, None] * values[:, None, :]
        dj[:, :, _d] = scale * r
        return loss, dv, dj

    terms.append(LossTerm(problem.check_domain(colloc.interior), interior_fn, "interior"))

    x = colloc.initial
    if d == 1:
        target = problem.initial(x[:, 0])[:, None]
    else:
        u1, u2 = problem.initial(x[:, 0], x[:, 1])
        target = np.stack([u1, u2], axis=1)
    tb_points = np.hstack([x, np.full((x.shape[0], 1), problem.t0)])

    def initial_fn(values, jets, _target=target):
        r = values - _target
        n = r.shape[0]
        return float(np.sum(r * r)) / n, (2.0 / n) * r, None

    terms.append(LossTerm(tb_points, initial_fn, "initial"))

    for face in problem.boundary_faces:
        pts = colloc.boundary[face.name]
        target_b = _face_target(face, pts)

        def boundary_fn(values, jets, _t=target_b, _c=face.component):
            r = values[:, _c] - _t
            n = r.shape[0]
            dv = np.zeros_like(values)
            dv[:, _c] = (2.0 / n) * r
            return float(np.sum(r * r)) / n, dv, None

        terms.append(LossTerm(pts, boundary_fn, f"boundary:{face.name}"))
    return terms


# ---------------------------------------------------------------------------
# L2 risk
# ---------------------------------------------------------------------------

def risk_grid(problem, n: int):
    """Tensor Gauss-Legendre grid over the full space-time domain."""
    box = list(problem.spatial_box) + [(problem.t0, problem.t1)]
    return tensor_quadrature(gauss_legendre(n), box)


def l2_risk(problem, surrogate, grid=None, n: int | None = None) -> float:
    """Space-time integral of |u - u_theta|^2 (the squared L2 risk)."""
    if grid is None:
        if n is None:
            n = 64 if problem.spatial_dim == 1 else 32
        grid = risk_grid(problem, n)
    points, weights = grid
    values, _ = surrogate.eval_jet(points)
    exact = problem.exact_surrogate()
    exact_values, _ = exact.eval_jet(points)
    diff = values - exact_values
    return float(np.sum(weights * np.sum(diff * diff, axis=1)))


def generalization_error(problem, surrogate, grid=None, n: int | None = None) -> float:
    """E_G: square root of the L2 risk (1D figure-of-merit)."""
    return float(np.sqrt(max(l2_risk(problem, surrogate, grid, n), 0.0)))
