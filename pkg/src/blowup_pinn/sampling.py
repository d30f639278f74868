"""Collocation-set generation and Gauss-Legendre quadrature.

Quadrature nodes are Legendre-polynomial roots found by Newton iteration from
Chebyshev initial guesses (tolerance 1e-14); weights come from the standard
derivative formula. Tensor rules map affinely onto hyper-rectangles, so weight
sums always equal the box measure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NEWTON_TOL = 1e-14
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class QuadratureRule1D:
    """Gauss-Legendre rule on [-1, 1]: exact for polynomials of degree <= 2n-1."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray


def gauss_legendre(n: int) -> QuadratureRule1D:
    """Nodes and weights of the order-n Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise ValueError(f"quadrature order must be >= 1, got {n}")
    if n == 1:
        return QuadratureRule1D(1, np.array([0.0]), np.array([2.0]))
    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(NEWTON_MAX_ITER):
        p_prev = np.ones_like(x)
        p = x.copy()
        for k in range(2, n + 1):
            p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < NEWTON_TOL:
            break
    else:
        raise RuntimeError(f"Legendre root solve did not converge for n={n}")
    # enforce exact symmetry about 0
    x = 0.5 * (x - x[::-1])
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return QuadratureRule1D(n, x[order], w[order])


def map_rule(rule: QuadratureRule1D, lo: float, hi: float):
    """Affinely map a [-1, 1] rule onto [lo, hi]."""
    if not hi > lo:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    half = 0.5 * (hi - lo)
    return lo + half * (rule.nodes + 1.0), half * rule.weights


def tensor_quadrature(rule: QuadratureRule1D, box) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule over a hyper-rectangle.

    ``box`` is a sequence of (lo, hi) pairs. Returns points (N, dim) and
    weights (N,) whose sum equals the box volume.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    axes = [map_rule(rule, lo, hi) for lo, hi in box]
    nodes = [a[0] for a in axes]
    weights = [a[1] for a in axes]
    grids = np.meshgrid(*nodes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    w = weights[0]
    for wk in weights[1:]:
        w = np.multiply.outer(w, wk)
    return points, w.ravel()


@dataclass(frozen=True)
class CollocationCounts:
    n_int: int
    n_tb: int
    n_sb: int  # per boundary face

    def __post_init__(self):
        if min(self.n_int, self.n_tb, self.n_sb) < 1:
            raise ValueError(f"collocation counts must be positive, got {self}")


@dataclass(frozen=True)
class CollocationSet:
    """Interior, initial-time, and per-face boundary collocation points.

    ``interior`` holds full space-time coordinates, ``initial`` spatial
    coordinates only, ``boundary`` maps face name -> full space-time points on
    that face. Weights are all-ones for the random and grid schemes and true
    quadrature weights (summing to the subdomain measure) for gauss-legendre.
    """

    scheme: str
    interior: np.ndarray
    interior_weights: np.ndarray
    initial: np.ndarray
    initial_weights: np.ndarray
    boundary: dict[str, np.ndarray]
    boundary_weights: dict[str, np.ndarray] = field(repr=False, default=None)

    @property
    def n_int(self) -> int:
        return self.interior.shape[0]

    @property
    def n_tb(self) -> int:
        return self.initial.shape[0]

    @property
    def n_sb(self) -> int:
        return min(p.shape[0] for p in self.boundary.values())


def _per_axis_order(n_target: int, dim: int) -> int:
    return max(1, int(np.ceil(n_target ** (1.0 / dim))))


def sample_collocation(problem, counts: CollocationCounts, scheme: str = "random",
                       seed: int = 0) -> CollocationSet:
    """Draw a collocation set for a Burgers problem instance.

    scheme 'random': i.i.d. uniform over each (sub)domain, unit weights.
    scheme 'grid': cell-centered regular grids, unit weights.
    scheme 'gauss-legendre': tensor quadrature rules per subdomain; the per-axis
    order is the smallest m with m^dim >= the requested count, so actual counts
    may slightly exceed the request.
    """
    if scheme not in ("random", "grid", "gauss-legendre"):
        raise ValueError(f"unknown collocation scheme '{scheme}'")
    d = problem.spatial_dim
    interior_box = list(problem.spatial_box) + [(problem.t0, problem.t1)]
    rng = np.random.default_rng(seed)

    def sample_box(box, n):
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        if scheme == "random":
            return lo + (hi - lo) * rng.random((n, len(box))), np.ones(n)
        if scheme == "grid":
            m = _per_axis_order(n, len(box))
            axes = [l + (h - l) * (np.arange(m) + 0.5) / m for l, h in box]
            grids = np.meshgrid(*axes, indexing="ij")
            return np.stack([g.ravel() for g in grids], axis=1), np.ones(m ** len(box))
        m = _per_axis_order(n, len(box))
        return tensor_quadrature(gauss_legendre(m), box)

    interior, w_int = sample_box(interior_box, counts.n_int)
    initial, w_tb = sample_box(list(problem.spatial_box), counts.n_tb)
    boundary, w_sb = {}, {}
    for face in problem.boundary_faces:
        free_box = face.free_box
        pts, w = sample_box(free_box, counts.n_sb)
        full = np.empty((pts.shape[0], d + 1))
        free_axes = [ax for ax in range(d + 1) if ax != face.fixed_axis]
        for col, ax in enumerate(free_axes):
            full[:, ax] = pts[:, col]
        full[:, face.fixed_axis] = face.fixed_value
        boundary[face.name] = full
        w_sb[face.name] = w
    return CollocationSet(scheme, interior, w_int, initial, w_tb, boundary, w_sb)


def export_csv(colloc: CollocationSet, path) -> None:
    """Audit dump: one row per point with family tag and weight."""
    dim = colloc.interior.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family"] + [f"c{k}" for k in range(dim)] + ["weight"])
        for p, w in zip(colloc.interior, colloc.interior_weights):
            writer.writerow(["interior"] + [repr(float(v)) for v in p] + [repr(float(w))])
        for p, w in zip(colloc.initial, colloc.initial_weights):
            row = [repr(float(v)) for v in p] + [""] * (dim - colloc.initial.shape[1])
            writer.writerow(["initial"] + row + [repr(float(w))])
        for name, pts in colloc.boundary.items():
            for p, w in zip(pts, colloc.boundary_weights[name]):
                writer.writerow([f"boundary:{name}"] + [repr(float(v)) for v in p]
                                + [repr(float(w))])
