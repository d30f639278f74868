"""End-to-end acceptance suite.

Each test checks one release criterion at its stated tolerance and prints a
single PASS line with the measured value (visible with ``pytest -s`` or on
failure). The experiment-scale tests share module-scoped sweep fixtures; the
two-dimensional sweep is marked ``slow``.
"""

import math
import time

import numpy as np
import pytest

from blowup_pinn.bounds import (
    QuadratureErrorConfig,
    assemble_ct,
    theorem2_constants,
    theoremB1_bound,
)
from blowup_pinn.harness import SweepSpec, delta_sweep, timing_study, width_sweep
from blowup_pinn.network import (
    flatten,
    forward,
    forward_jet,
    init_params,
    loss_and_grad,
    loss_value,
    unflatten,
)
from blowup_pinn.problems import (
    NetworkSurrogate,
    l2_risk,
    loss_terms,
    make_problem,
    residual_boundary,
    residual_initial,
    residual_interior,
)
from blowup_pinn.sampling import (
    CollocationCounts,
    gauss_legendre,
    map_rule,
    sample_collocation,
    tensor_quadrature,
)


def report(name, **values):
    detail = ", ".join(f"{k}={v}" for k, v in values.items())
    print(f"PASS {name}: {detail}")


def rel_err(got, ref):
    got = np.asarray(got, dtype=float)
    ref = np.asarray(ref, dtype=float)
    denom = max(float(np.max(np.abs(ref))), 1e-300)
    return float(np.max(np.abs(got - ref))) / denom


# ---------------------------------------------------------------------------
# desk-scale criteria
# ---------------------------------------------------------------------------

class TestExactSolutionOracles:
    def test_exact_solutions_annihilate_all_residuals(self):
        start = time.monotonic()
        worst_residual = 0.0
        worst_risk = 0.0
        cases = [("burgers1d", (0.1, 0.5, 0.9)), ("burgers2d", (0.1, 0.3, 0.6))]
        for kind, deltas in cases:
            for delta in deltas:
                problem = make_problem(kind, delta)
                surrogate = problem.exact_surrogate()
                rng = np.random.default_rng(17)
                d = problem.spatial_dim
                box = list(problem.spatial_box) + [(problem.t0, problem.t1)]
                lo = np.array([b[0] for b in box])
                hi = np.array([b[1] for b in box])
                pts = lo + (hi - lo) * rng.random((1000, d + 1))
                worst_residual = max(
                    worst_residual,
                    float(np.max(np.abs(residual_interior(problem, surrogate, pts)))))
                xs = pts[:, :d]
                worst_residual = max(
                    worst_residual,
                    float(np.max(np.abs(residual_initial(problem, surrogate, xs)))))
                for face in problem.boundary_faces:
                    bpts = pts.copy()
                    bpts[:, face.fixed_axis] = face.fixed_value
                    worst_residual = max(
                        worst_residual,
                        float(np.max(np.abs(
                            residual_boundary(problem, surrogate, face.name, bpts)))))
                worst_risk = max(worst_risk, l2_risk(problem, surrogate, n=32))
        elapsed = time.monotonic() - start
        assert worst_residual <= 1e-10
        assert worst_risk <= 1e-12
        assert elapsed < 10.0
        report("exact-solution oracle suite",
               max_residual=worst_residual, max_l2_risk=worst_risk,
               seconds=round(elapsed, 2))


class TestDifferentiation:
    def test_jacobians_and_loss_gradients_match_finite_differences(self):
        start = time.monotonic()
        rng = np.random.default_rng(99)
        worst_jac = 0.0
        worst_grad = 0.0
        for trial in range(50):
            kind = "burgers1d" if trial % 2 == 0 else "burgers2d"
            problem = make_problem(kind, 0.3)
            width = int(rng.integers(3, 8))
            depth = int(rng.integers(2, 4))
            d_in = problem.spatial_dim + 1
            sizes = (d_in, *([width] * depth), problem.spatial_dim)
            params = init_params(sizes, seed=int(rng.integers(0, 1 << 30)))

            point = rng.uniform(-0.5, 0.5, size=d_in)
            jet = forward_jet(params, point)
            h = 1e-5
            fd_cols = []
            for j in range(d_in):
                e = np.zeros(d_in)
                e[j] = h
                fd_cols.append((forward(params, point + e)
                                - forward(params, point - e)) / (2 * h))
            fd_jac = np.stack(fd_cols, axis=1)
            worst_jac = max(worst_jac, rel_err(jet.input_jacobian, fd_jac))

            counts = CollocationCounts(8, 4, 4)
            colloc = sample_collocation(problem, counts, "random",
                                        seed=int(rng.integers(0, 1 << 30)))
            terms = loss_terms(problem, colloc)
            _, grad = loss_and_grad(params, terms)
            flat = flatten(params)
            fd_grad = np.empty_like(flat)
            for i in range(flat.size):
                e = np.zeros_like(flat)
                e[i] = h
                up = loss_value(unflatten(sizes, flat + e), terms)
                dn = loss_value(unflatten(sizes, flat - e), terms)
                fd_grad[i] = (up - dn) / (2 * h)
            worst_grad = max(worst_grad, rel_err(grad, fd_grad))
        elapsed = time.monotonic() - start
        assert worst_jac <= 1e-5
        assert worst_grad <= 1e-4
        assert elapsed < 60.0
        report("differentiation suite",
               max_jacobian_rel=worst_jac, max_gradient_rel=worst_grad,
               seconds=round(elapsed, 2))


class TestQuadrature:
    def test_monomial_exactness_and_measures(self):
        worst = 0.0
        for n in range(1, 21):
            rule = gauss_legendre(n)
            for degree in range(2 * n):
                exact = 0.0 if degree % 2 else 2.0 / (degree + 1)
                got = float(np.sum(rule.weights * rule.nodes ** degree))
                worst = max(worst, abs(got - exact))
        assert worst <= 1e-12

        worst_measure = 0.0
        for kind, delta in (("burgers1d", 0.5), ("burgers2d", 0.3)):
            problem = make_problem(kind, delta)
            box = list(problem.spatial_box) + [(problem.t0, problem.t1)]
            measure = math.prod(hi - lo for lo, hi in box)
            _, w = tensor_quadrature(gauss_legendre(7), box)
            worst_measure = max(worst_measure, abs(float(np.sum(w)) - measure))
            _, w1 = map_rule(gauss_legendre(9), problem.t0, problem.t1)
            worst_measure = max(
                worst_measure,
                abs(float(np.sum(w1)) - (problem.t1 - problem.t0)))
        assert worst_measure <= 1e-12
        report("quadrature suite",
               max_monomial_err=worst, max_measure_err=worst_measure)


class TestTheoremB1Consistency:
    def test_b1_equals_discrete_assembly_with_zero_corrections(self):
        worst = 0.0
        for delta in (0.1, 0.5, 0.9):
            problem = make_problem("burgers1d", delta)
            colloc = sample_collocation(problem, CollocationCounts(64, 16, 16),
                                        "gauss-legendre", seed=3)
            surrogate = NetworkSurrogate(init_params((2, 10, 10, 1), seed=5))
            rep = theoremB1_bound(problem, surrogate, colloc,
                                  QuadratureErrorConfig())
            assert rep.correction == 0.0

            _, c, c_1b = theorem2_constants(delta)
            r_tb = residual_initial(problem, surrogate, colloc.initial)[:, 0]
            e_tb = float(np.sum(colloc.initial_weights * r_tb ** 2))
            r_int = residual_interior(problem, surrogate, colloc.interior)[:, 0]
            e_int = float(np.sum(colloc.interior_weights * r_int ** 2))
            e_sb = {}
            for name in ("x=-1", "x=+1"):
                r = residual_boundary(problem, surrogate, name,
                                      colloc.boundary[name])
                e_sb[name] = float(np.sum(colloc.boundary_weights[name] * r ** 2))

            worst = max(worst, rel_err(rep.e_tb_sq, e_tb),
                        rel_err(rep.e_int_sq, e_int),
                        rel_err(rep.e_sb_minus_sq, e_sb["x=-1"]),
                        rel_err(rep.e_sb_plus_sq, e_sb["x=+1"]))
            assembly = assemble_ct(e_tb, e_sb["x=-1"], e_sb["x=+1"], e_int,
                                   c_1b, rep.c_2b)
            worst = max(worst, rel_err(rep.residual_assembly, assembly),
                        rel_err(rep.rhs, (1.0 + c * math.exp(c)) * assembly))
        assert worst <= 1e-12
        report("quadrature-explicit bound consistency", max_rel_err=worst)


class TestTwoDimensionalClosedForm:
    def test_exact_norm_matches_quadrature(self):
        worst = 0.0
        for delta in (0.1, 0.3, 0.5):
            problem = make_problem("burgers2d", delta)
            closed = problem.exact_l2_norm_sq()
            box = list(problem.spatial_box) + [(problem.t0, problem.t1)]
            pts, w = tensor_quadrature(gauss_legendre(60), box)
            u = problem.exact(pts[:, 0], pts[:, 1], pts[:, 2])
            numeric = float(np.sum(w * np.sum(np.asarray(u) ** 2, axis=0)))
            worst = max(worst, abs(closed - numeric) / abs(numeric))
        assert worst <= 1e-6
        report("2d closed-form norm cross-check", max_rel_err=worst)


# ---------------------------------------------------------------------------
# experiment-scale criteria (shared sweep fixtures)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def correlation_sweep_1d(tmp_path_factory):
    spec = SweepSpec(problem="burgers1d",
                     deltas=(0.1, 0.3, 0.5, 0.7, 0.9, 0.95),
                     widths=(30,), depth=6, seeds=(0,),
                     iterations=20000, lr=1e-4,
                     n_int=256, n_tb=64, n_sb=64,
                     out_dir=str(tmp_path_factory.mktemp("sweep1d")),
                     sweep_id="accept-1d")
    start = time.monotonic()
    records, summary, n_failed = delta_sweep(spec)
    return records, summary, n_failed, time.monotonic() - start


@pytest.fixture(scope="module")
def correlation_sweep_2d(tmp_path_factory):
    spec = SweepSpec(problem="burgers2d",
                     deltas=(0.05, 0.1, 0.15, 0.2, 0.25, 0.3),
                     widths=(30,), depth=6, seeds=(0,),
                     iterations=20000, lr=1e-4,
                     n_int=512, n_tb=128, n_sb=128,
                     out_dir=str(tmp_path_factory.mktemp("sweep2d")),
                     sweep_id="accept-2d")
    start = time.monotonic()
    records, summary, n_failed = delta_sweep(spec)
    return records, summary, n_failed, time.monotonic() - start


@pytest.fixture(scope="module")
def width_sweep_records(tmp_path_factory):
    spec = SweepSpec(problem="burgers1d", deltas=(0.5,),
                     widths=(20, 40, 80, 160), depth=2, seeds=(0, 1, 2),
                     iterations=6000, lr=1e-4,
                     n_int=256, n_tb=64, n_sb=64,
                     out_dir=str(tmp_path_factory.mktemp("widths")),
                     sweep_id="accept-width")
    return width_sweep(spec)


@pytest.fixture(scope="module")
def timing_records(tmp_path_factory):
    spec = SweepSpec(problem="burgers1d", deltas=(0.1, 0.3, 0.5, 0.7, 0.9),
                     widths=(30,), depth=6, seeds=(0, 1, 2),
                     iterations=3000, lr=1e-4,
                     n_int=256, n_tb=64, n_sb=64,
                     out_dir=str(tmp_path_factory.mktemp("timing")),
                     sweep_id="accept-timing")
    return timing_study(spec)


def _summary_value(summary, metric):
    for row in summary:
        if row["metric"] == metric:
            return row["value"]
    raise AssertionError(f"metric {metric!r} missing from summary")


def _assert_dominance(records, lhs_attr, rhs_attr, failures):
    for r in records:
        lhs = getattr(r, lhs_attr)
        rhs = getattr(r, rhs_attr)
        if lhs is None or rhs is None:
            continue
        scale = max(abs(lhs), abs(rhs))
        if rhs - lhs < -1e-9 * scale:
            failures.append((r.run_id, lhs, rhs))


class TestCorrelation1D:
    def test_delta_sweep_correlation(self, correlation_sweep_1d):
        records, summary, n_failed, elapsed = correlation_sweep_1d
        assert n_failed == 0
        value = _summary_value(summary, "pearson_lhs_rhs")
        assert value >= 0.9
        assert elapsed <= 30 * 60
        report("1d delta-sweep correlation",
               pearson=value, seconds=round(elapsed, 1))


@pytest.mark.slow
class TestCorrelation2D:
    def test_delta_sweep_correlation(self, correlation_sweep_2d):
        records, summary, n_failed, elapsed = correlation_sweep_2d
        assert n_failed == 0
        value = _summary_value(summary, "pearson_lhs_rhs")
        assert value >= 0.4
        assert elapsed <= 2 * 3600
        failures = []
        _assert_dominance(records, "lhs_t1", "rhs_t1", failures)
        assert not failures
        report("2d delta-sweep correlation",
               pearson=value, seconds=round(elapsed, 1))


class TestWidthTrend:
    def test_bound_does_not_grow_with_width(self, width_sweep_records):
        records, summary, n_failed = width_sweep_records
        assert n_failed == 0
        value = _summary_value(summary, "spearman_rhs_width")
        assert value <= 0.0
        report("width-trend study", spearman=value)


class TestTimingStudy:
    def test_wall_time_insensitive_to_delta(self, timing_records):
        records, summary, n_failed = timing_records
        assert n_failed == 0
        value = _summary_value(summary, "timing_cv")
        assert value <= 0.25
        report("timing study", cv=value)


class TestBoundDominance:
    def test_rhs_dominates_lhs_on_all_trained_runs(self, correlation_sweep_1d,
                                                   width_sweep_records):
        failures = []
        n_checked = 0
        for records in (correlation_sweep_1d[0], width_sweep_records[0]):
            for r in records:
                if r.lhs_t2 is not None and r.rhs_t2 is not None:
                    n_checked += 1
            _assert_dominance(records, "lhs_t2", "rhs_t2", failures)
        assert n_checked > 0
        assert not failures, f"dominance violated on {failures}"
        report("bound dominance", runs_checked=n_checked)
