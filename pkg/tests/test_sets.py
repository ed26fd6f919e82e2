"""Ellipsoid evaluation, exact projections and instance generation."""

import numpy as np
import pytest

from vicrm.geometry import separating_halfspace
from vicrm.sets import (
    Ellipsoid,
    FeasibleSet,
    ProjectionFailure,
    bounding_radius,
    eval_constraint,
    feasible_set_from_json,
    feasible_set_to_json,
    generate_feasible_set,
    max_violation,
    project_ellipsoid,
    project_intersection,
)


def unit_ball(n=2):
    return Ellipsoid(quad=np.eye(n), lin=np.zeros(n), level=1.0)


def two_ball_lens():
    balls = [
        Ellipsoid(quad=np.eye(2), lin=np.array([-0.5, 0.0]), level=0.75),
        Ellipsoid(quad=np.eye(2), lin=np.array([0.5, 0.0]), level=0.75),
    ]
    # g(x) = |x|^2 -/+ x1 - 0.75 = |x -/+ (0.5,0)|^2 - 1: unit balls at (+-0.5, 0)
    return FeasibleSet(ellipsoids=balls, slater_point=np.zeros(2))


def test_eval_unit_ball():
    value, gradient = eval_constraint(unit_ball(), [2.0, 0.0])
    assert value == pytest.approx(3.0)
    assert np.allclose(gradient, [4.0, 0.0])


def test_eval_at_unconstrained_minimizer():
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((4, 4))
    e = Ellipsoid(quad=mat @ mat.T + np.eye(4), lin=rng.standard_normal(4), level=2.0)
    xhat = -np.linalg.solve(e.quad, e.lin)
    value, gradient = eval_constraint(e, xhat)
    assert np.allclose(gradient, 0.0, atol=1e-10)
    assert value == pytest.approx(-e.lin @ np.linalg.solve(e.quad, e.lin) - e.level)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    mat = rng.standard_normal((6, 6))
    e = Ellipsoid(quad=mat @ mat.T + 0.1 * np.eye(6), lin=rng.standard_normal(6), level=1.0)
    h = 1e-6
    for _ in range(10):
        x = rng.standard_normal(6)
        _, grad = eval_constraint(e, x)
        fd = np.empty(6)
        for i in range(6):
            step = np.zeros(6)
            step[i] = h
            fd[i] = (eval_constraint(e, x + step)[0] - eval_constraint(e, x - step)[0]) / (2 * h)
        assert np.linalg.norm(fd - grad) <= 1e-6 * (1 + np.linalg.norm(grad))


def test_eval_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_constraint(unit_ball(), [1.0, 2.0, 3.0])


def test_max_violation_picks_largest():
    fs = two_ball_lens()
    value, idx = max_violation(fs, np.array([3.0, 0.0]))
    vals, _ = fs.eval_all(np.array([3.0, 0.0]))
    assert value == pytest.approx(vals.max())
    assert idx == int(np.argmax(vals))


def test_max_violation_slater_negative():
    fs = generate_feasible_set(4, 3, seed=5)
    value, _ = max_violation(fs, fs.slater_point)
    assert value < 0


def test_max_violation_tie_break_smallest_index():
    balls = [unit_ball(), unit_ball()]
    fs = FeasibleSet(ellipsoids=balls, slater_point=np.zeros(2))
    value, idx = max_violation(fs, np.array([2.0, 0.0]))
    assert value == pytest.approx(3.0)
    assert idx == 0


def test_project_ellipsoid_radial():
    assert np.allclose(project_ellipsoid(unit_ball(), [2.0, 0.0]), [1.0, 0.0], atol=1e-10)


def test_project_ellipsoid_interior_identity():
    x = np.array([0.2, -0.1])
    assert np.array_equal(project_ellipsoid(unit_ball(), x), x)


def test_project_ellipsoid_kkt():
    e = Ellipsoid(quad=np.diag([1.0, 4.0]), lin=np.zeros(2), level=1.0)
    x = np.array([2.0, 2.0])
    y = project_ellipsoid(e, x, tol=1e-12)
    value, gradient = eval_constraint(e, y)
    assert abs(value) <= 1e-8
    # displacement parallel to the constraint gradient
    d = x - y
    cross = d[0] * gradient[1] - d[1] * gradient[0]
    assert abs(cross) <= 1e-8 * np.linalg.norm(d) * np.linalg.norm(gradient)


def test_project_ellipsoid_failure_carries_best():
    e = Ellipsoid(quad=np.diag([1.0, 9.0]), lin=np.zeros(2), level=1.0)
    with pytest.raises(ProjectionFailure) as info:
        project_ellipsoid(e, [5.0, 5.0], tol=1e-14, max_iter=1)
    assert info.value.best is not None
    assert info.value.residual is not None


def test_project_intersection_single_set_matches_ellipsoid():
    e = unit_ball()
    fs = FeasibleSet(ellipsoids=[e], slater_point=np.zeros(2))
    x = np.array([3.0, 1.0])
    assert np.allclose(project_intersection(fs, x),
                       project_ellipsoid(e, x), atol=1e-9)


def test_project_intersection_interior_identity():
    fs = two_ball_lens()
    x = np.array([0.0, 0.1])
    assert np.array_equal(project_intersection(fs, x), x)


def test_project_intersection_lens_boundary_grid():
    fs = two_ball_lens()
    x = np.array([0.0, 5.0])
    p = project_intersection(fs, x, tol=1e-12)
    vals, _ = fs.eval_all(p)
    assert vals.max() <= 1e-8
    # dense sampling of the lens boundary (arcs of both circles inside the
    # other ball) cannot beat the returned point by more than the grid gap
    angles = np.linspace(0, 2 * np.pi, 200_001)
    best = np.inf
    for centre in ((0.5, 0.0), (-0.5, 0.0)):
        arc = np.stack([centre[0] + np.cos(angles), centre[1] + np.sin(angles)], axis=1)
        vals_all = np.stack([
            (arc ** 2).sum(axis=1) + 2 * arc @ e.lin - e.level for e in fs.ellipsoids
        ])
        keep = vals_all.max(axis=0) <= 1e-9
        if keep.any():
            dists = np.linalg.norm(arc[keep] - x, axis=1)
            best = min(best, dists.min())
    assert np.linalg.norm(p - x) <= best + 1e-4


def test_generate_margin_at_origin():
    for seed in (0, 42, 123):
        fs = generate_feasible_set(6, 3, seed)
        vals, _ = fs.eval_all(np.zeros(6))
        assert np.allclose(vals, -1.0)
        assert fs.slater_margin == pytest.approx(1.0)


def test_generate_deterministic():
    a = generate_feasible_set(5, 2, seed=42)
    b = generate_feasible_set(5, 2, seed=42)
    for ea, eb in zip(a.ellipsoids, b.ellipsoids):
        assert np.array_equal(ea.quad, eb.quad)
        assert np.array_equal(ea.lin, eb.lin)


def test_generate_positive_definite():
    fs = generate_feasible_set(5, 2, seed=42)
    for e in fs.ellipsoids:
        assert np.linalg.eigvalsh(e.quad).min() > 0


def test_distance_bound_through_slater_point():
    # dist(y, C) <= |y - w| g(y) / (g(y) - g(w)) for infeasible y
    rng = np.random.default_rng(3)
    fs = generate_feasible_set(4, 3, seed=9)
    w = fs.slater_point
    gw, _ = max_violation(fs, w)
    checked = 0
    while checked < 20:
        y = rng.uniform(-2, 2, size=4)
        gy, _ = max_violation(fs, y)
        if gy <= 0:
            continue
        dist = np.linalg.norm(y - project_intersection(fs, y, tol=1e-12))
        bound = np.linalg.norm(y - w) * gy / (gy - gw)
        assert dist <= bound + 1e-6
        checked += 1


def test_separator_contains_feasible_set():
    rng = np.random.default_rng(8)
    fs = generate_feasible_set(3, 2, seed=4)
    radius = bounding_radius(fs)
    members = []
    while len(members) < 50:
        cand = rng.uniform(-radius, radius, size=3)
        if fs.eval_all(cand)[0].max() <= 0:
            members.append(cand)
    for _ in range(20):
        y = rng.uniform(-3, 3, size=3)
        vals, grads = fs.eval_all(y)
        i = int(np.argmax(vals))
        if vals[i] <= 0:
            continue
        sep = separating_halfspace(y, vals[i], grads[i])
        for point in members:
            assert sep.contains(point, tol=1e-10)


def test_projection_output_feasible_within_tolerance():
    rng = np.random.default_rng(2)
    fs = generate_feasible_set(5, 3, seed=11)
    for _ in range(5):
        x = rng.uniform(-3, 3, size=5)
        p = project_intersection(fs, x, tol=1e-10)
        vals, grads = fs.eval_all(p)
        i = int(np.argmax(vals))
        assert vals[i] <= 1e-10 * (1 + np.linalg.norm(grads[i]))


def test_bounding_radius_contains_set():
    fs = generate_feasible_set(4, 2, seed=17)
    radius = bounding_radius(fs)
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = rng.uniform(-radius * 1.5, radius * 1.5, size=4)
        if fs.eval_all(x)[0].max() <= 0:
            assert np.linalg.norm(x) <= radius + 1e-9


def test_json_round_trip():
    fs = generate_feasible_set(4, 2, seed=33)
    doc = feasible_set_to_json(fs)
    assert set(doc) == {"n", "m", "ellipsoids", "slater"}
    assert set(doc["ellipsoids"][0]) == {"A", "b", "alpha"}
    back = feasible_set_from_json(doc)
    assert back.dim == fs.dim and back.count == fs.count
    for ea, eb in zip(fs.ellipsoids, back.ellipsoids):
        assert np.array_equal(ea.quad, eb.quad)
        assert np.array_equal(ea.lin, eb.lin)
        assert ea.level == eb.level
    assert np.array_equal(back.slater_point, fs.slater_point)
    assert back.slater_margin == pytest.approx(fs.slater_margin)
