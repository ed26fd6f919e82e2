"""Operator families: evaluation, generation invariants, classification."""

import numpy as np
import pytest

from vicrm.operators import (
    Family,
    Monotonicity,
    OperatorSpec,
    classify_monotonicity,
    eval_operator,
    generate_operator,
    lipschitz_estimate,
    operator_from_json,
    operator_to_json,
)
from vicrm.sets import generate_feasible_set


def test_eval_pure_cubic():
    op = OperatorSpec(Family.GRADIENT, np.zeros((1, 1)), np.array([1.0]),
                      np.array([0.0]), (1, 0))
    assert np.allclose(eval_operator(op, [2.0]), [8.0])


def test_eval_affine_at_origin():
    op = generate_operator(Family.PARAMONOTONE_NONGRADIENT, 6, seed=1)
    assert np.allclose(eval_operator(op, np.zeros(6)), op.shift)


def test_gradient_family_is_a_gradient():
    # F matches the finite-difference gradient of the quartic potential
    op = generate_operator(Family.GRADIENT, 5, seed=3)

    def potential(x):
        return (0.5 * x @ (op.linear @ x) + op.shift @ x
                + 0.25 * np.sum(op.cubic_coeffs * x**4))

    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(10):
        x = rng.standard_normal(5)
        f = eval_operator(op, x)
        fd = np.empty(5)
        for i in range(5):
            step = np.zeros(5)
            step[i] = h
            fd[i] = (potential(x + step) - potential(x - step)) / (2 * h)
        assert np.linalg.norm(fd - f) <= 1e-5 * (1 + np.linalg.norm(f))


def test_eval_dimension_mismatch():
    op = generate_operator(Family.GRADIENT, 4, seed=0)
    with pytest.raises(ValueError):
        eval_operator(op, np.zeros(5))


def _numerical_ranks(a):
    s = np.linalg.svd(a, compute_uv=False)
    s2 = np.linalg.svd(a + a.T, compute_uv=False)
    cut = 1e-8 * s[0]
    return int((s2 > cut).sum()), int((s > cut).sum())


def test_gradient_generation_invariants():
    op = generate_operator(Family.GRADIENT, 7, seed=12)
    assert np.array_equal(op.linear, op.linear.T)
    assert np.linalg.eigvalsh(op.linear).min() >= 0
    assert (op.cubic_coeffs >= 0).all()
    assert np.any(op.shift)
    assert op.block_split == (7, 0)


def test_nongradient_family_rank_identity():
    op = generate_operator(Family.PARAMONOTONE_NONGRADIENT, 9, seed=7)
    assert not np.array_equal(op.linear, op.linear.T)
    rank_sym, rank = _numerical_ranks(op.linear)
    assert rank_sym == rank
    assert classify_monotonicity(op) is Monotonicity.PARAMONOTONE


def test_monotone_only_family_skew_block():
    op = generate_operator(Family.MONOTONE_NONPARAMONOTONE, 8, seed=5)
    n1, n2 = op.block_split
    block = op.linear[n1:, n1:]
    assert np.array_equal(block.T, -block)
    assert np.any(block)
    assert classify_monotonicity(op) is Monotonicity.MONOTONE_ONLY


def test_classify_symmetric_psd_paramonotone():
    rng = np.random.default_rng(2)
    mat = rng.standard_normal((5, 5))
    op = OperatorSpec(Family.GRADIENT, mat @ mat.T, np.zeros(5), np.ones(5), (5, 0))
    assert classify_monotonicity(op) is Monotonicity.PARAMONOTONE


def test_classify_rotation_monotone_only():
    rotation = np.array([[0.0, 1.0], [-1.0, 0.0]])
    op = OperatorSpec(Family.MONOTONE_NONPARAMONOTONE, rotation, np.zeros(2),
                      np.zeros(2), (0, 2))
    assert classify_monotonicity(op) is Monotonicity.MONOTONE_ONLY


def test_generated_operators_are_monotone():
    rng = np.random.default_rng(6)
    for family in Family:
        for n in (6, 9):
            op = generate_operator(family, n, seed=int(rng.integers(1000)))
            for _ in range(200):
                x = rng.uniform(-10, 10, size=n)
                y = rng.uniform(-10, 10, size=n)
                gap = (eval_operator(op, x) - eval_operator(op, y)) @ (x - y)
                assert gap >= -1e-10


def test_skew_block_annihilates_quadratic_form():
    op = generate_operator(Family.MONOTONE_NONPARAMONOTONE, 10, seed=9)
    n1, _ = op.block_split
    block = op.linear[n1:, n1:]
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.standard_normal(block.shape[0])
        assert abs(u @ (block @ u)) <= 1e-12 * (1 + u @ u)


def test_generation_deterministic():
    a = generate_operator(Family.GRADIENT, 6, seed=21)
    b = generate_operator(Family.GRADIENT, 6, seed=21)
    assert np.array_equal(a.linear, b.linear)
    assert np.array_equal(a.cubic_coeffs, b.cubic_coeffs)
    assert np.array_equal(a.shift, b.shift)


def test_anchor_places_equilibrium():
    anchor = np.array([0.3, -0.2, 0.5, 0.1])
    op = generate_operator(Family.GRADIENT, 4, seed=2, anchor=anchor)
    assert np.allclose(eval_operator(op, anchor), 0.0, atol=1e-12)


def test_lipschitz_estimate_close_to_spectral_norm():
    op = generate_operator(Family.PARAMONOTONE_NONGRADIENT, 8, seed=13)
    true = np.linalg.svd(op.linear, compute_uv=False)[0]
    est = lipschitz_estimate(op)
    assert est <= true * (1 + 1e-9)
    assert est >= true * (1 - 1e-3)


def test_lipschitz_estimate_adds_cubic_bound():
    fs = generate_feasible_set(5, 2, seed=3)
    op = generate_operator(Family.GRADIENT, 5, seed=3)
    bare = lipschitz_estimate(op)
    with_set = lipschitz_estimate(op, fs)
    assert with_set > bare


def test_json_round_trip():
    op = generate_operator(Family.MONOTONE_NONPARAMONOTONE, 6, seed=8)
    back = operator_from_json(operator_to_json(op))
    assert back.family is op.family
    assert np.array_equal(back.linear, op.linear)
    assert np.array_equal(back.cubic_coeffs, op.cubic_coeffs)
    assert np.array_equal(back.shift, op.shift)
    assert back.block_split == op.block_split
