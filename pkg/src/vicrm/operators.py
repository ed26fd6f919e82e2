"""The three operator families used in the experiments.

All have the form ``F(x) = A x + (cubic_i * x_i^3)_i + shift``:

* ``GRADIENT`` — symmetric positive-semidefinite ``A`` plus a nonnegative
  separable cubic, so ``F`` is the gradient of a convex quartic.
* ``PARAMONOTONE_NONGRADIENT`` — block diagonal ``A`` with a symmetric PSD
  upper block and a nonsymmetric PSD lower block; not a gradient, but the
  symmetrized rank equals the plain rank, which characterizes
  paramonotonicity for affine maps.
* ``MONOTONE_NONPARAMONOTONE`` — same block layout with a skew-symmetric
  lower block: monotone (the skew part contributes nothing to the defining
  inner product) but the rank identity fails whenever the block is nonzero.

Generation is deterministic in the seed.  Distribution ranges keep the
operators well scaled against the unit-margin feasible sets; coefficient
distributions beyond that are a documented choice.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .sets import FeasibleSet, bounding_radius


class Family(str, Enum):
    GRADIENT = "gradient"
    PARAMONOTONE_NONGRADIENT = "paramonotone_nongradient"
    MONOTONE_NONPARAMONOTONE = "monotone_nonparamonotone"


class Monotonicity(str, Enum):
    PARAMONOTONE = "paramonotone"
    MONOTONE_ONLY = "monotone_only"


# Relative singular-value cutoff making the rank comparison decidable in floats.
RANK_RTOL = 1e-8

# Magnitude of the skew block in the monotone-only family: strong enough to
# defeat the rank identity by orders of magnitude at the cutoff above, weak
# enough that the rotational component does not dominate the residual scale.
_SKEW_SCALE = 5e-5


@dataclass(eq=False)
class OperatorSpec:
    """One operator: family tag, affine part, separable cubic and block split.

    The family invariants (symmetry, rank identity, exact skewness) are
    guaranteed for generated operators; hand-built instances for tests may
    relax the nonzero-shift convention of the gradient family.
    """

    family: Family
    linear: np.ndarray
    cubic_coeffs: np.ndarray
    shift: np.ndarray
    block_split: tuple

    def __post_init__(self):
        self.family = Family(self.family)
        self.linear = np.asarray(self.linear, dtype=float)
        self.cubic_coeffs = np.asarray(self.cubic_coeffs, dtype=float)
        self.shift = np.asarray(self.shift, dtype=float)
        self.block_split = (int(self.block_split[0]), int(self.block_split[1]))

    @property
    def dim(self):
        return self.shift.shape[0]


def eval_operator(op: OperatorSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.dim:
        raise ValueError(f"dimension mismatch: point has {x.shape[0]}, operator has {op.dim}")
    out = op.linear @ x + op.shift
    if np.any(op.cubic_coeffs):
        out = out + op.cubic_coeffs * x**3
    return out


def generate_operator(family, n, seed, anchor=None) -> OperatorSpec:
    """Seeded random operator of the given family (see module docstring).

    With ``anchor`` given, the constant term is derived so the operator
    vanishes exactly at that point instead of being sampled; this is how
    benchmark instances control where the unconstrained equilibrium sits
    relative to the feasible set.
    """
    family = Family(family)
    rng = np.random.default_rng(seed)
    if family is Family.GRADIENT:
        linear = _wishart_ridge(rng, n)
        cubic = rng.uniform(0.0, 1.0, size=n)
        shift = _shift_term(rng, n, linear, cubic, anchor)
        return OperatorSpec(family, linear, cubic, shift, (n, 0))

    if n < 2:
        raise ValueError("block families need n >= 2")
    n1 = (n + 1) // 2
    n2 = n - n1
    upper = _wishart_ridge(rng, n1)
    if family is Family.PARAMONOTONE_NONGRADIENT:
        sym = _wishart_ridge(rng, n2)
        raw = rng.uniform(-1.0, 1.0, size=(n2, n2))
        skew = 0.5 * (raw - raw.T) / np.sqrt(n2)
        diag = np.diag(rng.uniform(0.1, 1.1, size=n2))
        lower = sym + skew + diag
    else:
        raw = rng.uniform(-1.0, 1.0, size=(n2, n2))
        lower = _SKEW_SCALE * (raw - raw.T) / np.sqrt(max(n2, 1))
    linear = np.zeros((n, n))
    linear[:n1, :n1] = upper
    linear[n1:, n1:] = lower
    shift = _shift_term(rng, n, linear, np.zeros(n), anchor)
    return OperatorSpec(family, linear, np.zeros(n), shift, (n1, n2))


# Ridge keeping generated symmetric blocks uniformly well conditioned.
_RIDGE = 2.5


def _wishart_ridge(rng, n):
    """Random symmetric positive-definite block with O(1) spectrum for every n."""
    mat = rng.uniform(-1.0, 1.0, size=(n, n))
    return mat @ mat.T / n + _RIDGE * np.eye(n)


def _shift_term(rng, n, linear, cubic, anchor):
    if anchor is not None:
        anchor = np.asarray(anchor, dtype=float)
        return -(linear @ anchor + cubic * anchor**3)
    shift = rng.uniform(-1.0, 1.0, size=n)
    while not np.any(shift):
        shift = rng.uniform(-1.0, 1.0, size=n)
    return shift


def _numerical_rank(mat) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_RTOL * s[0]))


def classify_monotonicity(op: OperatorSpec) -> Monotonicity:
    """Paramonotone iff rank(A + A^T) = rank(A), at the numerical threshold.

    The separable cubic is the gradient of a convex function and never
    affects the classification; the affine part decides.
    """
    a = op.linear
    if _numerical_rank(a + a.T) == _numerical_rank(a):
        return Monotonicity.PARAMONOTONE
    return Monotonicity.MONOTONE_ONLY


def lipschitz_estimate(op: OperatorSpec, fs: FeasibleSet = None, power_iters=50) -> float:
    """Lipschitz estimate on the region of interest.

    Spectral norm of the affine part by power iteration, plus (for the
    gradient family, when a feasible set provides a bounding ball of radius
    ``R``) the cubic bound ``3 * max(cubic) * R^2``.
    """
    a = op.linear
    v = np.full(op.dim, 1.0 / np.sqrt(op.dim))
    est = 0.0
    for _ in range(power_iters):
        w = a.T @ (a @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            est = 0.0
            break
        v = w / norm
        est = np.sqrt(norm)
    total = float(est)
    if fs is not None and np.any(op.cubic_coeffs):
        radius = bounding_radius(fs)
        total += 3.0 * float(op.cubic_coeffs.max()) * radius**2
    return total


def operator_to_json(op: OperatorSpec) -> dict:
    return {
        "family": op.family.value,
        "A": op.linear.tolist(),
        "cubic": op.cubic_coeffs.tolist(),
        "c": op.shift.tolist(),
        "block_split": list(op.block_split),
    }


def operator_from_json(doc: dict) -> OperatorSpec:
    return OperatorSpec(
        family=Family(doc["family"]),
        linear=np.array(doc["A"], dtype=float),
        cubic_coeffs=np.array(doc["cubic"], dtype=float),
        shift=np.array(doc["c"], dtype=float),
        block_split=tuple(doc["block_split"]),
    )


def save_operator(op: OperatorSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(operator_to_json(op), fh)


def load_operator(path) -> OperatorSpec:
    with open(path, encoding="utf-8") as fh:
        return operator_from_json(json.load(fh))
