"""Ellipsoidal constraint sets, their generation and exact projections.

Each constraint is a quadratic sublevel set
``{x : <x, A x> + 2 <b, x> - alpha <= 0}`` with positive-definite ``A``.
A feasible set bundles several of them together with a common interior
(Slater) point, which both certifies nonemptiness and drives the distance
certificate used by the inner loop of the averaging solver.

Exact projection onto a single ellipsoid solves the scalar dual equation
``g((I + lam A)^{-1} (x - lam b)) = 0`` by safeguarded Newton; projections
onto the intersection cycle through the ellipsoids with Dykstra correction
vectors.  Both are used only by the exact-projection comparators and by
test oracles, never by the approximate solvers.
"""

import json
from dataclasses import dataclass, field

import numpy as np

_SYM_TOL = 1e-12


class ProjectionFailure(RuntimeError):
    """Projection did not reach the requested accuracy.

    Carries the best iterate found and the residual still outstanding.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(eq=False)
class Ellipsoid:
    """Sublevel set ``{x : <x, quad x> + 2 <lin, x> - level <= 0}``."""

    quad: np.ndarray
    lin: np.ndarray
    level: float
    _eig: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.quad = np.asarray(self.quad, dtype=float)
        self.lin = np.asarray(self.lin, dtype=float)
        self.level = float(self.level)
        if np.max(np.abs(self.quad - self.quad.T)) > _SYM_TOL:
            raise ValueError("quadratic part must be symmetric")

    @property
    def dim(self):
        return self.lin.shape[0]

    def eig(self):
        """Cached eigendecomposition of the quadratic part."""
        if self._eig is None:
            d, q = np.linalg.eigh(self.quad)
            self._eig = (d, q)
        return self._eig


def eval_constraint(e: Ellipsoid, x):
    """Constraint value and gradient at ``x``: ``(g(x), 2 A x + 2 b)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != e.dim:
        raise ValueError(f"dimension mismatch: point has {x.shape[0]}, set has {e.dim}")
    ax = e.quad @ x
    value = float(x @ ax) + 2.0 * float(e.lin @ x) - e.level
    gradient = 2.0 * (ax + e.lin)
    return value, gradient


@dataclass(eq=False)
class FeasibleSet:
    """Intersection of ellipsoids with a point strictly inside all of them."""

    ellipsoids: list
    slater_point: np.ndarray
    slater_margin: float = None
    _stacks: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.slater_point = np.asarray(self.slater_point, dtype=float)
        if self.slater_margin is None:
            self.slater_margin = -max(
                eval_constraint(e, self.slater_point)[0] for e in self.ellipsoids
            )
        self.slater_margin = float(self.slater_margin)

    @property
    def dim(self):
        return self.ellipsoids[0].dim

    @property
    def count(self):
        return len(self.ellipsoids)

    def _stacked(self):
        if self._stacks is None:
            quads = np.stack([e.quad for e in self.ellipsoids])
            lins = np.stack([e.lin for e in self.ellipsoids])
            levels = np.array([e.level for e in self.ellipsoids])
            self._stacks = (quads, lins, levels)
        return self._stacks

    def eval_all(self, x):
        """Values ``(m,)`` and gradients ``(m, n)`` of every constraint at ``x``."""
        x = np.asarray(x, dtype=float)
        quads, lins, levels = self._stacked()
        ax = quads @ x
        values = ax @ x + 2.0 * (lins @ x) - levels
        gradients = 2.0 * (ax + lins)
        return values, gradients


def max_violation(fs: FeasibleSet, x):
    """Largest constraint value and the smallest index attaining it."""
    values, _ = fs.eval_all(x)
    idx = int(np.argmax(values))
    return float(values[idx]), idx


def project_ellipsoid(e: Ellipsoid, x, tol=1e-10, max_iter=200) -> np.ndarray:
    """Nearest point of the ellipsoid, to constraint residual ``|g| <= tol``.

    Interior points are returned unchanged.  Otherwise the multiplier of the
    nearest-point conditions is the positive root of a scalar monotone
    equation, found by Newton with a bisection safeguard on a doubling
    bracket.  The stationarity condition holds by construction, so ``|g|``
    at the candidate is the full KKT residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    value, _ = eval_constraint(e, x)
    if value <= 0.0:
        return x.copy()
    d, q = e.eig()
    xq = q.T @ x
    bq = q.T @ e.lin

    def point(lam):
        return (xq - lam * bq) / (1.0 + lam * d)

    def residual(y):
        return float(d @ (y * y)) + 2.0 * float(bq @ y) - e.level

    def slope(lam, y):
        r = d * y + bq
        return -2.0 * float(r @ (r / (1.0 + lam * d)))

    lo, flo = 0.0, value
    hi = 1.0
    for _ in range(200):
        fhi = residual(point(hi))
        if fhi < 0.0:
            break
        lo, flo = hi, fhi
        hi *= 2.0
    else:
        raise ProjectionFailure(
            "could not bracket the projection multiplier", best=q @ point(hi), residual=fhi
        )

    lam = lo
    f = flo
    y = point(lam)
    for _ in range(max_iter):
        if abs(f) <= tol:
            return q @ y
        step = f / slope(lam, y)
        cand = lam - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        lam = cand
        y = point(lam)
        f = residual(y)
        if f > 0.0:
            lo = lam
        else:
            hi = lam
    raise ProjectionFailure(
        f"ellipsoid projection stalled at residual {abs(f):.3e}", best=q @ y, residual=abs(f)
    )


def project_intersection(fs: FeasibleSet, x, tol=1e-10, max_sweeps=10_000) -> np.ndarray:
    """Nearest point of the intersection, via Dykstra's corrected cycles.

    Stops once the largest iterate displacement over a full sweep drops to
    ``tol``.  With a single ellipsoid this coincides with
    ``project_ellipsoid``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    value, _ = max_violation(fs, x)
    if value <= 0.0:
        return x.copy()
    current = x.copy()
    corrections = [np.zeros_like(current) for _ in fs.ellipsoids]
    proj_tol = min(tol, 1e-10)
    max_disp = np.inf
    for _ in range(max_sweeps):
        max_disp = 0.0
        for i, e in enumerate(fs.ellipsoids):
            shifted = current + corrections[i]
            projected = project_ellipsoid(e, shifted, tol=proj_tol)
            corrections[i] = shifted - projected
            disp = float(np.linalg.norm(projected - current))
            if disp > max_disp:
                max_disp = disp
            current = projected
        if max_disp <= tol:
            return current
    raise ProjectionFailure(
        f"Dykstra did not settle within {max_sweeps} sweeps (last sweep moved {max_disp:.3e})",
        best=current,
        residual=max_disp,
    )


# Instance generation: ridge term keeping the quadratic parts definite and
# the conditioning bounded (near-singular directions would blow up the
# bounding radius and with it the comparators' Lipschitz bound), and the
# margin by which the origin sits inside every generated ellipsoid.
_RIDGE = 0.5
_MARGIN = 1.0


def generate_feasible_set(n, m, seed) -> FeasibleSet:
    """Random intersection of ``m`` ellipsoids in ``R^n``, anchored at the origin.

    Deterministic in ``seed``.  Each quadratic part is ``M M^T`` plus a
    ridge (entries of ``M`` uniform), each linear part is uniform, and the
    level makes the origin interior with unit margin; the origin is the
    recorded Slater point.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be at least 1")
    rng = np.random.default_rng(seed)
    ellipsoids = []
    for _ in range(m):
        mat = rng.uniform(-1.0, 1.0, size=(n, n))
        quad = mat @ mat.T + _RIDGE * np.eye(n)
        lin = rng.uniform(-1.0, 1.0, size=n)
        ellipsoids.append(Ellipsoid(quad=quad, lin=lin, level=_MARGIN))
    return FeasibleSet(ellipsoids=ellipsoids, slater_point=np.zeros(n))


def bounding_radius(fs: FeasibleSet) -> float:
    """Radius of an origin-centred ball containing the intersection.

    Uses the tightest single ellipsoid: each one lies in a ball around its
    own centre ``-A^{-1} b`` of radius ``sqrt((alpha + b^T A^{-1} b) / lambda_min)``.
    """
    best = np.inf
    for e in fs.ellipsoids:
        d, q = e.eig()
        bq = q.T @ e.lin
        centre_q = -bq / d
        gap = e.level + float(bq @ (bq / d))
        if gap < 0.0:
            gap = 0.0
        radius = float(np.linalg.norm(centre_q)) + np.sqrt(gap / float(d.min()))
        if radius < best:
            best = radius
    return best


def feasible_set_to_json(fs: FeasibleSet) -> dict:
    return {
        "n": fs.dim,
        "m": fs.count,
        "ellipsoids": [
            {"A": e.quad.tolist(), "b": e.lin.tolist(), "alpha": e.level}
            for e in fs.ellipsoids
        ],
        "slater": fs.slater_point.tolist(),
    }


def feasible_set_from_json(doc: dict) -> FeasibleSet:
    ellipsoids = [
        Ellipsoid(quad=np.array(item["A"], dtype=float),
                  lin=np.array(item["b"], dtype=float),
                  level=item["alpha"])
        for item in doc["ellipsoids"]
    ]
    return FeasibleSet(ellipsoids=ellipsoids, slater_point=np.array(doc["slater"], dtype=float))


def save_feasible_set(fs: FeasibleSet, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(feasible_set_to_json(fs), fh)


def load_feasible_set(path) -> FeasibleSet:
    with open(path, encoding="utf-8") as fh:
        return feasible_set_from_json(json.load(fh))
