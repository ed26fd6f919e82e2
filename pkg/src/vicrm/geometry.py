"""Halfspace primitives and the circumcenter update.

A separating halfspace is built from the value and gradient of a violated
convex constraint; projecting simultaneously onto all separators and
extrapolating through their mean displacement gives the circumcenter
update used by the accelerated solvers.  The update has a closed form:
with displacements ``v_i`` (one per separator, zero for satisfied ones),
``w = mean(v_i)`` and ``alpha = sum(|v_i|^2) / (m |w|^2)``, the new point
is ``y + alpha * w``.

Scaling note: each displacement is the exact projection displacement
``-(max(0, g) / |u|^2) u`` with the *squared* gradient norm.  An unsquared
scaling is sometimes seen but is dimensionally inconsistent: it breaks the
single-separator reduction to the plain halfspace projection and fails the
product-space cross-check below.  Both properties are exercised in the
test suite.

``circumcenter_oracle`` solves the equidistance system for three points
directly and is kept free of the closed form on purpose: together with the
product-space reflections it provides an independent route to the same
point, used only for verification.
"""

from dataclasses import dataclass, field

import numpy as np


class InvalidHalfspaceError(ValueError):
    """Raised for a halfspace with zero normal."""


class DegenerateSeparatorError(ValueError):
    """Raised when a violated constraint comes with a zero gradient."""


class _FeasibleMarker:
    """Sentinel returned in place of a halfspace when the point is feasible."""

    __slots__ = ()

    def __repr__(self):
        return "FEASIBLE"


FEASIBLE = _FeasibleMarker()


@dataclass(eq=False)
class Halfspace:
    """The set ``{z : <normal, z> <= offset}``."""

    normal: np.ndarray
    offset: float
    _sqnorm: float = field(init=False, repr=False)

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        self.offset = float(self.offset)
        self._sqnorm = float(self.normal @ self.normal)
        if self._sqnorm == 0.0:
            raise InvalidHalfspaceError("halfspace normal must be nonzero")

    def contains(self, x, tol=0.0):
        return float(self.normal @ np.asarray(x, dtype=float)) <= self.offset + tol

    def violation(self, x):
        """Signed distance above the boundary (0 for interior points)."""
        s = float(self.normal @ np.asarray(x, dtype=float)) - self.offset
        return max(0.0, s) / np.sqrt(self._sqnorm)


def project_halfspace(x, h: Halfspace) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the halfspace ``h``."""
    x = np.asarray(x, dtype=float)
    s = float(h.normal @ x) - h.offset
    if s <= 0.0:
        return x.copy()
    return x - (s / h._sqnorm) * h.normal


def reflect_halfspace(x, h: Halfspace) -> np.ndarray:
    """Reflection of ``x`` through the boundary of ``h`` (identity inside)."""
    x = np.asarray(x, dtype=float)
    return 2.0 * project_halfspace(x, h) - x


def separating_halfspace(y, g_value, g_gradient):
    """Halfspace separating ``y`` from ``{g <= 0}`` via the linearization at ``y``.

    Returns ``FEASIBLE`` when ``g_value <= 0``; otherwise the halfspace
    ``{z : <u, z - y> + g(y) <= 0}``, which ``y`` violates by exactly
    ``g_value / |u|``.
    """
    if g_value <= 0.0:
        return FEASIBLE
    u = np.asarray(g_gradient, dtype=float)
    if not np.any(u):
        raise DegenerateSeparatorError(
            "violated constraint with zero gradient admits no separating halfspace"
        )
    y = np.asarray(y, dtype=float)
    return Halfspace(normal=u, offset=float(u @ y) - float(g_value))


@dataclass
class CircumcenterStep:
    """One circumcenter update: displacements, their mean, scale and output.

    ``stalled`` flags the measure-zero event of nonzero displacements with a
    vanishing mean, where the extrapolation scale is undefined; callers fall
    back to a single most-violated-halfspace projection.
    """

    displacements: tuple
    mean_displacement: np.ndarray
    step_scale: float
    output: np.ndarray
    stalled: bool = False


# Relative threshold below which the mean displacement counts as cancelled.
_STALL_REL = 1e-30


def combine_displacements(y, disp) -> CircumcenterStep:
    """Closed-form circumcenter update from an ``(m, n)`` displacement stack.

    Row ``i`` must be the projection displacement onto the i-th separator
    (zero rows for satisfied separators).  Shared by the list-based entry
    point below and by the solver hot path, so the extrapolation formula
    lives in exactly one place.
    """
    y = np.asarray(y, dtype=float)
    disp = np.asarray(disp, dtype=float)
    m = disp.shape[0]
    sumsq = float(np.sum(disp * disp))
    w = disp.mean(axis=0)
    wsq = float(w @ w)
    if sumsq == 0.0:
        return CircumcenterStep(tuple(disp), w, 0.0, y.copy(), False)
    if wsq <= _STALL_REL * (sumsq / m):
        return CircumcenterStep(tuple(disp), w, 0.0, y.copy(), True)
    alpha = sumsq / (m * wsq)
    return CircumcenterStep(tuple(disp), w, alpha, y + alpha * w, False)


def circumcenter_step(y, separators) -> CircumcenterStep:
    """Circumcenter update of ``y`` for a list of halfspaces / FEASIBLE markers.

    With a single violated halfspace this reduces exactly to
    ``project_halfspace``; a point satisfying every separator is a fixed
    point with ``step_scale`` 0.
    """
    if len(separators) == 0:
        raise ValueError("circumcenter_step requires at least one separator")
    y = np.asarray(y, dtype=float)
    disp = np.zeros((len(separators), y.shape[0]))
    for i, sep in enumerate(separators):
        if sep is FEASIBLE:
            continue
        disp[i] = project_halfspace(y, sep) - y
    return combine_displacements(y, disp)


def reflect_blocks(y, halfspaces):
    """Blockwise reflection of the diagonal point ``(y, ..., y)``: one block per halfspace."""
    y = np.asarray(y, dtype=float)
    return np.stack([reflect_halfspace(y, h) for h in halfspaces])


def reflect_diagonal(blocks):
    """Reflection of a block vector through the diagonal subspace ``{(x, ..., x)}``."""
    blocks = np.asarray(blocks, dtype=float)
    return 2.0 * blocks.mean(axis=0) - blocks


def circumcenter_oracle(p0, p1, p2) -> np.ndarray:
    """Point equidistant from three points inside their affine span.

    Solved brute force from the 2x2 Gram system.  Coincident points return
    that point; collinear distinct points return the midpoint of the two
    extremes.  Used only for cross-checking the closed form.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    d1 = p1 - p0
    d2 = p2 - p0
    n1 = float(d1 @ d1)
    n2 = float(d2 @ d2)
    scale = max(n1, n2)
    if scale == 0.0:
        return p0.copy()
    tiny = 1e-24 * scale
    if n1 <= tiny:
        return p0 + 0.5 * d2
    if n2 <= tiny:
        return p0 + 0.5 * d1
    # orthogonalize d2 against d1; a vanishing residual means collinear
    u1 = d1 / np.sqrt(n1)
    along = float(d2 @ u1)
    w = d2 - along * u1
    wn = float(w @ w)
    if wn <= 1e-16 * n2:
        t = along / np.sqrt(n1)  # position of p2 along d1 (p0 at 0, p1 at 1)
        lo = min(0.0, 1.0, t)
        hi = max(0.0, 1.0, t)
        return p0 + 0.5 * (lo + hi) * d1
    u2 = w / np.sqrt(wn)
    a = 0.5 * np.sqrt(n1)
    b = (0.5 * n2 - a * along) / np.sqrt(wn)
    return p0 + a * u1 + b * u2
