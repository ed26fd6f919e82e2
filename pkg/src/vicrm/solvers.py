"""Iterative methods for the variational inequality over an ellipsoid intersection.

Six methods share this module:

* ``CRM_VIP1`` — operator step scaled by a vanishing schedule, followed by a
  circumcenter step over the separating halfspaces at the shifted point.
* ``BI1`` — same skeleton, but the circumcenter step is replaced by a single
  projection onto the most-violated separating halfspace.
* ``CRM_VIP2`` — outer loop that first drives the iterate near the feasible
  set (inner loop of circumcenter steps, stopped by a Slater-point distance
  certificate), then takes the operator step; also maintains the ergodic
  average carrying the monotone-case guarantee.
* ``BI2`` — same outer/inner skeleton with single-halfspace projections.
* ``EGM`` — extragradient iteration with exact projections.
* ``MAL_ADAP`` — reflected-gradient iteration with exact projections and a
  stepsize adapted from measured local Lipschitz ratios.

Every solve is a deterministic single-threaded state machine: identical
inputs give bit-identical results apart from wall time.  Sums over the
separator displacements use numpy's fixed reduction order, so results do
not depend on how callers parallelize across solves.
"""

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .operators import OperatorSpec, eval_operator, lipschitz_estimate
from .sets import FeasibleSet, ProjectionFailure, project_intersection


class Algorithm(str, Enum):
    CRM_VIP1 = "crm-vip1"
    CRM_VIP2 = "crm-vip2"
    BI1 = "bi1"
    BI2 = "bi2"
    EGM = "egm"
    MAL_ADAP = "mal-adap"


class Status(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    STALLED = "stalled"
    PROJECTION_FAILURE = "projection_failure"


class InnerLoopStall(RuntimeError):
    """Inner feasibility loop hit its iteration cap."""


@dataclass
class StepsizeSchedule:
    """Stepsizes ``1 / k**exponent`` for ``k >= 1``.

    Exponents in ``(0.5, 1]`` make the squares summable while the sum
    itself diverges, which is what the vanishing-step analysis needs.
    """

    exponent: float = 0.9

    def __post_init__(self):
        if not 0.5 < self.exponent <= 1.0:
            raise ValueError("exponent must lie in (0.5, 1]")

    def beta(self, k) -> float:
        return 1.0 / k**self.exponent


@dataclass
class SolverConfig:
    """Algorithm choice plus tolerances, schedule and seeds.

    ``theta`` scales the inner-loop distance certificate of the averaging
    methods; the default ties the certified feasibility error to the
    stepsize tightly enough that near-feasibility alone cannot trigger the
    stopping test while the operator is still far from equilibrium.
    """

    algorithm: Algorithm = Algorithm.CRM_VIP1
    tolerance: float = 1e-6
    max_iterations: int = 100_000
    theta: float = 1e-3
    schedule: StepsizeSchedule = field(default_factory=StepsizeSchedule)
    egm_beta: float = None
    mal_lambda0: float = None
    inner_cap: int = 10_000
    seed: int = 0

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")


@dataclass
class SolveResult:
    status: Status
    final_point: np.ndarray
    ergodic_point: np.ndarray = None
    iterations: int = 0
    inner_iterations_total: int = 0
    operator_evals: int = 0
    wall_time: float = 0.0
    residual_history: list = field(default_factory=list)
    natural_residual: float = None

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "final_point": self.final_point.tolist(),
            "ergodic_point": None if self.ergodic_point is None else self.ergodic_point.tolist(),
            "iterations": self.iterations,
            "inner_iterations_total": self.inner_iterations_total,
            "operator_evals": self.operator_evals,
            "wall_time_s": self.wall_time,
            "natural_residual": self.natural_residual,
        }


def default_start(n, seed) -> np.ndarray:
    """Seeded uniform start in ``[-2, 2]^n`` (infeasible with positive probability)."""
    return np.random.default_rng(seed).uniform(-2.0, 2.0, size=n)


def _single_halfspace_pullback(y, values, gradients) -> np.ndarray:
    """Projection onto the separating halfspace of the most violated constraint."""
    idx = int(np.argmax(values))
    if values[idx] <= 0.0:
        return y
    grad = gradients[idx]
    sq = float(grad @ grad)
    return y - (values[idx] / sq) * grad


def _feasibility_step(y, fs: FeasibleSet, circumcenter: bool) -> np.ndarray:
    """One approximate-projection step at ``y``: circumcenter or single halfspace.

    The circumcenter branch inlines the extrapolation of
    ``geometry.combine_displacements`` over the active separators only; the
    test suite pins the two paths to bit-compatible outputs.
    """
    values, gradients = fs.eval_all(y)
    if not circumcenter:
        return _single_halfspace_pullback(y, values, gradients)
    mask = values > 0.0
    if not mask.any():
        return y
    act_g = gradients[mask]
    coef = values[mask] / np.einsum("ij,ij->i", act_g, act_g)
    m = values.shape[0]
    w = -(coef @ act_g) / m
    sumsq = float(coef @ (values[mask]))
    wsq = float(w @ w)
    if m * wsq <= 1e-30 * sumsq:
        return _single_halfspace_pullback(y, values, gradients)
    return y + (sumsq / (m * wsq)) * w


def crm_vip1_step(x, k, op: OperatorSpec, fs: FeasibleSet, schedule: StepsizeSchedule) -> np.ndarray:
    """One accelerated direct step from ``x`` at outer index ``k >= 1``."""
    fx = eval_operator(op, x)
    eta = max(1.0, float(np.linalg.norm(fx)))
    y = x - (schedule.beta(k) / eta) * fx
    return _feasibility_step(y, fs, circumcenter=True)


def bi1_step(x, k, op: OperatorSpec, fs: FeasibleSet, schedule: StepsizeSchedule) -> np.ndarray:
    """One non-accelerated direct step (single separating-halfspace pullback)."""
    fx = eval_operator(op, x)
    eta = max(1.0, float(np.linalg.norm(fx)))
    y = x - (schedule.beta(k) / eta) * fx
    return _feasibility_step(y, fs, circumcenter=False)


def _direct_solve(x0, op, fs, cfg, circumcenter, callback=None) -> SolveResult:
    start = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    history = []
    op_evals = 0
    status = Status.MAX_ITERATIONS
    iterations = cfg.max_iterations
    for k in range(1, cfg.max_iterations + 1):
        fx = eval_operator(op, x)
        op_evals += 1
        fnorm = float(fx @ fx) ** 0.5
        if fnorm == 0.0:
            status = Status.CONVERGED
            iterations = k - 1
            break
        eta = max(1.0, fnorm)
        y = x - (cfg.schedule.beta(k) / eta) * fx
        x_next = _feasibility_step(y, fs, circumcenter)
        diff = x_next - x
        res = float(diff @ diff) ** 0.5 / max(float(x @ x) ** 0.5, 1.0)
        history.append((k, res))
        if callback is not None:
            callback({"k": k, "beta": cfg.schedule.beta(k), "x": x, "shifted": y, "x_next": x_next})
        if not np.isfinite(res):
            status = Status.STALLED
            iterations = k
            break
        x = x_next
        if res <= cfg.tolerance:
            # settled displacement alone can mask a first-order feasibility
            # hover; converge only once the iterate also hugs the set
            if float(fs.eval_all(x)[0].max()) <= cfg.tolerance:
                status = Status.CONVERGED
                iterations = k
                break
    return SolveResult(
        status=status,
        final_point=x,
        iterations=iterations,
        operator_evals=op_evals,
        wall_time=time.perf_counter() - start,
        residual_history=history,
    )


def crm_vip1_solve(x0, op: OperatorSpec, fs: FeasibleSet, cfg: SolverConfig, callback=None) -> SolveResult:
    """Run the direct method (accelerated or not, per ``cfg.algorithm``)."""
    if cfg.algorithm not in (Algorithm.CRM_VIP1, Algorithm.BI1):
        raise ValueError(f"direct solver got algorithm {cfg.algorithm}")
    if x0 is None:
        x0 = default_start(fs.dim, cfg.seed)
    return _direct_solve(x0, op, fs, cfg, cfg.algorithm is Algorithm.CRM_VIP1, callback)


def distance_certificate(value, distance_to_slater, slater_value) -> float:
    """Upper bound on the distance to the feasible set from a violated point.

    For ``value = g(y) > 0``, a Slater point ``w`` at distance
    ``distance_to_slater`` with ``slater_value = g(w) < 0``, the segment from
    ``y`` to ``w`` crosses the boundary within
    ``value * distance / (value - slater_value)``.
    """
    return value * distance_to_slater / (value - slater_value)


def ecm_inner_loop(z, k, fs: FeasibleSet, theta, beta_k, inner_cap=10_000, circumcenter=True):
    """Drive ``z`` near the feasible set until the distance certificate holds.

    A point already satisfying every constraint is returned unchanged with
    zero inner iterations.  Otherwise approximate-projection steps repeat
    until ``g(y) * |y - w| / (g(y) - g(w)) <= theta * beta_k`` for the Slater
    point ``w``, which certifies ``dist(y, C) <= theta * beta_k``; a point
    that becomes feasible satisfies the certificate trivially.
    """
    z = np.asarray(z, dtype=float)
    gz = float(fs.eval_all(z)[0].max())
    if gz <= 0.0:
        return z, 0
    w = fs.slater_point
    gw = -fs.slater_margin
    y = z
    gy = gz
    for j in range(inner_cap + 1):
        if gy <= 0.0:
            return y, j
        cert = distance_certificate(gy, float(np.linalg.norm(y - w)), gw)
        if cert <= theta * beta_k:
            return y, j
        y = _feasibility_step(y, fs, circumcenter)
        gy = float(fs.eval_all(y)[0].max())
    raise InnerLoopStall(f"certificate not reached within {inner_cap} inner iterations")


def ecm_solve(z0, op: OperatorSpec, fs: FeasibleSet, cfg: SolverConfig, callback=None) -> SolveResult:
    """Run the averaging method (accelerated or not, per ``cfg.algorithm``).

    Three stopping channels, any of which declares convergence: the iterate
    hugs the feasible set from outside to within the tolerance (so the inner
    loop has no work left at the stopping scale), the post-step point
    returns to the certified point (``|z_next - y| <= tolerance``), or the
    ergodic average settles in relative terms.  The result carries the
    certified point as ``final_point`` and the weighted average as
    ``ergodic_point``.
    """
    if cfg.algorithm not in (Algorithm.CRM_VIP2, Algorithm.BI2):
        raise ValueError(f"averaging solver got algorithm {cfg.algorithm}")
    circumcenter = cfg.algorithm is Algorithm.CRM_VIP2
    start = time.perf_counter()
    if z0 is None:
        z0 = default_start(fs.dim, cfg.seed)
    z = np.asarray(z0, dtype=float).copy()
    x_erg = np.zeros(fs.dim)
    sigma = 0.0
    history = []
    op_evals = 0
    inner_total = 0
    y_tilde = z
    status = Status.MAX_ITERATIONS
    iterations = cfg.max_iterations
    for k in range(1, cfg.max_iterations + 1):
        beta = cfg.schedule.beta(k)
        boundary_gap = float(fs.eval_all(z)[0].max())
        try:
            y_tilde, inner = ecm_inner_loop(z, k, fs, cfg.theta, beta, cfg.inner_cap, circumcenter)
        except InnerLoopStall:
            status = Status.STALLED
            iterations = k
            break
        inner_total += inner
        fy = eval_operator(op, y_tilde)
        op_evals += 1
        eta = max(1.0, float(fy @ fy) ** 0.5)
        shifted = y_tilde - (beta / eta) * fy
        z_next = _feasibility_step(shifted, fs, circumcenter)
        ret_diff = z_next - y_tilde
        returned = float(ret_diff @ ret_diff) ** 0.5
        hugging = 0.0 < boundary_gap <= cfg.tolerance
        res = min(returned, boundary_gap) if hugging else returned
        history.append((k, res))
        sigma += beta / eta
        coef = (beta / eta) / sigma
        x_new = (1.0 - coef) * x_erg + coef * y_tilde
        erg_change = float(np.linalg.norm(x_new - x_erg)) / max(float(np.linalg.norm(x_erg)), 1.0)
        if callback is not None:
            callback({
                "k": k, "beta": beta, "z": z, "y_tilde": y_tilde, "inner": inner,
                "z_next": z_next, "x_ergodic": x_new, "sigma": sigma,
            })
        if not np.isfinite(returned):
            status = Status.STALLED
            iterations = k
            break
        z = z_next
        x_erg = x_new
        if hugging or returned <= cfg.tolerance or erg_change <= cfg.tolerance:
            status = Status.CONVERGED
            iterations = k
            break
    return SolveResult(
        status=status,
        final_point=y_tilde,
        ergodic_point=x_erg,
        iterations=iterations,
        inner_iterations_total=inner_total,
        operator_evals=op_evals,
        wall_time=time.perf_counter() - start,
        residual_history=history,
    )


def _exact_projection(fs, x, tol):
    return project_intersection(fs, x, tol=tol)


def egm_solve(x0, op: OperatorSpec, fs: FeasibleSet, cfg: SolverConfig, callback=None) -> SolveResult:
    """Extragradient iteration with exact projections onto the intersection."""
    if cfg.algorithm is not Algorithm.EGM:
        raise ValueError(f"extragradient solver got algorithm {cfg.algorithm}")
    start = time.perf_counter()
    if x0 is None:
        x0 = default_start(fs.dim, cfg.seed)
    beta = cfg.egm_beta
    if beta is None:
        lip = lipschitz_estimate(op, fs)
        beta = 0.5 / lip if lip > 0 else 1.0
    history = []
    op_evals = 0
    proj_tol = cfg.tolerance * 1e-4
    x = np.asarray(x0, dtype=float)
    try:
        x = _exact_projection(fs, x, proj_tol)
        status = Status.MAX_ITERATIONS
        iterations = cfg.max_iterations
        for k in range(1, cfg.max_iterations + 1):
            fx = eval_operator(op, x)
            op_evals += 1
            y = _exact_projection(fs, x - beta * fx, proj_tol)
            res = float(np.linalg.norm(x - y))
            history.append((k, res))
            if callback is not None:
                callback({"k": k, "x": x, "y": y, "beta": beta, "residual": res})
            if res <= cfg.tolerance:
                status = Status.CONVERGED
                iterations = k
                break
            fy = eval_operator(op, y)
            op_evals += 1
            x = _exact_projection(fs, x - beta * fy, proj_tol)
    except ProjectionFailure:
        return SolveResult(
            status=Status.PROJECTION_FAILURE,
            final_point=x,
            iterations=len(history),
            operator_evals=op_evals,
            wall_time=time.perf_counter() - start,
            residual_history=history,
        )
    return SolveResult(
        status=status,
        final_point=x,
        iterations=iterations,
        operator_evals=op_evals,
        wall_time=time.perf_counter() - start,
        residual_history=history,
    )


# Local-Lipschitz safety factor for the adaptive (non-increasing) step.
_MAL_RATIO = 0.4
_MAL_MIN_STEP = 1e-14


def mal_adap_solve(x0, op: OperatorSpec, fs: FeasibleSet, cfg: SolverConfig, callback=None) -> SolveResult:
    """Reflected-gradient iteration with exact projections and adaptive steps.

    The update projects ``x - lam * F(2x - x_prev)``; the step starts from
    half the inverse Lipschitz estimate and is tightened whenever the
    measured local Lipschitz ratio demands it.  Stops on the combined
    residual
    ``|x - y| + |y - P(y - lam F(y))| <= tolerance``.
    """
    if cfg.algorithm is not Algorithm.MAL_ADAP:
        raise ValueError(f"adaptive reflected solver got algorithm {cfg.algorithm}")
    start = time.perf_counter()
    if x0 is None:
        x0 = default_start(fs.dim, cfg.seed)
    lam = cfg.mal_lambda0
    if lam is None:
        lip = lipschitz_estimate(op, fs)
        lam = 0.5 / lip if lip > 0 else 1.0
    history = []
    op_evals = 0
    proj_tol = cfg.tolerance * 1e-4
    x = np.asarray(x0, dtype=float)
    try:
        x = _exact_projection(fs, x, proj_tol)
        x_prev = x
        y_prev = None
        fy_prev = None
        status = Status.MAX_ITERATIONS
        iterations = cfg.max_iterations
        for k in range(1, cfg.max_iterations + 1):
            y = 2.0 * x - x_prev
            fy = eval_operator(op, y)
            op_evals += 1
            if y_prev is not None:
                dy = float(np.linalg.norm(y - y_prev))
                df = float(np.linalg.norm(fy - fy_prev))
                if dy > 0.0 and df > 0.0:
                    lam = min(lam, _MAL_RATIO * dy / df)
            if lam < _MAL_MIN_STEP:
                status = Status.STALLED
                iterations = k
                break
            res = float(np.linalg.norm(x - y))
            res += float(np.linalg.norm(y - _exact_projection(fs, y - lam * fy, proj_tol)))
            history.append((k, res))
            if callback is not None:
                callback({"k": k, "x": x, "y": y, "lam": lam, "residual": res})
            if res <= cfg.tolerance:
                status = Status.CONVERGED
                iterations = k
                break
            x_prev = x
            x = _exact_projection(fs, x - lam * fy, proj_tol)
            y_prev = y
            fy_prev = fy
    except ProjectionFailure:
        return SolveResult(
            status=Status.PROJECTION_FAILURE,
            final_point=x,
            iterations=len(history),
            operator_evals=op_evals,
            wall_time=time.perf_counter() - start,
            residual_history=history,
        )
    return SolveResult(
        status=status,
        final_point=x,
        iterations=iterations,
        operator_evals=op_evals,
        wall_time=time.perf_counter() - start,
        residual_history=history,
    )


def check_solution(x, op: OperatorSpec, fs: FeasibleSet, tol=1e-10):
    """Post-hoc quality of a candidate point.

    Returns ``(natural_residual, feasibility)`` where the first is
    ``|x - P_C(x - F(x))|`` (zero exactly at solutions) and the second is the
    clamped worst constraint value.  The projection uses the exact Dykstra
    routine, independent of any approximate steps that produced ``x``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(x, dtype=float)
    values, _ = fs.eval_all(x)
    feasibility = max(0.0, float(values.max()))
    fx = eval_operator(op, x)
    projected = project_intersection(fs, x - fx, tol=tol)
    natural = float(np.linalg.norm(x - projected))
    return natural, feasibility


_DIRECT = (Algorithm.CRM_VIP1, Algorithm.BI1)
_AVERAGING = (Algorithm.CRM_VIP2, Algorithm.BI2)


def solve(x0, op: OperatorSpec, fs: FeasibleSet, cfg: SolverConfig, callback=None) -> SolveResult:
    """Dispatch to the solver selected by ``cfg.algorithm``."""
    if cfg.algorithm in _DIRECT:
        return crm_vip1_solve(x0, op, fs, cfg, callback)
    if cfg.algorithm in _AVERAGING:
        return ecm_solve(x0, op, fs, cfg, callback)
    if cfg.algorithm is Algorithm.EGM:
        return egm_solve(x0, op, fs, cfg, callback)
    return mal_adap_solve(x0, op, fs, cfg, callback)
