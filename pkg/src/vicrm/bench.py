"""Scenario runner, result tables and performance profiles.

A scenario fixes the problem sizes, the solver list, the per-configuration
instance count and the stopping tolerance.  The runner generates seeded
instances, solves every (instance, solver) cell, and emits flat result
rows; medians, speedup ratios and Dolan-More performance profiles are
derived from the rows.

Conventions, also stated in the CSV headers where they matter:

* the median of an even count is the lower-middle element, so iteration
  medians stay integers;
* wall time per cell is the minimum over three timed repetitions of the
  identical deterministic solve;
* non-converged rows are excluded from medians (cells with no converged
  row are emitted as ``--``) but enter profiles as failures with infinite
  cost ratio.

Cells run sequentially here; all instance data is read-only, so callers
may parallelize across cells as long as rows are re-sorted before use.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import Family, OperatorSpec, generate_operator
from .sets import generate_feasible_set
from .solvers import Algorithm, SolverConfig, Status, check_solution, default_start, solve

ALL_SOLVERS = (
    Algorithm.EGM,
    Algorithm.MAL_ADAP,
    Algorithm.BI1,
    Algorithm.CRM_VIP1,
    Algorithm.BI2,
    Algorithm.CRM_VIP2,
)
APPROX_SOLVERS = (
    Algorithm.BI1,
    Algorithm.CRM_VIP1,
    Algorithm.BI2,
    Algorithm.CRM_VIP2,
)

EXAMPLE_FAMILIES = {
    1: Family.GRADIENT,
    2: Family.PARAMONOTONE_NONGRADIENT,
    3: Family.MONOTONE_NONPARAMONOTONE,
}

TIMING_REPS = 3


@dataclass
class Scenario:
    name: str
    dims: tuple
    solvers: tuple
    instances_per_config: int
    tolerance: float
    max_iterations: int

    def __post_init__(self):
        self.dims = tuple((int(n), int(m)) for n, m in self.dims)
        self.solvers = tuple(Algorithm(s) for s in self.solvers)


_PRESETS = {
    "A": dict(
        dims=[(5, 2), (5, 5), (10, 2), (10, 5)],
        solvers=ALL_SOLVERS,
        instances_per_config=10,
        tolerance=1e-6,
        max_iterations=100_000,
    ),
    "B": dict(
        dims=[(50, 5), (50, 8), (100, 5), (100, 8)],
        solvers=APPROX_SOLVERS,
        instances_per_config=10,
        tolerance=1e-6,
        max_iterations=300_000,
    ),
    "C": dict(
        dims=[(n, m) for n in (100, 200, 500) for m in (20, 30, 50)],
        solvers=APPROX_SOLVERS,
        instances_per_config=5,
        tolerance=1e-5,
        max_iterations=300_000,
    ),
}


def scenario(name) -> Scenario:
    """Preset scenario by name: A (small, all solvers), B (medium), C (large)."""
    key = str(name).upper()
    if key not in _PRESETS:
        raise ValueError(f"unknown scenario {name!r}; choose from A, B, C")
    return Scenario(name=key, **_PRESETS[key])


@dataclass
class ResultRow:
    scenario: str
    example: int
    n: int
    m: int
    instance_index: int
    seed: int
    solver: str
    status: str
    iterations: int
    inner_iterations: int
    wall_time_ns: int
    natural_residual: float
    feasibility: float


def instance_seed(base_seed, example, n, m, index) -> int:
    """Stable per-instance seed mixed from the run coordinates."""
    ss = np.random.SeedSequence([int(base_seed), int(example), int(n), int(m), int(index)])
    return int(ss.generate_state(1)[0])


# Benchmark instances are built around a planted boundary solution: a point
# where two constraint boundaries meet (corner) is located, and the
# operator's equilibrium is placed a small push past it along the direction
# that presses the iterates symmetrically into both constraints.  The corner
# is then the exact solution, simultaneous separator handling cancels the
# press to second order, and a single max-violation pullback zigzags between
# the two facets.
_ANCHOR_DRAWS = 40
_PRESS = (0.01, 0.04)
_CORNER_TOL = 1e-12


def ellipsoid_reaches(fs, direction) -> np.ndarray:
    """Per-ellipsoid distance from the origin to each boundary along a ray."""
    direction = np.asarray(direction, dtype=float)
    out = np.empty(fs.count)
    for i, e in enumerate(fs.ellipsoids):
        a = float(direction @ (e.quad @ direction))
        b = float(e.lin @ direction)
        out[i] = (-b + np.sqrt(b * b + a * e.level)) / a
    return out


def boundary_reach(fs, direction) -> float:
    """Distance from the interior anchor (origin) to the boundary along a ray."""
    return float(ellipsoid_reaches(fs, direction).min())


def _corner_from_ray(fs, direction):
    """Gauss-Newton refinement of a two-active corner near a boundary ray hit.

    Returns ``(point, active_pair)`` or ``None`` when the refinement leaves
    the remaining constraints or does not settle.
    """
    reaches = ellipsoid_reaches(fs, direction)
    order = np.argsort(reaches)
    i, j = int(order[0]), int(order[1])
    x = reaches[order[0]] * direction
    for _ in range(60):
        vals, grads = fs.eval_all(x)
        residual = np.array([vals[i], vals[j]])
        if max(abs(residual[0]), abs(residual[1])) <= _CORNER_TOL:
            others = np.delete(vals, [i, j])
            if others.size == 0 or others.max() < -1e-8:
                return x, (i, j)
            return None
        jac = np.stack([grads[i], grads[j]])
        step, *_ = np.linalg.lstsq(jac, residual, rcond=None)
        x = x - step
    return None


def _facet_anchor(fs, direction):
    """Fallback: nearest single-facet boundary point and its outward normal."""
    reaches = ellipsoid_reaches(fs, direction)
    i = int(np.argmin(reaches))
    x = reaches[i] * direction
    _, grads = fs.eval_all(x)
    normal = grads[i]
    return x, normal / np.linalg.norm(normal)


def plant_solution(fs, seed, corner=True):
    """Seeded corner (or facet) point with the outward press direction there.

    At a corner the press direction is the equal-weight combination of the
    two active unit normals, so the planted pressure is shared evenly
    between the active constraints; with ``corner=False`` (or when no corner
    is found) a single facet point and its unit normal are used.
    """
    rng = np.random.default_rng(seed)
    best = None
    best_gap = np.inf
    for _ in range(_ANCHOR_DRAWS):
        direction = rng.standard_normal(fs.dim)
        direction /= np.linalg.norm(direction)
        if fs.count == 1 or not corner:
            point, normal = _facet_anchor(fs, direction)
            return point, normal, rng.uniform(*_PRESS)
        reaches = np.sort(ellipsoid_reaches(fs, direction))[:2]
        gap = (reaches[1] - reaches[0]) / reaches[0]
        if gap < best_gap:
            refined = _corner_from_ray(fs, direction)
            if refined is not None:
                best_gap = gap
                best = refined
    press = rng.uniform(*_PRESS)
    if best is None:
        direction = rng.standard_normal(fs.dim)
        direction /= np.linalg.norm(direction)
        point, normal = _facet_anchor(fs, direction)
        return point, normal, press
    point, (i, j) = best
    _, grads = fs.eval_all(point)
    n1 = grads[i] / np.linalg.norm(grads[i])
    n2 = grads[j] / np.linalg.norm(grads[j])
    bisector = n1 + n2
    return point, bisector / np.linalg.norm(bisector), press


def bench_start(n, seed) -> np.ndarray:
    """Seeded start matched to the instance scale (the plain box draw at n=5).

    The generated sets shrink like the square root of the dimension, so the
    box draw is scaled down accordingly; the initial distance to the planted
    solutions then stays comparable across problem sizes and iteration
    counts reflect the methods rather than the length of the transport
    phase.
    """
    return default_start(n, seed) * (5.0 / n)


def build_instance(example, n, m, seed):
    """Feasible set and operator for one seeded instance of the given example.

    The operator is sampled first; its constant term is then re-derived so
    that the operator value at the planted corner is exactly the inward
    press, making the corner the solution.  The gradient family is pressed
    (its negated value at the solution points into the normal cone with a
    small positive magnitude); for the two monotone families the operator
    vanishes at the planted point.
    """
    fs = generate_feasible_set(n, m, seed)
    family = EXAMPLE_FAMILIES[int(example)]
    draft = generate_operator(family, n, seed + 1)
    # the undamped rotational error of the monotone-only family enters the
    # two-facet landing split at first order, so that family is planted on a
    # single facet and carries no press
    corner = family is not Family.MONOTONE_NONPARAMONOTONE
    point, outward, press = plant_solution(fs, seed + 2, corner=corner)
    if family is not Family.GRADIENT:
        press = 0.0
    shift = -(draft.linear @ point + draft.cubic_coeffs * point**3 + press * outward)
    op = OperatorSpec(family, draft.linear, draft.cubic_coeffs, shift, draft.block_split)
    return fs, op


def _run_cell(fs, op, x0, cfg, timing_reps):
    result = solve(x0, op, fs, cfg)
    best = result.wall_time
    for _ in range(timing_reps - 1):
        repeat = solve(x0, op, fs, cfg)
        if repeat.wall_time < best:
            best = repeat.wall_time
    return result, best


def run_scenario(scn: Scenario, example, base_seed, timing_reps=TIMING_REPS):
    """Run every (configuration, instance, solver) cell of the scenario.

    Deterministic in ``base_seed`` up to wall times.  Solver failures are
    recorded in the status column and never abort the run.
    """
    example = int(example)
    if example not in EXAMPLE_FAMILIES:
        raise ValueError("example must be 1, 2 or 3")
    rows = []
    for n, m in sorted(scn.dims):
        for index in range(scn.instances_per_config):
            seed = instance_seed(base_seed, example, n, m, index)
            fs, op = build_instance(example, n, m, seed)
            x0 = bench_start(n, seed)
            for algorithm in scn.solvers:
                cfg = SolverConfig(
                    algorithm=algorithm,
                    tolerance=scn.tolerance,
                    max_iterations=scn.max_iterations,
                    seed=seed,
                )
                result, best_time = _run_cell(fs, op, x0, cfg, timing_reps)
                try:
                    natural, feasibility = check_solution(result.final_point, op, fs)
                except Exception:
                    natural, feasibility = math.inf, math.inf
                rows.append(ResultRow(
                    scenario=scn.name,
                    example=example,
                    n=n,
                    m=m,
                    instance_index=index,
                    seed=seed,
                    solver=algorithm.value,
                    status=result.status.value,
                    iterations=result.iterations,
                    inner_iterations=result.inner_iterations_total,
                    wall_time_ns=int(round(best_time * 1e9)),
                    natural_residual=natural,
                    feasibility=feasibility,
                ))
    rows.sort(key=lambda r: (r.n, r.m, r.instance_index, r.solver))
    return rows


def lower_middle_median(values):
    """Median taking the lower-middle element for even counts."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("median of empty sequence")
    return ordered[(len(ordered) - 1) // 2]


def median_table(rows):
    """Per-(n, m, solver) medians of iterations and wall time over converged rows.

    Cells where nothing converged map to ``(None, None)``.
    """
    if not rows:
        raise ValueError("median_table needs at least one row")
    cells = {}
    for row in rows:
        cells.setdefault((row.n, row.m, row.solver), []).append(row)
    table = {}
    for key, cell in cells.items():
        good = [r for r in cell if r.status == Status.CONVERGED.value]
        if good:
            table[key] = (
                lower_middle_median(r.iterations for r in good),
                lower_middle_median(r.wall_time_ns for r in good),
            )
        else:
            table[key] = (None, None)
    return table


def speedup_table(rows, reference_solver):
    """Wall-time ratios ``median(solver) / median(reference)`` per (n, m)."""
    reference = Algorithm(reference_solver).value
    medians = median_table(rows)
    if not any(solver == reference for (_, _, solver) in medians):
        raise ValueError(f"reference solver {reference!r} not present in rows")
    ratios = {}
    for (n, m, solver), (_, time_ns) in medians.items():
        ref = medians.get((n, m, reference))
        if ref is None or ref[1] in (None, 0) or time_ns is None:
            ratios[(n, m, solver)] = None
        else:
            ratios[(n, m, solver)] = time_ns / ref[1]
    return ratios


@dataclass
class ProfileTable:
    """Dolan-More profile: per-solver breakpoints of the cumulative ratio curve."""

    metric: str
    points: dict = field(default_factory=dict)

    def fraction_at(self, solver, tau):
        best = 0.0
        for t, rho in self.points.get(solver, []):
            if t <= tau:
                best = rho
        return best


def performance_profile(rows, metric) -> ProfileTable:
    """Cumulative distribution of per-instance cost ratios against the best solver.

    ``metric`` is ``"iterations"`` or ``"time"``.  Failures cost infinity;
    costs are floored at one unit so ratios stay well defined.
    """
    if metric not in ("iterations", "time"):
        raise ValueError("metric must be 'iterations' or 'time'")
    solvers = sorted({row.solver for row in rows})
    if len(solvers) < 2:
        raise ValueError("performance profiles need at least two solvers")
    instances = sorted({(row.example, row.n, row.m, row.instance_index) for row in rows})
    cost = {}
    for row in rows:
        key = (row.example, row.n, row.m, row.instance_index)
        if row.status != Status.CONVERGED.value:
            cost[(key, row.solver)] = math.inf
        elif metric == "iterations":
            cost[(key, row.solver)] = max(row.iterations, 1)
        else:
            cost[(key, row.solver)] = max(row.wall_time_ns, 1)
    ratios = {solver: [] for solver in solvers}
    for inst in instances:
        per_solver = {s: cost.get((inst, s), math.inf) for s in solvers}
        best = min(per_solver.values())
        for s, c in per_solver.items():
            ratios[s].append(c / best if math.isfinite(best) else math.inf)
    total = len(instances)
    table = ProfileTable(metric=metric)
    for s in solvers:
        finite = sorted(r for r in ratios[s] if math.isfinite(r))
        points = [(1.0, sum(1 for r in finite if r <= 1.0) / total)]
        for r in finite:
            if r > 1.0:
                rho = sum(1 for q in finite if q <= r) / total
                if points[-1][0] == r:
                    points[-1] = (r, rho)
                else:
                    points.append((r, rho))
        table.points[s] = points
    return table


# ---------------------------------------------------------------------------
# CSV emission.  All files are UTF-8 with a header row, '.' decimals and
# integer nanosecond times; lines starting with '#' are comments.

_ROW_FIELDS = [
    "scenario", "example", "n", "m", "instance_index", "seed", "solver",
    "status", "iterations", "inner_iterations", "wall_time_ns",
    "natural_residual", "feasibility",
]


def write_rows_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ROW_FIELDS)
        for r in rows:
            writer.writerow([
                r.scenario, r.example, r.n, r.m, r.instance_index, r.seed,
                r.solver, r.status, r.iterations, r.inner_iterations,
                r.wall_time_ns, repr(r.natural_residual), repr(r.feasibility),
            ])


def read_rows_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader)
        if header != _ROW_FIELDS:
            raise ValueError(f"unexpected rows.csv header: {header}")
        for rec in reader:
            rows.append(ResultRow(
                scenario=rec[0], example=int(rec[1]), n=int(rec[2]), m=int(rec[3]),
                instance_index=int(rec[4]), seed=int(rec[5]), solver=rec[6],
                status=rec[7], iterations=int(rec[8]), inner_iterations=int(rec[9]),
                wall_time_ns=int(rec[10]), natural_residual=float(rec[11]),
                feasibility=float(rec[12]),
            ))
    return rows


_MISSING = "--"


def write_medians_csv(table, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# medians over converged rows; even-count median = lower-middle element\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "solver", "median_iterations", "median_time_ns"])
        for (n, m, solver), (iters, time_ns) in sorted(table.items()):
            writer.writerow([
                n, m, solver,
                _MISSING if iters is None else iters,
                _MISSING if time_ns is None else time_ns,
            ])


def write_speedups_csv(ratios, reference_solver, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# wall-time ratio of each solver against {Algorithm(reference_solver).value}\n")
        writer = csv.writer(fh)
        writer.writerow(["n", "m", "solver", "time_ratio"])
        for (n, m, solver), ratio in sorted(ratios.items()):
            writer.writerow([n, m, solver, _MISSING if ratio is None else repr(ratio)])


def write_profile_csv(profile: ProfileTable, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# performance profile breakpoints, metric={profile.metric};"
                 " failures enter with infinite ratio\n")
        writer = csv.writer(fh)
        writer.writerow(["solver", "tau", "rho"])
        for solver in sorted(profile.points):
            for tau, rho in profile.points[solver]:
                writer.writerow([solver, repr(float(tau)), repr(float(rho))])


def read_profile_csv(path) -> ProfileTable:
    points = {}
    metric = "unknown"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                if "metric=" in line:
                    metric = line.split("metric=")[1].split(";")[0].strip()
                continue
            break
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        next(reader)
        for solver, tau, rho in reader:
            points.setdefault(solver, []).append((float(tau), float(rho)))
    return ProfileTable(metric=metric, points=points)
