"""
Two-step action minimization on a discrete path space.

The inner problem holds both boundary configurations fixed. The free problem
also moves the boundary family parameters, with lower bounds enforced by
projection after every step, so the boundary nodes always sit exactly on the
family.

The optimizer is a projected, diagonally preconditioned L-BFGS with a
backtracking line search that treats collisions (a Gauss point closer than
r_floor) as rejected trials.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from core import settings
from core.orbits import bounds
from core.orbits.action import ActionBreakdown, PathSpace, discrete_action, min_gauss_distance
from core.orbits.model import FAMILIES, AuxiliaryParams, BoundaryParams, DiscretePath, make_grid, recentre
from core.utils.exceptions import CollisionError, PreconditionError
from core.utils.types import BoundaryFamily, MinimizeConfig, SeedKind

log = settings.get_logger("minimize")

ARMIJO = 1e-4

ProgressFn = Callable[[dict], None]


@dataclass
class MinimizeResult:
    path: DiscretePath
    family: BoundaryFamily
    params: np.ndarray
    action: ActionBreakdown
    gradient_norm: float
    iterations: int
    termination: str
    min_distance: float
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        """A gradient stop, or a stall that left the projected gradient small."""
        return self.termination == "gradient" or (
            self.termination == "stalled" and self.gradient_norm < settings.CONVERGED_GRADIENT
        )

    @property
    def boundary_params(self) -> BoundaryParams | AuxiliaryParams | dict[str, float]:
        p = [float(v) for v in self.params]
        if self.family == BoundaryFamily.qs1_qe1:
            return BoundaryParams(*p)
        if self.family == BoundaryFamily.qs3_qe3:
            return AuxiliaryParams(*p)
        return FAMILIES[self.family].describe(self.params)

    def summary(self) -> dict:
        return {
            "family": self.family.value,
            "grid": self.path.n_segments,
            "params": FAMILIES[self.family].describe(self.params),
            "kinetic": self.action.kinetic,
            "potential": self.action.potential,
            "action": self.action.total,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "termination": self.termination,
            "converged": self.converged,
            "min_distance": self.min_distance,
        }


class _Descent(NamedTuple):
    x: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    termination: str
    history: list[float]


def _active(g: np.ndarray, x: np.ndarray, lower: np.ndarray) -> np.ndarray:
    # at the bound and pushing into it
    return np.isfinite(lower) & (x <= lower) & (g > 0)


def _projected(g: np.ndarray, x: np.ndarray, lower: np.ndarray) -> np.ndarray:
    return np.where(_active(g, x, lower), 0.0, g)


def _two_loop(g: np.ndarray, s_hist: deque, y_hist: deque, diag: np.ndarray) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        gamma = (s @ y) / (y @ (diag * y))
    else:
        gamma = 1.0
    r = gamma * diag * q
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return r


def _descend(
    space: PathSpace,
    x0: np.ndarray,
    cfg: MinimizeConfig,
    progress: ProgressFn | None = None,
) -> _Descent:
    lower = space.lower_bounds()
    diag = space.preconditioner()
    x = np.maximum(space.recentre(x0), lower)
    try:
        f, g = space.value_and_gradient(x)
    except CollisionError as e:
        raise CollisionError(f"The seed path is not admissible: {e}") from e

    s_hist: deque = deque(maxlen=cfg.memory)
    y_hist: deque = deque(maxlen=cfg.memory)
    history = [f]
    termination = "max_iterations"
    pg = _projected(g, x, lower)
    gnorm = float(np.abs(pg).max(initial=0.0))
    it = 0
    restarts = 0
    since = 0

    for it in range(1, cfg.max_iterations + 1):
        if gnorm < cfg.gradient_tol:
            termination = "gradient"
            it -= 1
            break

        d = -_two_loop(pg, s_hist, y_hist, diag)
        d[_active(g, x, lower)] = 0.0
        if pg @ d >= 0.0:
            s_hist.clear()
            y_hist.clear()
            d = -diag * pg

        step = min(1.0, cfg.max_step / float(np.abs(d).max()))
        accepted = False
        collisions = 0
        for _ in range(cfg.max_backtracks):
            x_new = space.recentre(np.maximum(x + step * d, lower))
            try:
                f_new, g_new = space.value_and_gradient(x_new)
            except CollisionError:
                collisions += 1
                step *= 0.5
                continue
            if f_new <= f + ARMIJO * min(float(pg @ (x_new - x)), 0.0):
                accepted = True
                break
            step *= 0.5

        if not accepted:
            if s_hist:
                # retry once along the preconditioned steepest descent
                s_hist.clear()
                y_hist.clear()
                continue
            if collisions == cfg.max_backtracks:
                raise CollisionError(
                    f"Every trial step from iteration {it} violates r_floor={space.r_floor:.1e}."
                )
            termination = "line_search_failure"
            break

        s, y = x_new - x, g_new - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)

        x, f, g = x_new, f_new, g_new
        pg = _projected(g, x, lower)
        gnorm = float(np.abs(pg).max(initial=0.0))
        history.append(f)

        if it % cfg.log_every == 0:
            log.info(f"iteration {it}: action={f:.12f} |pg|={gnorm:.3e}")
            if progress is not None:
                progress({"status": "running", "iteration": it, "action": f, "gradient": gnorm})

        w = cfg.stall_window
        if len(history) - since > w and abs(history[-1 - w] - f) <= cfg.action_rtol * abs(f):
            if gnorm < settings.CONVERGED_GRADIENT or restarts >= settings.STALL_RESTARTS:
                termination = "stalled"
                break
            # curvature pairs from the stalled window are stale
            restarts += 1
            since = len(history) - 1
            s_hist.clear()
            y_hist.clear()
            log.info(f"iteration {it}: stalled with |pg|={gnorm:.3e}, restart {restarts}")

    return _Descent(x, f, gnorm, it, termination, history)


def _result(space: PathSpace, d: _Descent) -> MinimizeResult:
    path = space.to_path(d.x)
    params = space.params(d.x).copy()
    result = MinimizeResult(
        path=path,
        family=space.family.name,
        params=params,
        action=discrete_action(path, space.r_floor, space.gauss_points),
        gradient_norm=d.gradient_norm,
        iterations=d.iterations,
        termination=d.termination,
        min_distance=min_gauss_distance(path, space.gauss_points),
        history=d.history,
    )
    log.info(
        f"{space.family.name.value} N={path.n_segments}: action={result.action.total:.10f} "
        f"after {d.iterations} iterations ({d.termination})"
    )
    if not result.converged:
        log.warning(f"not converged: |pg|={d.gradient_norm:.3e} after {d.termination}")
    return result


def minimize_inner(
    p: DiscretePath,
    cfg: MinimizeConfig | None = None,
    progress: ProgressFn | None = None,
) -> MinimizeResult:
    """Descend the interior nodes of `p` with both boundary nodes held fixed."""
    cfg = cfg or MinimizeConfig(family=BoundaryFamily.fixed)
    space = PathSpace.for_path(p, BoundaryFamily.fixed, cfg.r_floor, cfg.gauss_points)
    log.info(f"inner minimization N={p.n_segments}")
    return _result(space, _descend(space, space.pack(p), cfg, progress))


# region seeds
def resample(p: DiscretePath, times: np.ndarray) -> DiscretePath:
    """Piecewise-linear evaluation of `p` on another grid over [0, 1]."""
    flat = p.nodes.reshape(p.times.size, 6)
    nodes = np.column_stack([np.interp(times, p.times, flat[:, i]) for i in range(6)])
    return DiscretePath(times, recentre(nodes.reshape(-1, 3, 2)))


def seed_path(cfg: MinimizeConfig, times: np.ndarray) -> DiscretePath:
    if cfg.seed == SeedKind.collinear_testpath:
        return bounds.test_path_nodes(times)
    if cfg.seed == SeedKind.lagrange_quarter:
        return bounds.lagrange_path(times)

    from core.orbits import fileio

    loaded = fileio.to_path(fileio.read_trajectory(cfg.seed_path))
    return resample(loaded, times)


def _on_family(p: DiscretePath, space: PathSpace) -> np.ndarray:
    if space.family.n_params == 0:
        return space.pack(p)
    params = space.family.fit(p.nodes[0], p.nodes[-1])
    return space.pack(p, params)


# endregion


def _levels(cfg: MinimizeConfig) -> list[int]:
    grids = [max(cfg.grid >> k, 4) for k in reversed(range(cfg.levels))]
    return sorted(set(grids))


def minimize_free(
    cfg: MinimizeConfig,
    seed: DiscretePath | None = None,
    progress: ProgressFn | None = None,
) -> MinimizeResult:
    """
    Joint descent over interior nodes and the boundary parameters of
    `cfg.family`. With `cfg.levels > 1` the problem is first solved on coarser
    grids (N/2, N/4, ...) and each solution is prolonged linearly to the next.
    """
    grids = _levels(cfg)
    log.info(
        f"free minimization family={cfg.family.value} seed={cfg.seed.value} "
        f"N={cfg.grid} grading={cfg.grading} levels={grids}"
    )

    current: DiscretePath | None = None
    result: MinimizeResult | None = None
    for n in grids:
        times = make_grid(n, cfg.grading)
        if current is None:
            current = resample(seed, times) if seed is not None else seed_path(cfg, times)
        else:
            current = resample(current, times)

        space = PathSpace(
            times,
            FAMILIES[cfg.family],
            np.array(current.nodes[0]),
            np.array(current.nodes[-1]),
            cfg.r_floor,
            cfg.gauss_points,
        )
        x0 = _on_family(current, space)
        if result is not None:
            x0[space.n_interior :] = result.params
        result = _result(space, _descend(space, x0, cfg, progress))
        current = result.path

    return result


# region first variation
class FirstVariationRow(NamedTuple):
    condition: str
    time: float
    residual: float


def _start_velocity(times: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    h1, h2 = times[1] - times[0], times[2] - times[0]
    c0 = -(h1 + h2) / (h1 * h2)
    c1 = h2 / (h1 * (h2 - h1))
    c2 = -h1 / (h2 * (h2 - h1))
    return c0 * nodes[0] + c1 * nodes[1] + c2 * nodes[2]


def boundary_velocities(times: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-sided 3-point differences at t = 0 and t = 1 on a nonuniform grid."""
    times, nodes = np.asarray(times, dtype=float), np.asarray(nodes, dtype=float)
    v0 = _start_velocity(times, nodes)
    v1 = -_start_velocity(times[-1] - times[::-1], nodes[::-1])
    return v0, v1


def _end_rows(v: np.ndarray, family: BoundaryFamily) -> list[FirstVariationRow]:
    if family == BoundaryFamily.qs2_qe2:
        return [FirstVariationRow("v2x(1) - v3x(1)", 1.0, v[1, 0] - v[2, 0])]
    return [
        FirstVariationRow("v1y(1)", 1.0, v[0, 1]),
        FirstVariationRow("v2y(1) + v3y(1)", 1.0, v[1, 1] + v[2, 1]),
        FirstVariationRow("v2x(1) - v3x(1)", 1.0, v[1, 0] - v[2, 0]),
    ]


def _start_rows(v: np.ndarray, family: BoundaryFamily) -> list[FirstVariationRow]:
    if family == BoundaryFamily.qs1_qe1:
        return [FirstVariationRow(f"v{i + 1}x(0)", 0.0, v[i, 0]) for i in range(3)]
    if family == BoundaryFamily.qs3_qe3:
        return [
            FirstVariationRow("v1x(0)", 0.0, v[0, 0]),
            FirstVariationRow("v2x(0) + v3x(0)", 0.0, v[1, 0] + v[2, 0]),
            FirstVariationRow("v2y(0) - v3y(0)", 0.0, v[1, 1] - v[2, 1]),
        ]
    return [FirstVariationRow("v3x(0)", 0.0, v[2, 0])]


def first_variation_report(
    r: MinimizeResult | DiscretePath,
    family: BoundaryFamily | str | None = None,
) -> list[FirstVariationRow]:
    """Residuals of the natural boundary conditions of a free-boundary minimizer."""
    if isinstance(r, MinimizeResult):
        path, family = r.path, family or r.family
    else:
        path = r
    family = BoundaryFamily.parse(family or BoundaryFamily.qs1_qe1)
    if family == BoundaryFamily.fixed:
        return []
    if path.times.size < 3:
        raise PreconditionError("Boundary differences need at least 3 nodes.")
    v0, v1 = boundary_velocities(path.times, path.nodes)
    rows = _start_rows(v0, family) + _end_rows(v1, family)
    return [FirstVariationRow(c, t, float(v)) for c, t, v in rows]


# endregion
