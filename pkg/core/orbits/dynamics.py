"""
Newtonian three-body dynamics with unit masses and G = 1.

Trajectories are produced by scipy's embedded Dormand-Prince 5(4) pair with
dense output. The state carries a 13th component, the running integral of
K + U, so the action along a trajectory comes from the same integrator.
A terminal event stops the run when two bodies come closer than r_event.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Literal, NamedTuple

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp
from scipy.optimize import brentq

from core import settings
from core.orbits.action import kinetic, potential, potential_gradient
from core.orbits.bounds import ejection_action, ejection_gamma0, ejection_time, lagrange_state
from core.orbits.model import PAIRS, Configuration, DiscretePath, PhaseState, pair_distances, recentre
from core.utils.exceptions import (
    CollisionError,
    NotAtCollisionError,
    PreconditionError,
    ShootingDivergenceError,
    SingularJacobianError,
    StepSizeUnderflowError,
)

log = settings.get_logger("dynamics")

MAX_CONDITION = 1e12


# region physics
def accelerations(c: Configuration | np.ndarray) -> np.ndarray:
    q = c.positions if isinstance(c, Configuration) else np.asarray(c, dtype=float).reshape(3, 2)
    if np.any(pair_distances(q) == 0.0):
        raise CollisionError(f"Accelerations are undefined at a collision: {q.tolist()}.")
    return potential_gradient(q)


def energy(s: PhaseState) -> float:
    return kinetic(s.velocities) - potential(s.positions)


def angular_momentum(s: PhaseState) -> float:
    q, v = s.positions, s.velocities
    return float(np.sum(q[:, 0] * v[:, 1] - q[:, 1] * v[:, 0]))


def lagrangian(s: PhaseState) -> float:
    return kinetic(s.velocities) + potential(s.positions)


def _rhs(_t: float, y: np.ndarray) -> np.ndarray:
    q = y[:6].reshape(3, 2)
    v = y[6:12]
    r = pair_distances(q)
    out = np.empty(13)
    out[:6] = v
    out[6:12] = potential_gradient(q).ravel()
    out[12] = 0.5 * float(v @ v) + float(np.sum(1.0 / r))
    return out


# endregion


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    action: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    angular_momentum: np.ndarray
    status: Literal["completed", "collision"]
    t_start: float
    t_end: float
    tol: float
    event_pair: tuple[int, int] | None = None
    dense: OdeSolution | None = field(default=None, repr=False, compare=False)

    @property
    def backward(self) -> bool:
        return self.t_end < self.t_start

    def state(self, k: int) -> PhaseState:
        return PhaseState(self.positions[k], self.velocities[k], self.times[k])

    @property
    def start_state(self) -> PhaseState:
        return self.state(-1 if self.backward else 0)

    @property
    def end_state(self) -> PhaseState:
        return self.state(0 if self.backward else -1)

    def covers(self, t: float) -> bool:
        return self.times[0] - 1e-14 <= t <= self.times[-1] + 1e-14

    def state_at(self, t: float) -> PhaseState:
        if self.dense is None:
            raise PreconditionError("This trajectory carries no dense output.")
        if not self.covers(t):
            raise PreconditionError(f"t={t} is outside [{self.times[0]}, {self.times[-1]}].")
        y = self.dense(t)
        return PhaseState(y[:6].reshape(3, 2), y[6:12].reshape(3, 2), t)

    def energy_drift(self) -> float:
        e0 = self.energy[-1] if self.backward else self.energy[0]
        return float(np.abs(self.energy - e0).max() / max(abs(e0), 1e-300))

    def angular_momentum_drift(self) -> float:
        c = self.angular_momentum
        c0 = c[-1] if self.backward else c[0]
        scale = abs(c0) if abs(c0) > 1e-12 else 1.0
        return float(np.abs(c - c0).max() / scale)

    def to_path(self) -> DiscretePath:
        """Samples as a DiscretePath; the run must be sampled on [0, 1]."""
        return DiscretePath(self.times, recentre(self.positions))


def _pack(s: PhaseState) -> np.ndarray:
    return np.concatenate([s.as_vector(), [0.0]])


def _collision_event(r_event: float):
    def event(_t, y):
        return float(pair_distances(y[:6].reshape(3, 2)).min()) - r_event

    event.terminal = True
    event.direction = -1
    return event


def integrate(
    s0: PhaseState,
    t_end: float,
    tol: float = settings.INTEGRATOR_TOL,
    samples: int = 1001,
    t_eval: np.ndarray | None = None,
    r_event: float = settings.R_EVENT,
    method: str = settings.INTEGRATOR_METHOD,
) -> Trajectory:
    """
    Integrate from `s0` (at time s0.time) to `t_end`, forward or backward.
    Output arrays are always ordered by increasing time; a terminal collision
    event adds the event state as the last sample in integration order.
    """
    if not s0.is_balanced():
        raise PreconditionError("The initial state must have zero center of mass and momentum.")
    r0 = float(pair_distances(s0.positions).min())
    if r0 <= r_event:
        raise PreconditionError(f"Initial minimum distance {r0:.3e} is inside r_event={r_event:.1e}.")

    t0 = s0.time
    if t_eval is None:
        t_eval = np.linspace(t0, t_end, samples)
    t_eval = np.asarray(t_eval, dtype=float)

    sol = solve_ivp(
        _rhs,
        (t0, t_end),
        _pack(s0),
        method=method,
        t_eval=t_eval,
        dense_output=True,
        events=_collision_event(r_event),
        rtol=tol,
        atol=tol,
    )
    if sol.status == -1:
        raise StepSizeUnderflowError(f"Integration from t={t0} failed: {sol.message}")

    ts, ys = sol.t, sol.y.T
    status, pair = "completed", None
    end = t_end
    if sol.status == 1 and sol.t_events[0].size:
        t_ev, y_ev = sol.t_events[0][0], sol.y_events[0][0]
        if ts.size == 0 or ts[-1] != t_ev:
            ts = np.append(ts, t_ev)
            ys = np.vstack([ys, y_ev])
        status, end = "collision", float(t_ev)
        pair = PAIRS[int(np.argmin(pair_distances(y_ev[:6].reshape(3, 2))))]
        log.info(f"collision event of pair {pair} at t={t_ev:.12f}")
    else:
        log.info(f"integrated t={t0} -> {t_end} in {sol.t.size} samples ({sol.nfev} rhs calls)")

    if end < t0:
        ts, ys = ts[::-1], ys[::-1]

    q = ys[:, :6].reshape(-1, 3, 2)
    v = ys[:, 6:12].reshape(-1, 3, 2)
    r = pair_distances(q)
    e = 0.5 * np.sum(v**2, axis=(1, 2)) - np.sum(1.0 / r, axis=1)
    c = np.sum(q[..., 0] * v[..., 1] - q[..., 1] * v[..., 0], axis=1)
    return Trajectory(
        times=ts,
        positions=q,
        velocities=v,
        action=ys[:, 12],
        energy=e,
        momentum=v.sum(axis=1),
        angular_momentum=c,
        status=status,
        t_start=t0,
        t_end=end,
        tol=tol,
        event_pair=pair,
        dense=sol.sol,
    )


def trajectory_action(tr: Trajectory, t0: float, t1: float) -> float:
    """int_{t0}^{t1} (K + U) dt read off the integrated action component."""
    if not (tr.covers(t0) and tr.covers(t1)):
        raise PreconditionError(
            f"[{t0}, {t1}] is not covered by the trajectory [{tr.times[0]}, {tr.times[-1]}]."
        )
    return float(tr.dense(t1)[12] - tr.dense(t0)[12])


# region named states
# Four-decimal data of the period-4 orbits; Broucke-Henon at t = 0, Schubart at t = 1.
BROUCKE_HENON_T0 = PhaseState(
    [[-0.9031, 0.0], [-0.7321, 0.0], [1.6352, 0.0]],
    [[0.0, -2.4504], [0.0, 2.2283], [0.0, 0.2221]],
    0.0,
)
SCHUBART_T1 = PhaseState(
    [[0.0, 0.0], [-1.7141, 0.0], [1.7141, 0.0]],
    [[-0.6328, 0.0], [0.3164, 0.0], [0.3164, 0.0]],
    1.0,
)

NAMED_STATES = {
    "broucke-henon": lambda: BROUCKE_HENON_T0,
    "schubart-t1": lambda: SCHUBART_T1,
    "lagrange": lambda: lagrange_state(0.0),
}


def state_key(name: str) -> str:
    return name.replace("_", "-").lower()


def named_state(name: str) -> PhaseState:
    key = state_key(name)
    if key not in NAMED_STATES:
        raise PreconditionError(f"Unknown state '{name}'. Choose from {', '.join(NAMED_STATES)}.")
    return NAMED_STATES[key]()


# endregion


# region shooting
@dataclass(frozen=True)
class ShootingProblem:
    """
    Collinear start with vertical velocities. x3 and v3y follow from zero
    center of mass and momentum.
    """

    x1: float
    x2: float
    v1y: float
    v2y: float

    @classmethod
    def from_array(cls, u: np.ndarray) -> "ShootingProblem":
        return cls(*(float(v) for v in u))

    @classmethod
    def from_state(cls, s: PhaseState) -> "ShootingProblem":
        return cls(s.positions[0, 0], s.positions[1, 0], s.velocities[0, 1], s.velocities[1, 1])

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.v1y, self.v2y])

    def rounded(self, decimals: int) -> "ShootingProblem":
        return ShootingProblem.from_array(np.round(self.as_array(), decimals))

    def state(self) -> PhaseState:
        q = [[self.x1, 0.0], [self.x2, 0.0], [-self.x1 - self.x2, 0.0]]
        v = [[0.0, self.v1y], [0.0, self.v2y], [0.0, -self.v1y - self.v2y]]
        return PhaseState(q, v, 0.0)

    @staticmethod
    def residuals(s1: PhaseState) -> np.ndarray:
        q, v = s1.positions, s1.velocities
        return np.array([q[0, 0], q[1, 1] - q[2, 1], v[0, 1], v[1, 0] - v[2, 0]])


def _residual(u: np.ndarray, tol: float, r_event: float) -> np.ndarray:
    tr = integrate(ShootingProblem.from_array(u).state(), 1.0, tol, samples=2, r_event=r_event)
    if tr.status != "completed":
        raise CollisionError(f"Collision of pair {tr.event_pair} before t=1.")
    return ShootingProblem.residuals(tr.end_state)


def shoot_henon(
    guess: ShootingProblem,
    tol: float = 1e-9,
    max_iterations: int = 30,
    integrator_tol: float = settings.INTEGRATOR_TOL,
    r_event: float = settings.R_EVENT,
) -> PhaseState:
    """Damped Newton on the four t = 1 residuals with a forward-difference Jacobian."""
    u = guess.as_array()
    try:
        f = _residual(u, integrator_tol, r_event)
    except CollisionError as e:
        raise PreconditionError(f"The shooting guess does not reach t=1: {e}") from e

    for it in range(max_iterations):
        norm = float(np.abs(f).max())
        log.info(f"shooting iteration {it}: |F|={norm:.3e}")
        if norm < tol:
            return ShootingProblem.from_array(u).state()

        jac = np.empty((4, 4))
        for i in range(4):
            h = settings.FD_REL_STEP * max(abs(u[i]), 1.0)
            du = np.zeros(4)
            du[i] = h
            try:
                jac[:, i] = (_residual(u + du, integrator_tol, r_event) - f) / h
            except CollisionError as e:
                raise ShootingDivergenceError(f"Jacobian column {i} hit a collision: {e}") from e

        cond = np.linalg.cond(jac)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularJacobianError(f"Shooting Jacobian is singular (cond={cond:.3e}).")
        step = np.linalg.solve(jac, -f)

        damping = 1.0
        while damping >= 1.0 / 1024:
            trial = u + damping * step
            try:
                f_trial = _residual(trial, integrator_tol, r_event)
            except CollisionError:
                damping *= 0.5
                continue
            if np.abs(f_trial).max() < norm:
                u, f = trial, f_trial
                break
            damping *= 0.5
        else:
            raise ShootingDivergenceError(
                f"Newton step {it} could not reduce |F|={norm:.3e}."
            )

    raise ShootingDivergenceError(
        f"No convergence after {max_iterations} iterations, |F|={np.abs(f).max():.3e}."
    )


# endregion


# region collisions
def _event_state(tr: Trajectory, pair: tuple[int, int] = (0, 1)) -> PhaseState:
    if tr.status != "collision" or tr.event_pair != pair:
        raise NotAtCollisionError(
            f"The trajectory ended with status '{tr.status}' (pair {tr.event_pair}), not a {pair} collision."
        )
    return tr.end_state


def collision_direction(tr: Trajectory) -> np.ndarray:
    """Unit separation (q1 - q2)/|q1 - q2| at the 1-2 event."""
    s = _event_state(tr)
    d = s.positions[0] - s.positions[1]
    return d / np.linalg.norm(d)


def relative_y_velocity(tr: Trajectory) -> float:
    s = _event_state(tr)
    return float(s.velocities[0, 1] - s.velocities[1, 1])


def pair_lagrangian(s: PhaseState, pair: tuple[int, int] = (0, 1)) -> float:
    """mu/2 |r'|^2 + 1/|r| for the relative motion of a unit-mass pair (mu = 1/2)."""
    i, j = pair
    r = s.positions[i] - s.positions[j]
    dr = s.velocities[i] - s.velocities[j]
    return 0.25 * float(dr @ dr) + 1.0 / float(np.linalg.norm(r))


class SchubartQuarter(NamedTuple):
    trajectory: Trajectory
    covered_action: float
    tail_action: float
    action: float
    collision_time: float
    direction: np.ndarray
    gamma0: float


def _crossing_time(tr: Trajectory, r: float) -> float:
    d = np.linalg.norm(tr.positions[:, 0] - tr.positions[:, 1], axis=1)
    k = int(np.argmax(d > r))
    if k == 0:
        raise PreconditionError(f"No sample of the run is closer than r={r:.1e}.")

    def gap(t):
        y = tr.dense(t)
        return math.hypot(y[0] - y[2], y[1] - y[3]) - r

    return brentq(gap, tr.times[k - 1], tr.times[k], xtol=1e-15)


def ejection_gamma_estimate(tr: Trajectory, r_a: float, r_b: float) -> float:
    """gamma0 from r^(3/2) being linear in time along a parabolic ejection."""
    t_a, t_b = _crossing_time(tr, r_a), _crossing_time(tr, r_b)
    return abs((r_a**1.5 - r_b**1.5) / (t_a - t_b)) ** (2.0 / 3.0)


def schubart_quarter(
    state: PhaseState = SCHUBART_T1,
    r_event: float = settings.R_EVENT,
    tol: float = settings.INTEGRATOR_TOL,
    samples: int = 2001,
) -> SchubartQuarter:
    """
    Time-reverse the state, integrate backward to the 1-2 collision event and
    close the gap to the collision with the parabolic ejection integral.
    """
    t1 = state.time
    tr = integrate(state.reversed(), t1 - 1.5, tol, samples=samples, r_event=r_event)
    event = _event_state(tr)
    t_ev = event.time

    covered = trajectory_action(tr, t_ev, t1)
    tau = ejection_time(r_event)
    rest = lagrangian(event) - pair_lagrangian(event)
    tail = ejection_action(tau) + rest * tau
    gamma0 = ejection_gamma_estimate(tr, 1000.0 * r_event, 10.0 * r_event)
    log.info(
        f"schubart quarter: event t={t_ev:.10f}, covered={covered:.8f}, tail={tail:.3e}, "
        f"gamma0~{gamma0:.5f} (parabolic {ejection_gamma0():.5f})"
    )
    return SchubartQuarter(
        trajectory=tr,
        covered_action=covered,
        tail_action=tail,
        action=covered + tail,
        collision_time=t_ev - tau,
        direction=collision_direction(tr),
        gamma0=gamma0,
    )


# named states whose quarter ends at a collision and is closed analytically
COLLISION_QUARTERS: dict[str, Callable[..., SchubartQuarter]] = {"schubart-t1": schubart_quarter}


def collision_quarter(name: str) -> Callable[..., SchubartQuarter] | None:
    return COLLISION_QUARTERS.get(state_key(name))


# endregion
