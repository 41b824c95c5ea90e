"""
Extension of a quarter orbit on [0, 1] to a period-4 orbit, and checks of the
resulting reflection symmetries.

Both extensions share the piece on (1, 2]: q(t) = (-x, y)(2 - t) with bodies 2
and 3 swapped. They differ on (2, 4]:

    henon          q(t) = (x, -y)(4 - t)
    antisymmetric  q(t) = -q(t - 2)

Velocities follow by differentiating the position formulas.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from core import settings
from core.orbits.dynamics import Trajectory
from core.orbits.model import DiscretePath, pair_distances
from core.utils.exceptions import PreconditionError
from core.utils.types import ExtensionMode

log = settings.get_logger("symmetry")

PERIOD = 4.0
SWAP = [0, 2, 1]
REFLECT_X = np.array([1.0, -1.0])  # (x, y) -> (x, -y)
REFLECT_Y = np.array([-1.0, 1.0])  # (x, y) -> (-x, y)
COLLISION_GAP = 1e-6


class JunctionRow(NamedTuple):
    time: float
    position_jump: float
    velocity_jump: float
    collision: bool


@dataclass(frozen=True)
class Quarter:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def collision_start(self) -> bool:
        return float(pair_distances(self.positions[0]).min()) < COLLISION_GAP


@dataclass(frozen=True)
class PeriodicOrbit:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    provenance: ExtensionMode
    tolerance: float = settings.JUNCTION_TOL
    junctions: list[JunctionRow] = field(default_factory=list, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times[0] != 0.0 or abs(times[-1] - PERIOD) > 1e-12:
            raise PreconditionError(f"An orbit spans [0, {PERIOD}], got [{times[0]}, {times[-1]}].")
        if np.any(np.diff(times) <= 0):
            raise PreconditionError("Orbit sample times must be strictly increasing.")

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        n = self.times.size
        return CubicHermiteSpline(
            self.times, self.positions.reshape(n, 6), self.velocities.reshape(n, 6)
        )

    @cached_property
    def _velocity_spline(self):
        return self._spline.derivative()

    def positions_at(self, t: np.ndarray | float) -> np.ndarray:
        t = np.mod(np.asarray(t, dtype=float), PERIOD)
        return self._spline(t).reshape(np.shape(t) + (3, 2))

    def velocities_at(self, t: np.ndarray | float) -> np.ndarray:
        t = np.mod(np.asarray(t, dtype=float), PERIOD)
        return self._velocity_spline(t).reshape(np.shape(t) + (3, 2))

    def energy(self) -> np.ndarray:
        r = pair_distances(self.positions)
        with np.errstate(divide="ignore"):
            return 0.5 * np.sum(self.velocities**2, axis=(1, 2)) - np.sum(1.0 / r, axis=1)

    def quarter(self) -> Quarter:
        k = self.times <= 1.0
        return Quarter(self.times[k], self.positions[k], self.velocities[k])


# region quarters
def as_quarter(source: Trajectory | PeriodicOrbit | DiscretePath | Quarter) -> Quarter:
    if isinstance(source, Quarter):
        q = source
    elif isinstance(source, PeriodicOrbit):
        q = source.quarter()
    elif isinstance(source, Trajectory):
        q = Quarter(source.times, source.positions, source.velocities)
    elif isinstance(source, DiscretePath):
        v = np.gradient(source.nodes, source.times, axis=0, edge_order=2)
        q = Quarter(source.times, np.asarray(source.nodes), v)
    else:
        raise PreconditionError(f"Cannot extend a {type(source).__name__}.")

    if q.times.size < 3:
        raise PreconditionError("A quarter needs at least 3 samples.")
    if abs(q.times[0]) > 1e-12 or abs(q.times[-1] - 1.0) > 1e-12:
        raise PreconditionError(f"A quarter spans [0, 1], got [{q.times[0]}, {q.times[-1]}].")
    return q


def _mirror(q: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Samples of the (1, 2] piece from quarter samples (same order)."""
    return q[..., SWAP, :] * REFLECT_Y, v[..., SWAP, :] * REFLECT_X


def _reflect(q: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return q * REFLECT_X, v * REFLECT_Y


def _gap(a: tuple[np.ndarray, np.ndarray], b: tuple[np.ndarray, np.ndarray]) -> tuple[float, float]:
    return float(np.abs(a[0] - b[0]).max()), float(np.abs(a[1] - b[1]).max())


def _junctions(quarter: Quarter, mode: ExtensionMode) -> list[JunctionRow]:
    start = (quarter.positions[0], quarter.velocities[0])
    end = (quarter.positions[-1], quarter.velocities[-1])
    mirrored_start = _mirror(*start)
    one = _gap(end, _mirror(*end))
    if mode == ExtensionMode.henon:
        two = _gap(mirrored_start, _reflect(*mirrored_start))
        closure = _gap(_reflect(*start), start)
    else:
        two = _gap(mirrored_start, (-start[0], -start[1]))
        closure = _gap((-mirrored_start[0], -mirrored_start[1]), start)
    hit = quarter.collision_start
    return [
        JunctionRow(1.0, *one, False),
        JunctionRow(2.0, *two, hit),
        JunctionRow(3.0, *one, False),
        JunctionRow(4.0, *closure, hit),
    ]


def junction_report(orbit: PeriodicOrbit) -> list[JunctionRow]:
    return list(orbit.junctions) or _junctions(orbit.quarter(), orbit.provenance)


def _max_jump(rows: list[JunctionRow]) -> float:
    jumps = [r.position_jump for r in rows]
    jumps += [r.velocity_jump for r in rows if not r.collision]
    return max(jumps)


# endregion


def _extend(
    source,
    mode: ExtensionMode,
    tol: float | None,
    strict: bool,
) -> PeriodicOrbit:
    tol = settings.JUNCTION_TOL if tol is None else tol
    quarter = as_quarter(source)
    rows = _junctions(quarter, mode)
    if strict and _max_jump(rows) > tol:
        failing = "; ".join(
            f"t={r.time:g}: |dq|={r.position_jump:.3e} |dv|={r.velocity_jump:.3e}"
            for r in rows
            if r.position_jump > tol or (not r.collision and r.velocity_jump > tol)
        )
        raise PreconditionError(f"The quarter does not close as a {mode.value} orbit at tol={tol:.1e}: {failing}")

    t, q, v = quarter.times, quarter.positions, quarter.velocities

    # (1, 2]
    qb, vb = _mirror(q[:-1], v[:-1])
    t_h = np.concatenate([t, (2.0 - t[:-1])[::-1]])
    q_h = np.concatenate([q, qb[::-1]])
    v_h = np.concatenate([v, vb[::-1]])

    # (2, 4]
    if mode == ExtensionMode.henon:
        qc, vc = _reflect(q_h[:-1], v_h[:-1])
        t_c, q_c, v_c = (4.0 - t_h[:-1])[::-1], qc[::-1], vc[::-1]
    else:
        t_c, q_c, v_c = t_h[1:] + 2.0, -q_h[1:], -v_h[1:]

    log.info(f"{mode.value} extension of a {t.size}-sample quarter, max junction jump {_max_jump(rows):.3e}")
    return PeriodicOrbit(
        times=np.concatenate([t_h, t_c]),
        positions=np.concatenate([q_h, q_c]),
        velocities=np.concatenate([v_h, v_c]),
        provenance=mode,
        tolerance=tol,
        junctions=rows,
    )


def extend_henon(source, tol: float | None = None, strict: bool = True) -> PeriodicOrbit:
    return _extend(source, ExtensionMode.henon, tol, strict)


def extend_antisymmetric(source, tol: float | None = None, strict: bool = True) -> PeriodicOrbit:
    return _extend(source, ExtensionMode.antisymmetric, tol, strict)


def extend(source, mode: ExtensionMode | str, tol: float | None = None, strict: bool = True) -> PeriodicOrbit:
    return _extend(source, ExtensionMode(mode), tol, strict)


# region verification
@dataclass(frozen=True)
class D2Report:
    time_reflection: float
    half_period: float
    worst_time: float
    worst_relation: str
    tol: float

    @property
    def max_deviation(self) -> float:
        return max(self.time_reflection, self.half_period)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def to_dict(self) -> dict:
        return {
            "time_reflection": self.time_reflection,
            "half_period": self.half_period,
            "worst_time": self.worst_time,
            "worst_relation": self.worst_relation,
            "tol": self.tol,
            "passed": self.passed,
        }


def verify_d2(o: PeriodicOrbit, tol: float = 1e-5, samples: int = 800) -> D2Report:
    """
    Checks q(t) = R_x q(-t) and q(t + 2) = -q(t) on a sample grid, with the
    2-3 swap on whichever relation the orbit's construction carries it.
    """
    t = np.linspace(0.0, PERIOD, samples, endpoint=False)
    q = o.positions_at(t)
    if o.provenance == ExtensionMode.henon:
        reflect_perm, half_perm = [0, 1, 2], SWAP
    else:
        reflect_perm, half_perm = SWAP, [0, 1, 2]

    reflected = o.positions_at(-t)[:, reflect_perm, :] * REFLECT_X
    shifted = o.positions_at(t + 2.0)
    dev_r = np.abs(q - reflected).max(axis=(1, 2))
    dev_h = np.abs(shifted + q[:, half_perm, :]).max(axis=(1, 2))

    if dev_r.max() >= dev_h.max():
        worst, relation = float(t[int(np.argmax(dev_r))]), "time_reflection"
    else:
        worst, relation = float(t[int(np.argmax(dev_h))]), "half_period"
    return D2Report(float(dev_r.max()), float(dev_h.max()), worst, relation, tol)


# endregion
