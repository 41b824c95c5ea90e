"""
Closed-form action values: Kepler collision bounds, the Lagrange rotating
equilateral solution, the collinear ejection, and the explicit collinear
test path with its action.

Every number here is computed from a formula; reference values live in the
tests and in the command table only.
"""

import math
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from core.orbits.action import kinetic, potential
from core.orbits.model import Configuration, DiscretePath, PhaseState
from core.utils.exceptions import ConstraintViolationError


def kepler_min_action(lam: float) -> float:
    """Minimum of int_0^1 (g'^2/2 + lam/g) dt over collinear paths through a collision."""
    if lam < 0:
        raise ConstraintViolationError(f"lambda must be nonnegative, got {lam}.")
    return 1.5 * math.pi ** (2.0 / 3.0) * lam ** (2.0 / 3.0)


def collinear_collision_bound() -> float:
    return 2.0 * kepler_min_action(5.0 / 4.0)


def triangle_collision_bound() -> float:
    return 3.0 * kepler_min_action(1.0 / math.sqrt(3.0))


def total_collision_bound() -> float:
    return min(collinear_collision_bound(), triangle_collision_bound())


# region lagrange
LAGRANGE_PERIOD = 4.0
LAGRANGE_OMEGA = 2.0 * math.pi / LAGRANGE_PERIOD
LAGRANGE_PHASES = (math.pi, math.pi / 3.0, 5.0 * math.pi / 3.0)


def _lagrange_constant() -> float:
    return 3.0 * 1.5 * (2.0 * math.pi) ** (2.0 / 3.0) * (math.sqrt(3.0) / 3.0) ** (2.0 / 3.0)


def lagrange_period_action() -> float:
    return _lagrange_constant() * 4.0 ** (1.0 / 3.0)


def lagrange_quarter_action() -> float:
    return _lagrange_constant() * 4.0 ** (-2.0 / 3.0)


def lagrange_radius(omega: float = LAGRANGE_OMEGA) -> float:
    # centripetal balance of an equilateral triangle: omega^2 R = 1/(sqrt(3) R^2)
    return (1.0 / (math.sqrt(3.0) * omega**2)) ** (1.0 / 3.0)


def lagrange_state(t: float) -> PhaseState:
    """Rotating equilateral solution; at t=0 body 1 is on the negative x-axis."""
    R, w = lagrange_radius(), LAGRANGE_OMEGA
    angles = np.array(LAGRANGE_PHASES) + w * t
    q = R * np.column_stack([np.cos(angles), np.sin(angles)])
    v = R * w * np.column_stack([-np.sin(angles), np.cos(angles)])
    return PhaseState(q, v, t)


def lagrange_path(times: np.ndarray) -> DiscretePath:
    return DiscretePath(times, np.stack([lagrange_state(t).positions for t in times]))


# endregion


# region ejection
def ejection_gamma0(alpha: float = 1.0, mu: float = 0.5) -> float:
    """Coefficient of the parabolic ejection r(t) = gamma0 t^(2/3)."""
    return (9.0 * alpha / (2.0 * mu)) ** (1.0 / 3.0)


def ejection_action(tau: float, alpha: float = 1.0, mu: float = 0.5) -> float:
    """int_0^tau mu/2 |r'|^2 + alpha/|r| dt along the parabolic ejection."""
    if tau < 0:
        raise ConstraintViolationError(f"tau must be nonnegative, got {tau}.")
    return 6.0 * alpha * tau ** (1.0 / 3.0) / ejection_gamma0(alpha, mu)


def ejection_time(r: float, alpha: float = 1.0, mu: float = 0.5) -> float:
    """Time needed by the parabolic ejection to reach separation r."""
    return (r / ejection_gamma0(alpha, mu)) ** 1.5


# endregion


# region test path
class CollinearTestPath:
    """Collinear path from the 1-2 collision at x = -9/10 to the Euler configuration."""

    knot = 1.0 / 8.0
    q3x = 9.0 / 5.0

    def _check(self, t: float):
        if not 0.0 <= t <= 1.0:
            raise ConstraintViolationError(f"t={t} is outside [0, 1].")

    def xs(self, t: float) -> tuple[float, float, float]:
        self._check(t)
        if t <= self.knot:
            s = t ** (2.0 / 3.0)
            return -0.9 + s, -0.9 - s, self.q3x
        return 26.0 / 35.0 * t - 26.0 / 35.0, -26.0 / 35.0 * t - 37.0 / 35.0, self.q3x

    def x_velocities(self, t: float) -> tuple[float, float, float]:
        self._check(t)
        if t < self.knot:
            ds = (2.0 / 3.0) * t ** (-1.0 / 3.0)
            return ds, -ds, 0.0
        return 26.0 / 35.0, -26.0 / 35.0, 0.0

    def configuration(self, t: float) -> Configuration:
        x1, x2, x3 = self.xs(t)
        return Configuration([[x1, 0.0], [x2, 0.0], [x3, 0.0]])

    def lagrangian(self, t: float) -> float:
        v = np.array(self.x_velocities(t))
        return kinetic(v) + potential(self.configuration(t))


def test_path_eval(t: float) -> Configuration:
    return CollinearTestPath().configuration(t)


def test_path_nodes(times: np.ndarray) -> DiscretePath:
    tp = CollinearTestPath()
    return DiscretePath(times, np.stack([tp.configuration(t).positions for t in times]))


class TestPathAction(NamedTuple):
    a1: float
    a2: float
    total: float


def test_path_action() -> TestPathAction:
    tp = CollinearTestPath()
    h = tp.knot
    # (4/9 + 1/2) t^(-2/3) is integrated in closed form
    singular = 17.0 / 18.0
    closed = singular * 3.0 * h ** (1.0 / 3.0)
    rest, _ = quad(lambda t: tp.lagrangian(t) - singular * t ** (-2.0 / 3.0), 0.0, h, limit=200)
    a1 = closed + rest
    a2, _ = quad(tp.lagrangian, h, 1.0, limit=200)
    return TestPathAction(a1, a2, a1 + a2)
# endregion
