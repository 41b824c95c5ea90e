from dataclasses import dataclass
import math

import numpy as np

from core import settings
from core.orbits.action import ActionBreakdown, gauss_rule, potential, segment_terms
from core.orbits.model import Configuration, DiscretePath
from core.utils.exceptions import CollisionError, UndefinedAngleError


@dataclass(frozen=True)
class JacobiPair:
    z1: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        for name in ("z1", "z2"):
            v = np.array(getattr(self, name), dtype=float).reshape(2)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def r1(self) -> float:
        return float(np.linalg.norm(self.z1))

    @property
    def r2(self) -> float:
        return float(np.linalg.norm(self.z2))


@dataclass(frozen=True)
class FoldingCheck:
    lhs: float
    rhs: float
    # None when a component sits inside the indeterminate band next to an axis
    adjacent: bool | None


@dataclass(frozen=True)
class FoldedComparison:
    original: ActionBreakdown
    folded: ActionBreakdown
    kinetic_excess: float
    potential_excess: float


def to_jacobi(c: Configuration) -> JacobiPair:
    q1, q2, q3 = c.positions
    return JacobiPair(q1 - q2, q3 - (q1 + q2) / 2.0)


def from_jacobi(j: JacobiPair) -> Configuration:
    q1 = -j.z2 / 3.0 + j.z1 / 2.0
    q2 = -j.z2 / 3.0 - j.z1 / 2.0
    q3 = 2.0 * j.z2 / 3.0
    return Configuration([q1, q2, q3])


def jacobi_nodes(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised to_jacobi over (..., 3, 2) arrays."""
    q1, q2, q3 = nodes[..., 0, :], nodes[..., 1, :], nodes[..., 2, :]
    return q1 - q2, q3 - (q1 + q2) / 2.0


def cartesian_nodes(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    return np.stack([-z2 / 3.0 + z1 / 2.0, -z2 / 3.0 - z1 / 2.0, 2.0 * z2 / 3.0], axis=-2)


def jacobi_kinetic(dz1: np.ndarray, dz2: np.ndarray) -> float:
    return 0.25 * float(np.sum(np.square(dz1))) + float(np.sum(np.square(dz2))) / 3.0


def delta_theta(j: JacobiPair) -> float:
    r1, r2 = j.r1, j.r2
    if r1 == 0.0 or r2 == 0.0:
        raise UndefinedAngleError("The angle between Z1 and Z2 needs two nonzero vectors.")
    cos_beta = float(np.clip(np.dot(j.z1, j.z2) / (r1 * r2), -1.0, 1.0))
    beta = math.acos(cos_beta)
    return beta if beta <= math.pi / 2 else math.pi - beta


def potential_jacobi(r1: float, r2: float, dtheta: float) -> float:
    if r1 <= 0.0:
        raise CollisionError("Z1 = 0 is a collision of bodies 1 and 2.")
    base = r1**2 / 4.0 + r2**2
    cross = r1 * r2 * math.cos(dtheta)
    plus, minus = base + cross, base - cross
    if plus <= 0.0 or minus <= 0.0:
        raise CollisionError(f"Collision with body 3 at r1={r1}, r2={r2}, dtheta={dtheta}.")
    return 1.0 / r1 + 1.0 / math.sqrt(plus) + 1.0 / math.sqrt(minus)


def fold(j: JacobiPair) -> JacobiPair:
    z1, z2 = np.abs(j.z1), np.abs(j.z2)
    return JacobiPair(z1, np.array([z2[0], -z2[1]]))


def _quadrants(v: np.ndarray, tol: float) -> set[int]:
    x, y = (0.0 if abs(c) <= tol else c for c in v)
    found = set()
    if x >= 0 and y >= 0:
        found.add(1)
    if x <= 0 and y >= 0:
        found.add(2)
    if x <= 0 and y <= 0:
        found.add(3)
    if x >= 0 and y <= 0:
        found.add(4)
    return found


def _near_axis(v: np.ndarray, tol: float, band: float) -> bool:
    return any(tol < abs(c) <= band for c in v)


def adjacent_quadrants(
    j: JacobiPair,
    axis_tol: float = settings.AXIS_TOL,
    band: float = settings.INDETERMINATE_BAND,
) -> bool | None:
    t1, t2 = axis_tol * j.r1, axis_tol * j.r2
    if _near_axis(j.z1, t1, band * j.r1) or _near_axis(j.z2, t2, band * j.r2):
        return None
    q1, q2 = _quadrants(j.z1, t1), _quadrants(j.z2, t2)
    return any((a - b) % 4 in (1, 3) for a in q1 for b in q2)


def folding_inequality_check(j: JacobiPair) -> FoldingCheck:
    if j.r2 == 0.0:
        # Z2 = 0: body 3 at the midpoint, U = 5/|Z1| on both sides
        u = potential_jacobi(j.r1, 0.0, 0.0)
        return FoldingCheck(u, u, True)
    lhs = potential(from_jacobi(j))
    rhs = potential(from_jacobi(fold(j)))
    return FoldingCheck(lhs, rhs, adjacent_quadrants(j))


def fold_path(p: DiscretePath) -> DiscretePath:
    z1, z2 = jacobi_nodes(p.nodes)
    z1 = np.abs(z1)
    z2 = np.abs(z2) * np.array([1.0, -1.0])
    return DiscretePath(p.times, cartesian_nodes(z1, z2))


def compare_folded(
    p: DiscretePath,
    r_floor: float = settings.R_FLOOR,
    gauss_points: int = settings.GAUSS_POINTS,
) -> FoldedComparison:
    """
    Kinetic per segment and U per Gauss point, original against folded.
    Excesses are max(folded - original); nonpositive values mean the folded
    path wins everywhere.
    """
    folded = fold_path(p)
    k0, u0 = segment_terms(p, r_floor, gauss_points)
    k1, u1 = segment_terms(folded, r_floor, gauss_points)
    dt = np.diff(p.times)
    _, w = gauss_rule(gauss_points)
    original = ActionBreakdown.of(k0.sum(), np.sum(dt * (u0 @ w)))
    folded_action = ActionBreakdown.of(k1.sum(), np.sum(dt * (u1 @ w)))
    return FoldedComparison(
        original=original,
        folded=folded_action,
        kinetic_excess=float(np.max(k1 - k0)),
        potential_excess=float(np.max(u1 - u0)),
    )
