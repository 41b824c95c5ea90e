"""
Discrete Lagrangian action of three unit masses (G = 1).

A path is piecewise linear between grid nodes. The kinetic term is integrated
exactly per segment and the potential U = sum 1/r_ij by Gauss-Legendre
quadrature, so U is never evaluated at a node and boundary collisions still
give a finite action.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from core import settings
from core.orbits.model import FAMILIES, Configuration, DiscretePath, FamilyMap, pair_distances, recentre
from core.utils.exceptions import CollisionError, PreconditionError
from core.utils.types import BoundaryFamily


@dataclass(frozen=True)
class ActionBreakdown:
    kinetic: float
    potential: float
    total: float

    @classmethod
    def of(cls, kinetic: float, potential: float) -> "ActionBreakdown":
        return cls(float(kinetic), float(potential), float(kinetic) + float(potential))


@lru_cache(maxsize=8)
def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on [0, 1] and weights summing to 1."""
    x, w = leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def potential(c: Configuration | np.ndarray) -> float:
    q = c.positions if isinstance(c, Configuration) else np.asarray(c, dtype=float)
    r = pair_distances(q)
    if np.any(r == 0.0):
        raise CollisionError(f"Collision in configuration {q.tolist()}.")
    return float(np.sum(1.0 / r))


def potential_gradient(q: np.ndarray) -> np.ndarray:
    """dU/dq_i = sum_j (q_j - q_i)/|q_j - q_i|^3, broadcast over leading axes."""
    q = np.asarray(q, dtype=float)
    grad = np.zeros_like(q)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        d = q[..., j, :] - q[..., i, :]
        r3 = np.linalg.norm(d, axis=-1, keepdims=True) ** 3
        f = d / r3
        grad[..., i, :] += f
        grad[..., j, :] -= f
    return grad


def kinetic(v: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.square(v)))


def _segment_terms(
    times: np.ndarray,
    nodes: np.ndarray,
    r_floor: float,
    gauss_points: int,
    with_gradient: bool,
):
    dt = np.diff(times)
    d = nodes[1:] - nodes[:-1]
    seg_kinetic = np.sum(d**2, axis=(1, 2)) / (2.0 * dt)

    xi, w = gauss_rule(gauss_points)
    qg = (
        nodes[:-1, None] * (1.0 - xi)[None, :, None, None]
        + nodes[1:, None] * xi[None, :, None, None]
    )
    r = pair_distances(qg)
    closest = float(r.min())
    if closest < r_floor:
        k, g, _ = np.unravel_index(int(np.argmin(r)), r.shape)
        raise CollisionError(
            f"Gauss point {g} of segment {k} has a pairwise distance {closest:.3e} < r_floor={r_floor:.1e}."
        )
    gauss_u = np.sum(1.0 / r, axis=-1)
    seg_potential = dt * (gauss_u @ w)

    if not with_gradient:
        return seg_kinetic, seg_potential, gauss_u, closest, None

    grad = np.zeros_like(nodes)
    vk = d / dt[:, None, None]
    grad[:-1] -= vk
    grad[1:] += vk

    gu = potential_gradient(qg)
    left = dt[:, None] * (w * (1.0 - xi))[None, :]
    right = dt[:, None] * (w * xi)[None, :]
    grad[:-1] += np.einsum("kg,kgbc->kbc", left, gu)
    grad[1:] += np.einsum("kg,kgbc->kbc", right, gu)
    return seg_kinetic, seg_potential, gauss_u, closest, grad


def segment_terms(
    p: DiscretePath,
    r_floor: float = settings.R_FLOOR,
    gauss_points: int = settings.GAUSS_POINTS,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment kinetic terms (N,) and U at every Gauss point (N, G)."""
    kin, _, gauss_u, _, _ = _segment_terms(p.times, p.nodes, r_floor, gauss_points, False)
    return kin, gauss_u


def discrete_action(
    p: DiscretePath,
    r_floor: float = settings.R_FLOOR,
    gauss_points: int = settings.GAUSS_POINTS,
) -> ActionBreakdown:
    kin, pot, _, _, _ = _segment_terms(p.times, p.nodes, r_floor, gauss_points, False)
    return ActionBreakdown.of(np.sum(kin), np.sum(pot))


def min_gauss_distance(p: DiscretePath, gauss_points: int = settings.GAUSS_POINTS) -> float:
    return _segment_terms(p.times, p.nodes, 0.0, gauss_points, False)[3]


def node_gradient(
    p: DiscretePath,
    r_floor: float = settings.R_FLOOR,
    gauss_points: int = settings.GAUSS_POINTS,
) -> np.ndarray:
    """dA/d(node positions), shape (N+1, 3, 2), no projection."""
    return _segment_terms(p.times, p.nodes, r_floor, gauss_points, True)[4]


def _chain(family: FamilyMap, grad: np.ndarray) -> np.ndarray:
    gs = np.tensordot(grad[0], family.start_basis, axes=([0, 1], [0, 1]))
    ge = np.tensordot(grad[-1], family.end_basis, axes=([0, 1], [0, 1]))
    return np.concatenate([gs, ge])


def action_gradient(
    p: DiscretePath,
    boundary_mode: BoundaryFamily | str = BoundaryFamily.fixed,
    r_floor: float = settings.R_FLOOR,
    gauss_points: int = settings.GAUSS_POINTS,
) -> np.ndarray:
    """
    Gradient with respect to the free degrees of freedom: interior nodes
    (projected onto zero center of mass) followed by the family parameters.
    """
    family = FAMILIES[BoundaryFamily.parse(boundary_mode)]
    grad = node_gradient(p, r_floor, gauss_points)
    interior = recentre(grad[1:-1])
    return np.concatenate([interior.ravel(), _chain(family, grad)])


@dataclass(frozen=True)
class PathSpace:
    """
    Flat parameterization of the paths on a fixed grid:
    x = [interior nodes (N-1)*6, family parameters].

    For the fixed family the boundary nodes are `start` and `end`; otherwise
    they are rebuilt from the parameters on every unpack, so iterates always
    lie exactly on the family.
    """

    times: np.ndarray
    family: FamilyMap
    start: np.ndarray | None = None
    end: np.ndarray | None = None
    r_floor: float = settings.R_FLOOR
    gauss_points: int = settings.GAUSS_POINTS

    @classmethod
    def for_path(
        cls,
        p: DiscretePath,
        family: BoundaryFamily | str,
        r_floor: float = settings.R_FLOOR,
        gauss_points: int = settings.GAUSS_POINTS,
    ) -> "PathSpace":
        fmap = FAMILIES[BoundaryFamily.parse(family)]
        return cls(p.times, fmap, np.array(p.nodes[0]), np.array(p.nodes[-1]), r_floor, gauss_points)

    @property
    def n_interior(self) -> int:
        return (self.times.size - 2) * 6

    @property
    def size(self) -> int:
        return self.n_interior + self.family.n_params

    def pack(self, p: DiscretePath, params: np.ndarray | None = None) -> np.ndarray:
        if params is None:
            params = self.family.fit(p.nodes[0], p.nodes[-1])
        return np.concatenate([np.ravel(p.nodes[1:-1]), np.asarray(params, dtype=float)])

    def params(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x[self.n_interior :])

    def nodes(self, x: np.ndarray) -> np.ndarray:
        n = self.times.size
        nodes = np.empty((n, 3, 2))
        nodes[1:-1] = np.reshape(x[: self.n_interior], (n - 2, 3, 2))
        if self.family.n_params:
            params = self.params(x)
            nodes[0] = self.family.start(params)
            nodes[-1] = self.family.end(params)
        else:
            if self.start is None or self.end is None:
                raise PreconditionError("The fixed family needs explicit boundary nodes.")
            nodes[0], nodes[-1] = self.start, self.end
        return nodes

    def to_path(self, x: np.ndarray) -> DiscretePath:
        return DiscretePath(self.times, self.nodes(x))

    def lower_bounds(self) -> np.ndarray:
        lower = np.full(self.size, -np.inf)
        lower[self.n_interior :] = self.family.lower
        return lower

    def recentre(self, x: np.ndarray) -> np.ndarray:
        x = np.array(x, dtype=float)
        interior = np.reshape(x[: self.n_interior], (-1, 3, 2))
        x[: self.n_interior] = recentre(interior).ravel()
        return x

    def value(self, x: np.ndarray) -> ActionBreakdown:
        kin, pot, _, _, _ = _segment_terms(self.times, self.nodes(x), self.r_floor, self.gauss_points, False)
        return ActionBreakdown.of(np.sum(kin), np.sum(pot))

    def value_and_gradient(self, x: np.ndarray, project: bool = True) -> tuple[float, np.ndarray]:
        kin, pot, _, _, grad = _segment_terms(
            self.times, self.nodes(x), self.r_floor, self.gauss_points, True
        )
        interior = grad[1:-1]
        if project:
            interior = recentre(interior)
        g = np.concatenate([interior.ravel(), _chain(self.family, grad)])
        return float(np.sum(kin) + np.sum(pot)), g

    def preconditioner(self) -> np.ndarray:
        """Inverse of the kinetic Hessian diagonal, per degree of freedom."""
        dt = np.diff(self.times)
        node_curv = 1.0 / dt[:-1] + 1.0 / dt[1:]
        diag = np.repeat(1.0 / node_curv, 6)
        fam = self.family
        start_curv = np.sum(fam.start_basis**2, axis=(0, 1)) / dt[0]
        end_curv = np.sum(fam.end_basis**2, axis=(0, 1)) / dt[-1]
        return np.concatenate([diag, 1.0 / start_curv, 1.0 / end_curv])
