from dataclasses import dataclass
from typing import Iterable

import numpy as np

from core.utils.exceptions import ConstraintViolationError, PreconditionError
from core.utils.types import BoundaryFamily

COM_TOL = 1e-12
BALANCE_TOL = 1e-10


def _frozen(values, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def _com_ok(positions: np.ndarray, tol: float) -> bool:
    scale = max(1.0, float(np.abs(positions).max(initial=0.0)))
    return float(np.abs(positions.sum(axis=-2)).max(initial=0.0)) <= tol * scale


def recentre(positions: np.ndarray) -> np.ndarray:
    """Subtract the center of mass over the body axis (second to last)."""
    positions = np.asarray(positions, dtype=float)
    return positions - positions.mean(axis=-2, keepdims=True)


@dataclass(frozen=True)
class Configuration:
    positions: np.ndarray

    def __post_init__(self):
        q = _frozen(self.positions, (3, 2))
        if not _com_ok(q, COM_TOL):
            raise ConstraintViolationError(
                f"Center of mass {q.sum(axis=0)} is not at the origin."
            )
        object.__setattr__(self, "positions", q)

    @classmethod
    def from_raw(cls, positions) -> "Configuration":
        return cls(recentre(np.reshape(positions, (3, 2))))

    def distances(self) -> np.ndarray:
        return pair_distances(self.positions)


@dataclass(frozen=True)
class BoundaryParams:
    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        if self.a1 < 0 or self.a2 < 0:
            raise ConstraintViolationError(
                f"a1 and a2 must be nonnegative, got a1={self.a1}, a2={self.a2}."
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.b1, self.b2])


@dataclass(frozen=True)
class AuxiliaryParams:
    a1: float
    c1: float
    b1: float
    b2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.c1, self.b1, self.b2])


@dataclass(frozen=True)
class PhaseState:
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions, (3, 2)))
        object.__setattr__(self, "velocities", _frozen(self.velocities, (3, 2)))
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def balanced(cls, positions, velocities, time: float = 0.0) -> "PhaseState":
        return cls(recentre(np.reshape(positions, (3, 2))), recentre(np.reshape(velocities, (3, 2))), time)

    def is_balanced(self, tol: float = BALANCE_TOL) -> bool:
        com, momentum = com_and_momentum(self)
        return bool(np.abs(com).max() <= tol and np.abs(momentum).max() <= tol)

    def configuration(self) -> Configuration:
        return Configuration(self.positions)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.positions.ravel(), self.velocities.ravel()])

    def reversed(self) -> "PhaseState":
        """Same positions, velocities negated: the time-reversed motion."""
        return PhaseState(self.positions, -self.velocities, self.time)


@dataclass(frozen=True)
class DiscretePath:
    times: np.ndarray
    nodes: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        nodes = np.array(self.nodes, dtype=float)
        if times.ndim != 1 or times.size < 3:
            raise PreconditionError("A path needs at least 2 segments.")
        if times[0] != 0.0 or times[-1] != 1.0:
            raise PreconditionError(
                f"Grid must start at 0 and end at 1, got [{times[0]}, {times[-1]}]."
            )
        if np.any(np.diff(times) <= 0):
            raise PreconditionError("Grid times must be strictly increasing.")
        if nodes.shape != (times.size, 3, 2):
            raise PreconditionError(
                f"Expected nodes of shape {(times.size, 3, 2)}, got {nodes.shape}."
            )
        if not _com_ok(nodes, COM_TOL):
            raise ConstraintViolationError("Every node must have its center of mass at the origin.")
        nodes.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_segments(self) -> int:
        return self.times.size - 1

    def node(self, k: int) -> Configuration:
        return Configuration(self.nodes[k])

    def with_nodes(self, nodes: np.ndarray) -> "DiscretePath":
        return DiscretePath(self.times, nodes)

    def reversed(self) -> "DiscretePath":
        return DiscretePath(1.0 - self.times[::-1], self.nodes[::-1])

    def reflected(self, axis: str) -> "DiscretePath":
        flip = {"x": [1.0, -1.0], "y": [-1.0, 1.0]}[axis]
        return DiscretePath(self.times, self.nodes * flip)


def make_grid(n: int, grading: float = 1.0) -> np.ndarray:
    """t_k = (k/n)**grading; grading 3/2 clusters nodes near t = 0."""
    if n < 2:
        raise PreconditionError("A grid needs at least 2 segments.")
    t = (np.arange(n + 1) / n) ** grading
    t[0], t[-1] = 0.0, 1.0
    return t


PAIRS = ((0, 1), (0, 2), (1, 2))


def pair_distances(q: np.ndarray) -> np.ndarray:
    """Distances r12, r13, r23 over the last two axes of `q` (..., 3, 2)."""
    q = np.asarray(q, dtype=float)
    return np.stack(
        [np.linalg.norm(q[..., i, :] - q[..., j, :], axis=-1) for i, j in PAIRS],
        axis=-1,
    )


def com_and_momentum(s: PhaseState) -> tuple[np.ndarray, np.ndarray]:
    return s.positions.sum(axis=0), s.velocities.sum(axis=0)


# region boundary families
def build_qs1(p: BoundaryParams) -> Configuration:
    a1, a2 = p.a1, p.a2
    if a1 < 0 or a2 < 0:
        raise ConstraintViolationError(f"a1={a1}, a2={a2} leave the set S.")
    return Configuration([[-2 * a1 - a2, 0.0], [a1 - a2, 0.0], [a1 + 2 * a2, 0.0]])


def build_qe1(p: BoundaryParams) -> Configuration:
    b1, b2 = p.b1, p.b2
    return Configuration([[0.0, -2 * b1], [-b2, b1], [b2, b1]])


def build_qs3(a1: float, c1: float) -> Configuration:
    return Configuration([[-2 * a1, 0.0], [a1, c1], [a1, -c1]])


def build_qs2(c1: float) -> Configuration:
    return Configuration([[-c1, 0.0], [-c1, 0.0], [2 * c1, 0.0]])


def build_qs4(a2: float) -> Configuration:
    if a2 < 0:
        raise ConstraintViolationError(f"a2={a2} must be nonnegative.")
    return build_qs2(a2)


def build_qe2(d1: float) -> Configuration:
    return Configuration([[0.0, 0.0], [-d1, 0.0], [d1, 0.0]])


def invert_qs1(c: Configuration) -> BoundaryParams:
    """Least-squares (a1, a2) for a collinear start; b1 = b2 = 0."""
    basis = FAMILIES[BoundaryFamily.qs1_qe1].start_basis
    (a1, a2), *_ = np.linalg.lstsq(basis[:, 0, :], c.positions[:, 0], rcond=None)
    return BoundaryParams(max(float(a1), 0.0), max(float(a2), 0.0), 0.0, 0.0)


@dataclass(frozen=True)
class FamilyMap:
    """Linear boundary family: start = start_basis @ p[:ns], end = end_basis @ p[ns:]."""

    name: BoundaryFamily
    start_names: tuple[str, ...]
    end_names: tuple[str, ...]
    start_basis: np.ndarray
    end_basis: np.ndarray
    lower: tuple[float, ...]

    @property
    def n_start(self) -> int:
        return len(self.start_names)

    @property
    def n_params(self) -> int:
        return len(self.start_names) + len(self.end_names)

    @property
    def names(self) -> tuple[str, ...]:
        return self.start_names + self.end_names

    def start(self, params: np.ndarray) -> np.ndarray:
        return self.start_basis @ np.asarray(params[: self.n_start], dtype=float)

    def end(self, params: np.ndarray) -> np.ndarray:
        return self.end_basis @ np.asarray(params[self.n_start :], dtype=float)

    def fit(self, start: np.ndarray, end: np.ndarray) -> np.ndarray:
        """Closest parameters (least squares) for given boundary nodes, clipped to bounds."""
        parts = []
        for basis, q in ((self.start_basis, start), (self.end_basis, end)):
            if basis.shape[-1] == 0:
                continue
            sol, *_ = np.linalg.lstsq(basis.reshape(6, -1), np.ravel(q), rcond=None)
            parts.append(sol)
        params = np.concatenate(parts) if parts else np.zeros(0)
        return np.maximum(params, np.array(self.lower))

    def describe(self, params: np.ndarray) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, params)}


def _basis(columns: Iterable[list[list[float]]]) -> np.ndarray:
    cols = [np.array(c, dtype=float) for c in columns]
    if not cols:
        return np.zeros((3, 2, 0))
    return np.stack(cols, axis=-1)


_QS1 = _basis([[[-2, 0], [1, 0], [1, 0]], [[-1, 0], [-1, 0], [2, 0]]])
_QE1 = _basis([[[0, -2], [0, 1], [0, 1]], [[0, 0], [-1, 0], [1, 0]]])
_QS3 = _basis([[[-2, 0], [1, 0], [1, 0]], [[0, 0], [0, 1], [0, -1]]])
_QS2 = _basis([[[-1, 0], [-1, 0], [2, 0]]])
_QE2 = _basis([[[0, 0], [-1, 0], [1, 0]]])
_NONE = _basis([])

_INF = float("-inf")

FAMILIES: dict[BoundaryFamily, FamilyMap] = {
    BoundaryFamily.fixed: FamilyMap(BoundaryFamily.fixed, (), (), _NONE, _NONE, ()),
    BoundaryFamily.qs1_qe1: FamilyMap(
        BoundaryFamily.qs1_qe1, ("a1", "a2"), ("b1", "b2"), _QS1, _QE1, (0.0, 0.0, _INF, _INF)
    ),
    BoundaryFamily.qs3_qe3: FamilyMap(
        BoundaryFamily.qs3_qe3, ("a1", "c1"), ("b1", "b2"), _QS3, _QE1, (_INF,) * 4
    ),
    BoundaryFamily.qs2_qe2: FamilyMap(
        BoundaryFamily.qs2_qe2, ("c1",), ("d1",), _QS2, _QE2, (_INF, _INF)
    ),
    BoundaryFamily.qs4_qe1: FamilyMap(
        BoundaryFamily.qs4_qe1, ("a2",), ("b1", "b2"), _QS2, _QE1, (0.0, _INF, _INF)
    ),
}
# endregion
