import json
import os
from typing import Any

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from core import settings
from core.orbits.dynamics import Trajectory
from core.orbits.jacobi import jacobi_nodes
from core.orbits.model import DiscretePath, PhaseState, recentre
from core.orbits.symmetry import PeriodicOrbit
from core.utils.exceptions import FileFormatError, PreconditionError
from core.utils.types import ExtensionMode, TrajectoryFile

log = settings.get_logger("fileio")

CSV_COLUMNS = ["t", "q1x", "q1y", "q2x", "q2y", "q3x", "q3y"]
CSV_VELOCITY_COLUMNS = ["v1x", "v1y", "v2x", "v2y", "v3x", "v3y"]
JACOBI_COLUMNS = ["t", "Z1x", "Z1y", "Z2x", "Z2y", "dtheta"]


def read_trajectory(path: str) -> TrajectoryFile:
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path} is not valid JSON: {e}") from e
    try:
        return TrajectoryFile.model_validate(raw)
    except PydanticValidationError as e:
        raise FileFormatError(f"{path} is not a trajectory file: {e}") from e


def write_trajectory(data: TrajectoryFile, path: str) -> str:
    # json writes floats with repr, which round-trips exactly
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data.model_dump(mode="json"), f)
    log.info(f"wrote {len(data.times)} samples to {path}")
    return path


# region conversions
def from_path(p: DiscretePath, metadata: dict[str, Any] | None = None) -> TrajectoryFile:
    return TrajectoryFile(
        times=p.times.tolist(),
        positions=p.nodes.tolist(),
        metadata={"producer": "minimize", **(metadata or {})},
    )


def from_trajectory(tr: Trajectory, metadata: dict[str, Any] | None = None) -> TrajectoryFile:
    return TrajectoryFile(
        times=tr.times.tolist(),
        positions=tr.positions.tolist(),
        velocities=tr.velocities.tolist(),
        metadata={
            "producer": "integrate",
            "status": tr.status,
            "tol": tr.tol,
            "energy_drift": tr.energy_drift(),
            **(metadata or {}),
        },
    )


def from_orbit(o: PeriodicOrbit, metadata: dict[str, Any] | None = None) -> TrajectoryFile:
    return TrajectoryFile(
        times=o.times.tolist(),
        positions=o.positions.tolist(),
        velocities=o.velocities.tolist(),
        metadata={
            "producer": "extend",
            "provenance": o.provenance.value,
            "tolerance": o.tolerance,
            **(metadata or {}),
        },
    )


def to_path(data: TrajectoryFile) -> DiscretePath:
    times = np.asarray(data.times, dtype=float)
    if times.size < 3 or times[0] != 0.0 or times[-1] != 1.0:
        raise PreconditionError("A path file must be sampled on [0, 1] with at least 3 samples.")
    return DiscretePath(times, recentre(np.asarray(data.positions, dtype=float)))


def to_state(data: TrajectoryFile, index: int = 0) -> PhaseState:
    if data.velocities is None:
        raise PreconditionError("A phase state needs velocities.")
    return PhaseState.balanced(data.positions[index], data.velocities[index], data.times[index])


def to_orbit(data: TrajectoryFile) -> PeriodicOrbit:
    if data.velocities is None:
        raise PreconditionError("A periodic orbit file needs velocities.")
    provenance = data.metadata.get("provenance", ExtensionMode.henon.value)
    return PeriodicOrbit(
        times=np.asarray(data.times, dtype=float),
        positions=np.asarray(data.positions, dtype=float),
        velocities=np.asarray(data.velocities, dtype=float),
        provenance=ExtensionMode(provenance),
        tolerance=float(data.metadata.get("tolerance", settings.JUNCTION_TOL)),
    )


# endregion


# region csv
def export_csv(data: TrajectoryFile, path: str, velocities: bool = True) -> int:
    times = np.asarray(data.times, dtype=float)
    columns = [times[:, None], np.asarray(data.positions, dtype=float).reshape(times.size, 6)]
    header = list(CSV_COLUMNS)
    if velocities and data.velocities is not None:
        columns.append(np.asarray(data.velocities, dtype=float).reshape(times.size, 6))
        header += CSV_VELOCITY_COLUMNS
    table = np.hstack(columns)
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    return table.shape[0]


def jacobi_table(data: TrajectoryFile) -> np.ndarray:
    times = np.asarray(data.times, dtype=float)
    z1, z2 = jacobi_nodes(np.asarray(data.positions, dtype=float))
    r1, r2 = np.linalg.norm(z1, axis=1), np.linalg.norm(z2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_beta = np.clip(np.sum(z1 * z2, axis=1) / (r1 * r2), -1.0, 1.0)
    beta = np.arccos(cos_beta)
    # acute angle between the lines; undefined where a vector vanishes
    dtheta = np.where((r1 > 0) & (r2 > 0), np.minimum(beta, np.pi - beta), np.nan)
    return np.column_stack([times, z1, z2, dtheta])


def export_jacobi_csv(data: TrajectoryFile, path: str) -> int:
    table = jacobi_table(data)
    np.savetxt(path, table, delimiter=",", header=",".join(JACOBI_COLUMNS), comments="", fmt="%.17g")
    return table.shape[0]


# endregion
