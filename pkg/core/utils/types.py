import enum
from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator

from core import settings


class BoundaryFamily(str, enum.Enum):
    fixed = "fixed"
    qs1_qe1 = "qs1_qe1"
    qs3_qe3 = "qs3_qe3"
    qs2_qe2 = "qs2_qe2"
    qs4_qe1 = "qs4_qe1"

    @classmethod
    def parse(cls, value: "str | BoundaryFamily") -> "BoundaryFamily":
        # the command line spells families with dashes
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


class SeedKind(str, enum.Enum):
    collinear_testpath = "collinear_testpath"
    lagrange_quarter = "lagrange_quarter"
    from_file = "from_file"

    @classmethod
    def parse(cls, value: "str | SeedKind") -> "SeedKind":
        aliases = {"testpath": cls.collinear_testpath, "lagrange": cls.lagrange_quarter, "file": cls.from_file}
        if isinstance(value, cls):
            return value
        return aliases.get(str(value), None) or cls(str(value))


class ExtensionMode(str, enum.Enum):
    henon = "henon"
    antisymmetric = "antisymmetric"


class MinimizeConfig(BaseModel):
    grid: int = Field(default=256, ge=16)
    grading: float = Field(default=1.0, ge=1.0)
    family: BoundaryFamily = BoundaryFamily.qs1_qe1
    seed: SeedKind = SeedKind.collinear_testpath
    seed_path: Optional[str] = None

    max_iterations: int = Field(default=settings.MAX_ITERATIONS, ge=1)
    gradient_tol: float = Field(default=settings.GRADIENT_TOL, gt=0)
    action_rtol: float = Field(default=settings.ACTION_RTOL, gt=0)
    stall_window: int = Field(default=settings.STALL_WINDOW, ge=1)
    memory: int = Field(default=settings.LBFGS_MEMORY, ge=1)
    max_step: float = Field(default=0.05, gt=0)
    max_backtracks: int = Field(default=settings.MAX_BACKTRACKS, ge=1)
    levels: int = Field(default=1, ge=1)

    r_floor: float = Field(default=settings.R_FLOOR, gt=0)
    gauss_points: int = Field(default=settings.GAUSS_POINTS, ge=1)
    log_every: int = Field(default=500, ge=1)

    model_config = {"from_attributes": True}

    @model_validator(mode="before")
    @classmethod
    def normalize_names(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            if data.get("family") is not None:
                data["family"] = BoundaryFamily.parse(data["family"])
            if data.get("seed") is not None:
                data["seed"] = SeedKind.parse(data["seed"])
        return data

    @model_validator(mode="after")
    def check_seed_path(self) -> "MinimizeConfig":
        if self.seed == SeedKind.from_file and not self.seed_path:
            raise ValueError("seed 'from_file' needs a seed_path.")
        return self


class TrajectoryFile(BaseModel):
    masses: list[float] = [1.0, 1.0, 1.0]
    times: list[float]
    positions: list[list[list[float]]]
    velocities: Optional[list[list[list[float]]]] = None
    metadata: dict[str, Any] = {}

    @model_validator(mode="after")
    def check_shapes(self) -> "TrajectoryFile":
        if self.masses != [1.0, 1.0, 1.0]:
            raise ValueError("Only unit masses are supported.")
        if len(self.positions) != len(self.times):
            raise ValueError(
                f"{len(self.positions)} position frames for {len(self.times)} times."
            )
        if self.velocities is not None and len(self.velocities) != len(self.times):
            raise ValueError(
                f"{len(self.velocities)} velocity frames for {len(self.times)} times."
            )
        for frames in filter(None, (self.positions, self.velocities)):
            for frame in frames:
                if len(frame) != 3 or any(len(body) != 2 for body in frame):
                    raise ValueError("Every frame must hold 3 planar vectors.")
        return self
