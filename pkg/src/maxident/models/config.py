from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from .specs import ComponentSystem, DependenceMode, GridSolverConfig, GridSpec, Regime, ScaleCoefficients


class RunStatus(str, Enum):
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"


class RecoveryMethod(str, Enum):
    AUTO = "auto"
    KOTLARSKI = "kotlarski"
    REGION_QUOTIENT = "region_quotient"
    GRID_SOLVER = "grid_solver"


class RecoverySettings(BaseModel):
    """Choice of recovery method for the recover command"""
    method: RecoveryMethod = Field(RecoveryMethod.AUTO, description="Recovery method; auto picks from the system")
    kotlarski_collapse: bool = Field(
        False, description="Treat the system as the single-shock model X0 = Z1, X1 = X, X2 = Y"
    )
    bandwidth: Optional[float] = Field(None, gt=0, description="Gaussian smoothing bandwidth for sample input")


class RunConfig(BaseModel):
    """A complete experiment: component system, coefficients, grid and solver settings"""
    system: ComponentSystem = Field(..., description="Component distributions and dependence")
    coefficients: ScaleCoefficients = Field(..., description="Known coefficients a, b, c, d")
    grid: GridSpec = Field(..., description="Evaluation grid; quantile spacing refers to the fz1 distribution")
    solver: GridSolverConfig = Field(default_factory=GridSolverConfig, description="Grid solver settings")
    seed: int = Field(0, ge=0, description="Seed of the counter-based random streams")
    sample_size: int = Field(1000, ge=1, description="Number of simulated pairs")
    recovery: RecoverySettings = Field(default_factory=RecoverySettings, description="Recovery method selection")
    diagnostics_threshold: Optional[float] = Field(
        None, gt=0, description="Residual threshold for the diagnose command; settings default when omitted"
    )

    class Config:
        json_schema_extra = {
            "example": {
                "system": {
                    "fx": {"family": "exponential", "rate": 1.0},
                    "fy": {"family": "exponential", "rate": 1.0},
                    "fz1": {"family": "exponential", "rate": 1.0},
                },
                "coefficients": {"a": 1.0, "b": 3.0, "c": 2.0, "d": 1.0, "regime": "all_positive"},
                "grid": {"count": 40, "lower": 0.02, "upper": 0.98, "spacing": "quantile"},
                "seed": 1,
                "sample_size": 200000,
            }
        }

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        if self.system.dependence.mode == DependenceMode.MAX_INDEPENDENT and self.coefficients.regime != Regime.ALL_POSITIVE:
            raise ValueError("max-independent systems need all-positive coefficients")
        if self.recovery.kotlarski_collapse and self.system.dependence.mode != DependenceMode.INDEPENDENT:
            raise ValueError("kotlarski_collapse needs independent components")
        return self
