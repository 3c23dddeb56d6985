from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from .specs import DistributionSpec


class TabulatedFunction(BaseModel):
    """A function tabulated on nodes; None marks nodes skipped below the CDF floor"""
    nodes: List[float] = Field(default_factory=list, description="Grid nodes")
    values: List[Optional[float]] = Field(default_factory=list, description="Function values, None where undefined")


class SolverReport(BaseModel):
    """Convergence record of the multistart grid solver"""
    starts: int = Field(..., description="Number of multistart initializations")
    best_start: int = Field(..., description="Index of the selected start")
    iterations: List[int] = Field(default_factory=list, description="Iterations used by each start")
    start_objectives: List[float] = Field(default_factory=list, description="Final objective of each start")
    objective_trace: List[float] = Field(default_factory=list, description="Objective trace of the selected start")
    agreement: float = Field(..., description="Largest deviation between any start and the selected one")
    agreed: bool = Field(..., description="All starts agree within the agreement tolerance")
    parameter_nodes: int = Field(0, description="Number of unknown F_Z1 nodes")
    undetermined_nodes: int = Field(0, description="Nodes not pinned by any probe")
    probes_used: int = Field(0, description="Probe pairs entering the objective")
    skipped_probes: int = Field(0, description="Probe pairs dropped below the CDF floor")
    outer_iterations: Optional[int] = Field(None, description="Generator fixed-point passes (max-independent recovery)")

    class Config:
        json_schema_extra = {
            "example": {
                "starts": 5,
                "best_start": 0,
                "iterations": [12, 14, 13, 15, 19],
                "start_objectives": [1e-30, 2e-30, 1e-30, 3e-30, 1e-29],
                "objective_trace": [0.31, 1e-5, 1e-30],
                "agreement": 2e-12,
                "agreed": True,
            }
        }


class RecoveryResult(BaseModel):
    """Recovered component CDFs with residual diagnostics"""
    method: str = Field(..., description="Recovery method used")
    grid: List[float] = Field(default_factory=list, description="Evaluation grid")
    fx_hat: DistributionSpec = Field(..., description="Recovered CDF of X (tabulated)")
    fy_hat: DistributionSpec = Field(..., description="Recovered CDF of Y (tabulated)")
    fz1_hat: DistributionSpec = Field(..., description="Recovered CDF of Z1 (tabulated)")
    sup_residual: float = Field(..., description="Max |G_model - G_input| over the grid, recomputed after solving")
    skipped_nodes: List[float] = Field(default_factory=list, description="Grid nodes skipped below the CDF floor")
    solver_report: Optional[SolverReport] = Field(None, description="Grid solver convergence record")
    ambiguous: bool = Field(False, description="Multistarts disagree; uniqueness not confirmed numerically")
    notes: List[str] = Field(default_factory=list, description="Hypothesis warnings and remarks")
    truth_errors: Optional[Dict[str, float]] = Field(None, description="Sup errors against known components, when available")

    class Config:
        json_schema_extra = {
            "example": {
                "method": "kotlarski",
                "grid": [0.5, 1.0, 2.0],
                "fx_hat": {"family": "tabulated", "nodes": [0.5, 1.0, 2.0], "values": [0.39, 0.63, 0.86]},
                "fy_hat": {"family": "tabulated", "nodes": [0.5, 1.0, 2.0], "values": [0.39, 0.63, 0.86]},
                "fz1_hat": {"family": "tabulated", "nodes": [0.5, 1.0, 2.0], "values": [0.39, 0.63, 0.86]},
                "sup_residual": 1e-16,
            }
        }


class RatioDiagnostics(BaseModel):
    """Ratio functions between two component systems and the residuals of their identities"""
    eta1: TabulatedFunction = Field(..., description="U-side ratio F_X^A / F_X^B")
    eta2: TabulatedFunction = Field(..., description="V-side ratio F_Y^A / F_Y^B")
    eta3: TabulatedFunction = Field(..., description="Shock ratio F_Z1^A / F_Z1^B")
    zeta: TabulatedFunction = Field(..., description="log eta3")
    lam: float = Field(..., description="Ratio a/b")
    probe_t1: List[float] = Field(default_factory=list, description="First coordinate of each probe pair")
    probe_t2: List[float] = Field(default_factory=list, description="Second coordinate of each probe pair")
    residual_product: List[Optional[float]] = Field(default_factory=list, description="Product-identity residual per probe pair")
    antiperiodic_nodes: List[float] = Field(default_factory=list, description="Nodes u where zeta(u) and zeta(lam u) are defined")
    residual_antiperiodic: List[float] = Field(default_factory=list, description="|zeta(u) + zeta(lam u)| per node")
    max_residual_product: float = Field(0.0, description="Largest product-identity residual")
    witness_product: Optional[List[float]] = Field(None, description="Probe pair attaining the largest residual")
    max_residual_antiperiodic: float = Field(0.0, description="Largest antiperiodic residual")
    skipped_nodes: int = Field(0, description="Nodes or probes skipped below the CDF floor")


class AntiperiodicStatus(str, Enum):
    VANISHES = "vanishes"
    INCONCLUSIVE = "inconclusive"
    VIOLATED = "violated"


class AntiperiodicVerdict(BaseModel):
    """Outcome of the antiperiodic vanishing check"""
    status: AntiperiodicStatus = Field(..., description="vanishes, inconclusive or violated")
    witness: Optional[float] = Field(None, description="Node u where the relation fails")
    max_relation_residual: float = Field(0.0, description="Largest |zeta(u) + zeta(lam u)| on the grid")
    max_abs_zeta: float = Field(0.0, description="Largest |zeta| on the grid")
    reason: str = Field("", description="Explanation of the verdict")


class GeneratorValidationReport(BaseModel):
    """Lattice validation of a max-independence generator"""
    family: str = Field(..., description="Generator family")
    passed: bool = Field(..., description="All checks passed")
    lattice_points: int = Field(..., description="Lattice points per axis")
    beta_min: float = Field(..., description="Smallest beta on the lattice")
    beta_max: float = Field(..., description="Largest beta on the lattice")
    range_ok: bool = Field(..., description="beta lies in (0, 1] on the lattice")
    range_witness: Optional[List[float]] = Field(None, description="Lattice corner violating the range")
    boundary_ok: bool = Field(..., description="beta tends to 1 when any coordinate goes to +inf")
    boundary_max_deviation: float = Field(..., description="Largest |beta - 1| at boundary probes")
    rectangle_ok: bool = Field(..., description="All lattice rectangle sums are nonnegative")
    rectangle_min: float = Field(..., description="Smallest rectangle alternating sum")
    rectangle_witness: Optional[List[float]] = Field(None, description="Lower corner of the worst rectangle")
    failures: List[str] = Field(default_factory=list, description="Failed checks")

    class Config:
        json_schema_extra = {
            "example": {
                "family": "fgm",
                "passed": False,
                "lattice_points": 7,
                "beta_min": -0.5,
                "beta_max": 1.0,
                "range_ok": False,
                "range_witness": [0.0, 0.0, 0.0, 0.0],
                "boundary_ok": True,
                "boundary_max_deviation": 0.0,
                "rectangle_ok": False,
                "rectangle_min": -0.0004,
                "failures": ["beta outside (0, 1]", "rectangle inequality"],
            }
        }


class RelationReport(BaseModel):
    """Residuals of the mixed-sign connection relations between two systems"""
    nodes: List[float] = Field(default_factory=list, description="Grid nodes")
    residual_u: List[Optional[float]] = Field(default_factory=list, description="U-side relation residual per node")
    residual_v: List[Optional[float]] = Field(default_factory=list, description="V-side relation residual per node")
    max_residual: float = Field(0.0, description="Largest residual over both relations")
    witness: Optional[float] = Field(None, description="Node attaining the largest residual")
    skipped_nodes: int = Field(0, description="Nodes skipped below the CDF floor")


class EquivalenceVerdict(str, Enum):
    EQUIVALENT = "equivalent"
    NOT_EQUIVALENT = "not_equivalent"


class EquivalenceReport(BaseModel):
    """Joint-CDF comparison of two systems on a finite lattice"""
    verdict: EquivalenceVerdict = Field(..., description="equivalent or not_equivalent")
    max_deviation: float = Field(..., description="Largest |G_A - G_B| on the lattice")
    witness: Optional[List[float]] = Field(None, description="Lattice pair attaining the deviation")
    lattice_size: int = Field(..., description="Nodes per lattice axis")
    lattice_range: List[float] = Field(default_factory=list, description="Smallest and largest lattice node")
    tolerance: float = Field(..., description="Equivalence tolerance")
    lattice_limited: bool = Field(True, description="Equality is only established on the lattice")


class CandidateValidity(str, Enum):
    VALID_CDFS = "valid_cdfs"
    INVALID_WITH_WITNESS = "invalid_with_witness"


class AlternativeCandidate(BaseModel):
    """An alternative system (M, N, S1) built from the mixed-sign connection relations"""
    fm: DistributionSpec = Field(..., description="Candidate CDF of M (tabulated)")
    fn_: DistributionSpec = Field(..., description="Candidate CDF of N (tabulated)")
    fs1: DistributionSpec = Field(..., description="Candidate shock distribution S1")
    build_grid: List[float] = Field(default_factory=list, description="Nodes the candidate was built on")
    validity: CandidateValidity = Field(..., description="Whether fm and fn_ are genuine CDFs")
    invalid_node: Optional[float] = Field(None, description="Witness node of an invalid candidate")
    invalid_reason: Optional[str] = Field(None, description="Why the candidate is invalid")
    relations: Optional[RelationReport] = Field(None, description="Connection-relation residuals on the build grid")
    equivalence: Optional[EquivalenceReport] = Field(None, description="Joint-CDF equivalence on the lattice")
    is_identity: bool = Field(False, description="The candidate shock equals the original shock distribution")


class ExplorationReport(BaseModel):
    """Candidate sweep over alternative shock distributions"""
    candidates: List[AlternativeCandidate] = Field(default_factory=list, description="Per-candidate results")
    valid_count: int = Field(0, description="Candidates giving genuine CDFs")
    equivalent_count: int = Field(0, description="Candidates equivalent on the lattice")
    non_identity_equivalent: bool = Field(False, description="Some shock other than the original achieved lattice equivalence")
    summary: str = Field("", description="One-line summary")
