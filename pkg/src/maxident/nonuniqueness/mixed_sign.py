import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import settings
from ..distributions.univariate import cdf_eval, left_limit, quantile, tabulated
from ..exceptions import ConfigurationError, InvalidCandidateError
from ..identification.common import monotone_cdf, resolve_floor
from ..max_model.joint import joint_cdf_mixed
from ..models.reports import (
    AlternativeCandidate,
    CandidateValidity,
    EquivalenceReport,
    EquivalenceVerdict,
    ExplorationReport,
    RelationReport,
)
from ..models.specs import ComponentSystem, DistributionFamily, DistributionSpec, Regime, ScaleCoefficients

logger = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-10
_MONOTONE_SLACK = 1e-12
_TAIL_PROBABILITY = 1e-9
_BUILD_PROBABILITIES = (0.01, 0.99)


def _require_mixed(coeffs: ScaleCoefficients) -> None:
    if coeffs.regime != Regime.MIXED_SIGN:
        raise ConfigurationError("non-uniqueness analysis needs mixed-sign coefficients (a > 0, b < 0, c > 0, d < 0)")


def shock_factor(fz: DistributionSpec, t, k_pos: float, k_neg: float) -> np.ndarray:
    """F_Z(t/k_pos) (1 - F_Z((t/k_neg)-)), the shock part of a mixed-sign marginal"""
    t = np.asarray(t, dtype=float)
    return np.asarray(cdf_eval(fz, t / k_pos) * (1.0 - left_limit(fz, t / k_neg)), dtype=float)


def _relation_residual(f_a: np.ndarray, d_a: np.ndarray, f_b: np.ndarray, d_b: np.ndarray,
                       floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """|F^A - F^B D^B / D^A|, undefined where either shock factor is below the floor"""
    ok = (d_a >= floor) & (d_b >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        residual = np.abs(f_a - f_b * (d_b / d_a))
    return np.where(ok, residual, np.nan), ok


def _relation_report(nodes: np.ndarray, res_u: np.ndarray, ok_u: np.ndarray,
                     res_v: np.ndarray, ok_v: np.ndarray) -> RelationReport:
    both = np.fmax(res_u, res_v)
    defined = np.isfinite(both)
    max_residual = float(np.nanmax(both)) if defined.any() else 0.0
    witness = float(nodes[int(np.nanargmax(both))]) if defined.any() else None
    skipped = int((~ok_u).sum() + (~ok_v).sum())
    return RelationReport(
        nodes=nodes.tolist(),
        residual_u=[float(r) if np.isfinite(r) else None for r in res_u],
        residual_v=[float(r) if np.isfinite(r) else None for r in res_v],
        max_residual=max_residual,
        witness=witness,
        skipped_nodes=skipped,
    )


def necessary_relations_check(system_a: ComponentSystem, system_b: ComponentSystem, coeffs: ScaleCoefficients,
                              grid: Sequence[float], floor: Optional[float] = None) -> RelationReport:
    """Residuals of the connection relations between two mixed-sign systems.

    Equal joint CDFs force equal marginals of U and V, so
    F_X^A(t) D_A(t) = F_X^B(t) D_B(t) with D(t) = F_Z(t/a) (1 - F_Z((t/b)-)),
    and the same on the V side with c and d. Residuals are reported per node
    in the form |F_X^A - F_X^B D_B / D_A|.
    """
    _require_mixed(coeffs)
    if not system_a.support.matches(system_b.support):
        raise ConfigurationError(f"systems have different supports: {system_a.support} vs {system_b.support}")
    floor = resolve_floor(floor)
    a, b, c, d = coeffs.as_tuple()
    nodes = np.unique(np.asarray(grid, dtype=float))

    res_u, ok_u = _relation_residual(
        cdf_eval(system_a.fx, nodes), shock_factor(system_a.fz1, nodes, a, b),
        cdf_eval(system_b.fx, nodes), shock_factor(system_b.fz1, nodes, a, b), floor,
    )
    res_v, ok_v = _relation_residual(
        cdf_eval(system_a.fy, nodes), shock_factor(system_a.fz1, nodes, c, d),
        cdf_eval(system_b.fy, nodes), shock_factor(system_b.fz1, nodes, c, d), floor,
    )
    report = _relation_report(nodes, res_u, ok_u, res_v, ok_v)
    if report.skipped_nodes:
        logger.warning(f"Relation check skipped {report.skipped_nodes} node evaluations below the CDF floor")
    return report


def build_grid(system: ComponentSystem, count: int = None) -> np.ndarray:
    """Quantile-spaced nodes of the equal mixture of F_X and F_Y"""
    count = count or settings.equivalence_lattice_points
    pooled = DistributionSpec(family=DistributionFamily.MIXTURE, components=[system.fx, system.fy], weights=[0.5, 0.5])
    probs = np.linspace(_BUILD_PROBABILITIES[0], _BUILD_PROBABILITIES[1], count)
    return np.unique(np.atleast_1d(quantile(pooled, probs)))


def _tail_probes(system: ComponentSystem) -> np.ndarray:
    support = system.support
    pooled = [system.fx, system.fy]
    lower = support.lower if math.isfinite(support.lower) else min(quantile(s, _TAIL_PROBABILITY) for s in pooled)
    upper = support.upper if math.isfinite(support.upper) else max(quantile(s, 1.0 - _TAIL_PROBABILITY) for s in pooled)
    return np.array([lower, upper], dtype=float)


def _candidate_side(f: DistributionSpec, fz: DistributionSpec, s1: DistributionSpec, t: np.ndarray,
                    k_pos: float, k_neg: float, floor: float):
    d_z = shock_factor(fz, t, k_pos, k_neg)
    d_s = shock_factor(s1, t, k_pos, k_neg)
    fx = np.asarray(cdf_eval(f, t), dtype=float)
    ok = d_s >= floor
    with np.errstate(divide="ignore", invalid="ignore"):
        values = fx * (d_z / d_s)
    return values, ok, fx, d_z, d_s


def _first_invalid(nodes: np.ndarray, values: np.ndarray, tails: np.ndarray, tail_values: np.ndarray,
                   label: str) -> Optional[Tuple[float, str]]:
    """First node where tabulated values fail to be a CDF, with the reason"""
    above = values > 1.0 + _MONOTONE_SLACK
    if above.any():
        k = int(np.argmax(above))
        return float(nodes[k]), f"F_{label} = {values[k]:.6g} exceeds 1"
    below = values < 0.0
    if below.any():
        k = int(np.argmax(below))
        return float(nodes[k]), f"F_{label} = {values[k]:.6g} is negative"
    falls = np.diff(values) < -_MONOTONE_SLACK
    if falls.any():
        k = int(np.argmax(falls))
        return float(nodes[k + 1]), f"F_{label} decreases from {values[k]:.6g} to {values[k + 1]:.6g}"
    # tail probes stand in for the limits at the support boundary
    lo, hi = tail_values
    if np.isfinite(lo) and lo > values[0] + _MONOTONE_SLACK:
        return float(tails[0]), f"F_{label} does not tend to 0 at the lower boundary ({lo:.6g})"
    if np.isfinite(hi) and (hi < values[-1] - _MONOTONE_SLACK or hi > 1.0 + _MONOTONE_SLACK):
        return float(tails[1]), f"F_{label} does not tend to 1 at the upper boundary ({hi:.6g})"
    return None


def construct_alternative(system: ComponentSystem, coeffs: ScaleCoefficients, s1: DistributionSpec,
                          grid: Optional[Sequence[float]] = None, floor: Optional[float] = None,
                          tol: float = EQUIVALENCE_TOL) -> AlternativeCandidate:
    """Build the alternative system (M, N, S1) forced by the connection relations.

    F_M(t) = F_X(t) D_Z(t) / D_S(t) with D(t) = F(t/a) (1 - F((t/b)-)), and F_N
    symmetrically with c and d, tabulated on the build grid with the original
    support. Candidates that are genuine CDFs are compared with the original
    system on the build-grid lattice; invalid ones keep a witness node and their
    monotone projection.
    """
    _require_mixed(coeffs)
    if not s1.support.matches(system.support):
        raise ConfigurationError(f"candidate shock support {s1.support} differs from the system support {system.support}")
    floor = resolve_floor(floor)
    a, b, c, d = coeffs.as_tuple()
    nodes = build_grid(system) if grid is None else np.unique(np.asarray(grid, dtype=float))

    m_vals, m_ok, fx, dz_u, ds_u = _candidate_side(system.fx, system.fz1, s1, nodes, a, b, floor)
    n_vals, n_ok, fy, dz_v, ds_v = _candidate_side(system.fy, system.fz1, s1, nodes, c, d, floor)
    keep = m_ok & n_ok
    if keep.sum() < 2:
        raise InvalidCandidateError("candidate shock factor is below the CDF floor on all but one build node")
    if not keep.all():
        logger.warning(f"Candidate build dropped {int((~keep).sum())} nodes where the candidate shock factor is below the floor")
    t = nodes[keep]
    m_vals, n_vals = m_vals[keep], n_vals[keep]

    tails = _tail_probes(system)
    m_tail, m_tail_ok, *_ = _candidate_side(system.fx, system.fz1, s1, tails, a, b, floor)
    n_tail, n_tail_ok, *_ = _candidate_side(system.fy, system.fz1, s1, tails, c, d, floor)
    m_tail = np.where(m_tail_ok, m_tail, np.nan)
    n_tail = np.where(n_tail_ok, n_tail, np.nan)

    res_u, ok_u = _relation_residual(fx[keep], dz_u[keep], m_vals, ds_u[keep], floor)
    res_v, ok_v = _relation_residual(fy[keep], dz_v[keep], n_vals, ds_v[keep], floor)
    relations = _relation_report(t, res_u, ok_u, res_v, ok_v)

    problem = _first_invalid(t, m_vals, tails, m_tail, "M") or _first_invalid(t, n_vals, tails, n_tail, "N")
    support = system.support
    is_identity = s1.model_dump() == system.fz1.model_dump()
    if problem is None:
        fm = tabulated(t, np.clip(np.maximum.accumulate(m_vals), 0.0, 1.0), support=support)
        fn_ = tabulated(t, np.clip(np.maximum.accumulate(n_vals), 0.0, 1.0), support=support)
        candidate = AlternativeCandidate(
            fm=fm, fn_=fn_, fs1=s1, build_grid=t.tolist(), validity=CandidateValidity.VALID_CDFS,
            relations=relations, is_identity=is_identity,
        )
        candidate.equivalence = verify_equal_joint(system, candidate, coeffs, tol=tol)
        logger.info(f"Candidate built on {t.size} nodes: {candidate.equivalence.verdict.value}, "
                    f"max deviation {candidate.equivalence.max_deviation:.3e}")
        return candidate

    node, reason = problem
    logger.info(f"Candidate is not a valid system: {reason} at t = {node:g}")
    return AlternativeCandidate(
        fm=tabulated(t, monotone_cdf(m_vals), support=support),
        fn_=tabulated(t, monotone_cdf(n_vals), support=support),
        fs1=s1,
        build_grid=t.tolist(),
        validity=CandidateValidity.INVALID_WITH_WITNESS,
        invalid_node=node,
        invalid_reason=reason,
        relations=relations,
        is_identity=is_identity,
    )


def candidate_system(candidate: AlternativeCandidate) -> ComponentSystem:
    """The component system (M, N, S1) of a valid candidate"""
    if candidate.validity != CandidateValidity.VALID_CDFS:
        raise InvalidCandidateError(
            f"candidate is invalid at t = {candidate.invalid_node}: {candidate.invalid_reason}"
        )
    return ComponentSystem(fx=candidate.fm, fy=candidate.fn_, fz1=candidate.fs1)


def joint_deviation(system_a: ComponentSystem, system_b: ComponentSystem, coeffs: ScaleCoefficients,
                    lattice: Sequence[float], tol: float = EQUIVALENCE_TOL) -> EquivalenceReport:
    """Max |G_A - G_B| over lattice x lattice with the argmax pair as witness.

    Equality is only established on the lattice; systems that differ outside
    its range are reported equivalent.
    """
    _require_mixed(coeffs)
    nodes = np.unique(np.asarray(lattice, dtype=float))
    t1, t2 = nodes[:, None], nodes[None, :]
    gap = np.abs(np.asarray(joint_cdf_mixed(system_a, coeffs, t1, t2)) - np.asarray(joint_cdf_mixed(system_b, coeffs, t1, t2)))
    i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
    max_dev = float(gap[i, j])
    verdict = EquivalenceVerdict.EQUIVALENT if max_dev <= tol else EquivalenceVerdict.NOT_EQUIVALENT
    return EquivalenceReport(
        verdict=verdict,
        max_deviation=max_dev,
        witness=None if max_dev == 0.0 else [float(nodes[i]), float(nodes[j])],
        lattice_size=int(nodes.size),
        lattice_range=[float(nodes[0]), float(nodes[-1])],
        tolerance=tol,
        lattice_limited=True,
    )


def verify_equal_joint(system_a: ComponentSystem, candidate: AlternativeCandidate, coeffs: ScaleCoefficients,
                       lattice: Optional[Sequence[float]] = None, tol: float = EQUIVALENCE_TOL) -> EquivalenceReport:
    """Compare the joint CDF of a valid candidate with the original, by default on its build grid"""
    system_b = candidate_system(candidate)
    nodes = candidate.build_grid if lattice is None else lattice
    return joint_deviation(system_a, system_b, coeffs, nodes, tol)


def explore_candidates(system: ComponentSystem, coeffs: ScaleCoefficients, candidates: Sequence[DistributionSpec],
                       grid: Optional[Sequence[float]] = None, tol: float = EQUIVALENCE_TOL) -> ExplorationReport:
    """Build and test every candidate shock; results keep the input order"""
    _require_mixed(coeffs)
    start_time = time.time()
    nodes = build_grid(system) if grid is None else grid

    def build(s1: DistributionSpec) -> AlternativeCandidate:
        return construct_alternative(system, coeffs, s1, nodes, tol=tol)

    with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
        results: List[AlternativeCandidate] = list(pool.map(build, candidates))

    valid = [r for r in results if r.validity == CandidateValidity.VALID_CDFS]
    equivalent = [r for r in valid if r.equivalence and r.equivalence.verdict == EquivalenceVerdict.EQUIVALENT]
    non_identity = any(not r.is_identity for r in equivalent)
    summary = (f"{len(results)} candidates, {len(valid)} valid, {len(equivalent)} equivalent on the lattice"
               f"{' (including a non-identity shock)' if non_identity else ''}")
    elapsed_ms = int((time.time() - start_time) * 1000)
    logger.info(f"Candidate sweep finished in {elapsed_ms}ms: {summary}")
    return ExplorationReport(
        candidates=results,
        valid_count=len(valid),
        equivalent_count=len(equivalent),
        non_identity_equivalent=non_identity,
        summary=summary,
    )
