import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from ..distributions.univariate import cdf_eval, left_limit
from ..exceptions import ConfigurationError
from ..max_independence.generator import beta_eval
from ..max_model.joint import shock_arguments
from ..models.reports import AntiperiodicStatus, AntiperiodicVerdict, RatioDiagnostics, TabulatedFunction
from ..models.specs import ComponentSystem, Regime, ScaleCoefficients
from .common import NodeIndex, resolve_floor

logger = logging.getLogger(__name__)

_CLOSURE_RTOL = 1e-9


def geometric_grid(start: float, ratio: float, count: int) -> List[float]:
    """Nodes start * ratio**k, k = 0..count-1; closed under multiplication by ratio"""
    if start <= 0 or ratio <= 0 or count < 1:
        raise ConfigurationError("geometric grid needs start > 0, ratio > 0 and count >= 1")
    return [start * ratio ** k for k in range(count)]


def _factors(system: ComponentSystem, coeffs: ScaleCoefficients, t1: np.ndarray, t2: np.ndarray):
    """The four CDF factors of G and the generator factor, evaluated separately"""
    fx = cdf_eval(system.fx, t1)
    fy = cdf_eval(system.fy, t2)
    if coeffs.regime == Regime.MIXED_SIGN:
        m1 = np.minimum(t1 / coeffs.a, t2 / coeffs.c)
        shock1 = cdf_eval(system.fz1, m1)
        shock2 = 1.0 - left_limit(system.fz1, np.maximum(t1 / coeffs.b, t2 / coeffs.d))
        beta = np.ones(np.shape(t1))
    else:
        m1, m2 = shock_arguments(coeffs, t1, t2)
        shock1 = cdf_eval(system.fz1, m1)
        shock2 = cdf_eval(system.fz1, m2)
        gen = system.generator
        beta = np.ones(np.shape(t1)) if gen is None else beta_eval(gen, system.marginals, t1, t2, m1, m2)
    return [np.asarray(f, dtype=float) for f in (fx, fy, shock1, shock2, beta)]


def _ratio_table(nodes: np.ndarray, num: np.ndarray, den: np.ndarray, floor: float):
    ok = (num >= floor) & (den >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ok, num / den, np.nan)
    return ratio, ok


def _to_table(nodes: np.ndarray, values: np.ndarray) -> TabulatedFunction:
    return TabulatedFunction(
        nodes=nodes.tolist(),
        values=[float(v) if np.isfinite(v) else None for v in values],
    )


def ratio_diagnostics(system_a: ComponentSystem, system_b: ComponentSystem, coeffs: ScaleCoefficients,
                      grid: Sequence[float], floor: Optional[float] = None) -> RatioDiagnostics:
    """Ratios eta1 = F_X^A/F_X^B, eta2 = F_Y^A/F_Y^B, eta3 = F_Z1^A/F_Z1^B and the residuals of their identities.

    residual_product at a probe pair is |eta1(t1) eta2(t2) eta3(m1) eta3(m2) beta_A/beta_B - 1|,
    which vanishes exactly when the two joint CDFs agree there. In the mixed
    regime the second shock ratio is the ratio of survival factors.
    residual_antiperiodic at u is |zeta(u) + zeta(lam u)| with zeta = log eta3,
    evaluated directly from the CDFs.
    """
    if not system_a.support.matches(system_b.support):
        raise ConfigurationError(f"systems have different supports: {system_a.support} vs {system_b.support}")
    floor = resolve_floor(floor)
    nodes = np.unique(np.asarray(grid, dtype=float))

    eta1, _ = _ratio_table(nodes, cdf_eval(system_a.fx, nodes), cdf_eval(system_b.fx, nodes), floor)
    eta2, _ = _ratio_table(nodes, cdf_eval(system_a.fy, nodes), cdf_eval(system_b.fy, nodes), floor)
    eta3, _ = _ratio_table(nodes, cdf_eval(system_a.fz1, nodes), cdf_eval(system_b.fz1, nodes), floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        zeta = np.log(eta3)

    t1 = np.repeat(nodes, nodes.size)
    t2 = np.tile(nodes, nodes.size)
    fa = _factors(system_a, coeffs, t1, t2)
    fb = _factors(system_b, coeffs, t1, t2)
    ok = np.ones(t1.size, dtype=bool)
    product = np.ones(t1.size)
    for num, den in zip(fa, fb):
        ok &= (num >= floor) & (den >= floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            product = product * (num / den)
    residual = np.where(ok, np.abs(product - 1.0), np.nan)

    lam = coeffs.lam
    scaled = lam * nodes
    z_num = cdf_eval(system_a.fz1, nodes)
    z_den = cdf_eval(system_b.fz1, nodes)
    s_num = cdf_eval(system_a.fz1, scaled)
    s_den = cdf_eval(system_b.fz1, scaled)
    anti_ok = (z_num >= floor) & (z_den >= floor) & (s_num >= floor) & (s_den >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        anti = np.abs(np.log(z_num / z_den) + np.log(s_num / s_den))
    anti_nodes = nodes[anti_ok]
    anti = anti[anti_ok]

    skipped = int((~ok).sum())
    if skipped:
        logger.warning(f"Ratio diagnostics skipped {skipped} probe pairs below the CDF floor")

    max_residual = float(np.nanmax(residual)) if ok.any() else 0.0
    witness = None
    if ok.any():
        k = int(np.nanargmax(residual))
        witness = [float(t1[k]), float(t2[k])]

    return RatioDiagnostics(
        eta1=_to_table(nodes, eta1),
        eta2=_to_table(nodes, eta2),
        eta3=_to_table(nodes, eta3),
        zeta=_to_table(nodes, zeta),
        lam=lam,
        probe_t1=t1.tolist(),
        probe_t2=t2.tolist(),
        residual_product=[float(r) if np.isfinite(r) else None for r in residual],
        antiperiodic_nodes=anti_nodes.tolist(),
        residual_antiperiodic=anti.tolist(),
        max_residual_product=max_residual,
        witness_product=witness,
        max_residual_antiperiodic=float(anti.max()) if anti.size else 0.0,
        skipped_nodes=skipped,
    )


def antiperiodic_vanishing_check(zeta: TabulatedFunction, lam: float, boundary_decay: bool,
                                 tol: float = 1e-10) -> AntiperiodicVerdict:
    """Decide whether zeta with zeta(u) = -zeta(lam u) must vanish on the grid.

    The relation is checked on every node whose image under lam is a node.
    It gives zeta(u) = (-1)^n zeta(lam^n u), so along each chain toward the upper
    boundary |zeta| is constant; when zeta decays at the boundary the chain tops
    decide. Without decay only an identically small zeta vanishes, since
    antiperiodic oscillations satisfy the relation too.
    """
    if not lam > 0 or not math.isfinite(lam):
        raise ConfigurationError(f"antiperiodic check needs a positive finite lambda, got {lam}")
    pairs = [(u, z) for u, z in zip(zeta.nodes, zeta.values) if z is not None and math.isfinite(z)]
    if not pairs:
        return AntiperiodicVerdict(status=AntiperiodicStatus.INCONCLUSIVE, reason="zeta has no defined nodes")
    nodes = np.array([u for u, _ in pairs], dtype=float)
    values = np.array([z for _, z in pairs], dtype=float)
    order = np.argsort(nodes)
    nodes, values = nodes[order], values[order]
    max_abs = float(np.max(np.abs(values)))

    # chains run toward the upper boundary
    step = lam if lam >= 1.0 else 1.0 / lam
    index = NodeIndex(nodes, rtol=_CLOSURE_RTOL)
    image = np.asarray(step * nodes)
    target = index.lookup(image)
    inside = image <= nodes[-1] * (1.0 + _CLOSURE_RTOL)
    if np.any(inside & (target < 0)):
        bad = float(nodes[np.argmax(inside & (target < 0))])
        raise ConfigurationError(f"grid is not closed under multiplication by {step}: {bad} * {step} is not a node")

    linked = target >= 0
    relation = np.abs(values[linked] + values[target[linked]])
    max_relation = float(relation.max()) if relation.size else 0.0
    if max_relation > tol:
        witness = float(nodes[linked][int(np.argmax(relation))])
        return AntiperiodicVerdict(
            status=AntiperiodicStatus.VIOLATED,
            witness=witness,
            max_relation_residual=max_relation,
            max_abs_zeta=max_abs,
            reason=f"zeta(u) + zeta({step:g} u) = {max_relation:.3e} at u = {witness:g}",
        )

    if max_abs <= tol:
        return AntiperiodicVerdict(
            status=AntiperiodicStatus.VANISHES,
            max_relation_residual=max_relation,
            max_abs_zeta=max_abs,
            reason="zeta vanishes on every node",
        )
    if step == 1.0:
        # lambda = 1 forces 2 zeta = 0, which the relation check already covers
        return AntiperiodicVerdict(
            status=AntiperiodicStatus.VIOLATED,
            witness=float(nodes[int(np.argmax(np.abs(values)))]),
            max_relation_residual=max_relation,
            max_abs_zeta=max_abs,
            reason="lambda = 1 forces zeta = 0",
        )
    if not boundary_decay:
        return AntiperiodicVerdict(
            status=AntiperiodicStatus.INCONCLUSIVE,
            max_relation_residual=max_relation,
            max_abs_zeta=max_abs,
            reason="relation holds but zeta is not known to decay at the boundary",
        )

    tops = values[~linked]
    if tops.size and float(np.max(np.abs(tops))) <= tol:
        return AntiperiodicVerdict(
            status=AntiperiodicStatus.VANISHES,
            max_relation_residual=max_relation,
            max_abs_zeta=max_abs,
            reason="zeta is negligible at the top of every chain and |zeta| is constant along chains",
        )
    return AntiperiodicVerdict(
        status=AntiperiodicStatus.INCONCLUSIVE,
        max_relation_residual=max_relation,
        max_abs_zeta=max_abs,
        reason="the grid does not reach far enough toward the boundary for zeta to decay",
    )
