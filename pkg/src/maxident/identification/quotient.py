import logging
import math
import time
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigurationError, UnsupportedCoefficientsError
from ..max_model.joint import JointCdf2D
from ..models.reports import RecoveryResult
from ..models.specs import DistributionSpec, Regime, ScaleCoefficients
from ..distributions.univariate import cdf_eval
from .common import model_residual, monotone_cdf, recovered_cdf, recovered_support, resolve_floor

logger = logging.getLogger(__name__)

_SERIES_TERMS = 200
_NEGLIGIBLE = 1e-17


def quotient_region(coeffs: ScaleCoefficients) -> Tuple[str, float, float, float, float]:
    """Pick the region where F_U(t1) F_V(t2) / G(t1, t2) factorizes as h(x) h(y), h = F_Z1.

    Returns (name, k1, k2, r_lo, r_hi): probes are t1 = k1 x, t2 = k2 y with the
    ratio y / x confined to [r_lo, r_hi]. Region R (t1/a <= t2/c, t1/b >= t2/d)
    has interior when bc <= ad, the mirrored region (t1/a >= t2/c, t1/b <= t2/d)
    when ad <= bc.
    """
    a, b, c, d = coeffs.as_tuple()
    if b * c <= a * d:
        return "R", b, c, b / a, d / c
    return "R'", a, d, a / b, c / d


def region_quotient_fz1(g: JointCdf2D, coeffs: ScaleCoefficients, grid: Sequence[float],
                        floor: Optional[float] = None) -> DistributionSpec:
    """Recover F_Z1 from quotients of the joint CDF on the factorizing region.

    On the region Q(x, y) = F_U(k1 x) F_V(k2 y) / G(k1 x, k2 y) = h(x) h(y).
    When the ratio 1 is admissible, h(s) = sqrt(Q(s, s)). Otherwise, with a
    ratio rho > 1 available, log h(s) = sum_k (-1)^k log Q(rho^k s, rho^(k+1) s),
    normalized by log h = 0 at the upper support boundary.
    Only positive nodes enter.
    """
    if coeffs.regime != Regime.ALL_POSITIVE:
        raise ConfigurationError("region quotient recovery needs all-positive coefficients")
    floor = resolve_floor(floor)
    name, k1, k2, r_lo, r_hi = quotient_region(coeffs)
    nodes = np.unique(np.asarray(grid, dtype=float))
    nodes = nodes[nodes > 0]
    if nodes.size == 0:
        raise UnsupportedCoefficientsError("region quotient recovery needs positive grid nodes")

    def log_q(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t1 = k1 * x
        t2 = k2 * y
        fu = np.asarray(g.marginal_u(t1), dtype=float)
        fv = np.asarray(g.marginal_v(t2), dtype=float)
        joint = np.asarray(g.evaluate(t1, t2), dtype=float)
        ok = (fu >= floor) & (fv >= floor) & (joint >= floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.log(fu) + np.log(fv) - np.log(joint)
        return np.where(ok, value, np.nan), ok

    if r_lo <= 1.0 <= r_hi:
        method = "diagonal"
        value, ok = log_q(nodes, nodes)
        phi = 0.5 * value
    else:
        method = "alternating series"
        phi, ok = _alternating_series(log_q, nodes, r_lo, r_hi, g.upper)

    usable = ok & np.isfinite(phi)
    if usable.sum() < 2:
        raise UnsupportedCoefficientsError(
            f"region {name} yields fewer than two usable positive nodes; use the grid solver"
        )
    skipped = int((~usable).sum())
    if skipped:
        logger.warning(f"Region quotient skipped {skipped} nodes below the CDF floor")

    t = nodes[usable]
    values = monotone_cdf(np.exp(np.minimum(phi[usable], 0.0)))
    logger.info(f"Region {name} quotient ({method}) recovered F_Z1 on {t.size} nodes")
    return recovered_cdf(t, values, recovered_support(g, t))


def _alternating_series(log_q, nodes: np.ndarray, r_lo: float, r_hi: float, upper: float):
    # Q is symmetric in (x, y); a ratio above 1 is used with x as the smaller argument
    if r_lo > 1.0:
        rho, swap = r_hi, False
    else:
        rho, swap = 1.0 / r_lo, True

    phi = np.zeros(nodes.size)
    ok = np.ones(nodes.size, dtype=bool)
    active = np.ones(nodes.size, dtype=bool)
    s = nodes.copy()
    sign = 1.0
    for _ in range(_SERIES_TERMS):
        # past the upper support boundary h = 1 and the remaining terms vanish
        active &= s < upper
        if not active.any():
            break
        x, y = (rho * s, s) if swap else (s, rho * s)
        term, term_ok = log_q(x, y)
        ok &= term_ok | ~active
        term = np.where(active & term_ok, term, 0.0)
        phi += sign * term
        active &= np.abs(term) > _NEGLIGIBLE
        s = rho * s
        sign = -sign
    if active.any():
        logger.warning(f"Alternating series did not settle on {int(active.sum())} nodes")
    return phi, ok


def recover_region_quotient(g: JointCdf2D, coeffs: ScaleCoefficients, grid: Sequence[float],
                            floor: Optional[float] = None) -> RecoveryResult:
    """Full recovery around region_quotient_fz1.

    F_Z1 is recovered on the grid and its images t/a, t/b, t/c, t/d, then
    F_X(t) = F_U(t) / (F_Z1(t/a) F_Z1(t/b)) and F_Y(t) = F_V(t) / (F_Z1(t/c) F_Z1(t/d)).
    """
    start = time.time()
    floor = resolve_floor(floor)
    nodes = np.unique(np.asarray(grid, dtype=float))
    a, b, c, d = coeffs.as_tuple()
    images = np.unique(np.concatenate([nodes, nodes / a, nodes / b, nodes / c, nodes / d]))
    fz1_hat = region_quotient_fz1(g, coeffs, images, floor)
    z_nodes = np.asarray(fz1_hat.nodes)

    def covered(values: np.ndarray) -> np.ndarray:
        return (values >= z_nodes[0]) & (values <= z_nodes[-1])

    fu = np.asarray(g.marginal_u(nodes), dtype=float)
    fv = np.asarray(g.marginal_v(nodes), dtype=float)
    den_u = cdf_eval(fz1_hat, nodes / a) * cdf_eval(fz1_hat, nodes / b)
    den_v = cdf_eval(fz1_hat, nodes / c) * cdf_eval(fz1_hat, nodes / d)
    keep = (
        covered(nodes / a) & covered(nodes / b) & covered(nodes / c) & covered(nodes / d)
        & (fu >= floor) & (fv >= floor) & (den_u >= floor) & (den_v >= floor)
    )
    if keep.sum() < 2:
        raise UnsupportedCoefficientsError("fewer than two grid nodes are covered by the recovered F_Z1 table")

    t = nodes[keep]
    support = fz1_hat.support
    fx_hat = recovered_cdf(t, monotone_cdf(fu[keep] / den_u[keep]), support)
    fy_hat = recovered_cdf(t, monotone_cdf(fv[keep] / den_v[keep]), support)
    result = RecoveryResult(
        method="region_quotient",
        grid=t.tolist(),
        fx_hat=fx_hat,
        fy_hat=fy_hat,
        fz1_hat=fz1_hat,
        sup_residual=0.0,
        skipped_nodes=nodes[~keep].tolist(),
    )
    result.sup_residual = model_residual(g, coeffs, result, t)
    elapsed_ms = int((time.time() - start) * 1000)
    logger.info(f"Region quotient recovery finished in {elapsed_ms}ms, sup residual {result.sup_residual:.3e}")
    return result
