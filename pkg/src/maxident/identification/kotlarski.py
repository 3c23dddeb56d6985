import logging
import time
from typing import Optional, Sequence

import numpy as np

from ..exceptions import HypothesisViolationError
from ..max_model.joint import JointCdf2D, joint_cdf_kotlarski
from ..models.reports import RecoveryResult
from .common import monotone_cdf, recovered_cdf, recovered_support, resolve_floor

logger = logging.getLogger(__name__)


def recover_kotlarski(g: JointCdf2D, grid: Sequence[float], floor: Optional[float] = None) -> RecoveryResult:
    """Closed-form recovery for (Y1, Y2) = (max(X0, X1), max(X0, X2)).

    With F_Y1(t) = g(t, inf) and F_Y2(t) = g(inf, t):
    F0 = F_Y1 F_Y2 / g(t, t), F1 = g(t, t) / F_Y2, F2 = g(t, t) / F_Y1.
    Nodes where any of these denominators falls below the floor are skipped.
    The result maps X0 to fz1_hat, X1 to fx_hat and X2 to fy_hat.
    """
    start = time.time()
    floor = resolve_floor(floor)
    nodes = np.unique(np.asarray(grid, dtype=float))

    fy1 = np.asarray(g.marginal_u(nodes), dtype=float)
    fy2 = np.asarray(g.marginal_v(nodes), dtype=float)
    diag = np.asarray(g.evaluate(nodes, nodes), dtype=float)

    keep = (diag >= floor) & (fy1 >= floor) & (fy2 >= floor)
    skipped = nodes[~keep]
    if skipped.size:
        logger.warning(f"Skipping {skipped.size} grid nodes below the CDF floor {floor}")
    if keep.sum() < 2:
        raise HypothesisViolationError("fewer than two grid nodes have joint CDF values above the floor")

    t = nodes[keep]
    f0 = monotone_cdf(fy1[keep] * fy2[keep] / diag[keep])
    f1 = monotone_cdf(diag[keep] / fy2[keep])
    f2 = monotone_cdf(diag[keep] / fy1[keep])

    support = recovered_support(g, t)
    f0_hat = recovered_cdf(t, f0, support)
    f1_hat = recovered_cdf(t, f1, support)
    f2_hat = recovered_cdf(t, f2, support)

    t1, t2 = t[:, None], t[None, :]
    model = joint_cdf_kotlarski(f0_hat, f1_hat, f2_hat, t1, t2)
    sup_residual = float(np.max(np.abs(model - g.evaluate(t1, t2))))

    elapsed_ms = int((time.time() - start) * 1000)
    logger.info(f"Kotlarski recovery on {t.size} nodes finished in {elapsed_ms}ms, sup residual {sup_residual:.3e}")

    return RecoveryResult(
        method="kotlarski",
        grid=t.tolist(),
        fx_hat=f1_hat,
        fy_hat=f2_hat,
        fz1_hat=f0_hat,
        sup_residual=sup_residual,
        skipped_nodes=skipped.tolist(),
    )
