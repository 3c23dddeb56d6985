import math
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from ..config.settings import settings
from ..distributions.univariate import cdf_eval, tabulated
from ..max_model.joint import JointCdf2D, joint_cdf
from ..models.reports import RecoveryResult
from ..models.specs import ComponentSystem, Dependence, DependenceMode, GeneratorSpec, ScaleCoefficients, Support


def resolve_floor(floor: Optional[float]) -> float:
    return settings.cdf_floor if floor is None else floor


def monotone_cdf(values: Sequence[float]) -> np.ndarray:
    """Project onto nondecreasing sequences, then clip to [0, 1]"""
    arr = np.asarray(values, dtype=float)
    if arr.size > 1:
        arr = isotonic_regression(arr, increasing=True).x
    return np.clip(arr, 0.0, 1.0)


def recovered_support(g: JointCdf2D, nodes: Sequence[float]) -> Support:
    """Support for recovered tables: the input's range widened to contain every node"""
    arr = np.asarray(nodes, dtype=float)
    lower = min(g.lower, float(arr.min()))
    upper = max(g.upper, float(arr.max()))
    if g.system is not None:
        base = g.system.support
        if base.lower <= lower and upper <= base.upper:
            return base
    return Support(lower=lower, upper=upper, lower_closed=math.isfinite(lower), upper_closed=math.isfinite(upper))


def recovered_cdf(nodes: Sequence[float], values: Sequence[float], support: Support):
    return tabulated(nodes, values, support=support, smooth=False)


def model_residual(g: JointCdf2D, coeffs: ScaleCoefficients, result: RecoveryResult,
                   grid: Sequence[float], generator: GeneratorSpec = None) -> float:
    """Max |G_model - G_input| over grid x grid, with G_model rebuilt from the recovered tables"""
    dependence = Dependence()
    if generator is not None:
        dependence = Dependence(mode=DependenceMode.MAX_INDEPENDENT, generator=generator)
    system = ComponentSystem(fx=result.fx_hat, fy=result.fy_hat, fz1=result.fz1_hat, dependence=dependence)
    nodes = np.asarray(grid, dtype=float)
    t1, t2 = nodes[:, None], nodes[None, :]
    model = joint_cdf(system, coeffs, t1, t2)
    return float(np.max(np.abs(model - g.evaluate(t1, t2))))


def truth_errors(result: RecoveryResult, system: ComponentSystem) -> Dict[str, float]:
    """Sup error of each recovered table against the known components, on the table's own nodes"""
    errors = {}
    for key, hat, truth in (("fx", result.fx_hat, system.fx), ("fy", result.fy_hat, system.fy), ("fz1", result.fz1_hat, system.fz1)):
        nodes = np.asarray(hat.nodes, dtype=float)
        errors[key] = float(np.max(np.abs(np.asarray(hat.values) - cdf_eval(truth, nodes))))
    return errors


NODE_RTOL = 1e-12


class NodeIndex:
    """Sorted node values with tolerant lookup; values within a relative tolerance share a node"""

    def __init__(self, values: np.ndarray, rtol: float = NODE_RTOL):
        self.rtol = rtol
        arr = np.sort(np.asarray(values, dtype=float).reshape(-1))
        arr = arr[np.isfinite(arr)]
        if arr.size:
            gap = np.diff(arr) > rtol * np.maximum(1.0, np.abs(arr[1:]))
            arr = arr[np.concatenate([[True], gap])]
        self.values = arr

    def __len__(self) -> int:
        return self.values.size

    def lookup(self, values) -> np.ndarray:
        """Index of the matching node, or -1"""
        query = np.asarray(values, dtype=float)
        if self.values.size == 0:
            return np.full(query.shape, -1, dtype=np.int64)
        idx = np.searchsorted(self.values, query)
        best = np.full(query.shape, -1, dtype=np.int64)
        for cand in (idx - 1, idx):
            cand = np.clip(cand, 0, self.values.size - 1)
            hit = np.abs(self.values[cand] - query) <= self.rtol * np.maximum(1.0, np.abs(query))
            best = np.where((best < 0) & hit, cand, best)
        return best


