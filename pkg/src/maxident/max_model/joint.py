import logging
import math
from enum import Enum
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..distributions.univariate import cdf_eval, left_limit, sample_components
from ..exceptions import ConfigurationError, DomainError
from ..max_independence.generator import beta_eval, ensure_valid, sample_maxind
from ..models.specs import ComponentSystem, DependenceMode, DistributionSpec, Regime, ScaleCoefficients

logger = logging.getLogger(__name__)


def _pair(t1, t2):
    a1, a2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    return a1, a2, a1.ndim == 0


def _finish(values: np.ndarray, scalar: bool):
    values = np.clip(values, 0.0, 1.0)
    if scalar:
        return float(values)
    return values


def _require_regime(coeffs: ScaleCoefficients, regime: Regime) -> None:
    if coeffs.regime != regime:
        raise ConfigurationError(f"coefficients are in the {coeffs.regime.value} regime, expected {regime.value}")


def _require_independent(system: ComponentSystem) -> None:
    if system.dependence.mode != DependenceMode.INDEPENDENT:
        raise ConfigurationError("this evaluation needs independent components; use joint_cdf_maxind")


def shock_arguments(coeffs: ScaleCoefficients, t1, t2):
    """Arguments m1 = min(t1/a, t2/c) and m2 = min(t1/b, t2/d) of the shock factors"""
    m1 = np.minimum(t1 / coeffs.a, t2 / coeffs.c)
    m2 = np.minimum(t1 / coeffs.b, t2 / coeffs.d)
    return m1, m2


def _positive_product(system: ComponentSystem, coeffs: ScaleCoefficients, t1, t2) -> np.ndarray:
    m1, m2 = shock_arguments(coeffs, t1, t2)
    return cdf_eval(system.fx, t1) * cdf_eval(system.fy, t2) * cdf_eval(system.fz1, m1) * cdf_eval(system.fz1, m2)


def joint_cdf_positive(system: ComponentSystem, coeffs: ScaleCoefficients, t1, t2):
    """G(t1, t2) = F_X(t1) F_Y(t2) F_Z(min(t1/a, t2/c)) F_Z(min(t1/b, t2/d)) for positive coefficients"""
    _require_regime(coeffs, Regime.ALL_POSITIVE)
    _require_independent(system)
    a1, a2, scalar = _pair(t1, t2)
    return _finish(_positive_product(system, coeffs, a1, a2), scalar)


def joint_cdf_mixed(system: ComponentSystem, coeffs: ScaleCoefficients, t1, t2):
    """G(t1, t2) for a > 0, b < 0, c > 0, d < 0.

    Z2 enters through bZ2 <= t1 and dZ2 <= t2, i.e. Z2 >= max(t1/b, t2/d),
    whose probability is the left-limit survival 1 - F_Z(s-).
    """
    _require_regime(coeffs, Regime.MIXED_SIGN)
    _require_independent(system)
    a1, a2, scalar = _pair(t1, t2)
    m1 = np.minimum(a1 / coeffs.a, a2 / coeffs.c)
    s = np.maximum(a1 / coeffs.b, a2 / coeffs.d)
    survival = 1.0 - left_limit(system.fz1, s)
    values = cdf_eval(system.fx, a1) * cdf_eval(system.fy, a2) * cdf_eval(system.fz1, m1) * survival
    return _finish(values, scalar)


def joint_cdf_maxind(system: ComponentSystem, coeffs: ScaleCoefficients, t1, t2):
    """G(t1, t2) = F_X(t1) F_Y(t2) F_Z(m1) F_Z(m2) beta(t1, t2, m1, m2) for max-independent components"""
    _require_regime(coeffs, Regime.ALL_POSITIVE)
    gen = system.generator
    if gen is None:
        raise ConfigurationError("joint_cdf_maxind needs a max-independent system with a generator")
    ensure_valid(gen)
    a1, a2, scalar = _pair(t1, t2)
    m1, m2 = shock_arguments(coeffs, a1, a2)
    beta = beta_eval(gen, system.marginals, a1, a2, m1, m2)
    return _finish(_positive_product(system, coeffs, a1, a2) * beta, scalar)


def joint_cdf_kotlarski(f0: DistributionSpec, f1: DistributionSpec, f2: DistributionSpec, t1, t2):
    """Joint CDF of (max(X0, X1), max(X0, X2)): F1(t1) F2(t2) F0(min(t1, t2))"""
    a1, a2, scalar = _pair(t1, t2)
    values = cdf_eval(f1, a1) * cdf_eval(f2, a2) * cdf_eval(f0, np.minimum(a1, a2))
    return _finish(values, scalar)


def joint_cdf(system: ComponentSystem, coeffs: ScaleCoefficients, t1, t2):
    """Dispatch on regime and dependence mode"""
    if system.dependence.mode == DependenceMode.MAX_INDEPENDENT:
        return joint_cdf_maxind(system, coeffs, t1, t2)
    if coeffs.regime == Regime.MIXED_SIGN:
        return joint_cdf_mixed(system, coeffs, t1, t2)
    return joint_cdf_positive(system, coeffs, t1, t2)


def marginal_u(system: ComponentSystem, coeffs: ScaleCoefficients, t):
    """F_U(t), the joint CDF at (t, +inf)"""
    return joint_cdf(system, coeffs, t, np.inf)


def marginal_v(system: ComponentSystem, coeffs: ScaleCoefficients, t):
    """F_V(t), the joint CDF at (+inf, t)"""
    return joint_cdf(system, coeffs, np.inf, t)


def sample_joint(system: ComponentSystem, coeffs: ScaleCoefficients, n: int, seed: int) -> np.ndarray:
    """Draw n pairs (U, V) = (max(X, aZ1, bZ2), max(Y, cZ1, dZ2)) as an (n, 2) array"""
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    gen = system.generator
    if gen is None:
        draws = sample_components(system.marginals, n, seed)
    else:
        draws = sample_maxind(gen, system.marginals, n, seed)
    x, y, z1, z2 = draws.T
    u = np.maximum(x, np.maximum(coeffs.a * z1, coeffs.b * z2))
    v = np.maximum(y, np.maximum(coeffs.c * z1, coeffs.d * z2))
    return np.column_stack([u, v])


def sample_kotlarski(f0: DistributionSpec, f1: DistributionSpec, f2: DistributionSpec, n: int, seed: int) -> np.ndarray:
    """Draw n pairs (max(X0, X1), max(X0, X2)) as an (n, 2) array"""
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    x1, x2, x0 = sample_components([f1, f2, f0], n, seed).T
    return np.column_stack([np.maximum(x0, x1), np.maximum(x0, x2)])


class JointCdfKind(str, Enum):
    ANALYTIC = "analytic"
    KOTLARSKI = "kotlarski"
    EMPIRICAL = "empirical"
    TABULATED = "tabulated"


# probabilists' Gauss-Hermite rule for the optional smoothing of empirical input
_SMOOTHING_NODES = 5


class JointCdf2D:
    """An evaluable bivariate CDF G(t1, t2) of (U, V).

    Built from a component system, from the single-shock model, from samples
    of (U, V), or from a table. Evaluation broadcasts its arguments and
    accepts infinite coordinates.
    """

    def __init__(self, kind: JointCdfKind, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 lower: float, upper: float, system: ComponentSystem = None,
                 coeffs: ScaleCoefficients = None, sample_size: int = None):
        self.kind = kind
        self._fn = fn
        self.lower = lower
        self.upper = upper
        self.system = system
        self.coeffs = coeffs
        self.sample_size = sample_size

    @classmethod
    def from_system(cls, system: ComponentSystem, coeffs: ScaleCoefficients) -> "JointCdf2D":
        support = system.support
        return cls(
            JointCdfKind.ANALYTIC,
            lambda t1, t2: np.asarray(joint_cdf(system, coeffs, t1, t2), dtype=float),
            support.lower,
            support.upper,
            system=system,
            coeffs=coeffs,
        )

    @classmethod
    def from_kotlarski(cls, f0: DistributionSpec, f1: DistributionSpec, f2: DistributionSpec) -> "JointCdf2D":
        support = f0.support
        return cls(
            JointCdfKind.KOTLARSKI,
            lambda t1, t2: np.asarray(joint_cdf_kotlarski(f0, f1, f2, t1, t2), dtype=float),
            support.lower,
            support.upper,
        )

    @classmethod
    def from_samples(cls, pairs, bandwidth: Optional[float] = None) -> "JointCdf2D":
        """Empirical joint CDF of (U, V) pairs; a positive bandwidth smooths it with a Gaussian kernel"""
        data = np.asarray(pairs, dtype=float)
        if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] == 0:
            raise DomainError("empirical joint CDF needs a nonempty (n, 2) array of pairs")
        if not np.all(np.isfinite(data)):
            raise DomainError("empirical joint CDF needs finite pairs")
        u = data[:, 0].copy()
        v = data[:, 1].copy()
        n = data.shape[0]

        def counts(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
            xs = np.unique(t1)
            ys = np.unique(t2)
            # sample i counts for every query (x, y) with u_i <= x and v_i <= y
            iu = np.searchsorted(xs, u, side="left")
            iv = np.searchsorted(ys, v, side="left")
            keep = (iu < xs.size) & (iv < ys.size)
            flat = np.bincount(iu[keep] * ys.size + iv[keep], minlength=xs.size * ys.size)
            table = flat.reshape(xs.size, ys.size).cumsum(axis=0).cumsum(axis=1)
            return table[np.searchsorted(xs, t1), np.searchsorted(ys, t2)] / n

        fn = counts
        if bandwidth:
            if bandwidth < 0:
                raise DomainError(f"smoothing bandwidth must be positive, got {bandwidth}")
            nodes, weights = np.polynomial.hermite_e.hermegauss(_SMOOTHING_NODES)
            weights = weights / weights.sum()

            def smoothed(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
                total = np.zeros(t1.shape)
                for zi, wi in zip(nodes, weights):
                    for zj, wj in zip(nodes, weights):
                        total += wi * wj * counts(t1 - bandwidth * zi, t2 - bandwidth * zj)
                return total

            fn = smoothed

        lower = float(min(u.min(), v.min()))
        upper = float(max(u.max(), v.max()))
        logger.info(f"Built empirical joint CDF from {n} pairs (bandwidth={bandwidth})")
        return cls(JointCdfKind.EMPIRICAL, fn, lower, upper, sample_size=n)

    @classmethod
    def from_table(cls, t1_nodes: Sequence[float], t2_nodes: Sequence[float], values) -> "JointCdf2D":
        """Bilinear interpolation of a table; queries are clamped to the table range"""
        x = np.asarray(t1_nodes, dtype=float)
        y = np.asarray(t2_nodes, dtype=float)
        table = np.asarray(values, dtype=float)
        if table.shape != (x.size, y.size):
            raise DomainError(f"joint table has shape {table.shape}, expected {(x.size, y.size)}")
        if x.size < 2 or y.size < 2 or np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise DomainError("joint table axes need at least two strictly increasing nodes")
        interp = RegularGridInterpolator((x, y), table, method="linear")

        def fn(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
            points = np.column_stack([np.clip(t1.reshape(-1), x[0], x[-1]), np.clip(t2.reshape(-1), y[0], y[-1])])
            return interp(points).reshape(t1.shape)

        return cls(JointCdfKind.TABULATED, fn, float(min(x[0], y[0])), float(max(x[-1], y[-1])))

    def derived(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "JointCdf2D":
        """A CDF with the same metadata and a new evaluation rule"""
        return JointCdf2D(self.kind, fn, self.lower, self.upper, self.system, self.coeffs, self.sample_size)

    def evaluate(self, t1, t2):
        a1, a2, scalar = _pair(t1, t2)
        values = np.asarray(self._fn(a1, a2), dtype=float).reshape(a1.shape)
        return _finish(values, scalar)

    __call__ = evaluate

    def marginal_u(self, t):
        return self.evaluate(t, np.inf)

    def marginal_v(self, t):
        return self.evaluate(np.inf, t)

    def to_table(self, t1_nodes: Sequence[float], t2_nodes: Sequence[float]) -> Dict[str, list]:
        """Row-major table over t1 in the {"t1", "t2", "values"} layout"""
        x = np.asarray(t1_nodes, dtype=float)
        y = np.asarray(t2_nodes, dtype=float)
        grid = self.evaluate(x[:, None], y[None, :])
        return {"t1": x.tolist(), "t2": y.tolist(), "values": np.asarray(grid).tolist()}

    def bounded_range(self):
        """Finite (lower, upper) range for building probe grids"""
        lower = self.lower if math.isfinite(self.lower) else -1.0
        upper = self.upper if math.isfinite(self.upper) else max(lower, 0.0) + 10.0
        return lower, upper
