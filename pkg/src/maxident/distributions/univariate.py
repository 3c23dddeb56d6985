import logging
import math
from typing import Iterable, Sequence, Union

import numpy as np
from scipy import stats

from ..exceptions import DomainError
from ..models.specs import DistributionFamily, DistributionSpec, GridSpacing, GridSpec

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

_MASK64 = (1 << 64) - 1
_BISECTION_STEPS = 200


def uniform_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based uniform source keyed by (seed, stream).

    Philox is a counter-based generator, so a given key always yields the same
    sequence on every platform and distinct streams never overlap.
    """
    key = np.array([seed & _MASK64, stream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on (0, 1); an exact zero is nudged to the smallest positive float"""
    u = rng.random(size)
    return np.where(u > 0.0, u, np.nextafter(0.0, 1.0))


def dkw_epsilon(n: int, delta: float) -> float:
    """DKW band half-width: sup |F_n - F| <= eps with probability 1 - delta"""
    if n < 1 or not 0.0 < delta < 1.0:
        raise DomainError(f"dkw_epsilon needs n >= 1 and delta in (0, 1), got n={n}, delta={delta}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


class _ParametricEvaluator:
    def __init__(self, frozen):
        self.frozen = frozen

    def cdf(self, t: np.ndarray) -> np.ndarray:
        return self.frozen.cdf(t)

    def left(self, t: np.ndarray) -> np.ndarray:
        return self.frozen.cdf(t)

    def ppf(self, p: np.ndarray) -> np.ndarray:
        return self.frozen.ppf(p)


class _TabulatedEvaluator:
    """Piecewise-linear CDF through the nodes, 0 below the first node and 1 above the last"""

    def __init__(self, nodes: Sequence[float], values: Sequence[float]):
        self.x = np.asarray(nodes, dtype=float)
        self.v = np.asarray(values, dtype=float)

    def cdf(self, t: np.ndarray) -> np.ndarray:
        out = np.interp(t, self.x, self.v)
        out = np.where(t < self.x[0], 0.0, out)
        return np.where(t > self.x[-1], 1.0, out)

    def left(self, t: np.ndarray) -> np.ndarray:
        out = np.interp(t, self.x, self.v)
        out = np.where(t <= self.x[0], 0.0, out)
        return np.where(t > self.x[-1], 1.0, out)

    def ppf(self, p: np.ndarray) -> np.ndarray:
        x, v = self.x, self.v
        idx = np.searchsorted(v, p, side="left")
        inner = np.clip(idx, 1, len(x) - 1)
        x0, x1 = x[inner - 1], x[inner]
        v0, v1 = v[inner - 1], v[inner]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = x0 + (p - v0) / (v1 - v0) * (x1 - x0)
        t = np.where(idx == 0, x[0], t)
        return np.where(idx >= len(x), x[-1], t)


class _EmpiricalEvaluator:
    def __init__(self, samples: Sequence[float]):
        self.s = np.asarray(samples, dtype=float)
        self.n = self.s.size
        self.levels = np.arange(1, self.n + 1) / self.n

    def cdf(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.s, t, side="right") / self.n

    def left(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.s, t, side="left") / self.n

    def ppf(self, p: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.levels, p, side="left")
        return self.s[np.clip(k, 0, self.n - 1)]


class _MixtureEvaluator:
    def __init__(self, parts, weights: Sequence[float]):
        self.parts = parts
        self.w = np.asarray(weights, dtype=float)

    def cdf(self, t: np.ndarray) -> np.ndarray:
        return sum(w * part.cdf(t) for w, part in zip(self.w, self.parts))

    def left(self, t: np.ndarray) -> np.ndarray:
        return sum(w * part.left(t) for w, part in zip(self.w, self.parts))

    def ppf(self, p: np.ndarray) -> np.ndarray:
        # the mixture quantile lies between the smallest and largest component quantiles
        bounds = np.stack([part.ppf(p) for part in self.parts])
        lo = bounds.min(axis=0)
        hi = bounds.max(axis=0)
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            hit = self.cdf(mid) >= p
            hi = np.where(hit, mid, hi)
            lo = np.where(hit, lo, mid)
            if np.all(hi - lo <= 1e-15 * (1.0 + np.abs(hi))):
                break
        return hi


def _build_evaluator(spec: DistributionSpec):
    family = spec.family
    if family == DistributionFamily.EXPONENTIAL:
        return _ParametricEvaluator(stats.expon(scale=1.0 / spec.rate))
    if family == DistributionFamily.UNIFORM:
        return _ParametricEvaluator(stats.uniform(loc=spec.lo, scale=spec.hi - spec.lo))
    if family == DistributionFamily.WEIBULL:
        return _ParametricEvaluator(stats.weibull_min(c=spec.shape, scale=spec.scale))
    if family == DistributionFamily.FRECHET:
        return _ParametricEvaluator(stats.invweibull(c=spec.shape, scale=spec.scale))
    if family == DistributionFamily.TABULATED:
        return _TabulatedEvaluator(spec.nodes, spec.values)
    if family == DistributionFamily.EMPIRICAL:
        return _EmpiricalEvaluator(spec.samples)
    return _MixtureEvaluator([evaluator(c) for c in spec.components], spec.weights)


def evaluator(spec: DistributionSpec):
    """Numeric evaluator of a spec, built once and cached on the spec"""
    if spec._evaluator is None:
        spec._evaluator = _build_evaluator(spec)
    return spec._evaluator


def _output(values: np.ndarray, scalar: bool):
    if scalar:
        return float(np.asarray(values).reshape(-1)[0])
    return np.asarray(values, dtype=float)


def cdf_eval(spec: DistributionSpec, t: ArrayLike):
    """Evaluate F(t); t may be a scalar or an array and may lie outside the support"""
    arr = np.asarray(t, dtype=float)
    return _output(np.clip(evaluator(spec).cdf(arr), 0.0, 1.0), arr.ndim == 0)


def left_limit(spec: DistributionSpec, t: ArrayLike):
    """Evaluate the left limit F(t-) = P(T < t)"""
    arr = np.asarray(t, dtype=float)
    return _output(np.clip(evaluator(spec).left(arr), 0.0, 1.0), arr.ndim == 0)


def quantile(spec: DistributionSpec, p: ArrayLike):
    """Generalized inverse inf{t : F(t) >= p} for p in (0, 1)"""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"quantile needs p in (0, 1), got {p}")
    return _output(evaluator(spec).ppf(arr), arr.ndim == 0)


def sample(spec: DistributionSpec, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Draw n values by inverse transform of a counter-based uniform stream"""
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    u = open_uniforms(uniform_stream(seed, stream), n)
    return np.asarray(evaluator(spec).ppf(u), dtype=float)


def empirical_cdf(samples: Iterable[float]) -> DistributionSpec:
    """Empirical distribution of a nonempty sample"""
    data = np.asarray(list(samples), dtype=float)
    if data.size == 0:
        raise DomainError("empirical_cdf needs a nonempty sample")
    if not np.all(np.isfinite(data)):
        raise DomainError("empirical_cdf needs finite samples")
    return DistributionSpec(family=DistributionFamily.EMPIRICAL, samples=np.sort(data).tolist())


def sup_distance(f: DistributionSpec, g: DistributionSpec, grid: Iterable[float]) -> float:
    """Largest absolute CDF difference over the grid"""
    nodes = np.asarray(list(grid), dtype=float)
    if nodes.size == 0:
        raise DomainError("sup_distance needs a nonempty grid")
    return float(np.max(np.abs(cdf_eval(f, nodes) - cdf_eval(g, nodes))))


def tabulated(nodes: Sequence[float], values: Sequence[float], support=None, smooth=None) -> DistributionSpec:
    """Build a tabulated spec"""
    return DistributionSpec(
        family=DistributionFamily.TABULATED,
        nodes=[float(x) for x in nodes],
        values=[float(v) for v in values],
        support=support,
        smooth=smooth,
    )


def resolve_grid(grid: GridSpec, reference: DistributionSpec = None) -> np.ndarray:
    """Expand a grid description into nodes; quantile spacing uses the reference distribution"""
    if grid.nodes is not None:
        return np.asarray(grid.nodes, dtype=float)
    if grid.spacing == GridSpacing.LINEAR:
        nodes = np.linspace(grid.lower, grid.upper, grid.count)
    elif grid.spacing == GridSpacing.GEOMETRIC:
        nodes = np.geomspace(grid.lower, grid.upper, grid.count)
    else:
        if reference is None:
            raise DomainError("quantile grid spacing needs a reference distribution")
        nodes = quantile(reference, np.linspace(grid.lower, grid.upper, grid.count))
        nodes = np.atleast_1d(nodes)
    return np.unique(nodes)


def sample_components(specs: Sequence[DistributionSpec], n: int, seed: int) -> np.ndarray:
    """Independent draws, one column per spec; column k uses stream k of the seed"""
    return np.column_stack([sample(spec, n, seed, stream=k) for k, spec in enumerate(specs)])
