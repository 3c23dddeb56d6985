import math
from enum import Enum
from typing import Any, List, Optional

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator


class Support(BaseModel):
    """Interval support of a one-dimensional distribution"""
    lower: float = Field(..., description="Lower endpoint (may be -inf)")
    upper: float = Field(..., description="Upper endpoint (may be +inf)")
    lower_closed: bool = Field(False, description="Whether the lower endpoint belongs to the support")
    upper_closed: bool = Field(False, description="Whether the upper endpoint belongs to the support")

    class Config:
        json_schema_extra = {
            "example": {"lower": 0.0, "upper": "Infinity", "lower_closed": True, "upper_closed": False}
        }

    @model_validator(mode="after")
    def check_interval(self) -> "Support":
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("support endpoints must not be NaN")
        if self.lower > self.upper:
            raise ValueError(f"support lower {self.lower} exceeds upper {self.upper}")
        if self.lower == self.upper and not (self.lower_closed and self.upper_closed):
            # a single point is only a support when it is a closed point mass
            raise ValueError("degenerate support must be closed at both ends")
        if math.isinf(self.lower) and self.lower_closed:
            raise ValueError("an unbounded lower endpoint cannot be closed")
        if math.isinf(self.upper) and self.upper_closed:
            raise ValueError("an unbounded upper endpoint cannot be closed")
        return self

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper

    def contains(self, t: float) -> bool:
        """Check if t lies in the support"""
        above = t > self.lower or (self.lower_closed and t == self.lower)
        below = t < self.upper or (self.upper_closed and t == self.upper)
        return above and below

    def matches(self, other: "Support", tol: float = 1e-9) -> bool:
        """Compare endpoints up to a tolerance; closedness differs only on a null set"""
        return _close(self.lower, other.lower, tol) and _close(self.upper, other.upper, tol)

    def covers(self, other: "Support", tol: float = 1e-9) -> bool:
        """Check if other lies inside this support"""
        return self.lower <= other.lower + tol and other.upper <= self.upper + tol


def _close(x: float, y: float, tol: float) -> bool:
    if math.isinf(x) or math.isinf(y):
        return x == y
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


class DistributionFamily(str, Enum):
    EXPONENTIAL = "exponential"
    UNIFORM = "uniform"
    WEIBULL = "weibull"
    FRECHET = "frechet"
    TABULATED = "tabulated"
    EMPIRICAL = "empirical"
    MIXTURE = "mixture"


SMOOTH_FAMILIES = {
    DistributionFamily.EXPONENTIAL,
    DistributionFamily.UNIFORM,
    DistributionFamily.WEIBULL,
    DistributionFamily.FRECHET,
}


class DistributionSpec(BaseModel):
    """A one-dimensional distribution: parametric, tabulated, empirical or a finite mixture.

    Specs are treated as immutable once built. The numeric evaluator behind a
    spec is built lazily by the distributions module and cached privately.
    """
    family: DistributionFamily = Field(..., description="Distribution family")
    rate: Optional[float] = Field(None, description="Exponential rate")
    lo: Optional[float] = Field(None, description="Uniform lower end")
    hi: Optional[float] = Field(None, description="Uniform upper end")
    shape: Optional[float] = Field(None, description="Weibull/Frechet shape")
    scale: Optional[float] = Field(None, description="Weibull/Frechet scale")
    nodes: Optional[List[float]] = Field(None, description="Tabulated grid nodes, strictly increasing")
    values: Optional[List[float]] = Field(None, description="Tabulated CDF values at the nodes")
    samples: Optional[List[float]] = Field(None, description="Empirical sample, stored sorted")
    components: Optional[List["DistributionSpec"]] = Field(None, description="Mixture components")
    weights: Optional[List[float]] = Field(None, description="Mixture weights summing to one")
    support: Optional[Support] = Field(None, description="Support; derived from the family when omitted")
    smooth: Optional[bool] = Field(None, description="CDF has a continuous derivative on its support")

    _evaluator: Any = PrivateAttr(default=None)

    class Config:
        json_schema_extra = {
            "examples": [
                {"family": "exponential", "rate": 1.0},
                {"family": "uniform", "lo": 0.0, "hi": 1.0},
                {"family": "tabulated", "nodes": [0.0, 1.0], "values": [0.0, 1.0]},
            ]
        }

    @model_validator(mode="after")
    def check_family(self) -> "DistributionSpec":
        family = self.family
        if family == DistributionFamily.EXPONENTIAL:
            _require_positive("rate", self.rate)
            derived = Support(lower=0.0, upper=math.inf, lower_closed=True)
        elif family == DistributionFamily.UNIFORM:
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError("uniform requires lo < hi")
            derived = Support(lower=self.lo, upper=self.hi, lower_closed=True, upper_closed=True)
        elif family == DistributionFamily.WEIBULL:
            _require_positive("shape", self.shape)
            _require_positive("scale", self.scale)
            derived = Support(lower=0.0, upper=math.inf, lower_closed=True)
        elif family == DistributionFamily.FRECHET:
            _require_positive("shape", self.shape)
            _require_positive("scale", self.scale)
            derived = Support(lower=0.0, upper=math.inf)
        elif family == DistributionFamily.TABULATED:
            derived = self._check_table()
        elif family == DistributionFamily.EMPIRICAL:
            derived = self._check_samples()
        else:
            derived = self._check_mixture()

        if self.support is None:
            self.support = derived
        elif not self.support.covers(derived):
            raise ValueError(f"declared support {self.support} does not contain the family support {derived}")

        if self.smooth is None:
            if family == DistributionFamily.MIXTURE:
                self.smooth = all(c.smooth for c in self.components)
            else:
                self.smooth = family in SMOOTH_FAMILIES
        return self

    def _check_table(self) -> Support:
        if not self.nodes or self.values is None:
            raise ValueError("tabulated family requires nodes and values")
        if len(self.nodes) != len(self.values):
            raise ValueError("tabulated nodes and values differ in length")
        if len(self.nodes) < 2:
            raise ValueError("tabulated family requires at least two nodes")
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
            raise ValueError("tabulated nodes must be finite and strictly increasing")
        if np.any(np.isnan(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("tabulated CDF values must lie in [0, 1]")
        if np.any(np.diff(values) < 0):
            idx = int(np.argmax(np.diff(values) < 0))
            raise ValueError(f"tabulated CDF values decrease after node {self.nodes[idx]}")
        return Support(lower=float(nodes[0]), upper=float(nodes[-1]), lower_closed=True, upper_closed=True)

    def _check_samples(self) -> Support:
        if not self.samples:
            raise ValueError("empirical family requires a nonempty sample")
        data = np.sort(np.asarray(self.samples, dtype=float))
        if not np.all(np.isfinite(data)):
            raise ValueError("empirical samples must be finite")
        self.samples = data.tolist()
        return Support(lower=float(data[0]), upper=float(data[-1]), lower_closed=True, upper_closed=True)

    def _check_mixture(self) -> Support:
        if not self.components or self.weights is None:
            raise ValueError("mixture family requires components and weights")
        if len(self.components) != len(self.weights):
            raise ValueError("mixture components and weights differ in length")
        weights = np.asarray(self.weights, dtype=float)
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be positive and sum to one")
        lowest = min(self.components, key=lambda c: c.support.lower).support
        highest = max(self.components, key=lambda c: c.support.upper).support
        return Support(
            lower=lowest.lower,
            upper=highest.upper,
            lower_closed=lowest.lower_closed,
            upper_closed=highest.upper_closed,
        )


def _require_positive(name: str, value: Optional[float]) -> None:
    if value is None or not value > 0 or math.isinf(value):
        raise ValueError(f"parameter {name} must be a positive finite number, got {value}")


DistributionSpec.model_rebuild()


class Regime(str, Enum):
    ALL_POSITIVE = "all_positive"
    MIXED_SIGN = "mixed_sign"


class ScaleCoefficients(BaseModel):
    """Known constants a, b, c, d of the model U = max(X, aZ1, bZ2), V = max(Y, cZ1, dZ2)"""
    a: float = Field(..., description="Coefficient of Z1 in U")
    b: float = Field(..., description="Coefficient of Z2 in U")
    c: float = Field(..., description="Coefficient of Z1 in V")
    d: float = Field(..., description="Coefficient of Z2 in V")
    regime: Regime = Field(..., description="Sign regime of the coefficients")

    class Config:
        json_schema_extra = {
            "example": {"a": 1.0, "b": 3.0, "c": 2.0, "d": 1.0, "regime": "all_positive"}
        }

    @model_validator(mode="after")
    def check_signs(self) -> "ScaleCoefficients":
        coeffs = (self.a, self.b, self.c, self.d)
        if not all(math.isfinite(x) for x in coeffs):
            raise ValueError("coefficients must be finite")
        if self.regime == Regime.ALL_POSITIVE and not all(x > 0 for x in coeffs):
            raise ValueError("all_positive regime requires a, b, c, d > 0")
        if self.regime == Regime.MIXED_SIGN and not (self.a > 0 and self.b < 0 and self.c > 0 and self.d < 0):
            raise ValueError("mixed_sign regime requires a > 0, b < 0, c > 0, d < 0")
        return self

    @property
    def lam(self) -> float:
        """Ratio a/b driving the antiperiodic relation"""
        return self.a / self.b

    def as_tuple(self):
        return self.a, self.b, self.c, self.d


class GeneratorFamily(str, Enum):
    CONSTANT_ONE = "constant_one"
    FGM = "fgm"
    TABULATED4D = "tabulated4d"


class GeneratorSpec(BaseModel):
    """Generator beta of a max-independent joint distribution with four components"""
    family: GeneratorFamily = Field(..., description="Generator family")
    alpha: float = Field(0.0, description="FGM interaction parameter; valid generators need alpha in (-1, 0]")
    axes: Optional[List[List[float]]] = Field(None, description="Four strictly increasing axes of a tabulated generator")
    values: Optional[List[Any]] = Field(None, description="Nested 4-dimensional table of beta values")
    arity: int = Field(4, description="Number of components (fixed at 4)")

    class Config:
        json_schema_extra = {"example": {"family": "fgm", "alpha": -0.5}}

    @field_validator("arity")
    @classmethod
    def check_arity(cls, v: int) -> int:
        if v != 4:
            raise ValueError("only generators of arity 4 are supported")
        return v

    @model_validator(mode="after")
    def check_table(self) -> "GeneratorSpec":
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.family == GeneratorFamily.TABULATED4D:
            if self.axes is None or self.values is None or len(self.axes) != 4:
                raise ValueError("tabulated4d generator requires four axes and a value table")
            for axis in self.axes:
                arr = np.asarray(axis, dtype=float)
                if arr.size < 2 or np.any(np.diff(arr) <= 0):
                    raise ValueError("tabulated4d axes must be strictly increasing with at least two points")
            shape = tuple(len(axis) for axis in self.axes)
            table = np.asarray(self.values, dtype=float)
            if table.shape != shape:
                raise ValueError(f"tabulated4d values have shape {table.shape}, expected {shape}")
        return self


class DependenceMode(str, Enum):
    INDEPENDENT = "independent"
    MAX_INDEPENDENT = "max_independent"


class Dependence(BaseModel):
    """Dependence structure of (X, Y, Z1, Z2)"""
    mode: DependenceMode = Field(DependenceMode.INDEPENDENT, description="Independent or max-independent")
    generator: Optional[GeneratorSpec] = Field(None, description="Generator for the max-independent mode")

    @model_validator(mode="after")
    def check_generator(self) -> "Dependence":
        if self.mode == DependenceMode.MAX_INDEPENDENT and self.generator is None:
            raise ValueError("max_independent dependence requires a generator")
        return self


class ComponentSystem(BaseModel):
    """The quadruple (X, Y, Z1, Z2) with Z2 distributed as Z1"""
    fx: DistributionSpec = Field(..., description="Distribution of X")
    fy: DistributionSpec = Field(..., description="Distribution of Y")
    fz1: DistributionSpec = Field(..., description="Common distribution of Z1 and Z2")
    dependence: Dependence = Field(default_factory=Dependence, description="Dependence mode")

    class Config:
        json_schema_extra = {
            "example": {
                "fx": {"family": "exponential", "rate": 1.0},
                "fy": {"family": "exponential", "rate": 1.0},
                "fz1": {"family": "exponential", "rate": 1.0},
                "dependence": {"mode": "independent"},
            }
        }

    @model_validator(mode="after")
    def check_common_support(self) -> "ComponentSystem":
        base = self.fz1.support
        for name, spec in (("fx", self.fx), ("fy", self.fy)):
            if not spec.support.matches(base):
                raise ValueError(f"{name} support {spec.support} differs from fz1 support {base}")
        return self

    @property
    def support(self) -> Support:
        return self.fz1.support

    @property
    def generator(self) -> Optional[GeneratorSpec]:
        if self.dependence.mode == DependenceMode.MAX_INDEPENDENT:
            return self.dependence.generator
        return None

    @property
    def marginals(self) -> List[DistributionSpec]:
        """Marginals of (X, Y, Z1, Z2) in generator argument order"""
        return [self.fx, self.fy, self.fz1, self.fz1]

    def with_components(self, **changes: DistributionSpec) -> "ComponentSystem":
        """Return a copy with some components replaced, re-running validation"""
        data = {"fx": self.fx, "fy": self.fy, "fz1": self.fz1, "dependence": self.dependence}
        data.update(changes)
        return ComponentSystem(**data)


class GridSpacing(str, Enum):
    LINEAR = "linear"
    GEOMETRIC = "geometric"
    QUANTILE = "quantile"


class GridSpec(BaseModel):
    """Evaluation grid: explicit nodes, or a count over a range with a spacing rule.

    For quantile spacing, lower and upper are probabilities in (0, 1) of the
    reference distribution.
    """
    nodes: Optional[List[float]] = Field(None, description="Explicit strictly increasing nodes")
    count: Optional[int] = Field(None, description="Number of nodes")
    lower: Optional[float] = Field(None, description="Lower end of the range")
    upper: Optional[float] = Field(None, description="Upper end of the range")
    spacing: GridSpacing = Field(GridSpacing.LINEAR, description="Spacing rule")

    class Config:
        json_schema_extra = {"example": {"count": 40, "lower": 0.02, "upper": 0.98, "spacing": "quantile"}}

    @model_validator(mode="after")
    def check_grid(self) -> "GridSpec":
        if self.nodes is not None:
            arr = np.asarray(self.nodes, dtype=float)
            if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(np.diff(arr) <= 0):
                raise ValueError("grid nodes must be finite, nonempty and strictly increasing")
            return self
        if self.count is None or self.lower is None or self.upper is None:
            raise ValueError("grid needs either nodes or count, lower and upper")
        if self.count < 1 or not self.lower <= self.upper:
            raise ValueError("grid needs count >= 1 and lower <= upper")
        if self.spacing == GridSpacing.GEOMETRIC and self.lower <= 0:
            raise ValueError("geometric grid needs a positive lower end")
        if self.spacing == GridSpacing.QUANTILE and not (0 < self.lower and self.upper < 1):
            raise ValueError("quantile grid needs probabilities inside (0, 1)")
        return self


class GridSolverConfig(BaseModel):
    """Settings of the projected least-squares grid solver"""
    starts: int = Field(5, ge=1, description="Number of multistart initializations")
    max_iterations: int = Field(10000, ge=1, description="Iteration cap per start")
    tolerance: float = Field(1e-14, gt=0, description="Stop when the objective decrease falls below this")
    agreement_tolerance: float = Field(1e-4, gt=0, description="Multistart agreement tolerance on recovered tables")
    probe_count: int = Field(2000, ge=0, description="Quasi-random off-axis probe pairs")
    floor: Optional[float] = Field(None, gt=0, description="CDF denominator floor; settings default when omitted")

    class Config:
        json_schema_extra = {"example": {"starts": 5, "max_iterations": 10000, "tolerance": 1e-14}}
