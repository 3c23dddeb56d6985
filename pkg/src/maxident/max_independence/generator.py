import logging
import math
from typing import List, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..config.settings import settings
from ..distributions.univariate import cdf_eval, open_uniforms, quantile, sample_components, uniform_stream, evaluator
from ..exceptions import ConfigurationError, DomainError, UnsupportedSamplerError
from ..models.reports import GeneratorValidationReport
from ..models.specs import DistributionSpec, GeneratorFamily, GeneratorSpec

logger = logging.getLogger(__name__)

_RANGE_SLACK = 1e-12
_BOUNDARY_TOL = 1e-12
_RECTANGLE_TOL = -1e-10
_REJECTION_STREAM = 4


def _check_marginals(marginals: Sequence[DistributionSpec]) -> None:
    if len(marginals) != 4:
        raise ConfigurationError(f"generators take four marginals, got {len(marginals)}")


def ensure_valid(gen: GeneratorSpec) -> None:
    """Structural check that a generator can only produce beta in (0, 1].

    FGM needs alpha in (-1, 0]; tabulated generators need every entry in (0, 1].
    The full lattice validation is validate_generator.
    """
    if gen.family == GeneratorFamily.FGM and not -1.0 < gen.alpha <= 0.0:
        raise ConfigurationError(f"FGM generator needs alpha in (-1, 0], got {gen.alpha}")
    if gen.family == GeneratorFamily.TABULATED4D:
        table = np.asarray(gen.values, dtype=float)
        if table.min() <= 0.0 or table.max() > 1.0:
            raise ConfigurationError("tabulated generator values must lie in (0, 1]")


def beta_eval(gen: GeneratorSpec, marginals: Sequence[DistributionSpec], x1, x2, x3, x4):
    """Evaluate the generator beta(x1, x2, x3, x4); arguments broadcast"""
    _check_marginals(marginals)
    xs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (x1, x2, x3, x4)))
    scalar = xs[0].ndim == 0

    if gen.family == GeneratorFamily.CONSTANT_ONE:
        out = np.ones(xs[0].shape)
    elif gen.family == GeneratorFamily.FGM:
        tail = np.ones(xs[0].shape)
        for spec, x in zip(marginals, xs):
            tail = tail * (1.0 - cdf_eval(spec, x))
        out = 1.0 + gen.alpha * tail
    else:
        out = _tabulated_beta(gen, xs)

    if scalar:
        return float(out)
    return out


def _tabulated_beta(gen: GeneratorSpec, xs: List[np.ndarray]) -> np.ndarray:
    axes = [np.asarray(axis, dtype=float) for axis in gen.axes]
    table = np.asarray(gen.values, dtype=float)
    interp = RegularGridInterpolator(axes, table, method="linear")
    shape = xs[0].shape
    points = np.stack([np.clip(x.reshape(-1), axis[0], axis[-1]) for x, axis in zip(xs, axes)], axis=-1)
    out = interp(points).reshape(shape)
    # beta tends to 1 once any coordinate passes the top of its axis
    beyond = np.zeros(shape, dtype=bool)
    for x, axis in zip(xs, axes):
        beyond |= x > axis[-1]
    return np.where(beyond, 1.0, out)


def probe_axis(spec: DistributionSpec, points: int) -> np.ndarray:
    """Lattice axis: support lower bound, interior quantiles, support upper bound"""
    support = spec.support
    interior = quantile(spec, np.arange(1, points - 1) / (points - 1)) if points > 2 else np.array([])
    lower = support.lower if math.isfinite(support.lower) else quantile(spec, 1e-6)
    upper = support.upper if math.isfinite(support.upper) else math.inf
    return np.unique(np.concatenate([[lower], np.atleast_1d(interior), [upper]]))


def validate_generator(gen: GeneratorSpec, marginals: Sequence[DistributionSpec], lattice_points: int = None) -> GeneratorValidationReport:
    """Check the generator on a probe lattice built from the marginals.

    Reports the beta range, the boundary limit when any coordinate goes to +inf,
    and the 4-dimensional rectangle inequality of F1 F2 F3 F4 beta. Failures are
    reported, never raised.
    """
    _check_marginals(marginals)
    points = lattice_points or settings.generator_lattice_points
    axes = [probe_axis(spec, points) for spec in marginals]
    mesh = np.meshgrid(*axes, indexing="ij")
    failures = []

    beta = np.asarray(beta_eval(gen, marginals, *mesh), dtype=float)
    beta_min = float(beta.min())
    beta_max = float(beta.max())
    range_ok = beta_min > 0.0 and beta_max <= 1.0 + _RANGE_SLACK
    range_witness = None
    if not range_ok:
        flat = int(np.argmin(beta)) if beta_min <= 0.0 else int(np.argmax(beta))
        idx = np.unravel_index(flat, beta.shape)
        range_witness = [float(axis[i]) for axis, i in zip(axes, idx)]
        failures.append("beta outside (0, 1]")

    boundary_dev = 0.0
    for k in range(4):
        probe = list(mesh)
        probe[k] = np.full(mesh[k].shape, np.inf)
        values = np.asarray(beta_eval(gen, marginals, *probe), dtype=float)
        boundary_dev = max(boundary_dev, float(np.max(np.abs(values - 1.0))))
    boundary_ok = boundary_dev <= _BOUNDARY_TOL
    if not boundary_ok:
        failures.append("beta does not tend to 1 at the upper boundary")

    joint = beta
    for spec, m in zip(marginals, mesh):
        joint = joint * cdf_eval(spec, m)
    rect = joint
    for axis in range(4):
        rect = np.diff(rect, axis=axis)
    rectangle_min = float(rect.min()) if rect.size else 0.0
    rectangle_ok = rectangle_min >= _RECTANGLE_TOL
    rectangle_witness = None
    if not rectangle_ok:
        idx = np.unravel_index(int(np.argmin(rect)), rect.shape)
        rectangle_witness = [float(axis[i]) for axis, i in zip(axes, idx)]
        failures.append("rectangle inequality")

    passed = not failures
    if passed:
        logger.info(f"Generator {gen.family.value} passed validation on a {points}^4 lattice")
    else:
        logger.warning(f"Generator {gen.family.value} failed validation: {', '.join(failures)}")

    return GeneratorValidationReport(
        family=gen.family.value,
        passed=passed,
        lattice_points=points,
        beta_min=beta_min,
        beta_max=beta_max,
        range_ok=range_ok,
        range_witness=range_witness,
        boundary_ok=boundary_ok,
        boundary_max_deviation=boundary_dev,
        rectangle_ok=rectangle_ok,
        rectangle_min=rectangle_min,
        rectangle_witness=rectangle_witness,
        failures=failures,
    )


def sample_maxind(gen: GeneratorSpec, marginals: Sequence[DistributionSpec], n: int, seed: int) -> np.ndarray:
    """Draw n rows (X1, X2, X3, X4) from the max-independent law F1 F2 F3 F4 beta.

    FGM draws copula uniforms by rejection against the independent product,
    accepting with probability (1 + alpha prod(1 - 2u)) / (1 + |alpha|), then
    maps them through the marginal quantiles. The constant generator is plain
    independent sampling.
    """
    _check_marginals(marginals)
    if n < 1:
        raise DomainError(f"sample size must be at least 1, got {n}")
    if gen.family == GeneratorFamily.CONSTANT_ONE:
        return sample_components(marginals, n, seed)
    if gen.family != GeneratorFamily.FGM:
        raise UnsupportedSamplerError(f"no sampler for generator family {gen.family.value}")
    ensure_valid(gen)

    alpha = gen.alpha
    bound = 1.0 + abs(alpha)
    rng = uniform_stream(seed, _REJECTION_STREAM)
    accepted = []
    have = 0
    proposals = 0
    while have < n:
        batch = max(64, int(math.ceil((n - have) * bound * 1.1)))
        u = open_uniforms(rng, (batch, 4))
        gate = open_uniforms(rng, batch)
        density = 1.0 + alpha * np.prod(1.0 - 2.0 * u, axis=1)
        keep = u[gate * bound <= density]
        accepted.append(keep)
        have += keep.shape[0]
        proposals += batch
    uniforms = np.concatenate(accepted)[:n]
    logger.info(f"FGM sampler accepted {have} of {proposals} proposals (alpha={alpha})")

    columns = [np.asarray(evaluator(spec).ppf(uniforms[:, i]), dtype=float) for i, spec in enumerate(marginals)]
    return np.column_stack(columns)
