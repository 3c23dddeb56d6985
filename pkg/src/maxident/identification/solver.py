import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import isotonic_regression
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import lsqr
from scipy.stats import qmc

from ..config.settings import settings
from ..exceptions import ConfigurationError, HypothesisViolationError
from ..max_model.joint import JointCdf2D
from ..models.reports import RecoveryResult, SolverReport
from ..models.specs import GeneratorSpec, GridSolverConfig, Regime, ScaleCoefficients
from .common import NODE_RTOL, NodeIndex, model_residual, monotone_cdf, recovered_cdf, recovered_support, resolve_floor

logger = logging.getLogger(__name__)


@dataclass
class LeastSquaresProblem:
    """Rows y = -phi(M1) - phi(M2) with phi = log F_Z1 on the parameter nodes"""
    nodes: np.ndarray
    matrix: sparse.csr_matrix
    target: np.ndarray
    determined: np.ndarray
    probes_used: int
    skipped_probes: int


@dataclass
class StartOutcome:
    phi: np.ndarray
    objective: float
    iterations: int
    trace: List[float] = field(default_factory=list)


def _project(phi: np.ndarray, log_floor: float) -> np.ndarray:
    out = isotonic_regression(phi, increasing=True).x if phi.size > 1 else phi.copy()
    return np.maximum(np.minimum(out, 0.0), log_floor)


class GridSolver:
    """Projected least-squares recovery of F_Z1 for positive coefficients.

    Residuals are taken in log space: for a probe (t1, t2),
    log G - log F_U(t1) - log F_V(t2) = -log F_Z1(max(t1/a, t2/c)) - log F_Z1(max(t1/b, t2/d)),
    which is linear in phi = log F_Z1. Probes are the diagonal, marginal-edge
    pairs and an unscrambled Halton subset of the probe coordinates.
    """

    def __init__(self, coeffs: ScaleCoefficients, grid: Sequence[float], config: GridSolverConfig = None,
                 floor: Optional[float] = None):
        if coeffs.regime != Regime.ALL_POSITIVE:
            raise ConfigurationError("the grid solver needs all-positive coefficients")
        self.coeffs = coeffs
        self.grid = np.unique(np.asarray(grid, dtype=float))
        self.config = config or GridSolverConfig()
        self.floor = resolve_floor(self.config.floor if floor is None else floor)
        a, b, c, d = coeffs.as_tuple()
        g = self.grid
        self.images = np.unique(np.concatenate([g, g / a, g / b, g / c, g / d]))
        scaled = [self.images * k for k in (a, b, c, d)]
        self.coordinates = NodeIndex(np.concatenate([g] + scaled)).values

    def probe_pairs(self):
        """Diagonal, marginal-edge and quasi-random probe pairs over the probe coordinates"""
        a, b, c, d = self.coeffs.as_tuple()
        p = self.coordinates
        t1 = [p]
        t2 = [p]

        # t2 small enough that both shock maxima are attained by t1
        bound = p * min(c / a, d / b) * (1.0 + NODE_RTOL)
        j = np.searchsorted(p, bound, side="right") - 1
        ok = j >= 0
        t1.append(p[ok])
        t2.append(p[j[ok]])

        bound = p * min(a / c, b / d) * (1.0 + NODE_RTOL)
        i = np.searchsorted(p, bound, side="right") - 1
        ok = i >= 0
        t1.append(p[i[ok]])
        t2.append(p[ok])

        structural = np.unique(np.column_stack([np.concatenate(t1), np.concatenate(t2)]), axis=0)
        pairs = [structural]
        if self.config.probe_count > 0:
            halton = qmc.Halton(d=2, scramble=False).random(self.config.probe_count)
            cells = np.minimum((halton * p.size).astype(np.int64), p.size - 1)
            pairs.append(np.unique(np.column_stack([p[cells[:, 0]], p[cells[:, 1]]]), axis=0))

        stacked = np.concatenate(pairs)
        is_structural = np.zeros(stacked.shape[0], dtype=bool)
        is_structural[: structural.shape[0]] = True
        return stacked[:, 0], stacked[:, 1], is_structural

    def build_problem(self, g: JointCdf2D) -> LeastSquaresProblem:
        a, b, c, d = self.coeffs.as_tuple()
        t1, t2, is_structural = self.probe_pairs()
        fu = np.asarray(g.marginal_u(t1), dtype=float)
        fv = np.asarray(g.marginal_v(t2), dtype=float)
        joint = np.asarray(g.evaluate(t1, t2), dtype=float)
        above = (fu >= self.floor) & (fv >= self.floor) & (joint >= self.floor)
        skipped = int((~above).sum())
        t1, t2, fu, fv, joint = t1[above], t2[above], fu[above], fv[above], joint[above]
        is_structural = is_structural[above]

        m1 = np.maximum(t1 / a, t2 / c)
        m2 = np.maximum(t1 / b, t2 / d)
        # diagonal and marginal-edge rows define the node set; quasi-random rows off that set are dropped
        core = NodeIndex(np.concatenate([self.images, m1[is_structural], m2[is_structural]]))
        i1 = core.lookup(m1)
        i2 = core.lookup(m2)
        on_lattice = (i1 >= 0) & (i2 >= 0)
        if not on_lattice.all():
            logger.debug(f"Dropped {int((~on_lattice).sum())} quasi-random probes referencing nodes off the lattice")
        i1, i2 = i1[on_lattice], i2[on_lattice]
        target = (np.log(joint) - np.log(fu) - np.log(fv))[on_lattice]

        used = np.unique(np.concatenate([i1, i2]))
        if used.size == 0:
            raise HypothesisViolationError("no probe pair has joint CDF values above the floor")
        remap = np.full(len(core), -1, dtype=np.int64)
        remap[used] = np.arange(used.size)
        c1, c2 = remap[i1], remap[i2]
        rows = np.arange(c1.size)
        matrix = sparse.coo_matrix(
            (np.full(2 * rows.size, -1.0), (np.concatenate([rows, rows]), np.concatenate([c1, c2]))),
            shape=(rows.size, used.size),
        ).tocsr()

        return LeastSquaresProblem(
            nodes=core.values[used],
            matrix=matrix,
            target=target,
            determined=_determined_nodes(c1, c2, used.size),
            probes_used=int(rows.size),
            skipped_probes=skipped,
        )

    def initial_tables(self, size: int) -> List[np.ndarray]:
        """Uniform-spread starts ((rank + 1) / (n + 1)) ** gamma in log space"""
        base = np.log(np.arange(1, size + 1) / (size + 1.0))
        return [(0.5 * 2.0 ** k) * base for k in range(self.config.starts)]

    def run_start(self, problem: LeastSquaresProblem, start: np.ndarray) -> StartOutcome:
        """Projected Gauss-Newton with a projected-gradient fallback"""
        A, y = problem.matrix, problem.target
        log_floor = math.log(self.floor)
        lipschitz = max(float(abs(A).sum(axis=0).max()) * float(abs(A).sum(axis=1).max()), 1e-300)

        def objective(phi: np.ndarray) -> float:
            r = A @ phi - y
            return float(r @ r)

        phi = _project(np.asarray(start, dtype=float), log_floor)
        obj = objective(phi)
        trace = [obj]
        iterations = 0
        for iterations in range(1, self.config.max_iterations + 1):
            residual = y - A @ phi
            step = lsqr(A, residual, atol=1e-15, btol=1e-15, iter_lim=10 * A.shape[1])[0]
            cand = _project(phi + step, log_floor)
            cand_obj = objective(cand)
            if cand_obj >= obj:
                cand = _project(phi + (A.T @ residual) / lipschitz, log_floor)
                cand_obj = objective(cand)
            decrease = obj - cand_obj
            if decrease > 0:
                phi, obj = cand, cand_obj
                trace.append(obj)
            if decrease < self.config.tolerance:
                break
        return StartOutcome(phi=phi, objective=obj, iterations=iterations, trace=trace)

    def solve(self, problem: LeastSquaresProblem, starts: Optional[Sequence[np.ndarray]] = None) -> List[StartOutcome]:
        """Run every start; multistarts run concurrently and come back in start order"""
        if starts is None:
            starts = self.initial_tables(problem.nodes.size)
        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            return list(pool.map(lambda s: self.run_start(problem, s), starts))

    def tables(self, g: JointCdf2D, problem: LeastSquaresProblem, phi: np.ndarray):
        """Recovered values: F_Z1 on the parameter nodes, F_X and F_Y on the usable grid nodes"""
        a, b, c, d = self.coeffs.as_tuple()
        index = NodeIndex(problem.nodes)
        fz = np.exp(phi)
        t = self.grid
        fu = np.asarray(g.marginal_u(t), dtype=float)
        fv = np.asarray(g.marginal_v(t), dtype=float)
        idx = [index.lookup(t / k) for k in (a, b, c, d)]
        keep = np.all([i >= 0 for i in idx], axis=0) & (fu >= self.floor) & (fv >= self.floor)
        den_u = np.where(keep, fz[idx[0]] * fz[idx[1]], 1.0)
        den_v = np.where(keep, fz[idx[2]] * fz[idx[3]], 1.0)
        keep &= (den_u >= self.floor) & (den_v >= self.floor)
        fx = monotone_cdf(fu[keep] / den_u[keep])
        fy = monotone_cdf(fv[keep] / den_v[keep])
        return keep, fx, fy, monotone_cdf(fz)

    def recover(self, g: JointCdf2D, starts: Optional[Sequence[np.ndarray]] = None,
                generator: GeneratorSpec = None, residual_g: JointCdf2D = None) -> RecoveryResult:
        start_time = time.time()
        problem = self.build_problem(g)
        outcomes = self.solve(problem, starts)
        best = min(range(len(outcomes)), key=lambda k: (outcomes[k].objective, k))
        chosen = outcomes[best]

        keep, fx, fy, fz = self.tables(g, problem, chosen.phi)
        if keep.sum() < 2:
            raise HypothesisViolationError("fewer than two grid nodes are recoverable above the CDF floor")
        agreement = 0.0
        for outcome in outcomes:
            other_keep, ox, oy, oz = self.tables(g, problem, outcome.phi)
            if not np.array_equal(other_keep, keep):
                agreement = math.inf
                break
            agreement = max(agreement, float(np.max(np.abs(ox - fx))), float(np.max(np.abs(oy - fy))),
                            float(np.max(np.abs(oz - fz))))
        agreed = agreement <= self.config.agreement_tolerance
        undetermined = int((~problem.determined).sum())

        t = self.grid[keep]
        support = recovered_support(g, np.concatenate([t, problem.nodes]))
        result = RecoveryResult(
            method="grid_solver",
            grid=t.tolist(),
            fx_hat=recovered_cdf(t, fx, support),
            fy_hat=recovered_cdf(t, fy, support),
            fz1_hat=recovered_cdf(problem.nodes, fz, support),
            sup_residual=0.0,
            skipped_nodes=self.grid[~keep].tolist(),
            solver_report=SolverReport(
                starts=len(outcomes),
                best_start=best,
                iterations=[o.iterations for o in outcomes],
                start_objectives=[o.objective for o in outcomes],
                objective_trace=chosen.trace,
                agreement=agreement,
                agreed=agreed,
                parameter_nodes=int(problem.nodes.size),
                undetermined_nodes=undetermined,
                probes_used=problem.probes_used,
                skipped_probes=problem.skipped_probes,
            ),
            ambiguous=not agreed,
            notes=self.hypothesis_notes(g),
        )
        result.sup_residual = model_residual(residual_g or g, self.coeffs, result, t, generator)

        if undetermined:
            result.notes.append(f"{undetermined} F_Z1 nodes are only weakly determined by the probe pairs")
        if not agreed:
            logger.warning(f"Multistarts disagree by {agreement:.3e}; uniqueness not confirmed")
        elapsed_ms = int((time.time() - start_time) * 1000)
        logger.info(f"Grid solver finished in {elapsed_ms}ms: best start {best}, "
                    f"objective {chosen.objective:.3e}, sup residual {result.sup_residual:.3e}")
        return result

    def hypothesis_notes(self, g: JointCdf2D) -> List[str]:
        a, b = self.coeffs.a, self.coeffs.b
        if a == b:
            return []
        if g.system is not None and not g.system.fz1.smooth:
            return ["a != b and F_Z1 is not continuously differentiable: the uniqueness hypothesis is violated"]
        if g.system is None:
            return ["a != b: uniqueness needs a continuously differentiable F_Z1, which samples cannot confirm"]
        return []


def _determined_nodes(c1: np.ndarray, c2: np.ndarray, size: int) -> np.ndarray:
    """Nodes whose probe-graph component carries an odd cycle.

    Each row pins phi(i) + phi(j); a component is pinned exactly when it is not
    bipartite, i.e. when i and its copy meet in the bipartite double cover.
    """
    rows = np.concatenate([c1, c2])
    cols = np.concatenate([c2 + size, c1 + size])
    cover = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(2 * size, 2 * size))
    _, labels = connected_components(cover, directed=False)
    return labels[:size] == labels[size:]


def recover_positive_general(g: JointCdf2D, coeffs: ScaleCoefficients, grid: Sequence[float],
                             config: GridSolverConfig = None, starts: Optional[Sequence[np.ndarray]] = None) -> RecoveryResult:
    """Recover F_X, F_Y, F_Z1 for positive coefficients with the multistart grid solver"""
    return GridSolver(coeffs, grid, config).recover(g, starts)
