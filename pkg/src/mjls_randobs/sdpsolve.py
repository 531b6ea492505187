"""Strict feasibility of block LMIs by a log-det barrier method.

The solver maximizes the common margin t subject to Block_b(v) - t I >= 0 for
every block and |v_i| <= 1. The LMIs are homogeneous in v, so the box only
fixes the scale: the optimal margin is positive exactly when a strictly
feasible point exists.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, sparse

from .lmi import LmiProblem

log = logging.getLogger(__name__)


class SdpStatus(str, enum.Enum):
    FEASIBLE = "Feasible"
    MARGIN_TOO_SMALL = "MarginTooSmall"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 500
    margin_target: float = 1e-7
    tolerance: float = 1e-10
    # Outer barrier loop stops once the optimality gap bound falls below
    # gap_abs or gap_rel * |t|.
    gap_abs: float = 1e-9
    gap_rel: float = 1e-3
    barrier_growth: float = 20.0


@dataclass(frozen=True, eq=False)
class SdpSolution:
    assignment: np.ndarray
    margin: float
    status: SdpStatus
    iterations: int = 0
    scale: float = 1.0
    history: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status is SdpStatus.FEASIBLE


Solver = Callable[[LmiProblem, SolverOptions], SdpSolution]


def verify_margin(problem: LmiProblem, v) -> float:
    """Smallest eigenvalue over all blocks, rebuilt from the matrix variables."""
    R, G, F = problem.layout.unpack(v)
    blocks = problem.blocks_from(R, G, F)
    return float(np.linalg.eigvalsh(blocks).min())


def _classify(problem: LmiProblem, v, iterations, options, history, status=None) -> SdpSolution:
    margin = verify_margin(problem, v)
    scale = 1.0 + float(np.max(np.abs(v), initial=0.0))
    if status is None:
        ok = margin > options.margin_target * scale
        status = SdpStatus.FEASIBLE if ok else SdpStatus.MARGIN_TOO_SMALL
    return SdpSolution(np.asarray(v, dtype=float), margin, status, iterations, scale, history)


class _Barrier:
    """phi(z) = -s t - sum_b log det S_b - sum_i log(1 - v_i^2), z = (v, t)."""

    def __init__(self, problem: LmiProblem):
        k = problem.block_size
        nb = problem.num_blocks
        eye = np.tile(np.eye(k).ravel(), nb)
        tcol = sparse.csr_matrix(-eye.reshape(-1, 1))
        self.J = sparse.hstack([problem.J, tcol], format="csr")
        self.JT = self.J.T.tocsr()
        self.k, self.nb = k, nb
        self.nv = problem.layout.count
        self.m_total = nb * k + 2 * self.nv

    def slacks(self, z):
        return (self.J @ z).reshape(self.nb, self.k, self.k)

    def value(self, z, s):
        v = z[:-1]
        if np.any(np.abs(v) >= 1.0):
            return np.inf
        try:
            L = np.linalg.cholesky(self.slacks(z))
        except np.linalg.LinAlgError:
            return np.inf
        logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum()
        return -s * z[-1] - logdet - np.log1p(-v) .sum() - np.log1p(v).sum()

    def derivatives(self, z, s):
        v = z[:-1]
        Sinv = np.linalg.inv(self.slacks(z))
        Sinv = 0.5 * (Sinv + Sinv.transpose(0, 2, 1))
        g = -(self.JT @ Sinv.ravel())
        g[:-1] += 1.0 / (1.0 - v) - 1.0 / (1.0 + v)
        g[-1] -= s
        W = np.einsum("bij,bkl->bikjl", Sinv, Sinv).reshape(self.nb, self.k * self.k, self.k * self.k)
        idx = np.arange(self.nb + 1)
        Wm = sparse.bsr_matrix((W, np.arange(self.nb), idx), shape=(self.nb * self.k**2,) * 2)
        H = (self.JT @ (Wm @ self.J)).toarray()
        H[np.arange(self.nv), np.arange(self.nv)] += 1.0 / (1.0 - v) ** 2 + 1.0 / (1.0 + v) ** 2
        return g, H


def _newton_direction(H, g):
    for reg in (0.0, 1e-12):
        try:
            c = linalg.cho_factor(H + reg * np.eye(H.shape[0]) if reg else H)
            step = -linalg.cho_solve(c, g)
        except (linalg.LinAlgError, ValueError):
            continue
        if np.all(np.isfinite(step)):
            return step
    return None


def barrier_solve(problem: LmiProblem, options: SolverOptions = SolverOptions()) -> SdpSolution:
    """Built-in solver: barrier path following on the max-margin program."""
    bar = _Barrier(problem)
    lay = problem.layout
    c = 0.5
    R = np.broadcast_to(c * np.eye(lay.n), (lay.S, lay.n, lay.n))
    G = np.broadcast_to(c * np.eye(lay.n), (lay.N, lay.T, lay.n, lay.n))
    F = np.zeros((lay.N, lay.T, lay.m, lay.n))
    v0 = lay.pack(R, G, F)
    lam0 = np.linalg.eigvalsh(problem.evaluate(v0)).min()
    z = np.append(v0, lam0 - c)

    s = bar.m_total / max(abs(z[-1]), 1.0)
    iterations = 0
    history = []
    while True:
        # centering at barrier weight s
        while True:
            if iterations >= options.max_iterations:
                return _classify(problem, z[:-1], iterations, options, history, SdpStatus.ITERATION_LIMIT)
            g, H = bar.derivatives(z, s)
            dz = _newton_direction(H, g)
            if dz is None:
                return _classify(problem, z[:-1], iterations, options, history, SdpStatus.NUMERICAL_FAILURE)
            iterations += 1
            decrement = float(-g @ dz)
            if decrement / 2.0 <= options.tolerance:
                break
            f0 = bar.value(z, s)
            step = 1.0
            while True:
                f1 = bar.value(z + step * dz, s)
                if f1 <= f0 - 0.25 * step * decrement:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            if step < 1e-14:
                # no progress possible at this weight; treat as centered
                break
            z = z + step * dz
        gap = bar.m_total / s
        history.append((iterations, float(s), float(z[-1]), gap))
        log.debug("iter %d weight %.3e margin %.6e gap %.3e", iterations, s, z[-1], gap)
        if gap <= max(options.gap_abs, options.gap_rel * abs(z[-1])):
            return _classify(problem, z[:-1], iterations, options, history)
        s *= options.barrier_growth


def cvxpy_solve(problem: LmiProblem, options: SolverOptions = SolverOptions()) -> SdpSolution:
    """Same max-margin program handed to an external conic solver via cvxpy."""
    import cvxpy as cp

    k, nb = problem.block_size, problem.num_blocks
    v = cp.Variable(problem.layout.count)
    t = cp.Variable()
    flat = problem.J @ v
    cons = [cp.abs(v) <= 1]
    for b in range(nb):
        X = cp.reshape(flat[b * k * k : (b + 1) * k * k], (k, k), order="C")
        cons.append(0.5 * (X + X.T) - t * np.eye(k) >> 0)
    prob = cp.Problem(cp.Maximize(t), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.SolverError:
        return SdpSolution(np.zeros(problem.layout.count), -np.inf, SdpStatus.NUMERICAL_FAILURE)
    if v.value is None:
        return SdpSolution(np.zeros(problem.layout.count), -np.inf, SdpStatus.NUMERICAL_FAILURE)
    return _classify(problem, np.asarray(v.value), 0, options, [])


SOLVERS: dict[str, Solver] = {"barrier": barrier_solve, "cvxpy": cvxpy_solve}


def solve_feasibility(problem: LmiProblem, options: SolverOptions | None = None, solver: str | Solver = "barrier") -> SdpSolution:
    """Find a strictly feasible point of ``problem``.

    Never raises on solver trouble; failures are reported through ``status``.
    ``solver`` names an entry of :data:`SOLVERS` or is a callable with the same
    signature.
    """
    options = options or SolverOptions()
    fn = SOLVERS[solver] if isinstance(solver, str) else solver
    return fn(problem, options)
