"""Gain extraction and mean-square stability certificates on the extended chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigs

from .embedding import ExtendedChain
from .errors import SingularG
from .lmi import LmiVariableLayout
from .model import GainSchedule, MjlsModel, closed_loop_stack
from .obsproc import ObservationModel, restrict_to_observation_set
from .sdpsolve import SdpSolution

STABILITY_THRESHOLD = 1.0 - 1e-9
COND_LIMIT = 1e12
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class StabilityCertificate:
    spectral_radius: float
    stable: bool
    operator_dim: int

    def to_dict(self) -> dict:
        return {
            "spectral_radius": self.spectral_radius,
            "stable": self.stable,
            "operator_dim": self.operator_dim,
        }


def extract_gains(solution: SdpSolution, layout: LmiVariableLayout) -> GainSchedule:
    """K[gamma, delta] = F[gamma, delta] G[gamma, delta]^{-1}."""
    _, G, F = layout.unpack(solution.assignment)
    K = np.empty((layout.N, layout.T, layout.m, layout.n))
    for g in range(layout.N):
        for d in range(layout.T):
            if np.linalg.cond(G[g, d]) > COND_LIMIT:
                raise SingularG(f"G[{g + 1},{d + 1}] is numerically singular")
            K[g, d] = np.linalg.solve(G[g, d].T, F[g, d].T).T
    return GainSchedule.build(K)


def closed_loop_per_state(model: MjlsModel, chain: ExtendedChain, gains: GainSchedule) -> np.ndarray:
    """Gamma[chi] = A_alpha + B_alpha K_{gamma,delta} for every extended state, shape (S, n, n)."""
    gains.check_compatible(model, chain.T)
    stack = closed_loop_stack(model, gains)
    return stack[chain.alpha, chain.gamma, chain.delta]


def second_moment_matrix(chain: ExtendedChain, gamma: np.ndarray, states=None) -> np.ndarray:
    """Dense matrix of X -> (sum_chi' pbar[chi', chi] Gamma X_chi' Gamma^T)_chi.

    Acts on the row-major vectorization of the stacked (S, n, n) tuple. ``states``
    restricts the operator to a subset of 0-based extended states.
    """
    idx = np.arange(chain.size) if states is None else np.asarray(states)
    n = gamma.shape[1]
    w = chain.pbar.entries[np.ix_(idx, idx)]
    kron = np.einsum("cij,ckl->cikjl", gamma[idx], gamma[idx]).reshape(idx.size, n * n, n * n)
    L = np.einsum("cb,cij->bicj", w, kron)
    return L.reshape(idx.size * n * n, idx.size * n * n)


def _apply_operator(w: np.ndarray, gamma: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = gamma.shape[1]
    X = x.reshape(-1, n, n)
    Y = gamma @ X @ gamma.transpose(0, 2, 1)
    return np.einsum("cb,cij->bij", w, Y).ravel()


def spectral_radius(chain: ExtendedChain, gamma: np.ndarray, states=None) -> tuple[float, int]:
    idx = np.arange(chain.size) if states is None else np.asarray(states)
    n = gamma.shape[1]
    dim = idx.size * n * n
    if dim <= DENSE_LIMIT:
        L = second_moment_matrix(chain, gamma, idx)
        return float(np.max(np.abs(np.linalg.eigvals(L)))), dim
    w = chain.pbar.entries[np.ix_(idx, idx)]
    g = gamma[idx]
    op = LinearOperator((dim, dim), matvec=lambda x: _apply_operator(w, g, x), dtype=float)
    vals = eigs(op, k=1, which="LM", return_eigenvectors=False, v0=np.ones(dim), maxiter=100 * dim)
    return float(np.abs(vals).max()), dim


def certify_mss(model: MjlsModel, chain: ExtendedChain, gains: GainSchedule, states=None) -> StabilityCertificate:
    """Decide mean-square stability of the closed loop driven by the extended chain.

    Stable iff the spectral radius of the second-moment operator is below
    ``1 - 1e-9``. ``states`` (0-based) restricts the check to a forward-closed
    subset of the extended states.
    """
    rho, dim = spectral_radius(chain, closed_loop_per_state(model, chain, gains), states)
    return StabilityCertificate(rho, rho < STABILITY_THRESHOLD, dim)


def observed_start(obs: ObservationModel) -> ObservationModel:
    """Observation model whose chain must start inside the observation set."""
    return restrict_to_observation_set(obs)


STATE_SETS = ("all", "admissible", "observed-start")


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    gains: GainSchedule | None
    solution: SdpSolution
    lmi_states: str
    certificate: StabilityCertificate | None
    attempts: list


def lmi_state_set(chain: ExtendedChain, obs: ObservationModel, which: str):
    """1-based flat indices for a named state set, ``None`` meaning every state."""
    from .embedding import admissible_states, observed_start_states

    if which == "all":
        return None
    if which == "admissible":
        return admissible_states(chain, obs)
    if which == "observed-start":
        return observed_start_states(chain, obs)
    raise ValueError(f"unknown state set {which!r}; expected one of {STATE_SETS} or 'auto'")


def synthesize(model: MjlsModel, obs: ObservationModel, options=None, states: str = "auto", solver="barrier") -> SynthesisResult:
    """Solve the gain LMIs and certify the extracted gains on the full extended chain.

    ``states`` picks the extended states that carry an LMI block. ``"auto"``
    tries every state first, then the admissible states, then the states
    reachable from an observed start, and keeps the first feasible one.
    """
    from .embedding import build_extended_chain
    from .lmi import assemble
    from .sdpsolve import solve_feasibility

    chain = build_extended_chain(model, obs)
    order = STATE_SETS if states == "auto" else (states,)
    attempts = []
    for which in order:
        problem = assemble(model, chain, lmi_state_set(chain, obs, which))
        solution = solve_feasibility(problem, options, solver)
        attempts.append({"states": which, "blocks": problem.num_blocks, "status": solution.status.value, "margin": solution.margin, "iterations": solution.iterations})
        if solution.feasible:
            gains = extract_gains(solution, problem.layout)
            return SynthesisResult(gains, solution, which, certify_mss(model, chain, gains), attempts)
    return SynthesisResult(None, solution, order[-1], None, attempts)
