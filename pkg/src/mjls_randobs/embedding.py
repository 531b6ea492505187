"""Extended chain on <N> x <M> x <N> x <T> that makes the closed loop a standard MJLS.

A state chi = (alpha, beta, gamma, delta) collects the current mode, the
randomizing-chain state, the last observed mode and the elapsed-time clock.
Flat indices are lexicographic with delta varying fastest.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch
from .model import MjlsModel
from .modes import StochasticMatrix, floor_mod_T, validate_stochastic
from .obsproc import ObservationModel


class ExtendedState(NamedTuple):
    alpha: int
    beta: int
    gamma: int
    delta: int


def flat_index(state: ExtendedState, dims: tuple[int, int, int, int]) -> int:
    """1-based flat index of ``state`` for extents ``(N, M, N, T)``."""
    idx = 0
    for value, extent in zip(state, dims):
        if not 1 <= value <= extent:
            raise IndexError(f"component {value} outside <{extent}> in {tuple(state)}")
        idx = idx * extent + (value - 1)
    return idx + 1


def unflatten(index: int, dims: tuple[int, int, int, int]) -> ExtendedState:
    """Inverse of :func:`flat_index`."""
    if not 1 <= index <= int(np.prod(dims)):
        raise IndexError(f"flat index {index} out of range")
    parts = np.unravel_index(index - 1, dims)
    return ExtendedState(*(int(p) + 1 for p in parts))


@dataclass(frozen=True, eq=False)
class ExtendedChain:
    """Dense transition matrix ``pbar`` over all N*M*N*T extended states.

    ``alpha``, ``beta``, ``gamma``, ``delta`` hold the 0-based components of each
    flat (0-based) index, for vectorized lookups.
    """

    N: int
    M: int
    T: int
    pbar: StochasticMatrix
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.N, self.M, self.N, self.T)

    @property
    def size(self) -> int:
        return self.N * self.M * self.N * self.T

    def index(self, state) -> int:
        return flat_index(ExtendedState(*state), self.dims)

    def state(self, index: int) -> ExtendedState:
        return unflatten(index, self.dims)


def _components(N: int, M: int, T: int):
    grid = np.indices((N, M, N, T)).reshape(4, -1)
    return tuple(np.ascontiguousarray(g) for g in grid)


def build_extended_chain(model: MjlsModel, obs: ObservationModel) -> ExtendedChain:
    """Transition matrix of the extended chain.

    From chi = (a, b, g, d) the pair (a', b') is drawn with probability
    P[a, a'] Q[b, b']. If b' is an observation state the successor is
    (a', b', a', 1); otherwise it is (a', b', g, floor_mod(d + 1)).
    """
    if not isinstance(model, MjlsModel) or not isinstance(obs, ObservationModel):
        raise DimensionMismatch("expected an MjlsModel and an ObservationModel")
    N, M, T = model.N, obs.M, obs.T
    P, Q = model.P.entries, obs.Q.entries
    observed = obs.observed_mask()
    a, b, g, d = _components(N, M, T)
    S = a.size
    dims = (N, M, N, T)

    pbar = np.zeros((S, S))
    a2, b2 = np.meshgrid(np.arange(N), np.arange(M), indexing="ij")
    a2, b2 = a2.ravel(), b2.ravel()
    hit = observed[b2]
    for i in range(S):
        g2 = np.where(hit, a2, g[i])
        d2 = np.where(hit, 0, d[i] + 1 if d[i] + 1 < T else 0)
        cols = np.ravel_multi_index((a2, b2, g2, d2), dims)
        np.add.at(pbar[i], cols, P[a[i], a2] * Q[b[i], b2])
    return ExtendedChain(N, M, T, validate_stochastic(pbar), a, b, g, d)


def initial_extended_state(obs: ObservationModel, r0: int, s0: int, sigma0: int, tau0: int) -> ExtendedState:
    """Extended state at time 0 for the given initial data (all 1-based, ``tau0 < 0``).

    Starting inside the observation set means an observation at time 0, so the
    last observed mode is ``r0`` and the clock reads 1. Otherwise the
    pre-observation values ``sigma0`` and ``floor_mod(1 - tau0)`` apply.
    """
    if tau0 >= 0:
        raise ValueError(f"tau0 must be negative, got {tau0}")
    if s0 in obs.lam:
        return ExtendedState(r0, s0, r0, 1)
    return ExtendedState(r0, s0, sigma0, floor_mod_T(1 - tau0, obs.T))


def reachable_states(chain: ExtendedChain, initial) -> set[int]:
    """1-based flat indices reachable from ``initial`` (ExtendedStates or flat indices)."""
    start = {s if isinstance(s, (int, np.integer)) else chain.index(s) for s in initial}
    if not start:
        raise ValueError("initial set must be nonempty")
    succ = chain.pbar.edges()
    seen = set(start)
    queue = deque(start)
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(succ[i - 1]) + 1:
            j = int(j)
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def admissible_states(chain: ExtendedChain, obs: ObservationModel) -> set[int]:
    """1-based flat indices of every extended state some initial condition can produce.

    These are the states with beta outside the observation set, plus
    (alpha, beta, alpha, 1) for beta inside it. The set is forward closed.
    """
    observed = obs.observed_mask()[chain.beta]
    ok = ~observed | ((chain.gamma == chain.alpha) & (chain.delta == 0))
    if obs.initial_states and len(obs.initial_states) < obs.M:
        starts = np.isin(chain.beta + 1, sorted(obs.initial_states)) & ok
        return reachable_states(chain, np.flatnonzero(starts) + 1)
    return set((np.flatnonzero(ok) + 1).tolist())


def observed_start_states(chain: ExtendedChain, obs: ObservationModel) -> set[int]:
    """1-based flat indices reachable from a start with an observation at time 0."""
    observed = obs.observed_mask()[chain.beta]
    starts = observed & (chain.gamma == chain.alpha) & (chain.delta == 0)
    return reachable_states(chain, np.flatnonzero(starts) + 1)


def transition_counts(chain: ExtendedChain, trajectory) -> np.ndarray:
    """Count matrix of consecutive pairs in a 0-based flat-index trajectory."""
    traj = np.asarray(trajectory, dtype=np.intp)
    counts = np.zeros((chain.size, chain.size))
    np.add.at(counts, (traj[:-1], traj[1:]), 1.0)
    return counts


def empirical_transition_error(chain: ExtendedChain, trajectory, threshold: float = 0.01) -> float:
    """Largest |empirical - pbar| over visited rows and entries with pbar >= ``threshold``."""
    counts = transition_counts(chain, trajectory)
    visits = counts.sum(axis=1)
    rows = visits > 0
    freq = counts[rows] / visits[rows, None]
    target = chain.pbar.entries[rows]
    sel = target >= threshold
    if not np.any(sel):
        return 0.0
    return float(np.abs(freq - target)[sel].max())
