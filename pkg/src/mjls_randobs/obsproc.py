"""Observation processes induced by a randomizing Markov chain.

An observation of the mode happens at every time ``k`` with ``s(k)`` in the
observation set. States are 1-based at the public surface.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateDistribution, LambdaNotRecurrent
from .modes import StochasticMatrix, validate_stochastic

RENEWAL_TOL = 1e-9


def check_recurrent(Q: StochasticMatrix, lam) -> bool:
    """True iff every closed communicating class of ``Q`` meets ``lam``.

    Classes are the strongly connected components of the graph of strictly
    positive transitions; a class is closed when no edge leaves it.
    """
    adj = Q.edges()
    n_comp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    src, dst = np.nonzero(adj)
    leaves = np.zeros(n_comp, dtype=bool)
    leaves[labels[src][labels[src] != labels[dst]]] = True
    hit = np.zeros(n_comp, dtype=bool)
    hit[labels[[i - 1 for i in lam]]] = True
    return bool(np.all(hit | leaves))


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """Randomizing chain ``Q``, observation set ``lam`` and clock modulus ``T``.

    ``initial_states`` lists the admissible starting states of the chain; it is
    all of ``{1..M}`` unless narrowed by :func:`restrict_to_observation_set`.
    """

    Q: StochasticMatrix
    lam: frozenset
    T: int
    initial_states: frozenset = field(default=frozenset())

    @property
    def M(self) -> int:
        return self.Q.dim

    def observed_mask(self) -> np.ndarray:
        mask = np.zeros(self.M, dtype=bool)
        mask[[i - 1 for i in self.lam]] = True
        return mask


def build_custom(Q, lam, T: int | None = None) -> ObservationModel:
    """Validate an arbitrary chain and observation set. ``T`` defaults to ``M``."""
    if not isinstance(Q, StochasticMatrix):
        Q = validate_stochastic(Q)
    lam = frozenset(int(i) for i in lam)
    if not lam:
        raise ValueError("observation set must be nonempty")
    if not all(1 <= i <= Q.dim for i in lam):
        raise ValueError(f"observation set {sorted(lam)} not contained in <{Q.dim}>")
    if T is None:
        T = Q.dim
    if int(T) != T or T < 1:
        raise ValueError(f"clock modulus must be a positive integer, got {T}")
    if not check_recurrent(Q, lam):
        raise LambdaNotRecurrent(f"a closed class of Q never visits {sorted(lam)}")
    return ObservationModel(Q, lam, int(T), frozenset(range(1, Q.dim + 1)))


def periodic_with_failures_matrix(tau: int, p: float) -> np.ndarray:
    """(tau+1)-state chain: an observation is attempted every ``tau`` steps and succeeds w.p. ``p``.

    State 1 is the observation state, state 2 a failed attempt. Both feed the
    deterministic run 3 -> 4 -> ... -> tau+1, and state tau+1 moves to 1 w.p. ``p``
    and to 2 otherwise. For ``tau == 1`` the run is empty, so states 1 and 2
    move like state tau+1.
    """
    Q = np.zeros((tau + 1, tau + 1))
    if tau == 1:
        Q[:, 0] = p
        Q[:, 1] = 1.0 - p
        return Q
    Q[0, 2] = 1.0
    Q[1, 2] = 1.0
    for i in range(2, tau):
        Q[i, i + 1] = 1.0
    Q[tau, 0] = p
    Q[tau, 1] = 1.0 - p
    return Q


def build_periodic_with_failures(tau: int, p: float, T: int | None = None) -> ObservationModel:
    if int(tau) != tau or tau < 1:
        raise ValueError(f"tau must be a positive integer, got {tau}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"success probability must lie in (0, 1], got {p}")
    return build_custom(periodic_with_failures_matrix(int(tau), p), {1}, T)


def hazard_rates(mu) -> np.ndarray:
    """Conditional stopping probabilities p~_k = p_k / prod_{l<k} (1 - p~_l)."""
    mu = np.asarray(mu, dtype=float)
    out = np.empty_like(mu)
    surv = 1.0
    for k, pk in enumerate(mu):
        if surv <= RENEWAL_TOL:
            if pk > RENEWAL_TOL:
                raise DegenerateDistribution(f"atom {k + 1} has mass {pk} but no survival mass left")
            out[k] = 0.0
            continue
        h = pk / surv
        if h < -RENEWAL_TOL or h > 1 + RENEWAL_TOL:
            raise DegenerateDistribution(f"hazard rate {h} at atom {k + 1} outside [0, 1]")
        out[k] = min(max(h, 0.0), 1.0)
        surv *= 1.0 - out[k]
    return out


def renewal_matrix(mu) -> np.ndarray:
    """tau x tau chain whose returns to state 1 have inter-arrival law ``mu`` on {1..tau}."""
    h = hazard_rates(mu)
    tau = len(h)
    Q = np.zeros((tau, tau))
    for k in range(tau - 1):
        Q[k, 0] = h[k]
        Q[k, k + 1] = 1.0 - h[k]
    Q[tau - 1, 0] = 1.0
    return Q


def build_renewal(mu, T: int | None = None) -> ObservationModel:
    """Renewal observations with finitely supported gap law ``mu = (p_1, ..., p_tau)``.

    Trailing zero atoms are dropped so that the last atom is positive.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size == 0:
        raise DegenerateDistribution("gap law must be a nonempty vector")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > RENEWAL_TOL:
        raise DegenerateDistribution("gap law must be a probability vector")
    support = np.flatnonzero(mu > 0)
    mu = mu[: support[-1] + 1]
    return build_custom(renewal_matrix(mu), {1}, T)


def restrict_to_observation_set(obs: ObservationModel) -> ObservationModel:
    """Same chain, with the admissible initial states narrowed to the observation set.

    Starting inside the set forces an observation at time 0.
    """
    return replace(obs, initial_states=frozenset(obs.lam))


def step_states(cum: np.ndarray, states: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-transform step of many chains at once (0-based states)."""
    return np.count_nonzero(cum[states] <= u[:, None], axis=1)


def chain_from_uniforms(Q: StochasticMatrix, start: int, u) -> np.ndarray:
    """0-based trajectory from 0-based ``start`` driven by the uniforms ``u``."""
    cum = [row.tolist() for row in Q.cumulative()]
    path = [start]
    state = start
    for x in np.asarray(u).tolist():
        state = bisect_right(cum[state], x)
        path.append(state)
    return np.asarray(path, dtype=np.intp)


def sample_path(Q: StochasticMatrix, s0: int, steps: int, rng) -> np.ndarray:
    """One 0-based trajectory of length ``steps + 1`` started at 1-based ``s0``."""
    return chain_from_uniforms(Q, s0 - 1, rng.random(steps))


def sample_observation_times(obs: ObservationModel, s0: int, horizon: int, seed=None) -> list[int]:
    """Times ``k <= horizon`` at which the chain started at ``s0`` sits in the observation set."""
    if not 1 <= s0 <= obs.M:
        raise ValueError(f"initial state {s0} outside <{obs.M}>")
    path = sample_path(obs.Q, s0, horizon, np.random.default_rng(seed))
    return np.flatnonzero(obs.observed_mask()[path]).tolist()


def sample_gaps(obs: ObservationModel, s0: int, num_gaps: int, seed=None, chains: int = 1000) -> np.ndarray:
    """Collect ``num_gaps`` consecutive observation gaps from parallel chains started at ``s0``.

    Each chain contributes the gaps after its first observation, in order.
    """
    rng = np.random.default_rng(seed)
    cum = obs.Q.cumulative()
    mask = obs.observed_mask()
    chains = max(1, min(chains, num_gaps))
    states = np.full(chains, s0 - 1, dtype=np.intp)
    last = np.where(mask[states], 0, -1)
    gaps: list[list[int]] = [[] for _ in range(chains)]
    total, k = 0, 0
    while total < num_gaps:
        k += 1
        states = step_states(cum, states, rng.random(chains))
        hit = mask[states]
        for c in np.flatnonzero(hit & (last >= 0)):
            gaps[c].append(k - last[c])
        total += int(np.count_nonzero(hit & (last >= 0)))
        last = np.where(hit, k, last)
    return np.concatenate([np.asarray(g, dtype=np.int64) for g in gaps])[:num_gaps]


def empirical_gap_law(gaps) -> dict[int, float]:
    values, counts = np.unique(np.asarray(gaps), return_counts=True)
    return {int(v): c / counts.sum() for v, c in zip(values, counts)}
