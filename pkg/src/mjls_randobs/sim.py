"""Monte Carlo simulation of the closed loop under randomized observations."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .embedding import ExtendedChain, ExtendedState, initial_extended_state
from .errors import DimensionMismatch
from .model import GainSchedule, MjlsModel, closed_loop_stack
from .obsproc import ObservationModel, chain_from_uniforms, step_states
from .synth import closed_loop_per_state


@dataclass(frozen=True)
class SimConfig:
    """Initial data and sampling controls.

    ``s0`` is a 1-based chain state or ``"uniform"`` to draw it uniformly from
    the observation model's admissible initial states.
    """

    horizon: int = 50
    num_paths: int = 100
    x0: tuple = (1.0, 1.0)
    r0: int = 1
    s0: int | str = 1
    sigma0: int = 1
    tau0: int = -1
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.num_paths < 1:
            raise ValueError("num_paths must be positive")
        if self.tau0 >= 0:
            raise ValueError("tau0 must be negative")


@dataclass(frozen=True, eq=False)
class SimResult:
    mean_sq_norm: np.ndarray
    paths: np.ndarray | None
    observation_times: list

    @property
    def std_error(self) -> np.ndarray:
        if self.paths is None or self.paths.shape[0] < 2:
            return np.zeros_like(self.mean_sq_norm)
        return self.paths.std(axis=0, ddof=1) / np.sqrt(self.paths.shape[0])

    @property
    def decay_ratio(self) -> float:
        return float(self.mean_sq_norm[-1] / self.mean_sq_norm[0]) if self.mean_sq_norm[0] else float("nan")


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Independent stream for ``path``, keyed by (seed, path) only."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path,)))


def _path_draws(cfg: SimConfig, path: int):
    rng = path_rng(cfg.seed, path)
    u0 = rng.random()
    return u0, rng.random((cfg.horizon, 2))


def _initial_chain_state(obs: ObservationModel, cfg: SimConfig, u0: float) -> int:
    """0-based initial state of the randomizing chain."""
    if cfg.s0 == "uniform":
        pool = sorted(obs.initial_states or range(1, obs.M + 1))
        return pool[int(u0 * len(pool))] - 1
    s0 = int(cfg.s0)
    if not 1 <= s0 <= obs.M:
        raise ValueError(f"s0 = {s0} outside <{obs.M}>")
    return s0 - 1


def _check_inputs(model, obs, cfg):
    if len(cfg.x0) != model.n:
        raise DimensionMismatch(f"x0 has length {len(cfg.x0)}, system order is {model.n}")
    if not (1 <= cfg.r0 <= model.N and 1 <= cfg.sigma0 <= model.N):
        raise ValueError("r0 and sigma0 must be modes in <N>")


def simulate_closed_loop(model: MjlsModel, obs: ObservationModel, gains: GainSchedule, cfg: SimConfig, keep_paths: bool = True) -> SimResult:
    """Sample paths of x(k+1) = (A_r + B_r K_{sigma, floor_mod(k+1-tau)}) x(k).

    The mode chain r and the randomizing chain s run independently. Paths are
    advanced together; each path draws from its own stream.
    """
    gains.check_compatible(model, obs.T)
    _check_inputs(model, obs, cfg)
    H, Pn, T = cfg.horizon, cfg.num_paths, obs.T
    draws = [_path_draws(cfg, i) for i in range(Pn)]
    U = np.stack([d[1] for d in draws]) if H else np.zeros((Pn, 0, 2))
    s = np.array([_initial_chain_state(obs, cfg, d[0]) for d in draws], dtype=np.intp)
    r = np.full(Pn, cfg.r0 - 1, dtype=np.intp)
    tau = np.full(Pn, cfg.tau0, dtype=np.int64)
    sigma = np.full(Pn, cfg.sigma0 - 1, dtype=np.intp)
    x = np.tile(np.asarray(cfg.x0, dtype=float), (Pn, 1))

    cumP, cumQ = model.P.cumulative(), obs.Q.cumulative()
    stack = closed_loop_stack(model, gains)
    observed = obs.observed_mask()
    sq = np.empty((Pn, H + 1))
    sq[:, 0] = np.einsum("pi,pi->p", x, x)
    hits = np.zeros((Pn, H + 1), dtype=bool)
    for k in range(H + 1):
        hit = observed[s]
        hits[:, k] = hit
        if k == H:
            break
        tau = np.where(hit, k, tau)
        sigma = np.where(hit, r, sigma)
        delta = (k - tau) % T
        x = np.einsum("pij,pj->pi", stack[r, sigma, delta], x)
        sq[:, k + 1] = np.einsum("pi,pi->p", x, x)
        r = step_states(cumP, r, U[:, k, 0])
        s = step_states(cumQ, s, U[:, k, 1])
    times = [np.flatnonzero(h).tolist() for h in hits]
    return SimResult(sq.mean(axis=0), sq if keep_paths else None, times)


def simulate_extended_tuple(model: MjlsModel, obs: ObservationModel, cfg: SimConfig) -> np.ndarray:
    """Trajectory of (r, s, sigma, floor_mod(k+1-tau)) built from r and s directly.

    Returns a (horizon + 1, 4) array of 1-based components, using the stream of
    path 0. Does not consult the extended chain's transition matrix.
    """
    H, T = cfg.horizon, obs.T
    u0, U = _path_draws(cfg, 0)
    r = chain_from_uniforms(model.P, cfg.r0 - 1, U[:, 0])
    s = chain_from_uniforms(obs.Q, _initial_chain_state(obs, cfg, u0), U[:, 1])
    k = np.arange(H + 1)
    hit = obs.observed_mask()[s]
    last = np.maximum.accumulate(np.where(hit, k, -1))
    seen = last >= 0
    tau = np.where(seen, last, cfg.tau0)
    sigma = np.where(seen, r[np.maximum(last, 0)] + 1, cfg.sigma0)
    delta = (k - tau) % T + 1
    return np.column_stack([r + 1, s + 1, sigma, delta])


def tuple_to_flat(chain: ExtendedChain, tuples) -> np.ndarray:
    """0-based flat indices for rows of 1-based (alpha, beta, gamma, delta)."""
    t = np.asarray(tuples) - 1
    return np.ravel_multi_index(tuple(t.T), chain.dims)


def second_moment_iterate(model: MjlsModel, chain: ExtendedChain, gains: GainSchedule, chi0, x0, horizon: int) -> np.ndarray:
    """Exact E||x(k)||^2 for k = 0..horizon from extended state ``chi0`` (1-based)."""
    gamma = closed_loop_per_state(model, chain, gains)
    x0 = np.asarray(x0, dtype=float)
    X = np.zeros((chain.size, model.n, model.n))
    X[chain.index(chi0) - 1] = np.outer(x0, x0)
    w = chain.pbar.entries
    out = [float(x0 @ x0)]
    for _ in range(horizon):
        Y = gamma @ X @ gamma.transpose(0, 2, 1)
        X = np.einsum("cb,cij->bij", w, Y)
        out.append(float(np.trace(X, axis1=1, axis2=2).sum()))
    return np.asarray(out)


def initial_state_for(obs: ObservationModel, cfg: SimConfig) -> ExtendedState:
    """Extended state matching a fixed-``s0`` configuration."""
    if cfg.s0 == "uniform":
        raise ValueError("initial extended state needs a fixed s0")
    return initial_extended_state(obs, cfg.r0, int(cfg.s0), cfg.sigma0, cfg.tau0)


def write_summary_csv(path, result: SimResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "mean_sq_norm"])
        for k, v in enumerate(result.mean_sq_norm.tolist()):
            w.writerow([k, repr(v)])


def write_paths_csv(path, result: SimResult) -> None:
    if result.paths is None:
        raise ValueError("result was simulated without keep_paths")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_id", "k", "sq_norm"])
        for pid, row in enumerate(result.paths.tolist()):
            for k, v in enumerate(row):
                w.writerow([pid, k, repr(v)])
