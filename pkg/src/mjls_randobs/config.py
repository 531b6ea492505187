"""JSON problem description -> validated model objects.

Layout::

    {
      "system": {"A": [...], "B": [...], "P": [[...]]},
      "observation": {"periodic_with_failures": {"tau": 4, "p": 0.5}}
                   | {"renewal": {"mu": [...]}}
                   | {"custom": {"Q": [[...]], "lambda_set": [1, 3]}},
      "T": 4,
      "lmi_states": "auto",
      "solver": {"max_iterations": 500, "margin_target": 1e-7, "tolerance": 1e-10},
      "sim": {"horizon": 50, "num_paths": 100, "x0": [1, 1], "r0": 1, "s0": 1,
              "sigma0": 1, "tau0": -1, "seed": 0}
    }

Matrices are row-major nested lists. Every error names the offending field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, MjlsError
from .model import MjlsModel
from .modes import validate_stochastic
from .obsproc import ObservationModel, build_custom, build_periodic_with_failures, build_renewal
from .sdpsolve import SolverOptions
from .sim import SimConfig
from .synth import STATE_SETS


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    model: MjlsModel
    obs: ObservationModel
    solver: SolverOptions
    sim: SimConfig
    lmi_states: str
    raw: dict
    digest: str


def _get(d: dict, key: str, path: str, required: bool = True, default=None):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _matrix(value, path: str, ndim: int = 2) -> np.ndarray:
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"not a numeric array ({exc})") from None
    if a.ndim != ndim:
        raise ConfigError(path, f"expected a {ndim}-d array, got shape {a.shape}")
    return a


def _int(value, path: str, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return int(value)


def _model(system: dict) -> MjlsModel:
    A = _get(system, "A", "system")
    B = _get(system, "B", "system")
    if not isinstance(A, list) or not A:
        raise ConfigError("system.A", "expected a nonempty list of matrices")
    if not isinstance(B, list) or len(B) != len(A):
        raise ConfigError("system.B", f"expected a list of {len(A)} matrices")
    A = [_matrix(a, f"system.A[{i}]") for i, a in enumerate(A)]
    B = [np.atleast_1d(np.array(b, dtype=float)) for b in B]
    B = [b.reshape(-1, 1) if b.ndim == 1 else b for b in B]
    n = A[0].shape[0]
    for i, a in enumerate(A):
        if a.shape != (n, n):
            raise ConfigError(f"system.A[{i}]", f"expected shape ({n}, {n}), got {a.shape}")
    for i, b in enumerate(B):
        if b.ndim != 2 or b.shape != (n, B[0].shape[1]):
            raise ConfigError(f"system.B[{i}]", f"expected shape ({n}, {B[0].shape[1]}), got {b.shape}")
    P = _matrix(_get(system, "P", "system"), "system.P")
    try:
        P = validate_stochastic(P)
    except MjlsError as exc:
        raise ConfigError("system.P", str(exc)) from None
    if P.dim != len(A):
        raise ConfigError("system.P", f"expected {len(A)}x{len(A)}, got {P.dim}x{P.dim}")
    return MjlsModel.build(A, B, P)


def _observation(raw: dict, T) -> ObservationModel:
    spec = _get(raw, "observation", "")
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("observation", "expected exactly one of periodic_with_failures, renewal, custom")
    (kind, body), = spec.items()
    path = f"observation.{kind}"
    try:
        if kind == "periodic_with_failures":
            tau = _int(_get(body, "tau", path), f"{path}.tau", 1)
            p = _get(body, "p", path)
            if not isinstance(p, (int, float)) or not 0 < p <= 1:
                raise ConfigError(f"{path}.p", "must lie in (0, 1]")
            return build_periodic_with_failures(tau, float(p), T)
        if kind == "renewal":
            mu = _matrix(_get(body, "mu", path), f"{path}.mu", ndim=1)
            return build_renewal(mu, T)
        if kind == "custom":
            Q = _matrix(_get(body, "Q", path), f"{path}.Q")
            try:
                Q = validate_stochastic(Q)
            except MjlsError as exc:
                raise ConfigError(f"{path}.Q", str(exc)) from None
            lam = _get(body, "lambda_set", path)
            if not isinstance(lam, list):
                raise ConfigError(f"{path}.lambda_set", "expected a list of states")
            return build_custom(Q, [_int(x, f"{path}.lambda_set") for x in lam], T)
    except ConfigError:
        raise
    except (MjlsError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    raise ConfigError("observation", f"unknown observation kind {kind!r}")


def _solver(raw: dict) -> SolverOptions:
    body = raw.get("solver", {}) or {}
    if not isinstance(body, dict):
        raise ConfigError("solver", "expected an object")
    known = {"max_iterations", "margin_target", "tolerance"}
    for key in body:
        if key not in known:
            raise ConfigError(f"solver.{key}", "unknown option")
    kw = {}
    if "max_iterations" in body:
        kw["max_iterations"] = _int(body["max_iterations"], "solver.max_iterations", 1)
    for key in ("margin_target", "tolerance"):
        if key in body:
            if not isinstance(body[key], (int, float)) or body[key] <= 0:
                raise ConfigError(f"solver.{key}", "must be a positive number")
            kw[key] = float(body[key])
    return SolverOptions(**kw)


def _sim(raw: dict, model: MjlsModel, obs: ObservationModel) -> SimConfig:
    body = raw.get("sim", {}) or {}
    if not isinstance(body, dict):
        raise ConfigError("sim", "expected an object")
    kw = {}
    for key, lo in (("horizon", 0), ("num_paths", 1), ("seed", 0)):
        if key in body:
            kw[key] = _int(body[key], f"sim.{key}", lo)
    for key in ("r0", "sigma0"):
        if key in body:
            v = _int(body[key], f"sim.{key}", 1)
            if v > model.N:
                raise ConfigError(f"sim.{key}", f"mode {v} outside <{model.N}>")
            kw[key] = v
    if "tau0" in body:
        v = _int(body["tau0"], "sim.tau0")
        if v >= 0:
            raise ConfigError("sim.tau0", "must be negative")
        kw["tau0"] = v
    if "s0" in body:
        s0 = body["s0"]
        if s0 != "uniform":
            s0 = _int(s0, "sim.s0", 1)
            if s0 > obs.M:
                raise ConfigError("sim.s0", f"state {s0} outside <{obs.M}>")
        kw["s0"] = s0
    x0 = body.get("x0", [1.0] * model.n)
    x0 = _matrix(x0, "sim.x0", ndim=1)
    if x0.size != model.n:
        raise ConfigError("sim.x0", f"expected length {model.n}")
    kw["x0"] = tuple(x0.tolist())
    return SimConfig(**kw)


def parse_config(raw: dict, digest: str = "") -> ProblemConfig:
    if not isinstance(raw, dict):
        raise ConfigError("$", "top level must be an object")
    model = _model(_get(raw, "system", ""))
    T = raw.get("T")
    if T is not None:
        T = _int(T, "T", 1)
    obs = _observation(raw, T)
    states = raw.get("lmi_states", "auto")
    if states not in STATE_SETS + ("auto",):
        raise ConfigError("lmi_states", f"expected one of {STATE_SETS + ('auto',)}")
    return ProblemConfig(model, obs, _solver(raw), _sim(raw, model, obs), states, raw, digest)


def load_config(path) -> ProblemConfig:
    data = Path(path).read_bytes()
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_config(raw, hashlib.sha256(data).hexdigest())
