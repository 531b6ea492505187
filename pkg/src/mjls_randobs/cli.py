"""Command-line front end.

Subcommands: ``synthesize``, ``simulate``, ``validate-embedding`` and ``gaps``.
Exit codes: 0 success, 1 bad input, 2 solver failure, 3 feasible LMIs whose
gains fail the stability certificate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ProblemConfig, load_config
from .embedding import build_extended_chain, empirical_transition_error
from .errors import ConfigError, DimensionMismatch
from .model import GainSchedule
from .obsproc import empirical_gap_law, sample_gaps
from .sim import (
    simulate_closed_loop,
    simulate_extended_tuple,
    tuple_to_flat,
    write_paths_csv,
    write_summary_csv,
)
from .synth import certify_mss, synthesize

log = logging.getLogger("mjls_randobs")

EMBEDDING_STEPS = 200_000
EMBEDDING_TOL = 0.02
EMBEDDING_MIN_PROB = 0.01


def gains_to_dict(gains: GainSchedule, cfg: ProblemConfig | None = None, **extra) -> dict:
    N, T, m, n = gains.K.shape
    out = {"N": N, "T": T, "m": m, "n": n}
    if cfg is not None:
        out["config_hash"] = cfg.digest
        out["seed"] = cfg.sim.seed
    out.update(extra)
    out["gains"] = [
        {"gamma": g + 1, "delta": d + 1, "K": gains.K[g, d].tolist()} for g in range(N) for d in range(T)
    ]
    return out


def load_gains(path) -> GainSchedule:
    data = json.loads(Path(path).read_text())
    N, T, m, n = (int(data[k]) for k in ("N", "T", "m", "n"))
    K = np.full((N, T, m, n), np.nan)
    for entry in data["gains"]:
        K[entry["gamma"] - 1, entry["delta"] - 1] = np.asarray(entry["K"], dtype=float).reshape(m, n)
    if np.isnan(K).any():
        raise DimensionMismatch("gains file does not define every (gamma, delta)")
    return GainSchedule.build(K)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _apply_overrides(cfg: ProblemConfig, args) -> ProblemConfig:
    sim = cfg.sim
    for flag, field in (("seed", "seed"), ("paths", "num_paths"), ("horizon", "horizon")):
        value = getattr(args, flag, None)
        if value is not None:
            sim = replace(sim, **{field: value})
    return replace(cfg, sim=sim)


def run_synthesize(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = synthesize(cfg.model, cfg.obs, cfg.solver, cfg.lmi_states)

    with open(out / "solver.log", "w") as fh:
        for a in result.attempts:
            fh.write(json.dumps(a) + "\n")
        for it, weight, margin, gap in result.solution.history:
            fh.write(f"iter={it} weight={weight:.6e} margin={margin:.6e} gap={gap:.3e}\n")

    cert = {
        "config_hash": cfg.digest,
        "seed": cfg.sim.seed,
        "status": result.solution.status.value,
        "margin": result.solution.margin,
        "lmi_states": result.lmi_states,
        "attempts": result.attempts,
    }
    if result.gains is None:
        _write_json(out / "certificate.json", cert)
        print(f"LMIs not solved: {result.solution.status.value} (margin {result.solution.margin:.3e})")
        return 2
    cert.update(result.certificate.to_dict())
    _write_json(out / "certificate.json", cert)
    _write_json(out / "gains.json", gains_to_dict(result.gains, cfg, lmi_states=result.lmi_states))
    rho = result.certificate.spectral_radius
    print(f"LMIs feasible on {result.lmi_states} states, margin {result.solution.margin:.3e}; spectral radius {rho:.6f}")
    if not result.certificate.stable:
        scope = "this contradicts the LMI certificate (bug indicator)" if result.lmi_states == "all" else (
            f"the LMIs only covered {result.lmi_states} states")
        print(f"WARNING: extracted gains are NOT mean-square stabilizing; {scope}", file=sys.stderr)
        return 3
    return 0


def run_simulate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    try:
        gains = load_gains(args.gains)
        gains.check_compatible(cfg.model, cfg.obs.T)
    except (DimensionMismatch, KeyError, ValueError) as exc:
        print(f"error: gains do not match config: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = simulate_closed_loop(cfg.model, cfg.obs, gains, cfg.sim)
    write_summary_csv(out / "summary.csv", result)
    write_paths_csv(out / "paths.csv", result)
    _write_json(out / "simulation.json", {"config_hash": cfg.digest, "seed": cfg.sim.seed, "decay_ratio": result.decay_ratio})
    print(f"decay ratio {result.decay_ratio!r}")
    return 0


def run_validate_embedding(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    sim = replace(cfg.sim, horizon=args.steps)
    chain = build_extended_chain(cfg.model, cfg.obs)
    traj = simulate_extended_tuple(cfg.model, cfg.obs, sim)
    err = empirical_transition_error(chain, tuple_to_flat(chain, traj), EMBEDDING_MIN_PROB)
    ok = err <= EMBEDDING_TOL
    report = {
        "config_hash": cfg.digest,
        "seed": sim.seed,
        "steps": args.steps,
        "states": chain.size,
        "max_abs_error": err,
        "tolerance": EMBEDDING_TOL,
        "pass": ok,
    }
    if args.out_dir:
        Path(args.out_dir).mkdir(parents=True, exist_ok=True)
        _write_json(Path(args.out_dir) / "embedding_report.json", report)
    print(json.dumps(report))
    return 0 if ok else 4


def run_gaps(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    s0 = args.s0 if args.s0 is not None else (min(cfg.obs.lam) if cfg.sim.s0 == "uniform" else int(cfg.sim.s0))
    gaps = sample_gaps(cfg.obs, s0, args.num_gaps, cfg.sim.seed)
    law = empirical_gap_law(gaps)
    print(json.dumps({"config_hash": cfg.digest, "seed": cfg.sim.seed, "s0": s0, "num_gaps": int(gaps.size),
                      "law": {str(k): v for k, v in law.items()}}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mjls-randobs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="."):
        p.add_argument("config")
        p.add_argument("--out-dir", default=out_default)
        p.add_argument("--seed", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--horizon", type=int)

    p = sub.add_parser("synthesize", help="solve the gain LMIs and certify the result")
    common(p)
    p.set_defaults(func=run_synthesize)

    p = sub.add_parser("simulate", help="Monte Carlo closed-loop trajectories to CSV")
    common(p)
    p.add_argument("gains")
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("validate-embedding", help="compare simulated extended-state transitions with the analytic matrix")
    common(p, out_default=None)
    p.add_argument("--steps", type=int, default=EMBEDDING_STEPS)
    p.set_defaults(func=run_validate_embedding)

    p = sub.add_parser("gaps", help="empirical law of observation gaps")
    common(p, out_default=None)
    p.add_argument("--num-gaps", type=int, default=100_000)
    p.add_argument("--s0", type=int)
    p.set_defaults(func=run_gaps)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
