"""Command line front end.

Subcommands: solve (model-based path), learn (model-free path against a
simulated plant or a replay log), verify (both paths plus the KKT oracle),
reach (reachability verdict), campaign (Monte Carlo sweep). Reports are
byte-deterministic JSON; exit status encodes the failure class:

    0  success
    2  validation failure (bad instance data, missing seed, singular blocks)
    3  terminal target not reachable / constraint infeasible
    4  rank-deficient or insufficient data
    5  I/O or parse error
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .errors import (
    InfeasibleConstraint,
    InsufficientSamples,
    IoError,
    NotReachable,
    OracleMiss,
    ParseError,
    RankDeficient,
    SingularBlock,
    SingularGamma,
    SingularKkt,
    TermLqError,
    ValidationError,
)
from .fileio import (
    LearnSettings,
    dumps_report,
    instance_hash,
    load_instance_file,
    read_replay_log,
    write_report,
)
from .harness import CampaignSpec, kkt_oracle, monte_carlo, verify_solution
from .linalg import numerical_rank
from .model import (
    ProblemInstance,
    check_reachability,
    optimal_policy,
    rollout,
    solve_lambda,
    solve_schedule,
)
from .qlearn import (
    SimulatedPlant,
    default_gaussian_spec,
    learn,
    learned_policy,
    sample_threshold,
)

_EXIT_CODES: tuple[tuple[type, int], ...] = (
    (ValidationError, 2),
    (SingularGamma, 2),
    (SingularBlock, 2),
    (SingularKkt, 2),
    (NotReachable, 3),
    (InfeasibleConstraint, 3),
    (RankDeficient, 4),
    (InsufficientSamples, 4),
    (OracleMiss, 4),
    (ParseError, 5),
    (IoError, 5),
)


def _exit_code(exc: Exception) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    if isinstance(exc, OSError):
        return 5
    raise exc


def _head(command: str, seed: int | None, inst: ProblemInstance | None) -> dict:
    head = {
        "tool": {"name": "termlq", "version": __version__},
        "command": command,
        "seed": seed,
    }
    if inst is not None:
        head["instance_hash"] = instance_hash(inst)
    return head


def _flat(matrices) -> list:
    # row-major flattening, one flat list per stage matrix
    return [np.asarray(M).reshape(-1).tolist() for M in matrices]


def _trajectory_dict(traj) -> dict:
    return {
        "states": [s.tolist() for s in traj.states],
        "inputs": [u.tolist() for u in traj.inputs],
    }


def _resolve_learn_options(args, settings: LearnSettings | None, n: int, m: int):
    seed = args.seed
    if seed is None and settings is not None:
        seed = settings.seed
    if seed is None:
        raise ValidationError("a seed is required (pass --seed or set learn.seed in the instance)")
    if seed < 0:
        raise ValidationError("seed must be nonnegative")
    l = args.samples
    if l is None and settings is not None and settings.l is not None:
        l = settings.l
    if l is None:
        l = sample_threshold(n, m)
    mean = settings.mean if settings is not None else 0.0
    scale = settings.covariance_scale if settings is not None else 1.0
    dist = default_gaussian_spec(n, m, mean=mean, covariance_scale=scale)
    return int(seed), int(l), dist


def _cmd_solve(args) -> dict:
    inst = load_instance_file(args.instance).instance
    sched = solve_schedule(inst)
    lamsol = solve_lambda(sched, inst)
    traj = rollout(inst, optimal_policy(sched, lamsol.lambda_star))
    report = _head("solve", None, inst)
    report["schedule"] = {"P": _flat(sched.P), "K": _flat(sched.K), "K1": _flat(sched.K1)}
    report["lambda_star"] = lamsol.lambda_star.tolist()
    report["trajectory"] = _trajectory_dict(traj)
    report["cost"] = traj.cost
    report["terminal_error"] = traj.terminal_error
    return report


def _cmd_learn(args) -> dict:
    doc = load_instance_file(args.instance)
    inst = doc.instance
    seed, l, dist = _resolve_learn_options(args, doc.learn, inst.n, inst.m)
    if args.replay is not None:
        oracle = read_replay_log(args.replay, inst.n, inst.m)
    else:
        oracle = SimulatedPlant(inst)
    learned = learn(oracle, (inst.n, inst.m, inst.N), (inst.Q, inst.R, inst.H),
                    inst.x0, inst.xi, l, dist, seed)
    traj = rollout(inst, learned_policy(learned))
    report = _head("learn", seed, inst)
    report["samples"] = l
    report["schedule"] = {"P": _flat(learned.P), "K": _flat(learned.K), "K1": _flat(learned.K1)}
    report["nu"] = [qm.nu.tolist() for qm in learned.qmatrices]
    report["fit"] = {
        "residuals": [d.residual for d in learned.fit_diagnostics],
        "conditions": [d.cond for d in learned.fit_diagnostics],
    }
    report["lambda_star"] = learned.lambda_star.tolist()
    report["trajectory"] = _trajectory_dict(traj)
    report["cost"] = traj.cost
    report["terminal_error"] = traj.terminal_error
    return report


def _cmd_verify(args) -> dict:
    doc = load_instance_file(args.instance)
    inst = doc.instance
    seed, l, dist = _resolve_learn_options(args, doc.learn, inst.n, inst.m)
    sched = solve_schedule(inst)
    lamsol = solve_lambda(sched, inst)
    traj = rollout(inst, optimal_policy(sched, lamsol.lambda_star))
    learned = learn(SimulatedPlant(inst), (inst.n, inst.m, inst.N),
                    (inst.Q, inst.R, inst.H), inst.x0, inst.xi, l, dist, seed)
    comparison = verify_solution(inst, sched, lamsol, learned)
    oracle = kkt_oracle(inst)
    report = _head("verify", seed, inst)
    report["samples"] = l
    report["schedule"] = {"P": _flat(sched.P), "K": _flat(sched.K), "K1": _flat(sched.K1)}
    report["lambda_star"] = lamsol.lambda_star.tolist()
    report["trajectory"] = _trajectory_dict(traj)
    report["cost"] = traj.cost
    report["terminal_error"] = traj.terminal_error
    report["comparison"] = {
        "max_gain_error": comparison.max_gain_error,
        "lambda_error": comparison.lambda_error,
        "cost_gap": comparison.cost_gap,
        "terminal_errors": list(comparison.terminal_errors),
        "per_stage_condition": list(comparison.per_stage_condition),
        "kkt_cost": oracle.cost,
        "kkt_residual": oracle.kkt_residual,
    }
    return report


def _cmd_reach(args) -> tuple[dict, int]:
    inst = load_instance_file(args.instance).instance
    result = check_reachability(inst)
    report = _head("reach", None, inst)
    report["reachable"] = result.reachable
    report["g1_rank"] = numerical_rank(result.G1)
    report["zeta"] = result.zeta.tolist() if result.zeta is not None else None
    return report, 0 if result.reachable else 3


def _cmd_campaign(args) -> dict:
    if args.seed is None:
        raise ValidationError("a seed is required (pass --seed)")
    if args.seed < 0:
        raise ValidationError("seed must be nonnegative")
    spec = CampaignSpec(count=args.trials, seed=args.seed, samples=args.samples)
    summary = monte_carlo(spec)

    def stats(s) -> dict:
        return {"max": s.max, "median": s.median, "p95": s.p95}

    report = _head("campaign", args.seed, None)
    report["summary"] = {
        "trials": summary.trials,
        "completed": summary.completed,
        "failures": summary.failures,
        "gain_error": stats(summary.gain_error),
        "lambda_error": stats(summary.lambda_error),
        "cost_gap": stats(summary.cost_gap),
        "terminal_error": stats(summary.terminal_error),
    }
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="termlq",
        description="Finite-horizon LQ control with an exact terminal-state constraint")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, instance: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if instance:
            p.add_argument("--instance", required=True, help="instance JSON file")
        p.add_argument("--out", help="report destination (default: stdout)")
        return p

    add("solve", "model-based schedule, multiplier, and rollout")
    p = add("learn", "model-free pipeline from one-step transition data")
    p.add_argument("--seed", type=int, help="probe RNG seed (required unless the instance sets one)")
    p.add_argument("--samples", type=int, help="samples per stage (default: identifiability threshold)")
    p.add_argument("--replay", help="replay log to learn from instead of a simulated plant")
    p = add("verify", "model-based vs model-free vs KKT oracle comparison")
    p.add_argument("--seed", type=int, help="probe RNG seed (required unless the instance sets one)")
    p.add_argument("--samples", type=int, help="samples per stage (default: identifiability threshold)")
    add("reach", "reachability verdict for the terminal target")
    p = add("campaign", "Monte Carlo sweep over random instances", instance=False)
    p.add_argument("--seed", type=int, help="campaign seed (required)")
    p.add_argument("--trials", type=int, default=100, help="instance count (default 100)")
    p.add_argument("--samples", type=int, help="samples per stage (default: per-instance threshold)")
    return parser


def _deliver(report: dict, out: str | None) -> None:
    if out is None:
        sys.stdout.write(dumps_report(report))
    else:
        write_report(report, out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            report = _cmd_solve(args)
            code = 0
        elif args.command == "learn":
            report = _cmd_learn(args)
            code = 0
        elif args.command == "verify":
            report = _cmd_verify(args)
            code = 0
        elif args.command == "reach":
            report, code = _cmd_reach(args)
        else:
            report = _cmd_campaign(args)
            code = 0
    except (TermLqError, OSError) as exc:
        code = _exit_code(exc)
        failure = _head(args.command, getattr(args, "seed", None), None)
        failure["error"] = {"code": type(exc).__name__, "message": str(exc)}
        try:
            _deliver(failure, args.out)
        except TermLqError:
            pass
        print(f"termlq {args.command}: {exc}", file=sys.stderr)
        return code
    _deliver(report, args.out)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
