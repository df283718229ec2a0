"""Command line: train, eval, sweep and analyze.

Exit codes: 0 success, 1 configuration error, 2 training aborted on a
non-finite loss.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .comm import CommConfig, CommError
from .config import ACTOR_BASELINES, ConfigError, RunConfig, TrainConfig
from .envs import ENV_NAMES
from .trainer import TrainingDiverged, evaluate, train

log = logging.getLogger("commlab")

COMM_MODES = {"targeted": "targeted", "mean": "mean_pool", "none": "none"}
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2


# -- config merging ------------------------------------------------------------------------

def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file first, then explicit flags on top."""
    base = RunConfig.load(args.config) if args.config else RunConfig()
    d = base.train.to_dict()
    comm = dict(d["comm"])
    if args.env is not None:
        d["env"] = args.env
    if args.comm is not None:
        comm["mode"] = COMM_MODES[args.comm]
    if args.rounds is not None:
        comm["rounds"] = args.rounds
    if args.msg_dim is not None:
        comm["d_v"] = args.msg_dim
    if args.gating:
        comm["gating"] = True
    d["comm"] = comm
    for flag, key in (("seed", "seed"), ("episodes", "total_episodes"), ("batch", "batch"),
                      ("hidden", "hidden"), ("lr", "lr"), ("actor_baseline", "actor_baseline"),
                      ("reward_mode", "reward_mode"), ("eval_episodes", "eval_episodes")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    overrides = dict(d.get("env_overrides") or {})
    for flag in ("grid", "agents", "horizon"):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[flag] = v
    d["env_overrides"] = overrides
    for key, value in _parse_set(args.set).items():
        if key.startswith("comm."):
            d["comm"][key[5:]] = value
        elif key in ("comm", "env_overrides") and isinstance(value, dict):
            d[key] = {**d[key], **value}  # merge, so --grid/--comm flags survive
        else:
            d[key] = value
    if d["env"] not in ENV_NAMES:
        raise ConfigError(f"unknown environment {d['env']!r}; choose from {', '.join(ENV_NAMES)}")
    if d["comm"].get("gating") and d["comm"].get("mode") == "none":
        raise ConfigError("--gating needs a communication channel; drop it or pick --comm targeted|mean")
    try:
        cfg = TrainConfig.from_dict(d)
    except (TypeError, CommError) as exc:
        raise ConfigError(str(exc)) from exc
    out = args.out or base.out_dir
    return RunConfig(cfg, out)


# -- commands ---------------------------------------------------------------------------------

def _train_one(run: RunConfig, max_iterations: int | None = None) -> dict:
    out = Path(run.out_dir)
    result = train(run.train, out, max_iterations=max_iterations)
    run.save(out / "config.json")
    summary = {"run_dir": str(out), "config_hash": run.train.digest(), "iterations": result.iterations,
               "episodes": result.episodes, "wall_time": result.wall_time}
    if run.train.eval_episodes > 0:
        summary["eval"] = evaluate(out / "checkpoint", episodes=run.train.eval_episodes, seed=run.train.seed)
        (out / "eval.json").write_text(json.dumps(summary["eval"], indent=2))
    return summary


def cmd_train(args: argparse.Namespace) -> int:
    run = build_run_config(args)
    log.info("training %s (comm=%s, rounds=%d) -> %s", run.train.env, run.train.comm.mode,
             run.train.comm.rounds, run.out_dir)
    summary = _train_one(run, args.max_iterations)
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK


def _resolve_checkpoint(path: str) -> Path:
    p = Path(path)
    if (p / "checkpoint" / "manifest.json").exists():
        return p / "checkpoint"
    if (p / "manifest.json").exists():
        return p
    raise ConfigError(f"no checkpoint found at {path}")


def _run_config_for(ckpt: Path) -> dict | None:
    cfg_file = ckpt.parent / "config.json"
    return json.loads(cfg_file.read_text()) if cfg_file.exists() else None


def cmd_eval(args: argparse.Namespace) -> int:
    ckpts = [_resolve_checkpoint(p) for p in args.checkpoint]
    trace: list | None = [] if args.episodes == 1 or args.trace else None
    per_run = []
    for i, ckpt in enumerate(ckpts):
        res = evaluate(ckpt, args.env, args.episodes, seed=args.seed, greedy=args.greedy,
                       trace=trace if i == 0 else None)
        res["checkpoint"] = str(ckpt)
        per_run.append(res)
    summary = dict(per_run[0]) if len(per_run) == 1 else _aggregate(per_run)
    summary["runs"] = per_run if len(per_run) > 1 else None
    summary["config"] = _run_config_for(ckpts[0])
    line = (f"success {summary['success_rate']:.4f} ± {summary['success_se']:.4f}  "
            f"steps {summary['mean_steps']:.3f} ± {summary['steps_se']:.3f}  "
            f"reward {summary['mean_reward']:.3f} ± {summary['reward_se']:.3f}")
    print(line)
    out = Path(args.json) if args.json else ckpts[0].parent / "eval_summary.json"
    out.write_text(json.dumps(summary, indent=2, default=float))
    if trace is not None:
        trace_path = Path(args.trace) if args.trace else out.with_name("trace.jsonl")
        with open(trace_path, "w") as f:
            for rec in trace:
                f.write(json.dumps(rec) + "\n")
        print(f"trace: {trace_path}")
    return EXIT_OK


def _aggregate(per_run: list[dict]) -> dict:
    """Mean over runs with the standard error of those means."""
    out = {"env": per_run[0]["env"], "episodes": sum(r["episodes"] for r in per_run), "n_runs": len(per_run)}
    for key, se_key in (("success_rate", "success_se"), ("mean_steps", "steps_se"), ("mean_reward", "reward_se")):
        xs = np.array([r[key] for r in per_run], dtype=np.float64)
        out[key] = float(xs.mean())
        out[se_key] = float(xs.std(ddof=1) / math.sqrt(len(xs))) if len(xs) > 1 else 0.0
    return out


def _sweep_cell(payload: tuple[dict, str, int | None]) -> dict:
    cfg_dict, out_dir, max_iterations = payload
    run = RunConfig(TrainConfig.from_dict(cfg_dict), out_dir)
    return _train_one(run, max_iterations)


def cmd_sweep(args: argparse.Namespace) -> int:
    base = build_run_config(args)
    msg_dims = [int(x) for x in args.msg_dims.split(",")]
    rounds = [int(x) for x in args.rounds_list.split(",")]
    root = Path(base.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = []
    for r in rounds:
        for m in msg_dims:
            d = base.train.to_dict()
            d["comm"] = {**d["comm"], "d_v": m, "rounds": r}
            if d["eval_episodes"] <= 0:
                d["eval_episodes"] = 100
            cfg = TrainConfig.from_dict(d)
            jobs.append((m, r, cfg, root / f"msg{m}_rounds{r}_{cfg.digest()}"))
    payloads = [(cfg.to_dict(), str(out), args.max_iterations) for _, _, cfg, out in jobs]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_cell, payloads))
    else:
        results = [_sweep_cell(p) for p in payloads]
    fields = ["msg_dim", "rounds", "config_hash", "run_dir", "success_rate", "mean_steps", "mean_reward"]
    rows = []
    for (m, r, cfg, out), res in zip(jobs, results):
        ev = res["eval"]
        rows.append({"msg_dim": m, "rounds": r, "config_hash": cfg.digest(), "run_dir": str(out),
                     "success_rate": ev["success_rate"], "mean_steps": ev["mean_steps"],
                     "mean_reward": ev["mean_reward"]})
    with open(root / "sweep.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        print(f"msg {row['msg_dim']:>4}  rounds {row['rounds']}  success {row['success_rate']:.3f}  "
              f"steps {row['mean_steps']:.2f}  {row['config_hash']}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    records = analysis.load_records(args.log)
    if args.analysis == "spatial":
        shape = tuple(args.grid) if args.grid else None
        grid = analysis.spatial_map(records, args.kind, shape, round_index=args.round)
        out = args.out or str(Path(args.log).with_name(f"{args.kind}_map.csv"))
        analysis.write_grid_csv(grid, out)
        print(f"{args.kind} map ({grid.shape[0]}x{grid.shape[1]}): {out}")
    else:
        res = analysis.attention_correlation(records, args.threshold, args.shift, round_index=args.round)
        if res["defined"]:
            print(f"spearman {res['spearman']:.4f} over {res['n']} steps (shift {args.shift})")
        else:
            print(f"spearman undefined: a series is constant over {res['n']} steps")
        if args.json:
            Path(args.json).write_text(json.dumps(res, indent=2))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags below override it")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--comm", choices=sorted(COMM_MODES), help="targeted attention, mean pooling or none")
    p.add_argument("--msg-dim", type=int, help="message value size d_v")
    p.add_argument("--gating", action="store_true", help="learn when to send (needs a channel)")
    p.add_argument("--seed", type=int)
    p.add_argument("--episodes", type=int, help="total training episodes")
    p.add_argument("--max-iterations", type=int, help="stop after this many updates")
    p.add_argument("--out", help="run directory")
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--actor-baseline", choices=ACTOR_BASELINES)
    p.add_argument("--reward-mode", choices=("team", "individual", "auto"))
    p.add_argument("--eval-episodes", type=int, help="episodes for the final evaluation (0 skips)")
    p.add_argument("--grid", type=int, help="environment grid size override")
    p.add_argument("--agents", type=int, help="agent count override")
    p.add_argument("--horizon", type=int, help="episode length override")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="any other config field, JSON-decoded; comm.* reaches the comm block")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commlab", description="Targeted multi-agent communication lab")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    _add_run_flags(p)
    p.add_argument("--rounds", type=int, help="communication rounds per step")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints without the critic")
    p.add_argument("checkpoint", nargs="+", help="run or checkpoint directories; several are aggregated")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--greedy", action="store_true", help="argmax actions instead of sampling")
    p.add_argument("--json", help="summary path (default: <run>/eval_summary.json)")
    p.add_argument("--trace", help="write a per-step trace of the first run to this JSONL file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="message size x rounds grid")
    _add_run_flags(p)
    p.add_argument("--msg-dims", default="1,32,64")
    p.add_argument("--rounds", dest="rounds_list", default="1,2")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep, rounds=None)

    p = sub.add_parser("analyze", help="attention-log analyses")
    asub = p.add_subparsers(dest="analysis", required=True)
    s = asub.add_parser("spatial", help="per-cell brake or attention map as a CSV grid")
    s.add_argument("log")
    s.add_argument("--kind", choices=("brake", "attention"), default="attention")
    s.add_argument("--grid", type=int, nargs=2, metavar=("H", "W"))
    s.add_argument("--round", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_analyze)
    s = asub.add_parser("correlation", help="Spearman of team size vs attended cars")
    s.add_argument("log")
    s.add_argument("--threshold", type=float, default=0.1)
    s.add_argument("--shift", type=int, default=0)
    s.add_argument("--round", type=int, default=0)
    s.add_argument("--json")
    s.set_defaults(func=cmd_analyze)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, CommError, analysis.AnalysisError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
