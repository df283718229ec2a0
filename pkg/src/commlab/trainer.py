"""Batched synchronous multi-agent actor-critic with a centralized critic.

One iteration collects ``rollout_len`` steps from ``batch`` parallel
episodes, builds the actor and critic losses on a single tape, back-propagates
through the whole segment (hidden states are cut at segment boundaries) and
applies one RMSProp step to the shared parameters.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .agents import (Categorical, CriticNet, PolicyNet, counterfactual_values, decentralized_execution,
                     policy_forward)
from .autograd import Tensor, backward, default_dtype, no_grad, ops
from .comm import CommConfig, gate_messages
from .config import TrainConfig
from .envs import MultiAgentEnv, make_env
from .nn import ParamStore, init_params, load_checkpoint, rmsprop_step, save_checkpoint

log = logging.getLogger(__name__)

METRIC_FIELDS = ("iteration", "episodes", "success_rate", "mean_steps", "mean_reward",
                 "actor_loss", "critic_loss", "entropy")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; ``dump`` holds the diagnostic snapshot."""

    def __init__(self, msg: str, dump: dict):
        super().__init__(msg)
        self.dump = dump


# -- model assembly ------------------------------------------------------------------

@dataclass
class Model:
    store: ParamStore
    policy: PolicyNet
    critic: CriticNet | None
    meta: dict


def model_meta(cfg: TrainConfig, env: MultiAgentEnv) -> dict:
    return {
        "obs_dim": env.obs_dim, "n_actions": env.n_actions, "n_agents": env.n_agents,
        "hidden": cfg.hidden, "critic_hidden": cfg.critic_hidden, "comm": cfg.comm.to_dict(),
        "critic_out": env.n_agents if cfg.resolved_reward_mode() == "individual" else 1,
        "env": cfg.env, "env_config": env.config(), "train_config": cfg.to_dict(),
    }


def build_model(meta: dict, seed: int, with_critic: bool = True, store: ParamStore | None = None) -> Model:
    comm = CommConfig(**meta["comm"])
    spec = PolicyNet.spec(meta["obs_dim"], meta["n_actions"], meta["hidden"], comm)
    if with_critic:
        spec += CriticNet.spec(meta["n_agents"], meta["hidden"], meta["n_actions"],
                               meta["critic_hidden"], meta["critic_out"])
    if store is None:
        store = init_params(spec, seed)
    policy = PolicyNet(store, meta["obs_dim"], meta["n_actions"], meta["hidden"], comm)
    critic = None
    if with_critic:
        critic = CriticNet(store, meta["n_agents"], meta["hidden"], meta["n_actions"],
                           meta["critic_hidden"], meta["critic_out"])
    return Model(store, policy, critic, meta)


# -- rollout ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    log_prob: Tensor            # [B*N]
    entropy: Tensor             # [B*N]
    gate_log_prob: Tensor | None
    q: Tensor | None            # [B, K]
    actions: np.ndarray         # [B, N]
    acted: np.ndarray           # [B, N] slots that were alive and acted
    rewards: np.ndarray         # [B, N]
    team_reward: np.ndarray     # [B]
    done: np.ndarray            # [B]
    attention: list = field(default_factory=list)
    baseline: np.ndarray | None = None  # [B, N, K] counterfactual baseline


@dataclass
class Trajectory:
    steps: list[StepRecord]
    bootstrap: np.ndarray       # [B, K] critic value after the last step (0 where done)
    episodes: list[dict]        # episodes finished during the segment

    def __len__(self) -> int:
        return len(self.steps)


class Runner:
    """Holds B environments and the recurrent state carried between segments."""

    def __init__(self, envs: list[MultiAgentEnv], model: Model, seed: int, dtype,
                 attention_log_every: int = 0, reward_mode: str = "team", actor_baseline: str = "none"):
        self.envs = envs
        self.model = model
        self.b = len(envs)
        self.n = envs[0].n_agents
        self.dtype = dtype
        seq = np.random.SeedSequence(seed)
        policy_seq, env_seq = seq.spawn(2)
        self.rng = np.random.default_rng(policy_seq)
        self.env_seed_rng = np.random.default_rng(env_seq)
        self.attention_log_every = attention_log_every
        self.reward_mode = reward_mode
        self.actor_baseline = actor_baseline
        self.attention_log: list[dict] = []
        self.episode_index = np.zeros(self.b, dtype=np.int64)
        self.obs = np.stack([self._reset(i) for i in range(self.b)])
        self.alive = np.stack([e.alive for e in envs]).copy()
        hid, dv = model.policy.hidden, model.policy.comm_config.d_v
        self.h = np.zeros((self.b * self.n, hid), dtype=dtype)
        self.c = np.zeros((self.b * self.n, dv), dtype=dtype)
        self.ep_return = np.zeros(self.b)
        self.ep_steps = np.zeros(self.b, dtype=np.int64)

    def _reset(self, i: int) -> np.ndarray:
        return self.envs[i].reset(seed=int(self.env_seed_rng.integers(2**31 - 1)))

    def logging_episode(self) -> bool:
        k = self.attention_log_every
        return k > 0 and self.episode_index[0] % k == 0


def collect_rollout(runner: Runner, length: int, train: bool = True) -> Trajectory:
    """Step every environment ``length`` times with decentralized policies.

    Hidden states and incoming messages persist within an episode and are
    zeroed when an episode ends or a slot is (re)spawned.
    """
    model, b, n = runner.model, runner.b, runner.n
    policy, critic = model.policy, model.critic
    comm_cfg = policy.comm_config
    dtype = runner.dtype
    h = Tensor(runner.h)
    c = Tensor(runner.c)
    steps: list[StepRecord] = []
    finished: list[dict] = []
    for _ in range(length):
        alive = runner.alive.copy()
        obs = Tensor(runner.obs.reshape(b * n, -1).astype(dtype))
        out = policy_forward(policy, obs, c, h)
        dist = Categorical(out.logits)
        actions = dist.sample(runner.rng)
        log_prob = dist.log_prob(actions)
        entropy = dist.entropy()
        gates = np.ones((b, n), dtype=bool)
        gate_lp = None
        if comm_cfg.gating:
            mode = "train_sample" if train else "eval_threshold"
            g, gate_lp = gate_messages(out.gate_logit, mode, runner.rng)
            gates = g.reshape(b, n)
        c_next, weights = policy.comm.communicate(out.hidden, alive & gates)
        actions = actions.reshape(b, n)
        q = None
        baseline = None
        if critic is not None and train:
            q = critic(ops.reshape(out.hidden.detach(), (b, n, policy.hidden)), actions, alive)
            if runner.actor_baseline in ("counterfactual", "td_counterfactual"):
                alt = counterfactual_values(critic, out.hidden.data.reshape(b, n, -1), actions, alive)
                baseline = np.einsum("bna,bnak->bnk", dist.probs.reshape(b, n, -1).astype(np.float64), alt)

        log_now = runner.logging_episode()
        if log_now:
            _log_attention(runner, weights, gates, dist.probs.reshape(b, n, -1), actions, alive)

        rewards = np.zeros((b, n))
        team = np.zeros(b)
        done = np.zeros(b, dtype=bool)
        keep = np.ones((b, n), dtype=bool)
        for i, env in enumerate(runner.envs):
            res = env.step(actions[i])
            rewards[i] = res.rewards
            team[i] = res.team_reward
            done[i] = res.done
            runner.ep_return[i] += res.team_reward
            runner.ep_steps[i] += 1
            if res.done:
                finished.append({"success": bool(env.success()), "steps": int(runner.ep_steps[i]),
                                 "reward": float(runner.ep_return[i]), "slot": i})
                runner.ep_return[i] = 0.0
                runner.ep_steps[i] = 0
                runner.episode_index[i] += 1
                runner.obs[i] = runner._reset(i)
                keep[i] = False
            else:
                runner.obs[i] = res.obs
                spawned = res.info.get("spawned")
                if spawned is not None:
                    keep[i] &= ~spawned
            runner.alive[i] = env.alive
        keep &= runner.alive
        keep_col = keep.reshape(b * n, 1).astype(dtype)
        h = ops.mul(out.hidden, Tensor(np.broadcast_to(keep_col, out.hidden.shape).copy()))
        c = ops.mul(c_next, Tensor(np.broadcast_to(keep_col, c_next.shape).copy()))
        steps.append(StepRecord(log_prob, entropy, gate_lp, q, actions, alive, rewards, team, done,
                                baseline=baseline))

    bootstrap = np.zeros((b, 1))
    if critic is not None and train:
        with no_grad():
            out = policy_forward(policy, Tensor(runner.obs.reshape(b * n, -1).astype(dtype)), c, h)
            a_next = Categorical(out.logits).sample(runner.rng).reshape(b, n)
            bootstrap = critic(ops.reshape(out.hidden, (b, n, policy.hidden)), a_next,
                               runner.alive).data.astype(np.float64)
    runner.h = h.data.copy()
    runner.c = c.data.copy()
    return Trajectory(steps, bootstrap, finished)


def _log_attention(runner: Runner, weights, gates, probs, actions, alive) -> None:
    env = runner.envs[0]
    pos = env.positions().tolist()
    for r, w in enumerate(weights):
        for j in np.flatnonzero(alive[0]):
            runner.attention_log.append({
                "episode": int(runner.episode_index[0]), "t": int(env.t), "round": r,
                "receiver": int(j), "weights": [float(x) for x in w[0, j]],
                "gates": [bool(x) for x in gates[0]], "alive": [bool(x) for x in alive[0]],
                "positions": pos, "action": int(actions[0, j]),
                "action_probs": [float(x) for x in probs[0, j]],
            })


# -- losses ------------------------------------------------------------------------------

def td_targets(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
               bootstrap: np.ndarray, gamma: float) -> np.ndarray:
    """y_t = r_t + gamma * Q_{t+1} * (1 - done_t), with Q_{T} = bootstrap.

    ``rewards`` and ``values`` are ``[T, B, K]``, ``dones`` ``[T, B]`` and
    ``bootstrap`` ``[B, K]``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    nxt = np.concatenate([values[1:], np.asarray(bootstrap, dtype=np.float64)[None]], axis=0)
    live = 1.0 - np.asarray(dones, dtype=np.float64)[..., None]
    return rewards + gamma * live * nxt


def _stack(ts: list[Tensor]) -> Tensor:
    return ops.concat([ops.reshape(t, (1,) + t.shape) for t in ts], axis=0)


@dataclass
class Losses:
    total: Tensor
    actor: Tensor
    critic: Tensor
    entropy: float


def compute_losses(traj: Trajectory, cfg: TrainConfig, reward_mode: str) -> Losses:
    steps = traj.steps
    t_len = len(steps)
    b, n = steps[0].acted.shape
    dtype = steps[0].log_prob.data.dtype
    q = _stack([s.q for s in steps])                                   # [T, B, K]
    acted = np.stack([s.acted for s in steps]).astype(np.float64)      # [T, B, N]
    dones = np.stack([s.done for s in steps])
    if reward_mode == "individual":
        rewards = np.stack([s.rewards for s in steps])
        mask = acted
    else:
        rewards = np.stack([s.team_reward for s in steps])[..., None]
        mask = np.ones((t_len, b, 1))
    y = td_targets(rewards, q.data, dones, traj.bootstrap, cfg.gamma)
    diff = ops.sub(q, Tensor(y.astype(dtype)))
    w_c = mask / max(mask.sum(), 1.0)
    critic_loss = ops.sum(ops.mul(ops.mul(diff, diff), Tensor(w_c.astype(dtype))))

    q_const = _actor_weights(q.data.astype(np.float64), steps, acted, cfg.actor_baseline, y,
                             cfg.normalize_actor_weights)
    n_acted = max(acted.sum(), 1.0)
    weight = (q_const * acted / n_acted).reshape(t_len, b * n).astype(dtype)
    ent_w = (acted / n_acted).reshape(t_len, b * n).astype(dtype)
    logp = _stack([s.log_prob for s in steps])
    ent = _stack([s.entropy for s in steps])
    pg = ops.sum(ops.mul(logp, Tensor(weight)))
    if steps[0].gate_log_prob is not None:
        glp = _stack([s.gate_log_prob for s in steps])
        pg = ops.add(pg, ops.sum(ops.mul(glp, Tensor(weight))))
    ent_term = ops.sum(ops.mul(ent, Tensor(ent_w)))
    actor_loss = ops.sub(ops.scale(pg, -1.0), ops.scale(ent_term, cfg.entropy_coef))
    total = ops.add(actor_loss, ops.scale(critic_loss, cfg.value_loss_coef))
    return Losses(total, actor_loss, critic_loss, float(ent_term.data))


def _actor_weights(q: np.ndarray, steps: list[StepRecord], acted: np.ndarray, kind: str,
                   targets: np.ndarray | None = None, normalize: bool = False) -> np.ndarray:
    """Per-agent weights ``[T, B, N]`` for the log-probabilities.

    ``none`` uses Q as is. ``batch_mean`` subtracts one constant, which
    does not bias the gradient. ``counterfactual`` subtracts, per agent, the policy-weighted
    Q over that agent's alternative actions with the others held fixed;
    ``td_counterfactual`` applies the same baseline to the TD targets, so
    the sampled reward reaches the actor directly. ``normalize`` then
    standardizes the weights over the agents that acted.
    """
    t_len, b, n = acted.shape
    if kind == "td_counterfactual":
        q, kind = targets, "counterfactual"
    if q.shape[-1] == 1:
        w = np.broadcast_to(q, (t_len, b, n)).copy()
    else:
        w = q.copy()
    if kind == "counterfactual":
        base = np.stack([s.baseline for s in steps])                   # [T, B, N, K]
        if base.shape[-1] == 1:
            base = base[..., 0]
        else:
            base = np.diagonal(base, axis1=2, axis2=3)
        w = w - base
    elif kind == "batch_mean":
        w = w - (w * acted).sum() / max(acted.sum(), 1.0)
    if normalize:
        # unit scale over acting agents keeps the entropy bonus comparable across reward scales
        count = max(acted.sum(), 1.0)
        w = w - (w * acted).sum() / count
        w = w / (np.sqrt((w * w * acted).sum() / count) + 1e-8)
    return w


def actor_loss(traj: Trajectory, cfg: TrainConfig, reward_mode: str = "team") -> Tensor:
    return compute_losses(traj, cfg, reward_mode).actor


# -- training loop ------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: Model
    metrics: list[dict]
    iterations: int
    episodes: int
    wall_time: float
    final_eval: dict | None = None


def _make_envs(cfg: TrainConfig) -> list[MultiAgentEnv]:
    return [make_env(cfg.env, cfg.env_overrides) for _ in range(cfg.batch)]


def _apply_curriculum(envs, cfg: TrainConfig, episodes: int) -> None:
    cur = cfg.curriculum
    if not cur:
        return
    frac = min(1.0, episodes / max(1, cur.get("episodes", 1)))
    p = cur["start"] + frac * (cur["end"] - cur["start"])
    for e in envs:
        if hasattr(e, "set_arrival_prob"):
            e.set_arrival_prob(p)


def train(cfg: TrainConfig, out_dir: str | Path | None = None,
          callback: Callable[[dict], None] | None = None, max_iterations: int | None = None) -> TrainResult:
    """Alternate rollouts and updates until ``cfg.total_episodes`` episodes finish."""
    dtype = np.float64 if cfg.dtype == "float64" else np.float32
    out = Path(out_dir) if out_dir else None
    with default_dtype(dtype):
        envs = _make_envs(cfg)
        meta = model_meta(cfg, envs[0])
        model = build_model(meta, cfg.seed)
        reward_mode = cfg.resolved_reward_mode()
        runner = Runner(envs, model, cfg.seed + 1, dtype, cfg.attention_log_every, reward_mode,
                        cfg.actor_baseline)
        metrics: list[dict] = []
        writer = None
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.json").write_text(json.dumps({"train": cfg.to_dict(), "out_dir": str(out)},
                                                        indent=2, sort_keys=True))
            metrics_file = open(out / "metrics.csv", "w", newline="")
            writer = csv.DictWriter(metrics_file, fieldnames=METRIC_FIELDS)
            writer.writeheader()
        start = time.perf_counter()
        episodes = 0
        iteration = 0
        window: list[dict] = []
        acc = {"actor": 0.0, "critic": 0.0, "entropy": 0.0, "n": 0}
        try:
            while episodes < cfg.total_episodes:
                if max_iterations is not None and iteration >= max_iterations:
                    break
                _apply_curriculum(envs, cfg, episodes)
                traj = collect_rollout(runner, cfg.rollout_len, train=True)
                losses = compute_losses(traj, cfg, reward_mode)
                if not np.isfinite(losses.total.data).all():
                    dump = {"iteration": iteration, "actor_loss": float(losses.actor.data),
                            "critic_loss": float(losses.critic.data),
                            "param_norms": {k: float(np.linalg.norm(t.data)) for k, t in model.store.items()}}
                    if out:
                        (out / "nan_dump.json").write_text(json.dumps(dump, indent=2))
                    raise TrainingDiverged(f"non-finite loss at iteration {iteration}", dump)
                model.store.zero_grad()
                backward(losses.total)
                if cfg.grad_clip:
                    model.store.clip_grad_norm(cfg.grad_clip)
                rmsprop_step(model.store, cfg.lr, cfg.rmsprop_alpha, cfg.rmsprop_eps)
                iteration += 1
                episodes += len(traj.episodes)
                window.extend(traj.episodes)
                acc["actor"] += float(losses.actor.data)
                acc["critic"] += float(losses.critic.data)
                acc["entropy"] += losses.entropy
                acc["n"] += 1
                last = episodes >= cfg.total_episodes or (
                    max_iterations is not None and iteration >= max_iterations)
                if iteration % cfg.log_interval == 0 or last:
                    row = _metric_row(iteration, episodes, window, acc)
                    metrics.append(row)
                    if writer:
                        writer.writerow(row)
                        metrics_file.flush()
                    if callback:
                        callback(row)
                    log.info("iter %d eps %d success %.3f steps %.2f reward %.3f", iteration, episodes,
                             row["success_rate"], row["mean_steps"], row["mean_reward"])
                    window = []
                    acc = {"actor": 0.0, "critic": 0.0, "entropy": 0.0, "n": 0}
                if out and cfg.checkpoint_interval and iteration % cfg.checkpoint_interval == 0:
                    save_checkpoint(model.store, out / f"checkpoint_{iteration:07d}", {"model": meta})
        finally:
            if writer:
                metrics_file.close()
        wall = time.perf_counter() - start
        if out:
            save_checkpoint(model.store, out / "checkpoint", {"model": meta, "iterations": iteration,
                                                             "episodes": episodes})
            if runner.attention_log:
                with open(out / "attention.jsonl", "w") as f:
                    for rec in runner.attention_log:
                        f.write(json.dumps(rec) + "\n")
        return TrainResult(model, metrics, iteration, episodes, wall)


def _metric_row(iteration: int, episodes: int, window: list[dict], acc: dict) -> dict:
    k = max(acc["n"], 1)
    if window:
        succ = float(np.mean([e["success"] for e in window]))
        steps = float(np.mean([e["steps"] for e in window]))
        rew = float(np.mean([e["reward"] for e in window]))
    else:
        succ = steps = rew = float("nan")
    return {"iteration": iteration, "episodes": episodes, "success_rate": succ, "mean_steps": steps,
            "mean_reward": rew, "actor_loss": acc["actor"] / k, "critic_loss": acc["critic"] / k,
            "entropy": acc["entropy"] / k}


# -- evaluation ----------------------------------------------------------------------------

def _stats(xs) -> tuple[float, float]:
    xs = np.asarray(xs, dtype=np.float64)
    if len(xs) == 0:
        return float("nan"), float("nan")
    se = float(xs.std(ddof=1) / math.sqrt(len(xs))) if len(xs) > 1 else 0.0
    return float(xs.mean()), se


def evaluate_policy(policy: PolicyNet, env_name: str, overrides: dict | None, episodes: int,
                    seed: int = 0, greedy: bool = False, batch: int = 16,
                    trace: list | None = None, dtype=np.float32) -> dict:
    """Run ``episodes`` episodes with decentralized execution (the critic is unreachable)."""
    b = max(1, min(batch, episodes))
    envs = [make_env(env_name, overrides) for _ in range(b)]
    n = envs[0].n_agents
    quota = np.array([episodes // b + (1 if i < episodes % b else 0) for i in range(b)])
    seq = np.random.SeedSequence([seed, 7919])
    pol_seq, env_seq = seq.spawn(2)
    rng = np.random.default_rng(pol_seq)
    env_rng = np.random.default_rng(env_seq)
    obs = np.stack([e.reset(seed=int(env_rng.integers(2**31 - 1))) for e in envs])
    running = quota > 0
    h = np.zeros((b * n, policy.hidden), dtype=dtype)
    c = np.zeros((b * n, policy.comm_config.d_v), dtype=dtype)
    ep_ret = np.zeros(b)
    ep_steps = np.zeros(b, dtype=np.int64)
    results = []
    with no_grad(), decentralized_execution(), default_dtype(dtype):
        while running.any():
            alive = np.stack([e.alive for e in envs]) & running[:, None]
            out = policy_forward(policy, Tensor(obs.reshape(b * n, -1).astype(dtype)), Tensor(c), Tensor(h))
            dist = Categorical(out.logits)
            actions = (dist.greedy() if greedy else dist.sample(rng)).reshape(b, n)
            gates = np.ones((b, n), dtype=bool)
            if policy.comm_config.gating:
                g, _ = gate_messages(out.gate_logit, "eval_threshold")
                gates = g.reshape(b, n)
            c_t, weights = policy.comm.communicate(out.hidden, alive & gates)
            if trace is not None and running[0]:
                trace.append({"episode": len(results), "t": int(envs[0].t),
                              "positions": envs[0].positions().tolist(), "alive": alive[0].tolist(),
                              "actions": actions[0].tolist(), "gates": gates[0].tolist(),
                              "attention": [w[0].tolist() for w in weights]})
            keep = np.ones((b, n), dtype=bool)
            for i, env in enumerate(envs):
                if not running[i]:
                    continue
                res = env.step(actions[i])
                ep_ret[i] += res.team_reward
                ep_steps[i] += 1
                if res.done:
                    results.append({"success": bool(env.success()), "steps": int(ep_steps[i]),
                                    "reward": float(ep_ret[i])})
                    ep_ret[i] = 0.0
                    ep_steps[i] = 0
                    quota[i] -= 1
                    keep[i] = False
                    if quota[i] > 0:
                        obs[i] = env.reset(seed=int(env_rng.integers(2**31 - 1)))
                    else:
                        running[i] = False
                else:
                    obs[i] = res.obs
                    spawned = res.info.get("spawned")
                    if spawned is not None:
                        keep[i] &= ~spawned
                keep[i] &= env.alive
            keep_col = keep.reshape(b * n, 1)
            h = out.hidden.data * keep_col
            c = c_t.data * keep_col
    succ, succ_se = _stats([r["success"] for r in results])
    steps, steps_se = _stats([r["steps"] for r in results])
    rew, rew_se = _stats([r["reward"] for r in results])
    return {"env": env_name, "episodes": len(results), "success_rate": succ, "success_se": succ_se,
            "mean_steps": steps, "steps_se": steps_se, "mean_reward": rew, "reward_se": rew_se}


def load_policy(checkpoint_dir: str | Path) -> tuple[PolicyNet, dict]:
    store, metadata = load_checkpoint(checkpoint_dir)
    meta = metadata["model"]
    model = build_model(meta, seed=0, with_critic=False, store=store)
    return model.policy, meta


def evaluate(checkpoint_dir: str | Path, env_name: str | None = None, episodes: int = 500,
             seed: int = 0, greedy: bool = False, overrides: dict | None = None,
             trace: list | None = None) -> dict:
    """Evaluate a saved policy; the environment must match the one it was trained on."""
    store, metadata = load_checkpoint(checkpoint_dir)
    meta = metadata["model"]
    env_name = env_name or meta["env"]
    ov = meta["train_config"].get("env_overrides", {}) if overrides is None else overrides
    probe = make_env(env_name, ov)
    if probe.obs_dim != meta["obs_dim"] or probe.n_actions != meta["n_actions"] \
            or probe.n_agents != meta["n_agents"]:
        raise ValueError(f"checkpoint was trained on {meta['env']} ({meta['obs_dim']}-d obs, "
                         f"{meta['n_agents']} agents) and cannot run {env_name}")
    dtype = np.float32
    with default_dtype(dtype):
        model = build_model(meta, seed=0, with_critic=False, store=store)
    return evaluate_policy(model.policy, env_name, ov, episodes, seed, greedy, trace=trace)
