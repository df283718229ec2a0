import copy
import json

import numpy as np
import pytest

from commlab import agents as A
from commlab import trainer as T
from commlab.agents import CriticAccessError
from commlab.autograd import Tensor, backward, default_dtype, no_grad
from commlab.comm import CommConfig
from commlab.config import ConfigError, TrainConfig


def test_td_targets_against_loop():
    rng = np.random.default_rng(0)
    t_len, b, k = 5, 3, 2
    r, v = rng.normal(size=(t_len, b, k)), rng.normal(size=(t_len, b, k))
    dones = rng.random((t_len, b)) < 0.3
    boot = rng.normal(size=(b, k))
    y = T.td_targets(r, v, dones, boot, 0.9)
    for t in range(t_len):
        for i in range(b):
            nxt = boot[i] if t == t_len - 1 else v[t + 1, i]
            want = r[t, i] + (0.0 if dones[t, i] else 0.9 * nxt)
            np.testing.assert_allclose(y[t, i], want, rtol=1e-14)


def _mini_cfg(**kw):
    base = dict(env="shapes", env_overrides={"grid": 5, "agents": 3, "horizon": 4}, hidden=4, critic_hidden=5,
                batch=2, rollout_len=3, dtype="float64", attention_log_every=0,
                comm=CommConfig(d_k=3, d_v=2, rounds=2))
    base.update(kw)
    return TrainConfig(**base)


def _mini_setup(cfg):
    envs = T._make_envs(cfg)
    meta = T.model_meta(cfg, envs[0])
    model = T.build_model(meta, cfg.seed)
    for name, t in model.store.items():
        # sharpen attention so its gradients are well above finite-difference noise
        if ".signature." in name or ".query." in name or ".value." in name:
            t.data = t.data * 6.0
    runner = T.Runner(envs, model, cfg.seed + 1, np.float64, 0, cfg.resolved_reward_mode(), cfg.actor_baseline)
    return model, runner


def full_loss_fd_error(per_param=3, seed=0, **kw):
    """Max relative error of backprop vs central differences on the composed loss.

    TD targets, actor weights and the critic's (detached) state input are
    held at their base values, matching the semi-gradient that backprop
    computes.
    """
    cfg = _mini_cfg(**kw)
    worst = 0.0
    with default_dtype(np.float64):
        model, runner = _mini_setup(cfg)
        # advance a little so recurrent state and messages are non-trivial
        T.collect_rollout(runner, 2)
        start = copy.deepcopy(runner)
        frozen = {}
        orig_td, orig_w = T.td_targets, T._actor_weights

        def td(*a, **k):
            frozen.setdefault("y", orig_td(*a, **k))
            return frozen["y"]

        def aw(*a, **k):
            frozen.setdefault("w", orig_w(*a, **k))
            return frozen["w"]

        states = []
        orig_critic = A.critic_forward

        def critic(crit, h, actions, alive=None):
            # replay the base pass's critic inputs in perturbed passes
            call = critic.calls
            critic.calls += 1
            if call == len(states):
                states.append(h.data.copy())
            return orig_critic(crit, Tensor(states[call]), actions, alive)

        def loss_value():
            critic.calls = 0
            r = copy.deepcopy(start)
            r.model = model
            traj = T.collect_rollout(r, cfg.rollout_len)
            return T.compute_losses(traj, cfg, cfg.resolved_reward_mode()).total

        T.td_targets, T._actor_weights, A.critic_forward = td, aw, critic
        try:
            total = loss_value()
            model.store.zero_grad()
            backward(total)
            grads = {k: t.grad.copy() for k, t in model.store.items()}
            # central differences lose about |L| * 1e-16 / eps to cancellation
            floor = 1e-6 * max(1.0, abs(float(total.data)))
            rng = np.random.default_rng(seed)
            eps = 1e-6
            for name, idx in ((n, tuple(rng.integers(s) for s in model.store[n].shape))
                              for n in model.store.names() for _ in range(per_param)):
                p = model.store[name]
                old = p.data[idx]
                p.data[idx] = old + eps
                up = float(loss_value().data)
                p.data[idx] = old - eps
                down = float(loss_value().data)
                p.data[idx] = old
                num = (up - down) / (2 * eps)
                ana = grads[name][idx]
                worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), floor))
        finally:
            T.td_targets, T._actor_weights, A.critic_forward = orig_td, orig_w, orig_critic
    return worst


def test_full_loss_gradient_matches_finite_differences():
    assert full_loss_fd_error() < 1e-3


def test_full_loss_gradient_with_gates():
    assert full_loss_fd_error(comm=CommConfig(d_k=3, d_v=2, gating=True)) < 1e-3


def test_full_loss_gradient_with_td_counterfactual_and_individual_rewards():
    assert full_loss_fd_error(env="traffic-easy", env_overrides={"horizon": 6}, reward_mode="individual",
                              actor_baseline="td_counterfactual",
                              comm=CommConfig(d_k=3, d_v=2)) < 1e-3


def test_critic_is_isolated_from_policy_through_its_input():
    """Critic loss alone must not move policy parameters (h is detached)."""
    cfg = _mini_cfg()
    with default_dtype(np.float64):
        model, runner = _mini_setup(cfg)
        traj = T.collect_rollout(runner, 3)
        losses = T.compute_losses(traj, cfg, "team")
        model.store.zero_grad()
        backward(losses.critic)
    for name, t in model.store.items():
        if name.startswith("policy"):
            assert not t.grad.any(), name
        elif name.startswith("critic.fc.weight"):
            assert t.grad.any()


def test_lr_zero_leaves_parameters_unchanged():
    cfg = _mini_cfg(lr=0.0, total_episodes=10**6)
    with default_dtype(np.float64):
        env = T._make_envs(cfg)[0]
        before = T.build_model(T.model_meta(cfg, env), cfg.seed).store.snapshot()
    result = T.train(cfg, max_iterations=3)
    for k, v in result.model.store.snapshot().items():
        np.testing.assert_array_equal(v, before[k])


def run_fingerprint(seed=3, iterations=4, env="traffic-easy"):
    cfg = TrainConfig(env=env, batch=4, hidden=16, critic_hidden=16, seed=seed, total_episodes=10**6,
                      comm=CommConfig(d_k=4, d_v=4), log_interval=1, attention_log_every=0)
    res = T.train(cfg, max_iterations=iterations)
    return res.model.store.snapshot(), res.metrics


def runs_bit_identical(seed=3, env="traffic-easy"):
    a, ma = run_fingerprint(seed, env=env)
    b, mb = run_fingerprint(seed, env=env)
    # json keeps NaN rows (windows with no finished episode) comparable
    same = all(np.array_equal(a[k], b[k]) for k in a) and json.dumps(ma) == json.dumps(mb)
    c, _ = run_fingerprint(seed + 1, env=env)
    differs = any(not np.array_equal(a[k], c[k]) for k in a)
    return same and differs


def test_single_worker_runs_are_bit_reproducible():
    assert runs_bit_identical()


def evaluation_never_touches_critic(tmp_path):
    cfg = TrainConfig(env="prey-small", batch=2, hidden=8, critic_hidden=8, total_episodes=10**6,
                      comm=CommConfig(d_k=4, d_v=4, gating=True), attention_log_every=0)
    res = T.train(cfg, tmp_path / "run", max_iterations=2)
    calls = res.model.critic.calls
    summary = T.evaluate(tmp_path / "run" / "checkpoint", episodes=5, seed=0)
    # the in-process critic was not called either
    return res.model.critic.calls == calls and summary["episodes"] == 5


def test_evaluation_runs_without_critic(tmp_path):
    assert evaluation_never_touches_critic(tmp_path)


def test_critic_call_during_rollout_in_decentralized_mode_raises():
    from commlab.agents import decentralized_execution

    cfg = _mini_cfg()
    with default_dtype(np.float64):
        model, runner = _mini_setup(cfg)
        with decentralized_execution():
            with pytest.raises(CriticAccessError):
                T.collect_rollout(runner, 1, train=True)
            with no_grad():
                T.collect_rollout(runner, 1, train=False)


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        TrainConfig(gamma=1.5)
    with pytest.raises(ConfigError):
        TrainConfig(actor_baseline="magic")
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"learning_rate": 1})
    assert TrainConfig(env="prey-small").resolved_reward_mode() == "individual"
    assert TrainConfig().digest() == TrainConfig().digest()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(tmp_path):
    cfg = _mini_cfg(total_episodes=10**6, lr=1e300)
    with pytest.raises(T.TrainingDiverged) as err:
        T.train(cfg, tmp_path, max_iterations=20)
    assert (tmp_path / "nan_dump.json").exists()
    assert "param_norms" in err.value.dump


def test_actor_weight_options():
    rng = np.random.default_rng(0)
    t_len, b, n = 3, 2, 4
    acted = (rng.random((t_len, b, n)) < 0.7).astype(float)
    q_team = rng.normal(size=(t_len, b, 1))
    q_ind = rng.normal(size=(t_len, b, n))
    y = rng.normal(size=(t_len, b, n))
    steps = [T.StepRecord(None, None, None, None, None, None, None, None, None,
                          baseline=rng.normal(size=(b, n, n))) for _ in range(t_len)]
    np.testing.assert_array_equal(T._actor_weights(q_team, steps, acted, "none"),
                                  np.broadcast_to(q_team, (t_len, b, n)))
    cf = T._actor_weights(q_ind, steps, acted, "counterfactual")
    tcf = T._actor_weights(q_ind, steps, acted, "td_counterfactual", y)
    for t in range(t_len):
        for i in range(b):
            for j in range(n):
                # per-agent critic head j pairs with agent j's own baseline
                assert cf[t, i, j] == q_ind[t, i, j] - steps[t].baseline[i, j, j]
                assert tcf[t, i, j] == y[t, i, j] - steps[t].baseline[i, j, j]
    bm = T._actor_weights(q_ind, steps, acted, "batch_mean")
    assert abs((bm * acted).sum()) < 1e-12
    z = T._actor_weights(q_ind, steps, acted, "td_counterfactual", y, normalize=True)
    assert abs((z * acted).sum() / acted.sum()) < 1e-12
    assert np.sqrt((z * z * acted).sum() / acted.sum()) == pytest.approx(1.0, rel=1e-6)
