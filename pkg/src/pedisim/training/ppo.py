"""Vectorized rollout collection, clipped-surrogate policy optimization with a
GAE baseline, checkpointing, and the training loop with curriculum updates.
"""
from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..env import EnvConfig, PedipulationEnv, VecEnv
from ..mdp import CurriculumState, EpisodeStats, update_curriculum
from ..seeding import derive_seeds
from .policy import ActorCritic, PolicySpec

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class PpoConfig:
    horizon: int = 24
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    lr: float = 1e-3
    value_coef: float = 0.5
    entropy_coef: float = 0.003
    max_grad_norm: float = 1.0


@dataclass
class RolloutBatch:
    """On-policy batch indexed [env, step]."""

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    last_values: np.ndarray  # (env,), bootstrap for the step after the horizon
    tracking_rewards: np.ndarray
    tracking_errors: np.ndarray

    def __post_init__(self):
        n, t = self.rewards.shape
        for name in ("observations", "actions", "log_probs", "dones", "values"):
            if getattr(self, name).shape[:2] != (n, t):
                raise ValueError(f"batch field {name} has inconsistent leading dims")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("batch rewards must be finite")

    @property
    def num_envs(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_steps(self) -> int:
        return self.rewards.shape[1]


def collect_rollouts(vec: VecEnv, policy: ActorCritic, horizon: int, obs: np.ndarray,
                     generator: torch.Generator):
    """Step all environments synchronously for `horizon` control steps.

    Environments reset themselves on termination; `obs` is the current
    observation stack and the post-rollout stack is returned alongside the
    batch for seamless continuation.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = len(vec)
    obs_buf = np.zeros((n, horizon, obs.shape[1]), dtype=np.float32)
    act_buf = np.zeros((n, horizon, policy.spec.act_dim), dtype=np.float32)
    logp_buf = np.zeros((n, horizon), dtype=np.float32)
    rew_buf = np.zeros((n, horizon), dtype=np.float32)
    done_buf = np.zeros((n, horizon), dtype=bool)
    val_buf = np.zeros((n, horizon), dtype=np.float32)
    track_buf = np.zeros((n, horizon), dtype=np.float32)
    err_buf = np.zeros((n, horizon), dtype=np.float32)

    for t in range(horizon):
        obs_t = torch.as_tensor(obs, dtype=torch.float32)
        actions, logp, values = policy.act(obs_t, generator=generator)
        actions_np = actions.numpy()
        next_obs, rewards, dones, infos = vec.step(actions_np)
        obs_buf[:, t] = obs
        act_buf[:, t] = actions_np
        logp_buf[:, t] = logp.numpy()
        rew_buf[:, t] = rewards
        done_buf[:, t] = dones
        val_buf[:, t] = values.numpy()
        track_buf[:, t] = [i["breakdown"].command_tracking for i in infos]
        err_buf[:, t] = [i["tracking_error"] for i in infos]
        obs = next_obs

    with torch.no_grad():
        last_values = policy.value(torch.as_tensor(obs, dtype=torch.float32)).numpy()
    batch = RolloutBatch(
        observations=obs_buf, actions=act_buf, log_probs=logp_buf, rewards=rew_buf,
        dones=done_buf, values=val_buf, last_values=last_values,
        tracking_rewards=track_buf, tracking_errors=err_buf,
    )
    return batch, obs


def compute_gae(batch: RolloutBatch, gamma: float, lam: float):
    """Generalized advantage estimation over the batch; returns (advantages, returns)."""
    n, t = batch.rewards.shape
    adv = np.zeros((n, t), dtype=np.float32)
    last = np.zeros(n, dtype=np.float32)
    next_values = batch.last_values
    for k in reversed(range(t)):
        not_done = 1.0 - batch.dones[:, k].astype(np.float32)
        delta = batch.rewards[:, k] + gamma * next_values * not_done - batch.values[:, k]
        last = delta + gamma * lam * not_done * last
        adv[:, k] = last
        next_values = batch.values[:, k]
    returns = adv + batch.values
    return adv, returns


def ppo_loss(policy: ActorCritic, obs, actions, old_logp, advantages, returns, cfg: PpoConfig):
    """Clipped-surrogate loss with value and entropy terms; also returns stats."""
    logp, entropy, values = policy.evaluate(obs, actions)
    ratio = torch.exp(logp - old_logp)
    surr = ratio * advantages
    surr_clipped = torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages
    policy_loss = -torch.min(surr, surr_clipped).mean()
    value_loss = 0.5 * (returns - values).pow(2).mean()
    entropy_loss = -entropy.mean()
    loss = policy_loss + cfg.value_coef * value_loss + cfg.entropy_coef * entropy_loss
    # k3 estimator: (r - 1) - log r >= 0 pointwise
    kl = ((ratio - 1.0) - (logp - old_logp)).mean()
    stats = {
        "loss": float(loss.detach()),
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(-entropy_loss.detach()),
        "kl": float(kl.detach()),
    }
    return loss, stats


def update_policy(policy: ActorCritic, optimizer: torch.optim.Optimizer, batch: RolloutBatch,
                  cfg: PpoConfig, generator: torch.Generator):
    """Several epochs of minibatched clipped-surrogate steps. Returns mean stats."""
    if batch.num_envs * batch.num_steps == 0:
        raise ValueError("batch must be nonempty")
    adv, returns = compute_gae(batch, cfg.gamma, cfg.lam)
    flat = batch.num_envs * batch.num_steps
    obs = torch.as_tensor(batch.observations.reshape(flat, -1), dtype=torch.float32)
    actions = torch.as_tensor(batch.actions.reshape(flat, -1), dtype=torch.float32)
    old_logp = torch.as_tensor(batch.log_probs.reshape(flat), dtype=torch.float32)
    adv_t = torch.as_tensor(adv.reshape(flat), dtype=torch.float32)
    ret_t = torch.as_tensor(returns.reshape(flat), dtype=torch.float32)
    std = adv_t.std()
    if std > 1e-8:
        adv_t = (adv_t - adv_t.mean()) / (std + 1e-8)

    mb_size = max(1, flat // cfg.minibatches)
    all_stats: list = []
    for _ in range(cfg.epochs):
        perm = torch.randperm(flat, generator=generator)
        for start in range(0, flat, mb_size):
            idx = perm[start:start + mb_size]
            loss, stats = ppo_loss(policy, obs[idx], actions[idx], old_logp[idx],
                                   adv_t[idx], ret_t[idx], cfg)
            if not np.isfinite(stats["loss"]):
                raise FloatingPointError(f"non-finite PPO loss: {stats}")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(policy.parameters(), cfg.max_grad_norm)
            optimizer.step()
            all_stats.append(stats)
    out = {k: float(np.mean([s[k] for s in all_stats])) for k in all_stats[0]}
    out["mean_reward"] = float(batch.rewards.mean())
    out["mean_tracking_reward"] = float(batch.tracking_rewards.mean())
    out["mean_tracking_error"] = float(batch.tracking_errors.mean())
    return out


def save_checkpoint(path, policy: ActorCritic, optimizer=None, extra: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "spec": dataclasses.asdict(policy.spec),
        "policy": policy.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path):
    payload = torch.load(path, weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    policy = ActorCritic(PolicySpec(**payload["spec"]))
    policy.load_state_dict(payload["policy"])
    return policy, payload


@dataclass
class TrainerConfig:
    num_envs: int = 16
    updates: int = 200
    stage: int = 1
    seed: int = 0
    ppo: PpoConfig = PpoConfig()
    env: EnvConfig = EnvConfig()
    checkpoint_every: int = 0      # 0 = only final
    out_dir: str | None = None


class Trainer:
    """Seeded end-to-end training loop: rollouts, curriculum, updates, metrics."""

    def __init__(self, cfg: TrainerConfig, scenario_assignment=None):
        from ..scenarios import assign_scenarios

        self.cfg = cfg
        torch.set_num_threads(1)
        torch.manual_seed(cfg.seed)
        self.generator = torch.Generator().manual_seed(cfg.seed)
        env_seeds = derive_seeds(cfg.seed, cfg.num_envs)
        if cfg.stage >= 2:
            ids = scenario_assignment or assign_scenarios(
                cfg.num_envs, np.random.default_rng(derive_seeds(cfg.seed, 1, stream="scenarios")[0]))
        else:
            ids = [None] * cfg.num_envs
        base_env = dataclasses.replace(cfg.env, stage=cfg.stage)
        self.curriculum = CurriculumState.for_stage(cfg.stage, base_env.curriculum)
        envs = [PedipulationEnv(dataclasses.replace(base_env, scenario_id=ids[k]), int(env_seeds[k]),
                                curriculum=self.curriculum)
                for k in range(cfg.num_envs)]
        self.vec = VecEnv(envs)
        self.policy = ActorCritic(PolicySpec())
        self.optimizer = torch.optim.Adam(self.policy.parameters(), lr=cfg.ppo.lr)
        self.metrics: list = []
        self.obs = self.vec.reset()

    def run(self, updates: int | None = None) -> list:
        cfg = self.cfg
        updates = cfg.updates if updates is None else updates
        out_dir = Path(cfg.out_dir) if cfg.out_dir else None
        metrics_file = None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
            metrics_file = open(out_dir / "metrics.jsonl", "a")
        try:
            for update in range(updates):
                t0 = time.perf_counter()
                batch, self.obs = collect_rollouts(self.vec, self.policy, cfg.ppo.horizon,
                                                   self.obs, self.generator)
                stats = update_policy(self.policy, self.optimizer, batch, cfg.ppo, self.generator)
                self.curriculum = update_curriculum(
                    self.curriculum,
                    EpisodeStats(stats["mean_tracking_error"], batch.num_envs * batch.num_steps),
                    self.cfg.env.curriculum,
                )
                self.vec.set_curriculum(self.curriculum)
                stats.update(update=update, stage=self.curriculum.stage,
                             command_scale=self.curriculum.command_scale,
                             oa_ramp=self.curriculum.oa_ramp,
                             seconds=time.perf_counter() - t0)
                self.metrics.append(stats)
                if metrics_file:
                    metrics_file.write(json.dumps(stats) + "\n")
                if out_dir and cfg.checkpoint_every and (update + 1) % cfg.checkpoint_every == 0:
                    save_checkpoint(out_dir / f"checkpoint_{update + 1:05d}.pt", self.policy,
                                    self.optimizer, extra={"update": update + 1})
            if out_dir:
                save_checkpoint(out_dir / "checkpoint_final.pt", self.policy, self.optimizer,
                                extra={"update": updates})
        finally:
            if metrics_file:
                metrics_file.close()
        return self.metrics
