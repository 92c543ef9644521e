"""Gaussian MLP actor-critic over the stacked observation vector.

Network sizes and optimizer settings are desk-scale defaults, not calibrated
values. A fixed per-component input scaling keeps the disparate observation
magnitudes comparable without stateful normalization (determinism first).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from ..mdp import OBS_DIM, OBS_LAYOUT

_COMPONENT_SCALES = {
    "base_lin_vel": 2.0,
    "base_ang_vel": 0.25,
    "projected_gravity": 1.0,
    "joint_pos": 1.0,
    "joint_vel": 0.05,
    "foot_command": 1.0,
    "prev_actions": 1.0,
    "height_scan": 1.0,
    "contact_switch": 1.0,
}


def observation_scales() -> np.ndarray:
    parts = [np.full(n, _COMPONENT_SCALES[name]) for name, n in OBS_LAYOUT]
    return np.concatenate(parts).astype(np.float32)


@dataclass(frozen=True)
class PolicySpec:
    obs_dim: int = OBS_DIM
    act_dim: int = 12
    hidden: tuple = (256, 256)
    activation: str = "elu"
    init_log_std: float = -1.0

    def __post_init__(self):
        if self.obs_dim < 1 or self.act_dim < 1:
            raise ValueError("policy dims must be positive")


_ACTIVATIONS = {"elu": nn.ELU, "tanh": nn.Tanh, "relu": nn.ReLU}


def _mlp(in_dim: int, hidden: tuple, out_dim: int, act_name: str) -> nn.Sequential:
    act = _ACTIVATIONS[act_name]
    layers = []
    last = in_dim
    for h in hidden:
        layers += [nn.Linear(last, h), act()]
        last = h
    layers.append(nn.Linear(last, out_dim))
    return nn.Sequential(*layers)


class ActorCritic(nn.Module):
    def __init__(self, spec: PolicySpec = PolicySpec(), obs_scales: np.ndarray | None = None):
        super().__init__()
        self.spec = spec
        if obs_scales is None:
            obs_scales = observation_scales() if spec.obs_dim == OBS_DIM else np.ones(spec.obs_dim, np.float32)
        self.register_buffer("obs_scales", torch.as_tensor(obs_scales, dtype=torch.float32))
        self.actor = _mlp(spec.obs_dim, spec.hidden, spec.act_dim, spec.activation)
        self.critic = _mlp(spec.obs_dim, spec.hidden, 1, spec.activation)
        self.log_std = nn.Parameter(torch.full((spec.act_dim,), float(spec.init_log_std)))

    def _scale(self, obs: torch.Tensor) -> torch.Tensor:
        return obs * self.obs_scales

    def dist_params(self, obs: torch.Tensor):
        x = self._scale(obs)
        return self.actor(x), self.log_std.exp()

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(self._scale(obs)).squeeze(-1)

    @staticmethod
    def _log_prob(actions, mean, std):
        var = std ** 2
        return (-0.5 * ((actions - mean) ** 2) / var - std.log() - 0.5 * np.log(2 * np.pi)).sum(-1)

    @torch.no_grad()
    def act(self, obs: torch.Tensor, generator: torch.Generator | None = None, deterministic: bool = False):
        """Sample actions; returns (actions, log_probs, values)."""
        mean, std = self.dist_params(obs)
        if deterministic:
            actions = mean
        else:
            eps = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
            actions = mean + eps * std
        return actions, self._log_prob(actions, mean, std), self.value(obs)

    def evaluate(self, obs: torch.Tensor, actions: torch.Tensor):
        """Differentiable log-probs, entropy and values for an update pass."""
        mean, std = self.dist_params(obs)
        logp = self._log_prob(actions, mean, std)
        entropy = (self.log_std + 0.5 * np.log(2 * np.pi * np.e)).sum().expand(logp.shape)
        return logp, entropy, self.value(obs)
