"""Checkpoint-backed controller with the same call shape as the baseline."""
from __future__ import annotations

import numpy as np

from ..mdp import FootCommand, assemble_observation
from ..robot import RobotState


class PolicyController:
    """Runs a trained policy deterministically from structured inputs."""

    def __init__(self, checkpoint_path, deterministic: bool = True):
        import torch  # noqa: F401  (lazy: keeps torch out of non-training paths)

        from .ppo import load_checkpoint

        self.policy, _ = load_checkpoint(checkpoint_path)
        self.policy.eval()
        self.deterministic = deterministic
        self.prev_action = np.zeros(self.policy.spec.act_dim)

    def reset(self) -> None:
        self.prev_action = np.zeros(self.policy.spec.act_dim)

    def __call__(self, state: RobotState, scan: np.ndarray, command: FootCommand) -> np.ndarray:
        import torch

        obs = assemble_observation(state, command, self.prev_action, scan, noise_on=False)
        with torch.no_grad():
            actions, _, _ = self.policy.act(
                torch.as_tensor(obs[None, :], dtype=torch.float32), deterministic=self.deterministic
            )
        action = actions.numpy()[0]
        self.prev_action = action
        return action
