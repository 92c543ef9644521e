"""Trainer, policy network and the scripted whole-body baseline controller.

torch is imported lazily by the policy/PPO modules so that the rest of the
package stays torch-free.
"""

from .baseline import BaselineConfig, BaselineController  # noqa: F401
