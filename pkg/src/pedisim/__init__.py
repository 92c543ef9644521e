"""Deterministic quadruped pedipulation simulation stack.

Perceptive foot-position tracking with whole-body obstacle avoidance:
world geometry and contacts, simplified robot dynamics, 2.5D height scan,
contact-structured rewards with a contact switch, obstacle scenarios,
a desk-scale trainer, an evaluation harness and a live teleoperation service.
"""

__version__ = "0.1.0"
