"""Quadrotor flight simulation and PPO training for landing and set-point tasks."""

__version__ = "0.1.0"
