"""Underwater multi-target tracking: stochastic 3-D environment plus a
hybrid-action multi-expert reinforcement-learning agent, all on numpy."""

__version__ = "0.1.0"
