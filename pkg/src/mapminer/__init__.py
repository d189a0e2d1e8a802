"""Intention mining on event logs: HMM strategies, pseudo-maps and intention clusters."""

__version__ = "0.1.0"
