"""Simulator for 2D solid-state dewetting of thin films on curved substrates."""

__version__ = "0.1.0"
