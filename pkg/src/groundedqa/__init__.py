"""Hybrid retrieval QA with citation grounding and a self-healing SQL planner."""

__version__ = "0.1.0"
