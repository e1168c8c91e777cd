"""Learned subgoal generation and time-budgeted subgoal selection for a planar arm."""

__version__ = "0.1.0"
