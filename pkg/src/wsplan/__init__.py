"""Workspace-based motion planning for articulated link robots in 2D."""

__version__ = "0.1.0"
