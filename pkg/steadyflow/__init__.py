"""Numerical workbench for steady two-dimensional Euler flows."""

from steadyflow.report import TOOL_NAME, TOOL_VERSION

__version__ = TOOL_VERSION
__all__ = ["TOOL_NAME", "TOOL_VERSION", "__version__"]
