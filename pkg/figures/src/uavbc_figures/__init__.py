"""Figure rendering for uavbc result tables."""

from .render import FigureSpec, RenderError, render

__all__ = ["FigureSpec", "RenderError", "render"]
