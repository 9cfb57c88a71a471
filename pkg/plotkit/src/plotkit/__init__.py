"""Figures from fracspec output files: convergence curves, solution
profiles, coefficient decay, pseudospectra contours.

The package never recomputes anything; it reads the CSV/JSON files the
solver CLI writes and renders them through the Agg backend.
"""

from .figures import build_figure, render
from .recipe import EPS_LEVELS, KINDS, FigureRecipe, RecipeError, load_recipe

__version__ = "0.1.0"

__all__ = [
    "EPS_LEVELS",
    "KINDS",
    "FigureRecipe",
    "RecipeError",
    "build_figure",
    "load_recipe",
    "render",
]
