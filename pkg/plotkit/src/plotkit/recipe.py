"""Figure recipes: which files to read, what to draw, where to write it.

A recipe is a small JSON document::

    {"kind": "convergence", "inputs": ["run/convergence.csv"],
     "output": "fig/convergence.png", "title": "Abel, mu = 1/2"}

kind is one of convergence, profile, coeffs, contour. inputs may be a
single path or a list; every referenced file must exist when the recipe
is loaded. Unknown keys are rejected so a typo fails loudly instead of
silently dropping an option.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

KINDS = ("convergence", "profile", "coeffs", "contour")

# default contour ladder: level sets of the inverse-resolvent-norm from
# 1e-2 down to 1e-12, one per decade
EPS_LEVELS = tuple(10.0 ** -k for k in range(2, 13))

_SCALES = ("linear", "log")
_KEYS = frozenset(
    ("kind", "inputs", "output", "title", "xlabel", "ylabel",
     "xscale", "yscale", "levels", "figsize", "dpi")
)


class RecipeError(ValueError):
    """A recipe document or one of its input files is unusable."""


@dataclass(frozen=True)
class FigureRecipe:
    kind: str
    inputs: tuple[Path, ...]
    output: Path
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None
    xscale: str | None = None
    yscale: str | None = None
    levels: tuple[float, ...] | None = None
    figsize: tuple[float, float] | None = None
    dpi: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RecipeError(
                f"unknown figure kind {self.kind!r}; expected one of {', '.join(KINDS)}"
            )
        if not self.inputs:
            raise RecipeError("recipe lists no inputs")
        if self.kind != "convergence" and len(self.inputs) != 1:
            raise RecipeError(f"kind {self.kind!r} takes exactly one input file")
        for scale in (self.xscale, self.yscale):
            if scale is not None and scale not in _SCALES:
                raise RecipeError(f"scale must be one of {_SCALES}, got {scale!r}")
        if self.levels is not None:
            if self.kind != "contour":
                raise RecipeError("levels only applies to contour figures")
            if len(self.levels) < 1:
                raise RecipeError("levels must not be empty")
            if any(b >= a for a, b in zip(self.levels, self.levels[1:])):
                raise RecipeError("contour levels must be strictly decreasing")
        if self.figsize is not None and any(not s > 0 for s in self.figsize):
            raise RecipeError("figsize entries must be positive")
        if self.dpi is not None and self.dpi <= 0:
            raise RecipeError("dpi must be positive")

    @property
    def contour_levels(self) -> tuple[float, ...]:
        return self.levels if self.levels is not None else EPS_LEVELS


def _string(doc, key, required=False):
    if key not in doc:
        if required:
            raise RecipeError(f"recipe is missing required key {key!r}")
        return None
    value = doc[key]
    if not isinstance(value, str) or not value:
        raise RecipeError(f"{key!r} must be a non-empty string")
    return value


def _pair(doc, key):
    value = doc.get(key)
    if value is None:
        return None
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) for v in value)):
        raise RecipeError(f"{key!r} must be a pair of numbers")
    return (float(value[0]), float(value[1]))


def load_recipe(path) -> FigureRecipe:
    """Read and validate a recipe document, checking its inputs exist."""
    path = Path(path)
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise RecipeError(f"malformed recipe {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise RecipeError(f"recipe {path} must be a JSON object")
    unknown = sorted(set(doc) - _KEYS)
    if unknown:
        raise RecipeError(f"unknown recipe keys: {', '.join(unknown)}")

    raw_inputs = doc.get("inputs")
    if isinstance(raw_inputs, str):
        raw_inputs = [raw_inputs]
    if (not isinstance(raw_inputs, list) or not raw_inputs
            or not all(isinstance(p, str) and p for p in raw_inputs)):
        raise RecipeError("'inputs' must be a path or a non-empty list of paths")

    levels = doc.get("levels")
    if levels is not None:
        if (not isinstance(levels, list)
                or not all(isinstance(v, (int, float)) for v in levels)):
            raise RecipeError("'levels' must be a list of numbers")
        levels = tuple(float(v) for v in levels)

    dpi = doc.get("dpi")
    if dpi is not None and (not isinstance(dpi, int) or isinstance(dpi, bool)):
        raise RecipeError("'dpi' must be an integer")

    # resolve inputs relative to the recipe file, as paths in a checked-in
    # recipe usually point beside it
    base = path.parent
    inputs = tuple((base / p) if not Path(p).is_absolute() else Path(p)
                   for p in raw_inputs)
    output = _string(doc, "output", required=True)
    output_path = (base / output) if not Path(output).is_absolute() else Path(output)

    recipe = FigureRecipe(
        kind=_string(doc, "kind", required=True),
        inputs=inputs,
        output=output_path,
        title=_string(doc, "title"),
        xlabel=_string(doc, "xlabel"),
        ylabel=_string(doc, "ylabel"),
        xscale=_string(doc, "xscale"),
        yscale=_string(doc, "yscale"),
        levels=levels,
        figsize=_pair(doc, "figsize"),
        dpi=dpi,
    )
    for p in recipe.inputs:
        if not p.is_file():
            raise RecipeError(f"input file not found: {p}")
    return recipe
