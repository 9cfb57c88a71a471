"""Renderers for the four figure kinds.

Each kind reads one table shape:

- convergence: any CSV whose first column is the truncation size and
  whose remaining columns are error measures. Every numeric column
  becomes a curve; several inputs overlay.
- profile: sampled solution values (x, re_u, im_u), drawn as a real
  and an imaginary curve.
- coeffs: coefficient magnitudes from a solution or eigenvector JSON
  document, one decay curve per coefficient vector.
- contour: a pseudospectra grid (re_z, im_z, inverse_resolvent_norm),
  drawn as level sets of the inverse-resolvent-norm.

Rendering never writes anything except the output image.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .recipe import FigureRecipe, RecipeError


def _read_table(path):
    """CSV as (names, list of string rows); header plus one row minimum."""
    try:
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise RecipeError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise RecipeError(f"{path} has no data rows")
    names, data = rows[0], rows[1:]
    for i, row in enumerate(data):
        if len(row) != len(names):
            raise RecipeError(f"{path} row {i + 2} has {len(row)} cells, header has {len(names)}")
    return names, data


def _floats(data, col, name, path):
    out = np.empty(len(data))
    for i, row in enumerate(data):
        try:
            out[i] = float(row[col])
        except ValueError as exc:
            raise RecipeError(
                f"column {name!r} in {path} is not numeric (row {i + 2}: {row[col]!r})"
            ) from exc
    return out


def draw_convergence(ax, recipe: FigureRecipe):
    many = len(recipe.inputs) > 1
    positive = True
    for path in recipe.inputs:
        names, data = _read_table(path)
        if len(names) < 2:
            raise RecipeError(f"{path} needs an x column and at least one value column")
        x = _floats(data, 0, names[0], path)
        for col in range(1, len(names)):
            y = _floats(data, col, names[col], path)
            finite = y[np.isfinite(y)]
            positive = positive and bool(np.all(finite > 0))
            label = f"{Path(path).parent.name or Path(path).stem}: {names[col]}" if many else names[col]
            ax.plot(x, y, marker="o", label=label)
    # error curves live on a log axis; fall back to linear when a value
    # is zero or negative and log would drop it
    if recipe.yscale is None:
        ax.set_yscale("log" if positive else "linear")
    ax.set_xlabel(recipe.xlabel or "N")
    ax.legend()


def draw_profile(ax, recipe: FigureRecipe):
    path = recipe.inputs[0]
    names, data = _read_table(path)
    re_col = next((i for i, n in enumerate(names[1:], 1) if n.startswith("re")), None)
    im_col = next((i for i, n in enumerate(names[1:], 1) if n.startswith("im")), None)
    if re_col is None or im_col is None:
        raise RecipeError(f"{path} has no re_*/im_* columns; not a profile table")
    x = _floats(data, 0, names[0], path)
    ax.plot(x, _floats(data, re_col, names[re_col], path), label="real")
    ax.plot(x, _floats(data, im_col, names[im_col], path), "--", label="imaginary")
    ax.set_xlabel(recipe.xlabel or names[0])
    ax.legend()


def _coefficient_vectors(path):
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise RecipeError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RecipeError(f"malformed JSON in {path}: {exc}") from exc
    if isinstance(doc, dict) and "vectors" in doc:
        vecs = doc["vectors"]
        try:
            return [
                (f"vector {i + 1}", np.hypot(np.asarray(v["re"], float), np.asarray(v["im"], float)))
                for i, v in enumerate(vecs)
            ]
        except (TypeError, KeyError, ValueError) as exc:
            raise RecipeError(f"{path} vectors are not re/im coefficient lists") from exc
    if isinstance(doc, dict) and "coeffs_re" in doc:
        try:
            mag = np.hypot(
                np.asarray(doc["coeffs_re"], float),
                np.asarray(doc.get("coeffs_im", np.zeros(len(doc["coeffs_re"]))), float),
            )
        except (TypeError, ValueError) as exc:
            raise RecipeError(f"{path} coefficient lists are not numeric") from exc
        return [("|c_n|", mag)]
    raise RecipeError(f"{path} holds neither solution coefficients nor eigenvectors")


def draw_coeffs(ax, recipe: FigureRecipe):
    series = _coefficient_vectors(recipe.inputs[0])
    for label, mag in series:
        n = np.arange(len(mag))
        keep = mag > 0  # exact zeros have no log image
        ax.plot(n[keep], mag[keep], label=label)
    if recipe.yscale is None:
        ax.set_yscale("log")
    ax.set_xlabel(recipe.xlabel or "n")
    if len(series) > 1 or series[0][0] != "|c_n|":
        ax.legend()
    else:
        ax.set_ylabel(recipe.ylabel or "|c_n|")


def _grid(path):
    names, data = _read_table(path)
    cols = {}
    for want in ("re_z", "im_z", "inverse_resolvent_norm"):
        if want not in names:
            raise RecipeError(f"{path} has no {want!r} column; not a pseudospectra table")
        cols[want] = _floats(data, names.index(want), want, path)
    re_vals = np.unique(cols["re_z"])
    im_vals = np.unique(cols["im_z"])
    if len(data) != len(re_vals) * len(im_vals):
        raise RecipeError(f"{path} is not a full grid")
    sigma = np.full((len(im_vals), len(re_vals)), np.nan)
    ii = np.searchsorted(im_vals, cols["im_z"])
    jj = np.searchsorted(re_vals, cols["re_z"])
    sigma[ii, jj] = cols["inverse_resolvent_norm"]
    if np.isnan(sigma).any() and not np.isnan(cols["inverse_resolvent_norm"]).any():
        raise RecipeError(f"{path} repeats grid points")
    flagged = None
    if "flagged" in names:
        mask = _floats(data, names.index("flagged"), "flagged", path) != 0
        flagged = (cols["re_z"][mask], cols["im_z"][mask])
    return re_vals, im_vals, sigma, flagged


def draw_contour(ax, recipe: FigureRecipe):
    """Level sets of the inverse-resolvent-norm; returns the contour set."""
    re_vals, im_vals, sigma, flagged = _grid(recipe.inputs[0])
    # recipe levels run largest to smallest; matplotlib wants ascending
    cs = ax.contour(re_vals, im_vals, sigma,
                    levels=sorted(recipe.contour_levels), cmap="viridis")
    if flagged is not None and len(flagged[0]):
        ax.plot(flagged[0], flagged[1], "kx", label="flagged")
        ax.legend()
    ax.set_aspect("equal")
    ax.set_xlabel(recipe.xlabel or "Re z")
    ax.set_ylabel(recipe.ylabel or "Im z")
    return cs


_DRAW = {
    "convergence": draw_convergence,
    "profile": draw_profile,
    "coeffs": draw_coeffs,
    "contour": draw_contour,
}


def build_figure(recipe: FigureRecipe):
    """Draw the recipe onto a fresh figure without writing anything."""
    fig, ax = plt.subplots(figsize=recipe.figsize)
    try:
        _DRAW[recipe.kind](ax, recipe)
        if recipe.title:
            ax.set_title(recipe.title)
        if recipe.xlabel:
            ax.set_xlabel(recipe.xlabel)
        if recipe.ylabel:
            ax.set_ylabel(recipe.ylabel)
        if recipe.xscale:
            ax.set_xscale(recipe.xscale)
        if recipe.yscale:
            ax.set_yscale(recipe.yscale)
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(recipe: FigureRecipe) -> Path:
    """Write the recipe's figure to its output path and return that path."""
    fig = build_figure(recipe)
    try:
        out = Path(recipe.output)
        if out.parent != Path(""):
            os.makedirs(out.parent, exist_ok=True)
        fig.savefig(out, dpi=recipe.dpi)
    finally:
        plt.close(fig)
    return out
