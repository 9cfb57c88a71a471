"""plot <recipe.json>: render one figure from solver output files.

Relative paths inside the recipe resolve against the recipe's own
directory, so a recipe checked in next to its run directory works from
anywhere. Exit codes: 0 on success, 2 when the recipe or an input file
is missing or malformed.
"""

import argparse
import sys

from .figures import render
from .recipe import RecipeError, load_recipe


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render one figure from a JSON recipe."
    )
    parser.add_argument("recipe", help="path to a JSON figure recipe")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        out = render(load_recipe(args.recipe))
    except (RecipeError, OSError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
