"""Command-line entry point: cfsupp-render --recipe <file> --out <path>."""

from __future__ import annotations

import argparse
import sys

from .render import FigureRecipe, MissingSeries, RecipeError, SchemaMismatch, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cfsupp-render")
    parser.add_argument("--recipe", required=True, help="JSON figure recipe")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        recipe = FigureRecipe.from_file(args.recipe)
        render(recipe, args.out)
    except RecipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except MissingSeries as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
