"""Figure rendering for cfsupp sweep CSVs."""

__version__ = "0.1.0"

from .render import (
    FigureRecipe,
    MissingSeries,
    RecipeError,
    RenderError,
    SchemaMismatch,
    Series,
    render,
)
