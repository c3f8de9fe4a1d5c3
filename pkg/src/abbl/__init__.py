"""Satisfiability checking and model tools for the interval logic ABB̄L̄."""

from abbl.formula import (
    BOT, TOP, ClosureTable, Diamond, Formula, FormulaSyntaxError, Not, Or, Prop,
    Rel, closure, normalize, parse, pretty,
)

__all__ = [
    "BOT", "TOP", "ClosureTable", "Diamond", "Formula", "FormulaSyntaxError",
    "Not", "Or", "Prop", "Rel", "closure", "normalize", "parse", "pretty",
]
