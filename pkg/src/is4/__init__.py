"""Decision procedure for the intuitionistic modal logic IS4.

Given a formula, `decide` terminates with either a checkable proof object
or a finite birelational countermodel that is re-verified independently.
"""

from .formula import Formula, Bot, Atom, And, Or, Imp, Box, Dia, parse, subformulas

__all__ = [
    "Formula",
    "Bot",
    "Atom",
    "And",
    "Or",
    "Imp",
    "Box",
    "Dia",
    "parse",
    "subformulas",
]
