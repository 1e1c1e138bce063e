"""
Lua reduction semantics.

An executable small-step semantics for Lua 5.2: programs are parsed into a
term language and run by repeated decomposition into an evaluation context
and a redex, each step rewriting the redex with a single reduction rule.
"""

__version__ = "1.0.0"
