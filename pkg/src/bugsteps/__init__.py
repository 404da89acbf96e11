"""Compiler bug isolation through causal analysis of compilation steps."""

__version__ = "0.1.0"
