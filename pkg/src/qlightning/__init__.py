"""Desk-scale simulator for quantum lightning over abelian group actions."""

__version__ = "0.1.0"
