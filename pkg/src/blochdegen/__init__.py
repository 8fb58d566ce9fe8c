"""Kramers and inversion degeneracies of spinful Bloch electrons in triclinic crystals."""

__version__ = "0.1.0"
