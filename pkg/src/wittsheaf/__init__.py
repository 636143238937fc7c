"""Exact-arithmetic toolkit for intersection homology, Witt classes of
pseudomanifolds, chain duality on face posets and the point Witt-group
calculus of symmetric complexes."""

__version__ = "0.1.0"
