"""Exact classical and quantum solutions for the fall of a particle to the
centre of the inverse-square potential, with numerical verification tools."""

__version__ = "0.1.0"
