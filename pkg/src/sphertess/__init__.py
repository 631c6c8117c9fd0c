"""Spherical convex geometry, stability inequalities and Poisson-driven
random tessellations of the sphere, with Monte Carlo verification tools."""

__version__ = "0.1.0"
