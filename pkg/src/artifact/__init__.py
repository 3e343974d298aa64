"""Numerical verification toolkit for a delta-method subconvexity argument.

Modules: special_functions, arithmetic, delta_method, oscillatory, voronoi,
pipeline, exponents and cli.
"""

__version__ = "0.1.0"
