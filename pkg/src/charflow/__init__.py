"""charflow: desk-scale numerics for torus character-variety geometry,
center-manifold and torus gradient flows, Maslov/spectral-flow grading
arithmetic, neck-model eigenvalue analysis, and the interpolating metric
path.
"""

__version__ = "0.1.0"
