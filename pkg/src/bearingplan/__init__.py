"""Sample-based output-feedback navigation from bearing measurements.

``plan`` grows and simplifies an RRT* tree and decomposes the workspace into
convex cells, ``synth`` solves one CLF/CBF-constrained gain per tree edge,
``bearing`` turns bearings into uniformly scaled landmark displacements and
``sim`` runs the switched controllers.
"""
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
