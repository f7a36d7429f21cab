"""Accretive growth of a second-grade viscoelastic solid on a 2D grid.

Arrival times of the growing front come from a fast-marching eikonal solve;
the deformation from incremental energy minimization with backstrain
recorded at attachment; the two are coupled by a fixed-point loop.
"""

__version__ = "0.1.0"
