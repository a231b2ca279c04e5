"""Complete integrals of the geodesic Hamilton-Jacobi equation on homogeneous spaces.

The metric is written in an invariant frame of a simply transitive group of
motions; the equation is reduced to a coadjoint orbit and a canonical chart,
solved there, and lifted back to a complete integral S(x; alpha).
"""

__version__ = "0.1.0"
