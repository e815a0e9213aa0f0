"""Mixed finite elements for planar elasticity on convex quadrilateral meshes.

Stress, displacement and rotation are approximated simultaneously; stress
symmetry is imposed weakly through the rotation multiplier.  The package
covers mesh generation, the mapped element families, assembly and solution
of the saddle-point system, and the convergence / locking / diagnostic
studies exposed through the ``quadelast`` command line tool.
"""

__version__ = "0.1.0"
