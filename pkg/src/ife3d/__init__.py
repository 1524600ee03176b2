"""Trilinear immersed finite elements on Cartesian meshes.

Solves -div(beta grad u) = f with a piecewise-constant diffusion
coefficient that jumps across a closed interface not fitted by the
mesh.  Shape functions on cut elements are trilinear on each side of a
local approximating plane and coupled through interface jump
conditions; interior-penalty terms on faces near the interface restore
consistency of the broken space.
"""
from .mesh import BoxDomain, Mesh, build_mesh

__all__ = ["BoxDomain", "Mesh", "build_mesh"]
