"""
Biharmonic operator on a sphere
===============================

Build the mesh operator for a small icosphere and check the properties that
the interpolation step relies on.
"""

# %%
# A subdivided icosahedron projected onto the unit sphere.
import numpy as np

import sbha

mesh = sbha.make_sphere_mesh(3)
stats = sbha.mesh_stats(mesh)
print(f"{stats.n_vertices} vertices, {stats.n_edges} edges, {stats.n_faces} faces")

# %%
# Cotangent weights, lumped masses and the biharmonic operator. Constant
# functions lie in its kernel, and it is symmetric by construction.
M = sbha.mesh_biharmonic(mesh)
print("nnz(M) =", M.M.nnz)
print("max |M 1| =", np.abs(M.M @ np.ones(M.n)).max())
print("symmetric:", abs(M.M - M.M.T).max() == 0)

# %%
# The total lumped mass is the surface area, which approaches 4 pi.
D = sbha.lumped_mass(mesh)
print(f"area {D.sum():.5f} vs 4 pi = {4 * np.pi:.5f}")

# %%
# Interpolating from farthest-point landmarks. Every row of ``P`` sums to one,
# so constants are reproduced exactly.
oracle = sbha.DistanceOracle(mesh)
landmarks = sbha.select_landmarks(oracle, 64)
P = sbha.interpolation_operator(M, landmarks)
print("max |P 1 - 1| =", np.abs(P.toarray().sum(axis=1) - 1).max())
