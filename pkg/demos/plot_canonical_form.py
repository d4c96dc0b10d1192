"""
Canonical form as vertex colors
===============================

Embed a mesh into three dimensions from its approximate geodesic distances
and write the coordinates as per-vertex colors to a PLY file.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

import sbha
from sbha.cli import canonical_colors

mesh = sbha.make_sphere_mesh(5)
oracle = sbha.DistanceOracle(mesh)
landmarks = sbha.select_landmarks(oracle, 200)
P = sbha.sparse_interpolation_operator(sbha.mesh_biharmonic(mesh), landmarks, p_row=30)

# %%
# MDS needs squared distances, so the landmark block is squared before the
# Lanczos solve. Only products with ``P`` and ``W`` are ever formed.
approx = sbha.bha(P, landmarks, squared=True)
emb = sbha.sbmds(approx, 3)
print("eigenvalues:", emb.eigenvalues)

# %%
# Check the embedding against exact distances on a row sample.
sample = sbha.sample_rows(oracle, 300, seed=0)
print(f"sampled stress {sbha.stress(emb, sample):.4e}")
print(f"stress against the approximation {sbha.stress(emb, approx):.4e}")

# %%
# Each coordinate is mapped to 0..255 and stored as red, green and blue.
colors = canonical_colors(emb.Z)
out = Path(tempfile.gettempdir()) / "canonical_sphere.ply"
sbha.write_mesh(out, mesh, colors=colors)
print("wrote", out, "colors span", colors.min(axis=0), "to", colors.max(axis=0))
print("mean color", np.round(colors.mean(axis=0), 1))
