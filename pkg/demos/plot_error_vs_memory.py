"""
Approximation error against storage
===================================

Compare the dense biharmonic approximation, its thresholded variant at a few
sparsity levels, and the Nystrom method on the same landmarks.
"""

# %%
import sbha

mesh = sbha.make_sphere_mesh(4)
oracle = sbha.DistanceOracle(mesh)
K = oracle.full_matrix()
M = sbha.mesh_biharmonic(mesh)
n = mesh.n_vertices

# %%
# One landmark set shared by every method.
l = 128
landmarks = sbha.select_landmarks(oracle, l)

rows = []
P = sbha.interpolation_operator(M, landmarks)
mem = sbha.MemoryReport.for_operator(P)
rows.append(("BHA", 0, sbha.relative_error(sbha.bha(P, landmarks), K), mem.bytes_total))
for p_row in (5, 10, 25, 50):
    Ps = sbha.sparse_interpolation_operator(M, landmarks, p_row)
    mem = sbha.MemoryReport.for_operator(Ps)
    rows.append(("sBHA", p_row, sbha.relative_error(sbha.bha(Ps, landmarks), K), mem.bytes_total))
rows.append(("Nystrom", 0, sbha.relative_error(sbha.nystrom(landmarks), K), 8 * (n * l + l * l)))

# %%
# With a few dozen non-zeros per row the thresholded operator is almost as
# accurate as the dense one.
print(f"{'method':8} {'p_row':>5} {'epsilon':>11} {'bytes':>10}")
for method, p_row, eps, nbytes in rows:
    print(f"{method:8} {p_row:5d} {eps:11.4e} {nbytes:10d}")

# %%
# More landmarks help every method; the dense biharmonic error falls quickly.
for l in (32, 64, 256):
    lm = sbha.select_landmarks(oracle, l)
    eps = sbha.relative_error(sbha.bha(sbha.interpolation_operator(M, lm), lm), K)
    print(f"l={l:4d}  epsilon={eps:.3e}")
