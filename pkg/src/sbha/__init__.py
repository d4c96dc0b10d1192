"""Sparse biharmonic approximation of geodesic distance matrices.

Typical use::

    from sbha import (make_sphere_mesh, mesh_biharmonic, DistanceOracle,
                      select_landmarks, sparse_interpolation_operator, bha, sbmds)

    mesh = make_sphere_mesh(4)
    M = mesh_biharmonic(mesh)
    oracle = DistanceOracle(mesh)
    L = select_landmarks(oracle, 200)
    P = sparse_interpolation_operator(M, L, p_row=50)
    Z = sbmds(bha(P, L, squared=True), m=3).Z
"""

from .approx import (BhaApprox, InterpOperator, LandmarkSet, NystromApprox, bha,
                     column_budget, fmds_operator, interpolation_operator, nystrom,
                     select_landmarks, sparse_interpolation_operator, sparsify_operator)
from .artifact import MemoryReport
from .geodesic import DisconnectedError, DistanceOracle
from .laplacian import (BiharmonicOp, LaplacianParts, biharmonic_operator, cotan_adjacency,
                        graph_biharmonic, laplacian_parts, lumped_mass, mesh_biharmonic)
from .mds import (Embedding, RowSample, bmds, mds_exact, relative_error, sample_rows, sbmds,
                  stress)
from .mesh import (MeshStats, ParseError, TriMesh, ValidationError, make_grid_mesh,
                   make_sphere_mesh, mesh_stats, parse_mesh, read_mesh, write_mesh)
from .numerics import (NonConvergence, NonSymmetric, SingularOperator, SolveConfig,
                       dense_eig_sym, lanczos_topk, solve_spd, thin_qr)

__version__ = "0.1.0"
