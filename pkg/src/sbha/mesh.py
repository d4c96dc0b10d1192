"""Triangle meshes: container, validation, OFF/PLY I/O and icospheres."""

from dataclasses import dataclass, field
from functools import cached_property
import io
import logging
import os
import warnings

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed mesh file. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """Mesh violates a structural requirement."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangle mesh.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like, shape (t, 3)
        Vertex indices per triangle.
    vertex_map : ndarray, optional
        Original vertex index of each vertex when cleaning removed vertices.

    Derived structure (edges, edge lengths, face areas, vertex adjacency) is
    computed lazily and cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_map: np.ndarray | None = field(default=None)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError(f"vertices must have shape (n, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("vertex coordinates must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError(f"face index out of range [0, {len(v)})")
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if np.any(repeated):
            raise ValidationError(f"face {int(np.argmax(repeated))} repeats a vertex")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def _edge_data(self):
        f = self.faces
        half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        half.sort(axis=1)
        edges, counts = np.unique(half, axis=0, return_counts=True)
        return edges, counts

    @property
    def edges(self):
        """Unique undirected edges, shape (e, 2), each row sorted."""
        return self._edge_data[0]

    @property
    def edge_face_counts(self):
        """Number of faces incident on each edge of :attr:`edges`."""
        return self._edge_data[1]

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @cached_property
    def face_areas(self):
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cross, axis=1)

    @cached_property
    def vertex_faces(self):
        """List of incident face indices per vertex."""
        order = np.argsort(self.faces.ravel(), kind="stable")
        counts = np.bincount(self.faces.ravel(), minlength=self.n_vertices)
        split = np.split(order // 3, np.cumsum(counts)[:-1])
        return split

    def adjacency(self, weighted=True):
        """Symmetric vertex adjacency as CSR; edge lengths if ``weighted``."""
        e = self.edges
        w = self.edge_lengths if weighted else np.ones(len(e))
        n = self.n_vertices
        A = sparse.coo_matrix((np.concatenate([w, w]),
                               (np.concatenate([e[:, 0], e[:, 1]]),
                                np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        return A.tocsr()


@dataclass(frozen=True)
class MeshStats:
    n_vertices: int
    n_faces: int
    n_edges: int
    max_vertex_degree: int
    boundary_edge_count: int
    min_triangle_area: float


def mesh_stats(mesh):
    """Recompute summary counts for ``mesh`` from scratch."""
    f = np.asarray(mesh.faces)
    half = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    edges, counts = np.unique(half, axis=0, return_counts=True)
    degree = np.bincount(edges.ravel(), minlength=len(mesh.vertices))
    v = mesh.vertices
    areas = 0.5 * np.linalg.norm(np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]), axis=1)
    return MeshStats(
        n_vertices=len(v),
        n_faces=len(f),
        n_edges=len(edges),
        max_vertex_degree=int(degree.max()) if len(degree) else 0,
        boundary_edge_count=int(np.sum(counts == 1)),
        min_triangle_area=float(areas.min()) if len(areas) else 0.0,
    )


def _degenerate_faces(vertices, faces, rtol=1e-12):
    v = vertices
    f = faces
    e0 = v[f[:, 1]] - v[f[:, 0]]
    e1 = v[f[:, 2]] - v[f[:, 1]]
    e2 = v[f[:, 0]] - v[f[:, 2]]
    area2 = np.linalg.norm(np.cross(e0, -e2), axis=1)
    longest = np.max(np.stack([np.einsum("ij,ij->i", e, e) for e in (e0, e1, e2)]), axis=0)
    return area2 <= rtol * longest


def validate_mesh(vertices, faces, drop_degenerate=False):
    """Build a validated :class:`TriMesh`.

    Zero-area faces raise :class:`ValidationError` unless ``drop_degenerate``
    is set, in which case they are dropped with a warning. Vertices not
    referenced by any face are removed; the result's ``vertex_map`` records
    the original index of every kept vertex. Edges shared by more than two
    faces are rejected.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    mesh = TriMesh(vertices, faces)  # range and repeated-vertex checks

    bad = _degenerate_faces(mesh.vertices, mesh.faces)
    if np.any(bad):
        if not drop_degenerate:
            raise ValidationError(f"{int(bad.sum())} degenerate (zero-area) face(s), "
                                  f"first is face {int(np.argmax(bad))}")
        warnings.warn(f"dropping {int(bad.sum())} degenerate face(s)", RuntimeWarning, stacklevel=2)
        faces = mesh.faces[~bad]
    else:
        faces = mesh.faces

    if len(faces) == 0:
        raise ValidationError("mesh has no valid faces")

    used = np.zeros(len(vertices), dtype=bool)
    used[faces.ravel()] = True
    vertex_map = None
    if not np.all(used):
        keep = np.flatnonzero(used)
        remap = np.full(len(vertices), -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        logger.info("removing %d isolated vertices", len(vertices) - len(keep))
        vertices = vertices[keep]
        faces = remap[faces]
        vertex_map = keep

    mesh = TriMesh(vertices, faces, vertex_map=vertex_map)
    over = mesh.edge_face_counts > 2
    if np.any(over):
        a, b = mesh.edges[np.argmax(over)]
        raise ValidationError(f"{int(over.sum())} non-manifold edge(s), e.g. ({a}, {b})")
    if np.any(mesh.edge_lengths <= 0):
        raise ValidationError("zero-length edge")
    return mesh


# ----------------------------------------------------------------------------
# file formats

def _content_lines(text):
    """Yield ``(lineno, tokens)`` for non-empty, non-comment lines."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _parse_off(text):
    lines = _content_lines(text)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    if not tokens[0].endswith("OFF"):
        raise ParseError(f"expected OFF header, got {tokens[0]!r}", lineno)
    if tokens[0] != "OFF":
        raise ParseError(f"unsupported OFF variant {tokens[0]!r}", lineno)
    tokens = tokens[1:]
    if not tokens:
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError("missing counts line", lineno + 1) from None
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
    except (ValueError, IndexError):
        raise ParseError("counts line must start with two integers", lineno) from None
    if nv < 0 or nf < 0:
        raise ParseError("negative element count", lineno)

    vertices = np.empty((nv, 3))
    for i in range(nv):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, file ended after {i}", lineno + 1) from None
        try:
            vertices[i] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise ParseError("vertex line must hold three numbers", lineno) from None
        if len(tokens) < 3:
            raise ParseError("vertex line must hold three numbers", lineno)

    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, file ended after {i}", lineno + 1) from None
        try:
            k = int(tokens[0])
            idx = [int(t) for t in tokens[1:1 + k]]
        except ValueError:
            raise ParseError("face line must hold integers", lineno) from None
        if k != 3:
            raise ParseError(f"only triangles are supported, got a {k}-gon", lineno)
        if len(idx) != 3:
            raise ParseError("face line is missing vertex indices", lineno)
        if min(idx) < 0 or max(idx) >= nv:
            raise ValidationError(f"line {lineno}: face index out of range [0, {nv})")
        faces[i] = idx
    return vertices, faces


def _parse_ply(text):
    lines = _content_lines(text)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    if tokens != ["ply"]:
        raise ParseError("missing 'ply' magic", lineno)

    elements = []  # (name, count, [property specs])
    for lineno, tokens in lines:
        key = tokens[0]
        if key == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError(f"only ascii PLY is supported, got {' '.join(tokens[1:])!r}", lineno)
        elif key == "element":
            try:
                elements.append((tokens[1], int(tokens[2]), []))
            except (IndexError, ValueError):
                raise ParseError("malformed element line", lineno) from None
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", lineno)
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise ParseError("malformed list property", lineno)
                elements[-1][2].append(("list", tokens[4]))
            else:
                if len(tokens) != 3:
                    raise ParseError("malformed property", lineno)
                elements[-1][2].append(("scalar", tokens[2]))
        elif key in ("comment", "obj_info"):
            continue
        elif key == "end_header":
            break
        else:
            raise ParseError(f"unexpected header keyword {key!r}", lineno)
    else:
        raise ParseError("missing end_header", lineno + 1)

    vertices = faces = None
    for name, count, props in elements:
        names = [p[1] for p in props]
        rows = []
        for i in range(count):
            try:
                lineno, tokens = next(lines)
            except StopIteration:
                raise ParseError(f"expected {count} {name} entries, file ended after {i}",
                                 lineno + 1) from None
            rows.append((lineno, tokens))
        if name == "vertex":
            try:
                cols = [names.index(c) for c in ("x", "y", "z")]
            except ValueError:
                raise ParseError("vertex element lacks x/y/z properties") from None
            if any(p[0] == "list" for p in props):
                raise ParseError("list properties on vertices are not supported")
            vertices = np.empty((count, 3))
            for i, (ln, tokens) in enumerate(rows):
                if len(tokens) != len(props):
                    raise ParseError(f"expected {len(props)} values, got {len(tokens)}", ln)
                try:
                    vertices[i] = [float(tokens[c]) for c in cols]
                except ValueError:
                    raise ParseError("non-numeric vertex value", ln) from None
        elif name == "face":
            if not props or props[0][0] != "list" or props[0][1] not in ("vertex_indices", "vertex_index"):
                raise ParseError("face element must start with list vertex_indices")
            faces = np.empty((count, 3), dtype=np.int64)
            for i, (ln, tokens) in enumerate(rows):
                try:
                    k = int(tokens[0])
                    idx = [int(t) for t in tokens[1:1 + k]]
                except ValueError:
                    raise ParseError("face line must hold integers", ln) from None
                if k != 3 or len(idx) != 3:
                    raise ParseError(f"only triangles are supported, got {k} indices", ln)
                faces[i] = idx
    if vertices is None or faces is None:
        raise ParseError("PLY file needs vertex and face elements")
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise ValidationError(f"face index out of range [0, {len(vertices)})")
    return vertices, faces


_FORMATS = {"off": _parse_off, "ply": _parse_ply, "ply-ascii": _parse_ply}


def parse_mesh(data, format, drop_degenerate=False):
    """Parse an ASCII OFF or PLY mesh.

    Parameters
    ----------
    data : bytes or str
        File contents.
    format : {"off", "ply", "ply-ascii"}
    drop_degenerate : bool
        Drop zero-area faces with a warning instead of raising.

    Returns
    -------
    TriMesh
        Validated mesh, vertex order as in the file (minus isolated
        vertices, see :func:`validate_mesh`).
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("file is not ASCII text (binary formats are not supported)") from None
    try:
        parser = _FORMATS[format.lower()]
    except KeyError:
        raise ValueError(f"unknown mesh format {format!r}") from None
    vertices, faces = parser(data)
    return validate_mesh(vertices, faces, drop_degenerate=drop_degenerate)


def format_from_path(path):
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext not in ("off", "ply"):
        raise ValueError(f"cannot infer mesh format from extension {ext!r}")
    return ext


def read_mesh(path, format=None, drop_degenerate=False):
    format = format or format_from_path(path)
    with open(path, "rb") as fh:
        return parse_mesh(fh.read(), format, drop_degenerate=drop_degenerate)


def serialize_off(mesh):
    """OFF text for ``mesh``. Coordinates use ``repr`` so parsing round-trips."""
    out = io.StringIO()
    out.write(f"OFF\n{mesh.n_vertices} {mesh.n_faces} 0\n")
    for x, y, z in mesh.vertices.tolist():
        out.write(f"{x!r} {y!r} {z!r}\n")
    for a, b, c in mesh.faces.tolist():
        out.write(f"3 {a} {b} {c}\n")
    return out.getvalue()


def serialize_ply(mesh, colors=None):
    """ASCII PLY text, optionally with per-vertex uchar ``colors`` (n, 3)."""
    out = io.StringIO()
    out.write("ply\nformat ascii 1.0\n")
    out.write(f"element vertex {mesh.n_vertices}\n")
    out.write("property double x\nproperty double y\nproperty double z\n")
    if colors is not None:
        colors = np.asarray(colors)
        if colors.shape != (mesh.n_vertices, 3):
            raise ValueError(f"colors must have shape ({mesh.n_vertices}, 3)")
        if colors.min(initial=0) < 0 or colors.max(initial=0) > 255:
            raise ValueError("colors must lie in 0..255")
        colors = colors.astype(np.uint8)
        out.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
    out.write(f"element face {mesh.n_faces}\n")
    out.write("property list uchar int vertex_indices\nend_header\n")
    for i, (x, y, z) in enumerate(mesh.vertices.tolist()):
        if colors is None:
            out.write(f"{x!r} {y!r} {z!r}\n")
        else:
            r, g, b = colors[i]
            out.write(f"{x!r} {y!r} {z!r} {r} {g} {b}\n")
    for a, b, c in mesh.faces.tolist():
        out.write(f"3 {a} {b} {c}\n")
    return out.getvalue()


def write_mesh(path, mesh, colors=None):
    format = format_from_path(path)
    if format == "off":
        if colors is not None:
            raise ValueError("OFF output does not carry colors; use .ply")
        text = serialize_off(mesh)
    else:
        text = serialize_ply(mesh, colors)
    with open(path, "w") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# synthetic meshes

def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def make_sphere_mesh(subdivisions):
    """Unit icosphere with ``10 * 4**subdivisions + 2`` vertices."""
    if subdivisions < 0:
        raise ValueError("subdivisions must be >= 0")
    v, f = _icosahedron()
    for _ in range(subdivisions):
        half = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        half.sort(axis=1)
        edges, inverse = np.unique(half, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        mid = v[edges[:, 0]] + v[edges[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        nf = len(f)
        m01 = len(v) + inverse[:nf]
        m12 = len(v) + inverse[nf:2 * nf]
        m20 = len(v) + inverse[2 * nf:]
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        f = np.concatenate([
            np.stack([a, m01, m20], axis=1),
            np.stack([b, m12, m01], axis=1),
            np.stack([c, m20, m12], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ])
        v = np.concatenate([v, mid])
    return TriMesh(v, f)


def make_grid_mesh(nx, ny, spacing=1.0):
    """Flat ``nx`` x ``ny`` vertex grid in the z=0 plane, two triangles per cell."""
    xs, ys = np.meshgrid(np.arange(nx) * spacing, np.arange(ny) * spacing, indexing="xy")
    v = np.stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)], axis=1)
    idx = np.arange(nx * ny).reshape(ny, nx)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    f = np.concatenate([np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)])
    return TriMesh(v, f)
