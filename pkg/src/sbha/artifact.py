"""Binary container for a biharmonic approximation, plus memory accounting.

Layout, all integers little-endian::

    magic        8 bytes   b"SBHAART1"
    version      u32
    manifest     u64 length + UTF-8 JSON text
    n, l         u64, u64
    flags        u32       bit 0: W holds squared distances, bit 1: sparse P_u
    index_width  u32       4 or 8, width of stored indices
    ptr_width    u32       4 or 8, width of column pointers
    p            u64       per-column budget (0 for dense)
    nnz          u64       stored entries of P_u
    landmarks    l * index_width
    W            l * l float64, row-major
    P_u, sparse  (l + 1) * ptr_width column pointers,
                 nnz * index_width vertex indices (ascending per column),
                 nnz float64 values
    P_u, dense   (n - l) * l float64, column-major, rows in ascending
                 non-landmark vertex order
"""

from dataclasses import asdict, dataclass
import json
import struct

import numpy as np
from scipy import sparse

from .approx import BhaApprox, _assemble, column_budget

MAGIC = b"SBHAART1"
VERSION = 1

_SQUARED = 1
_SPARSE = 2


class ArtifactError(ValueError):
    pass


def default_index_width(n):
    return 4 if n < 2 ** 31 else 8


def _ptr_width(nnz, index_width):
    return 4 if index_width == 4 and nnz < 2 ** 31 else 8


@dataclass(frozen=True)
class MemoryReport:
    """Bytes needed to store the approximation ``(P_u, W)``.

    ``bytes_P`` is ``8 (n - l) l`` for dense storage and
    ``nnz (8 + index_width) + (l + 1) * pointer width`` for sparse storage;
    ``bytes_W = 8 l^2``.
    """

    n: int
    l: int
    storage: str
    nnz: int
    index_width: int
    bytes_P: int
    bytes_W: int
    bytes_total: int

    @classmethod
    def build(cls, n, l, nnz, sparse_storage, index_width=None):
        index_width = index_width or default_index_width(n)
        if index_width not in (4, 8):
            raise ValueError("index_width must be 4 or 8")
        if sparse_storage:
            bytes_P = nnz * (8 + index_width) + (l + 1) * _ptr_width(nnz, index_width)
        else:
            bytes_P = 8 * (n - l) * l
        bytes_W = 8 * l * l
        return cls(n, l, "sparse" if sparse_storage else "dense", int(nnz), index_width,
                   int(bytes_P), int(bytes_W), int(bytes_P + bytes_W))

    @classmethod
    def for_operator(cls, P, index_width=None):
        return cls.build(P.n, P.l, P.nnz_u, P.is_sparse, index_width)

    @classmethod
    def predicted(cls, n, l, p_row, index_width=None):
        """Accounting without a mesh: ``p_row = 0`` means dense ``P``."""
        if p_row <= 0:
            return cls.build(n, l, (n - l) * l, False, index_width)
        p = column_budget(n, l, p_row)
        return cls.build(n, l, p * l, True, index_width)

    def to_dict(self):
        return asdict(self)


def _itype(width):
    return np.dtype("<i4") if width == 4 else np.dtype("<i8")


def dumps(approx, manifest=None, index_width=None):
    """Serialize a :class:`BhaApprox` to bytes."""
    P = approx.P
    n, l = P.n, P.l
    index_width = index_width or default_index_width(n)
    it = _itype(index_width)
    text = json.dumps(manifest or {}, sort_keys=True).encode("utf-8")
    flags = (_SQUARED if approx.squared else 0) | (_SPARSE if P.is_sparse else 0)
    parts = [MAGIC, struct.pack("<IQ", VERSION, len(text)), text]
    if P.is_sparse:
        Pu = sparse.csc_matrix(P.full[P.u])
        Pu.sort_indices()
        nnz = int(Pu.nnz)
    else:
        nnz = (n - l) * l
    pw = _ptr_width(nnz, index_width)
    parts.append(struct.pack("<QQIIIQQ", n, l, flags, index_width, pw, P.p or 0, nnz))
    parts.append(P.landmarks.astype(it).tobytes())
    parts.append(np.ascontiguousarray(approx.W, dtype="<f8").tobytes())
    if P.is_sparse:
        parts.append(Pu.indptr.astype(_itype(pw)).tobytes())
        parts.append(P.u[Pu.indices].astype(it).tobytes())
        parts.append(Pu.data.astype("<f8").tobytes())
    else:
        parts.append(np.asarray(P.Pu, dtype="<f8").tobytes(order="F"))
    return b"".join(parts)


def loads(data):
    """Inverse of :func:`dumps`; returns ``(approx, manifest, memory_report)``."""
    view = memoryview(data)
    if bytes(view[:8]) != MAGIC:
        raise ArtifactError("not an sbha artifact (bad magic)")
    off = 8
    version, mlen = struct.unpack_from("<IQ", view, off)
    off += 12
    if version != VERSION:
        raise ArtifactError(f"unsupported artifact version {version}")
    manifest = json.loads(bytes(view[off:off + mlen]).decode("utf-8"))
    off += mlen
    n, l, flags, index_width, pw, p, nnz = struct.unpack_from("<QQIIIQQ", view, off)
    off += struct.calcsize("<QQIIIQQ")
    it = _itype(index_width)

    def take(dtype, count):
        nonlocal off
        dtype = np.dtype(dtype)
        arr = np.frombuffer(view, dtype=dtype, count=count, offset=off)
        off += dtype.itemsize * count
        return arr

    try:
        landmarks = take(it, l).astype(np.int64)
        W = take("<f8", l * l).reshape(l, l).astype(np.float64)
        mask = np.ones(n, dtype=bool)
        mask[landmarks] = False
        u = np.flatnonzero(mask)
        if flags & _SPARSE:
            indptr = take(_itype(pw), l + 1).astype(np.int64)
            rows = take(it, nnz).astype(np.int64)
            vals = take("<f8", nnz).astype(np.float64)
            local = np.searchsorted(u, rows)
            Pu = sparse.csc_matrix((vals, local, indptr), shape=(n - l, l))
        else:
            Pu = take("<f8", (n - l) * l).reshape((n - l, l), order="F").astype(np.float64)
    except ValueError as exc:
        raise ArtifactError(f"truncated artifact: {exc}") from exc
    if off != len(view):
        raise ArtifactError(f"{len(view) - off} trailing bytes in artifact")
    P = _assemble(Pu, landmarks, u, n, p=p or None)
    approx = BhaApprox(P, W, squared=bool(flags & _SQUARED))
    return approx, manifest, MemoryReport.for_operator(P, index_width)


def save(path, approx, manifest=None, index_width=None):
    with open(path, "wb") as fh:
        fh.write(dumps(approx, manifest, index_width))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
