"""Command-line pipeline: ``sbha approx | mds | compare | stats``."""

import argparse
import contextlib
from dataclasses import asdict, dataclass, fields
import csv
import io
import json
import logging
import sys
import time

import numpy as np

from . import artifact
from .approx import (bha, interpolation_operator, nystrom, select_landmarks,
                     sparse_interpolation_operator)
from .geodesic import DistanceOracle
from .laplacian import mesh_biharmonic
from .mds import bmds, relative_error, sample_rows, sbmds, stress
from .mesh import mesh_stats, read_mesh, serialize_ply
from .numerics import SolveConfig

logger = logging.getLogger("sbha")


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        self.stage = stage
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


@dataclass
class RunManifest:
    """Every knob of a run. Two runs with equal manifests give equal numbers."""

    input: str | None = None
    format: str | None = None
    drop_degenerate: bool = True
    landmarks: int = 100
    p_row: int = 0
    first_landmark: int | None = 0
    seed: int = 0
    solver: str = "cholesky"
    solver_tol: float = 1e-8
    solver_max_iters: int | None = None
    mds_dim: int = 3
    mds_method: str = "sbmds"
    lanczos_tol: float = 1e-10
    error_sample: int = 3000
    error_seed: int = 0
    index_width: int | None = None
    workers: int | None = None
    artifact: str | None = None
    report: str | None = None
    embedding: str | None = None
    ply: str | None = None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**data)

    def solve_config(self):
        return SolveConfig(method=self.solver, rel_residual_tol=self.solver_tol,
                           max_iters=self.solver_max_iters)


@contextlib.contextmanager
def stage(name, timings):
    tic = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - tic


def build_approximation(manifest, timings=None):
    """Run the approximation pipeline described by ``manifest``.

    Returns ``(mesh, oracle, landmarks, approx)``; ``approx`` holds plain
    (unsquared) distances.
    """
    timings = {} if timings is None else timings
    with stage("mesh", timings):
        mesh = read_mesh(manifest.input, manifest.format, drop_degenerate=manifest.drop_degenerate)
        if not 0 < manifest.landmarks < mesh.n_vertices:
            raise ValueError(f"need 0 < landmarks < n = {mesh.n_vertices}")
    with stage("operator", timings):
        M = mesh_biharmonic(mesh)
    with stage("oracle", timings):
        oracle = DistanceOracle(mesh, workers=manifest.workers)
    with stage("landmarks", timings):
        first = manifest.first_landmark
        L = select_landmarks(oracle, manifest.landmarks, first=first, seed=manifest.seed)
    cfg = manifest.solve_config()
    if manifest.p_row > 0:
        inner = {}
        with stage("solve", timings):
            P = sparse_interpolation_operator(M, L, manifest.p_row, cfg, timings=inner)
        timings["solve"] -= inner["threshold"]
        timings["threshold"] = inner["threshold"]
    else:
        with stage("solve", timings):
            P = interpolation_operator(M, L, cfg)
        timings["threshold"] = 0.0
    return mesh, oracle, L, bha(P, L, squared=False)


def cmd_approx(manifest, out=None):
    out = out or sys.stdout
    timings = {}
    mesh, oracle, L, approx = build_approximation(manifest, timings)
    with stage("error", timings):
        sample = sample_rows(oracle, manifest.error_sample, manifest.error_seed)
        eps = relative_error(approx, sample)
    mem = artifact.MemoryReport.for_operator(approx.P, manifest.index_width)
    with stage("write", timings):
        if manifest.artifact:
            artifact.save(manifest.artifact, approx, manifest.to_dict(), manifest.index_width)
    report = {
        "manifest": manifest.to_dict(),
        "mesh": asdict(mesh_stats(mesh)),
        "landmarks": L.indices.tolist(),
        "memory": mem.to_dict(),
        "error": {
            "relative_error": eps,
            "sample_size": int(sample.size),
            "sample_seed": manifest.error_seed,
            "full_reference": bool(sample.size == oracle.n),
        },
        "seconds": timings,
    }
    _write_report(report, manifest.report)
    print(f"n={oracle.n} l={len(L)} p_row={manifest.p_row} storage={mem.storage}", file=out)
    ref = "full K" if sample.size == oracle.n else f"{sample.size} sampled rows (seed {manifest.error_seed})"
    print(f"relative error {eps:.6e} on {ref}", file=out)
    print(f"memory: P {mem.bytes_P} B, W {mem.bytes_W} B, total {mem.bytes_total} B", file=out)
    print("seconds: " + ", ".join(f"{k} {v:.3f}" for k, v in timings.items()), file=out)
    return report


def _write_report(report, path):
    if path:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def canonical_colors(Z):
    """Per-column min-max normalization of the first three coordinates to 0..255.

    Columns with zero range map to 0; missing columns are 0.
    """
    Z = np.asarray(Z, dtype=np.float64)
    C = np.zeros((Z.shape[0], 3))
    for k in range(min(3, Z.shape[1])):
        col = Z[:, k]
        lo, hi = col.min(), col.max()
        if hi > lo:
            C[:, k] = (col - lo) / (hi - lo) * 255.0
    return np.rint(C).astype(np.uint8)


def write_embedding_csv(path_or_buffer, Z):
    header = ",".join(f"z{k}" for k in range(Z.shape[1]))
    buf = io.StringIO()
    np.savetxt(buf, Z, fmt="%.17g", delimiter=",", header=header, comments="")
    text = buf.getvalue()
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        with open(path_or_buffer, "w", newline="") as fh:
            fh.write(text)


def cmd_mds(manifest, artifact_path, out=None):
    out = out or sys.stdout
    timings = {}
    with stage("load", timings):
        approx, stored, mem = artifact.load(artifact_path)
        if manifest.input is None and stored.get("input"):
            manifest.input = stored["input"]
            manifest.format = stored.get("format")
        sq = approx.as_squared()
        m = manifest.mds_dim
        if not 0 < m <= min(sq.P.l, sq.n - 1):
            raise ValueError(f"DimensionMismatch: cannot embed into {m} dimensions with "
                             f"l={sq.P.l}, n={sq.n}")
    with stage("eig", timings):
        if manifest.mds_method == "bmds":
            emb = bmds(sq, m)
        elif manifest.mds_method == "sbmds":
            emb = sbmds(sq, m, tol=manifest.lanczos_tol, seed=manifest.seed)
        else:
            raise ValueError(f"unknown MDS method {manifest.mds_method!r}")
    with stage("stress", timings):
        s = stress(emb, sq)
    with stage("write", timings):
        if manifest.embedding:
            write_embedding_csv(manifest.embedding, emb.Z)
        if manifest.ply:
            if not manifest.input:
                raise ValueError("PLY export needs the source mesh (--mesh)")
            mesh = read_mesh(manifest.input, manifest.format, drop_degenerate=manifest.drop_degenerate)
            if mesh.n_vertices != emb.n:
                raise ValueError(f"DimensionMismatch: mesh has {mesh.n_vertices} vertices, "
                                 f"embedding has {emb.n}")
            with open(manifest.ply, "w") as fh:
                fh.write(serialize_ply(mesh, canonical_colors(emb.Z)))
    report = {
        "manifest": manifest.to_dict(),
        "artifact_manifest": stored,
        "memory": mem.to_dict(),
        "method": emb.method,
        "eigenvalues": emb.eigenvalues.tolist(),
        "negative_eigenvalues": emb.negative.tolist(),
        "stress_vs_approximation": s,
        "seconds": timings,
    }
    _write_report(report, manifest.report)
    print(f"{emb.method}: eigenvalues {np.array2string(emb.eigenvalues, precision=6)}", file=out)
    print(f"stress against the approximation {s:.10e}", file=out)
    return emb, report


COMPARE_COLUMNS = ["method", "l", "p_row", "epsilon", "bytes", "seconds"]


def cmd_compare(manifest, p_rows, out=None):
    """Error/memory/time table for BHA, sBHA at each ``p_row`` and Nystrom."""
    out = out or sys.stdout
    timings = {}
    with stage("mesh", timings):
        mesh = read_mesh(manifest.input, manifest.format, drop_degenerate=manifest.drop_degenerate)
        n, l = mesh.n_vertices, manifest.landmarks
        if not 0 < l < n:
            raise ValueError(f"need 0 < landmarks < n = {n}")
    with stage("operator", timings):
        M = mesh_biharmonic(mesh)
        oracle = DistanceOracle(mesh, workers=manifest.workers)
    with stage("landmarks", timings):
        L = select_landmarks(oracle, l, first=manifest.first_landmark, seed=manifest.seed)
    with stage("error", timings):
        sample = sample_rows(oracle, manifest.error_sample, manifest.error_seed)
    cfg = manifest.solve_config()
    rows = []
    with stage("bha", timings):
        tic = time.perf_counter()
        P = interpolation_operator(M, L, cfg)
        approx = bha(P, L)
        sec = time.perf_counter() - tic
        mem = artifact.MemoryReport.for_operator(P, manifest.index_width)
        rows.append(["BHA", l, 0, relative_error(approx, sample), mem.bytes_total, sec])
    with stage("sbha", timings):
        for p_row in p_rows:
            tic = time.perf_counter()
            Ps = sparse_interpolation_operator(M, L, p_row, cfg)
            sec = time.perf_counter() - tic
            mem = artifact.MemoryReport.for_operator(Ps, manifest.index_width)
            rows.append(["sBHA", l, p_row, relative_error(bha(Ps, L), sample), mem.bytes_total, sec])
    with stage("nystrom", timings):
        tic = time.perf_counter()
        ny = nystrom(L)
        sec = time.perf_counter() - tic
        rows.append(["Nystrom", l, 0, relative_error(ny, sample), 8 * (n * l + l * l), sec])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COMPARE_COLUMNS)
    for method, l_, p_row, eps, nbytes, sec in rows:
        writer.writerow([method, l_, p_row, repr(float(eps)), nbytes, f"{sec:.6f}"])
    text = buf.getvalue()
    if manifest.report:
        with open(manifest.report, "w", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)
    return rows


def cmd_stats(path, format=None, drop_degenerate=True, out=None):
    out = out or sys.stdout
    with stage("mesh", {}):
        mesh = read_mesh(path, format, drop_degenerate=drop_degenerate)
    stats = asdict(mesh_stats(mesh))
    json.dump(stats, out, indent=2)
    out.write("\n")
    return stats


# ----------------------------------------------------------------------------
# argument parsing

def _add_manifest_args(p):
    p.add_argument("--manifest", help="JSON run manifest; explicit flags override its values")
    p.add_argument("--format", choices=["off", "ply"], default=None)
    p.add_argument("--keep-degenerate", dest="drop_degenerate", action="store_false", default=None,
                   help="fail on zero-area faces instead of dropping them")
    p.add_argument("-l", "--landmarks", type=int)
    p.add_argument("--first", dest="first_landmark", type=int,
                   help="first landmark vertex (default 0)")
    p.add_argument("--random-first", action="store_true",
                   help="draw the first landmark with --seed")
    p.add_argument("--seed", type=int)
    p.add_argument("--solver", choices=["cholesky", "cg"])
    p.add_argument("--solver-tol", type=float)
    p.add_argument("--solver-max-iters", type=int)
    p.add_argument("--error-sample", type=int)
    p.add_argument("--error-seed", type=int)
    p.add_argument("--index-width", type=int, choices=[4, 8])
    p.add_argument("--workers", type=int, help="parallelism degree (default: all cores)")
    p.add_argument("--report", help="report output path")


def _manifest_from_args(args):
    base = {}
    with stage("args", {}):
        if getattr(args, "manifest", None):
            with open(args.manifest) as fh:
                base = json.load(fh)
        m = RunManifest.from_dict(base)
    for f in fields(RunManifest):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(m, f.name, val)
    if getattr(args, "random_first", False):
        m.first_landmark = None
    return m


def make_parser():
    parser = argparse.ArgumentParser(prog="sbha", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", help="build and store a (sparse) biharmonic approximation")
    p.add_argument("input", nargs="?", help="OFF or ASCII PLY mesh")
    _add_manifest_args(p)
    p.add_argument("--p-row", type=int, help="average non-zeros per row of P (0 = dense)")
    p.add_argument("-o", "--output", dest="artifact", help="artifact output path")
    p.add_argument("--accounting-only", action="store_true",
                   help="print the memory report for --n-vertices/-l/--p-row without a mesh")
    p.add_argument("--n-vertices", type=int)

    p = sub.add_parser("mds", help="classical scaling of a stored approximation")
    p.add_argument("artifact_path", metavar="artifact")
    p.add_argument("--mesh", dest="input", help="source mesh (defaults to the artifact's input)")
    p.add_argument("--format", choices=["off", "ply"], default=None)
    p.add_argument("-m", "--dim", dest="mds_dim", type=int)
    p.add_argument("--method", dest="mds_method", choices=["sbmds", "bmds"])
    p.add_argument("--lanczos-tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", dest="embedding", help="embedding CSV path")
    p.add_argument("--ply", help="write the mesh colored by canonical coordinates")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--manifest")

    p = sub.add_parser("compare", help="error/memory table for BHA, sBHA and Nystrom")
    p.add_argument("input")
    _add_manifest_args(p)
    p.add_argument("--p-rows", default="10,50,100",
                   help="comma-separated p_row values for sBHA")

    p = sub.add_parser("stats", help="mesh statistics as JSON")
    p.add_argument("input")
    p.add_argument("--format", choices=["off", "ply"], default=None)
    p.add_argument("--keep-degenerate", dest="drop_degenerate", action="store_false", default=True)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "approx":
            manifest = _manifest_from_args(args)
            if args.accounting_only:
                if args.n_vertices is None:
                    raise StageError("args", ValueError("--accounting-only needs --n-vertices"))
                mem = artifact.MemoryReport.predicted(args.n_vertices, manifest.landmarks,
                                                      manifest.p_row, manifest.index_width)
                json.dump(mem.to_dict(), sys.stdout, indent=2)
                sys.stdout.write(f"\n{mem.bytes_total / 1e9:.3f} GB\n")
                return 0
            if not manifest.input:
                raise StageError("args", ValueError("approx needs an input mesh"))
            cmd_approx(manifest)
        elif args.command == "mds":
            manifest = _manifest_from_args(args)
            cmd_mds(manifest, args.artifact_path)
        elif args.command == "compare":
            manifest = _manifest_from_args(args)
            p_rows = [int(v) for v in args.p_rows.split(",") if v.strip()]
            cmd_compare(manifest, p_rows)
        elif args.command == "stats":
            cmd_stats(args.input, args.format, args.drop_degenerate)
    except StageError as exc:
        print(f"sbha {args.command}: error {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"sbha {args.command}: error [io] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
