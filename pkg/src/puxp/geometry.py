"""Point clouds, triangle meshes, and exact K-nearest-neighbor graphs.

Neighbor searches order candidates by (squared distance, index): ties go to
the smaller index, rows come back in ascending distance, and a point is
never its own neighbor. Both the brute-force and the kd-tree path follow
that rule exactly, so they agree on every input.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateTriangleError, IndexRangeError, ShapeError


class PointCloud:
    """Ordered list of finite 3D points; order defines row identity."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ShapeError(f"point cloud must have shape (N, 3), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ShapeError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts

    @property
    def count(self):
        return self.points.shape[0]

    def __len__(self):
        return self.points.shape[0]

    def transformed(self, rotation=None, translation=None):
        """Rigidly transformed copy (rotation applied first)."""
        pts = self.points
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            pts = pts + np.asarray(translation, dtype=np.float64)
        return PointCloud(pts)

    def __repr__(self):
        return f"PointCloud({self.count} points)"


class TriangleMesh:
    """Vertex/face arrays with all faces triangular and indices in range."""

    __slots__ = ("vertices", "faces")

    def __init__(self, vertices, faces):
        verts = np.ascontiguousarray(vertices, dtype=np.float64)
        tris = np.ascontiguousarray(faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise ShapeError(f"mesh vertices must have shape (V, 3), got {verts.shape}")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ShapeError(f"mesh faces must have shape (F, 3), got {tris.shape}")
        if tris.size and (tris.min() < 0 or tris.max() >= verts.shape[0]):
            bad = int(tris.min()) if tris.min() < 0 else int(tris.max())
            raise IndexRangeError(f"face index {bad} out of range for {verts.shape[0]} vertices")
        self.vertices = verts
        self.faces = tris

    @property
    def face_count(self):
        return self.faces.shape[0]

    def triangle(self, f):
        return self.vertices[self.faces[f]]

    @staticmethod
    def filtered(vertices, faces):
        """Build a mesh dropping zero-area faces; returns (mesh, dropped_count)."""
        verts = np.asarray(vertices, dtype=np.float64)
        tris = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        a = verts[tris[:, 0]]
        cross = np.cross(verts[tris[:, 1]] - a, verts[tris[:, 2]] - a)
        area2 = (cross * cross).sum(axis=1)
        scale = float(np.max(np.abs(verts))) if verts.size else 1.0
        keep = area2 > (1e-12 * max(scale, 1.0) ** 2) ** 2
        return TriangleMesh(verts, tris[keep]), int((~keep).sum())

    def __repr__(self):
        return f"TriangleMesh({self.vertices.shape[0]} vertices, {self.face_count} faces)"


class IndexMatrix:
    """M x K table of neighbor indices into a point set of size M.

    Every entry is in range, no row lists its own index, and entries within
    a row are distinct.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        idx = np.ascontiguousarray(entries, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] < 1:
            raise ShapeError(f"index matrix must have shape (M, K), got {idx.shape}")
        m = idx.shape[0]
        if idx.min() < 0 or idx.max() >= m:
            bad = int(idx.min()) if idx.min() < 0 else int(idx.max())
            raise IndexRangeError(f"neighbor index {bad} out of range for {m} rows")
        if np.any(idx == np.arange(m)[:, None]):
            row = int(np.nonzero((idx == np.arange(m)[:, None]).any(axis=1))[0][0])
            raise ValueError(f"row {row} lists itself as a neighbor")
        srt = np.sort(idx, axis=1)
        if idx.shape[1] > 1 and np.any(srt[:, 1:] == srt[:, :-1]):
            row = int(np.nonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))[0][0])
            raise ValueError(f"row {row} contains duplicate neighbor indices")
        self.entries = idx

    @property
    def rows(self):
        return self.entries.shape[0]

    @property
    def k(self):
        return self.entries.shape[1]

    def __repr__(self):
        return f"IndexMatrix({self.rows} rows, k={self.k})"


# ---------------------------------------------------------------------------
# K nearest neighbors


def _as_coords(obj):
    if isinstance(obj, PointCloud):
        return obj.points
    data = getattr(obj, "data", obj)
    return np.asarray(data, dtype=np.float64)


def _rank_candidates(deltas, cand):
    """Order candidate indices by (squared distance, index), ascending."""
    d2 = (deltas * deltas).sum(axis=-1)
    return cand[np.lexsort((cand, d2))]


def knn_bruteforce(cloud, k):
    """Exact KNN by full pairwise distances; the oracle for the fast path."""
    pts = _as_coords(cloud)
    n = pts.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    cols = np.broadcast_to(np.arange(n), (n, n))
    order = np.lexsort((cols, d2), axis=-1)
    return IndexMatrix(order[:, :k])


def knn_accelerated(cloud, k):
    """Exact KNN through a kd-tree; agrees with knn_bruteforce on every input.

    A first kd-tree pass bounds the k-th neighbor distance per point; a ball
    query with that (slightly inflated) radius collects every candidate that
    could beat it, and the final ranking recomputes squared distances with
    the same arithmetic as the brute-force path, so ties resolve identically.
    """
    pts = _as_coords(cloud)
    n = pts.shape[0]
    k = int(k)
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    tree = cKDTree(pts)
    dists, _ = tree.query(pts, k=k + 1)  # self is among the k+1 closest
    radii = dists[:, -1] * (1.0 + 1e-9)
    candidates = tree.query_ball_point(pts, radii)
    out = np.empty((n, k), dtype=np.int64)
    for i, cand in enumerate(candidates):
        cand = np.asarray(cand, dtype=np.int64)
        cand = cand[cand != i]
        ranked = _rank_candidates(pts[cand] - pts[i], cand)
        out[i] = ranked[:k]
    return IndexMatrix(out)


def knn_features(features, k):
    """Exact KNN in C-dimensional feature space, same tie rule as above."""
    feats = _as_coords(features)
    if feats.ndim != 2:
        raise ShapeError(f"features must have shape (M, C), got {feats.shape}")
    m = feats.shape[0]
    k = int(k)
    if not 1 <= k < m:
        raise ValueError(f"k must satisfy 1 <= k < M, got k={k}, M={m}")
    diff = feats[:, None, :] - feats[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    cols = np.broadcast_to(np.arange(m), (m, m))
    order = np.lexsort((cols, d2), axis=-1)
    return IndexMatrix(order[:, :k])


def expand_index(idx):
    """Neighbor table for a point set doubled by a x2 feature expansion.

    Row i of the input describes point i; after expansion its two children
    sit at rows 2i and 2i+1, and the child representing old neighbor j sits
    at row 2j. Both children therefore copy row i with every entry doubled,
    which keeps the original graph locality without recomputing KNN.
    """
    if not isinstance(idx, IndexMatrix):
        idx = IndexMatrix(idx)
    return IndexMatrix(np.repeat(idx.entries * 2, 2, axis=0))


# ---------------------------------------------------------------------------
# point-to-triangle distance


def _dot3(rows, v):
    # explicit component sums keep the arithmetic identical for any batch size
    return rows[:, 0] * v[0] + rows[:, 1] * v[1] + rows[:, 2] * v[2]


def _closest_on_triangle(points, a, b, c):
    """Closest point on closed triangle abc for each row of points[P, 3].

    Region tests follow the classic barycentric case analysis (vertex, edge,
    interior), checked in a fixed order so results are deterministic.
    """
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = _dot3(ap, ab)
    d2 = _dot3(ap, ac)
    bp = points - b
    d3 = _dot3(bp, ab)
    d4 = _dot3(bp, ac)
    cp = points - c
    d5 = _dot3(cp, ab)
    d6 = _dot3(cp, ac)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        closest = a + ab * v_in[:, None] + ac * w_in[:, None]

        # Overwrite in reverse priority so the first matching region wins.
        m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        closest[m] = b + (c - b) * w[m, None]

        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        w = d2 / (d2 - d6)
        closest[m] = a + ac * w[m, None]

        closest[(d6 >= 0) & (d5 <= d6)] = c

        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        v = d1 / (d1 - d3)
        closest[m] = a + ab * v[m, None]

        closest[(d3 >= 0) & (d4 <= d3)] = b
        closest[(d1 <= 0) & (d2 <= 0)] = a
    return closest


def _check_triangle(tri):
    tri = np.asarray(tri, dtype=np.float64).reshape(3, 3)
    ab = tri[1] - tri[0]
    ac = tri[2] - tri[0]
    cross = np.cross(ab, ac)
    cross2 = float(cross @ cross)
    span = float(ab @ ab) * float(ac @ ac)
    if cross2 <= 1e-28 * span or span == 0.0:
        raise DegenerateTriangleError(f"triangle has (near-)zero area: {tri.tolist()}")
    return tri


def squared_distances_to_triangle(points, tri):
    """Squared distance from each of points[P, 3] to the closed triangle."""
    tri = _check_triangle(tri)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    closest = _closest_on_triangle(pts, tri[0], tri[1], tri[2])
    delta = pts - closest
    return (delta * delta).sum(axis=1)


def point_triangle_distance(p, tri):
    """Euclidean distance from a 3D point to the closed triangle (3x3 vertices)."""
    d2 = squared_distances_to_triangle(np.asarray(p, dtype=np.float64).reshape(1, 3), tri)
    return float(np.sqrt(d2[0]))


def squared_distances_to_mesh(points, mesh):
    """Per-point squared distance to the nearest face of the mesh."""
    if mesh.face_count < 1:
        raise ValueError("mesh has no faces")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    best = np.full(pts.shape[0], np.inf)
    for f in range(mesh.face_count):
        d2 = squared_distances_to_triangle(pts, mesh.triangle(f))
        np.minimum(best, d2, out=best)
    return best
