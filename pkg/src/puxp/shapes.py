"""Synthetic benchmark surfaces: seeded samplers plus reference triangulations.

Samplers draw uniformly (by area) on the analytic surface, so sampled points
satisfy the surface equation to machine precision. Meshes approximate curved
surfaces with fine triangulations; the box mesh is exact.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ConfigError
from .geometry import PointCloud, TriangleMesh

SHAPE_KINDS = ("sphere", "torus", "cylinder", "box_surface")

_DEFAULTS = {
    "sphere": {"radius": 1.0},
    "torus": {"major": 1.0, "minor": 0.35},
    "cylinder": {"radius": 0.7, "height": 2.0},
    "box_surface": {"half_extents": (0.8, 0.6, 1.0)},
}


@dataclasses.dataclass
class SyntheticShape:
    kind: str
    params: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ConfigError(f"unknown shape {self.kind!r}; choose from {SHAPE_KINDS}")
        merged = dict(_DEFAULTS[self.kind])
        merged.update(self.params)
        self.params = merged
        flat = []
        for v in self.params.values():
            flat.extend(np.atleast_1d(v).tolist())
        if any(not np.isfinite(v) or v <= 0 for v in flat):
            raise ConfigError(f"shape parameters must be positive and finite, got {self.params}")


def surface_sample(shape, n, rng):
    """n points drawn uniformly by area on the analytic surface."""
    kind, p = shape.kind, shape.params
    if kind == "sphere":
        g = rng.normal(size=(n, 3))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        return p["radius"] * g / norms
    if kind == "torus":
        major, minor = p["major"], p["minor"]
        theta = np.empty(0)
        while theta.size < n:  # rejection keeps the area element uniform
            cand = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
            accept = rng.uniform(0.0, 1.0, size=2 * n) < (major + minor * np.cos(cand)) / (major + minor)
            theta = np.concatenate([theta, cand[accept]])
        theta = theta[:n]
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        ring = major + minor * np.cos(theta)
        return np.column_stack([ring * np.cos(phi), ring * np.sin(phi), minor * np.sin(theta)])
    if kind == "cylinder":
        radius, height = p["radius"], p["height"]
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
        z = rng.uniform(-height / 2.0, height / 2.0, size=n)
        return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), z])
    half = np.asarray(p["half_extents"], dtype=np.float64)
    areas = 4.0 * np.array([half[1] * half[2], half[0] * half[2], half[0] * half[1]])
    probs = np.repeat(areas, 2) / (2.0 * areas.sum())
    face = rng.choice(6, size=n, p=probs)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    for f in range(6):
        axis, sign = divmod(f, 2)
        rows = face == f
        other = [i for i in range(3) if i != axis]
        pts[rows, axis] = half[axis] * (1.0 if sign == 0 else -1.0)
        pts[rows, other[0]] = uv[rows, 0] * half[other[0]]
        pts[rows, other[1]] = uv[rows, 1] * half[other[1]]
    return pts


def _icosphere(subdivisions):
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                mid = verts[i] + verts[j]
                verts.append(mid / np.linalg.norm(mid))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts), np.array(faces, dtype=np.int64)


def _grid_faces(nu, nv, wrap_v):
    """Triangulate a nu x nv vertex grid that wraps in u (and optionally v)."""
    faces = []
    v_limit = nv if wrap_v else nv - 1
    for u in range(nu):
        for v in range(v_limit):
            a = u * nv + v
            b = ((u + 1) % nu) * nv + v
            a2 = u * nv + (v + 1) % nv
            b2 = ((u + 1) % nu) * nv + (v + 1) % nv
            faces += [(a, b, b2), (a, b2, a2)]
    return np.array(faces, dtype=np.int64)


def surface_mesh(shape):
    """Reference triangulation used for the point-to-face metric."""
    kind, p = shape.kind, shape.params
    if kind == "sphere":
        verts, faces = _icosphere(3)
        return TriangleMesh(p["radius"] * verts, faces)
    if kind == "torus":
        major, minor = p["major"], p["minor"]
        nu, nv = 32, 16
        phi = 2.0 * np.pi * np.arange(nu) / nu
        theta = 2.0 * np.pi * np.arange(nv) / nv
        verts = np.array(
            [
                [
                    (major + minor * np.cos(tv)) * np.cos(pu),
                    (major + minor * np.cos(tv)) * np.sin(pu),
                    minor * np.sin(tv),
                ]
                for pu in phi
                for tv in theta
            ]
        )
        return TriangleMesh(verts, _grid_faces(nu, nv, wrap_v=True))
    if kind == "cylinder":
        radius, height = p["radius"], p["height"]
        nu, nv = 48, 2
        phi = 2.0 * np.pi * np.arange(nu) / nu
        z = np.array([-height / 2.0, height / 2.0])
        verts = np.array(
            [[radius * np.cos(pu), radius * np.sin(pu), zv] for pu in phi for zv in z]
        )
        return TriangleMesh(verts, _grid_faces(nu, nv, wrap_v=False))
    hx, hy, hz = np.asarray(p["half_extents"], dtype=np.float64)
    corners = np.array(
        [[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    )
    faces = np.array(
        [
            (0, 1, 3), (0, 3, 2),  # -x
            (4, 6, 7), (4, 7, 5),  # +x
            (0, 4, 5), (0, 5, 1),  # -y
            (2, 3, 7), (2, 7, 6),  # +y
            (0, 2, 6), (0, 6, 4),  # -z
            (1, 5, 7), (1, 7, 3),  # +z
        ],
        dtype=np.int64,
    )
    return TriangleMesh(corners, faces)


def sample_pair(shape, n, ratio, seed):
    """(input cloud of n points, ground truth of ratio*n points, reference mesh).

    Ground truth is a direct uniform draw; the input is an n-point subsample
    of an independent uniform draw, so input points are not a subset of the
    ground truth.
    """
    n = int(n)
    ratio = int(ratio)
    if n < 8:
        raise ConfigError(f"need at least 8 input points, got {n}")
    if ratio < 1:
        raise ConfigError(f"ratio must be positive, got {ratio}")
    rng = np.random.default_rng(seed)
    gt = PointCloud(surface_sample(shape, ratio * n, rng))
    pool = surface_sample(shape, 2 * n, rng)
    pick = rng.choice(2 * n, size=n, replace=False)
    return PointCloud(pool[pick]), gt, surface_mesh(shape)
