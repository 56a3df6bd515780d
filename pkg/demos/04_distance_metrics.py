"""The three evaluation metrics and their conventions.

  chamfer       squared distances, sum of both directed means
  hausdorff     unsquared, max of both directed maxes
  point_to_face directed, mean prediction-to-mesh distance

Run: python demos/04_distance_metrics.py
"""

import numpy as np

from puxp.geometry import TriangleMesh, point_triangle_distance
from puxp.metrics import chamfer, hausdorff, point_to_face
from puxp.shapes import SyntheticShape, surface_mesh, surface_sample

# --- two one-point clouds make the conventions obvious ---------------------
p = [[0.0, 0.0, 0.0]]
q = [[3.0, 4.0, 0.0]]
print("P = {(0,0,0)},  Q = {(3,4,0)}  (distance 5)")
print("chamfer  :", chamfer(p, q), " (25 + 25: squared, both directions)")
print("hausdorff:", hausdorff(p, q), "       (unsquared)")

# --- point-to-triangle runs the exact region analysis ----------------------
tri = np.array([[0.0, 0, 0], [2.0, 0, 0], [0.0, 2, 0]])
for point, label in [
    ([0.0, 0.0, 1.0], "projects onto the interior"),
    ([-1.0, -1.0, 0.0], "closest to vertex (0,0,0)"),
    ([1.0, -2.0, 0.0], "closest to edge ab"),
]:
    print(f"d({point}, tri) = {point_triangle_distance(point, tri):.6f}  # {label}")

mesh = TriangleMesh(tri, [[0, 1, 2]])
print("point_to_face of one point at height 1:", point_to_face([[0.0, 0.0, 1.0]], mesh))

# --- against a synthetic benchmark surface ----------------------------------
rng = np.random.default_rng(1)
shape = SyntheticShape("torus")
dense = surface_sample(shape, 2000, rng)
sparse = surface_sample(shape, 250, rng)
tmesh = surface_mesh(shape)
print("\ntorus: 250-point draw vs 2000-point draw")
print(f"  chamfer   = {chamfer(sparse, dense):.5f}")
print(f"  hausdorff = {hausdorff(sparse, dense):.5f}")
print(f"  p2f       = {point_to_face(sparse, tmesh):.5f}  (mesh chord error sets the floor)")
