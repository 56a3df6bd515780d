import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from puxp.geometry import PointCloud, TriangleMesh, point_triangle_distance
from puxp.metrics import MetricReport, chamfer, hausdorff, point_to_face, report


def brute_chamfer(a, b):
    # independent nearest-neighbor enumeration; the final mean uses numpy's
    # reduction so it matches the production path bit for bit
    fwd = np.array([min(((p - q) ** 2).sum() for q in b) for p in a]).mean()
    bwd = np.array([min(((q - p) ** 2).sum() for p in a) for q in b]).mean()
    return fwd + bwd


def brute_hausdorff(a, b):
    fwd = max(min(np.sqrt(((p - q) ** 2).sum()) for q in b) for p in a)
    bwd = max(min(np.sqrt(((q - p) ** 2).sum()) for p in a) for q in b)
    return max(fwd, bwd)


class TestChamfer:
    def test_identical_clouds_zero(self):
        pts = np.random.default_rng(0).normal(size=(20, 3))
        assert chamfer(pts, pts.copy()) == 0.0

    def test_hand_case_is_50(self):
        assert chamfer([[0.0, 0.0, 0.0]], [[3.0, 4.0, 0.0]]) == pytest.approx(50.0, abs=1e-12)

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(int(rng.integers(1, 12)), 3))
        b = rng.normal(size=(int(rng.integers(1, 12)), 3))
        assert chamfer(a, b) == chamfer(b, a)

    def test_matches_bruteforce_oracle_exactly(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(9, 3))
        b = rng.normal(size=(7, 3))
        assert chamfer(a, b) == brute_chamfer(a, b)

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            chamfer(np.zeros((0, 3)), np.zeros((3, 3)))

    def test_zero_iff_mutual_subsets(self):
        a = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        b = np.array([[1.0, 0, 0], [0.0, 0, 0], [1.0, 0, 0]])
        assert chamfer(a, b) == 0.0
        c = np.array([[0.0, 0, 0], [2.0, 0, 0]])
        assert chamfer(a, c) > 0.0


class TestHausdorff:
    def test_identical_clouds_zero(self):
        pts = np.random.default_rng(1).normal(size=(15, 3))
        assert hausdorff(pts, pts.copy()) == 0.0

    def test_hand_case_is_5(self):
        assert hausdorff([[0.0, 0.0, 0.0]], [[3.0, 4.0, 0.0]]) == pytest.approx(5.0, abs=1e-12)

    def test_covered_point_contributes_zero_to_directed_term(self):
        b = np.array([[0.0, 0, 0], [5.0, 0, 0]])
        a = np.array([[5.0, 0.0, 0.0]])  # already in b
        assert hausdorff(np.vstack([a, b[:1]]), b) == 0.0

    def test_matches_bruteforce_oracle_exactly(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(8, 3))
        b = rng.normal(size=(11, 3))
        assert hausdorff(a, b) == pytest.approx(brute_hausdorff(a, b), abs=0)


class TestPointToFace:
    RIGHT_TRI_MESH = TriangleMesh([[0, 0, 0], [2, 0, 0], [0, 2, 0]], [[0, 1, 2]])

    def test_points_on_surface_give_zero(self):
        mesh = self.RIGHT_TRI_MESH
        pts = [[0.5, 0.5, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 0.0]]
        assert point_to_face(pts, mesh) == 0.0

    def test_single_point_height_one(self):
        assert point_to_face([[0.0, 0.0, 1.0]], self.RIGHT_TRI_MESH) == pytest.approx(1.0, abs=1e-12)

    def test_two_heights_mean_two(self):
        big = TriangleMesh([[-100, -100, 0], [100, -100, 0], [0, 100, 0]], [[0, 1, 2]])
        pts = [[0.0, 0.0, 1.0], [0.0, 0.0, 3.0]]
        assert point_to_face(pts, big) == pytest.approx(2.0, abs=1e-12)

    def test_directed_only(self):
        # a huge mesh far from covering the cloud does not hurt if points sit
        # on it; interior closest points reconstruct to eps * scale
        mesh = TriangleMesh([[-50, -50, 0], [50, -50, 0], [0, 50, 0]], [[0, 1, 2]])
        assert point_to_face([[0.3, 0.2, 0.0]], mesh) <= 1e-12 * 50

    def test_at_most_distance_to_vertex_set(self):
        rng = np.random.default_rng(4)
        verts = rng.normal(size=(12, 3))
        mesh = TriangleMesh(verts, [[0, 1, 2], [3, 4, 5], [6, 7, 8], [9, 10, 11]])
        pts = rng.normal(size=(30, 3))
        for p in pts:
            face_d = min(point_triangle_distance(p, mesh.triangle(f)) for f in range(4))
            vert_d = np.linalg.norm(verts - p, axis=1).min()
            assert face_d <= vert_d + 1e-15

    def test_empty_mesh_rejected(self):
        mesh = TriangleMesh(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(ValueError):
            point_to_face([[0.0, 0.0, 1.0]], mesh)


class TestRigidInvariance:
    def test_metrics_under_common_rigid_motion(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(14, 3))
        b = rng.normal(size=(9, 3))
        mesh = TriangleMesh(rng.normal(size=(6, 3)), [[0, 1, 2], [3, 4, 5]])
        angle = 0.9
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
        shift = np.array([3.0, -1.0, 2.0])
        a2, b2 = a @ rot.T + shift, b @ rot.T + shift
        mesh2 = TriangleMesh(mesh.vertices @ rot.T + shift, mesh.faces)
        assert chamfer(a2, b2) == pytest.approx(chamfer(a, b), abs=1e-9)
        assert hausdorff(a2, b2) == pytest.approx(hausdorff(a, b), abs=1e-9)
        assert point_to_face(a2, mesh2) == pytest.approx(point_to_face(a, mesh), abs=1e-9)


class TestReport:
    def test_report_fields(self):
        rng = np.random.default_rng(2)
        pred = PointCloud(rng.normal(size=(8, 3)))
        gt = PointCloud(rng.normal(size=(16, 3)))
        r = report("toy", pred, gt)
        assert r.label == "toy"
        assert r.p2f is None
        assert (r.pred_count, r.gt_count) == (8, 16)

    def test_rejects_negative_values(self):
        with pytest.raises(ValueError):
            MetricReport("bad", cd=-1.0, hd=0.0, p2f=None, pred_count=1, gt_count=1)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            MetricReport("bad", cd=np.nan, hd=0.0, p2f=None, pred_count=1, gt_count=1)
