import numpy as np
import pytest

from puxp import autodiff as ad
from puxp.autodiff import ParameterStore, Tensor
from puxp.checks import check_gradient
from puxp.errors import ConfigError
from puxp.geometry import IndexMatrix, PointCloud, expand_index, knn_bruteforce
from puxp.units import (
    GRAPH_KINDS,
    UNIT_KINDS,
    ExpansionContext,
    ExpansionSpec,
    RegressionStage,
    build_unit,
    expanded_graph,
    finalize_regression,
)


def make_context(n=6, c=4, k=3, seed=0, nonneg=False):
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.normal(size=(n, 3)))
    base = knn_bruteforce(cloud, k)
    feats = rng.normal(size=(n, c))
    if nonneg:
        feats = np.abs(feats) + 0.1
    return ExpansionContext(cloud, base, Tensor(feats)), rng


def build(kind, ratio=2, channels=4, k=3, seed=1, **kw):
    spec = ExpansionSpec(kind=kind, ratio=ratio, channels=channels, k=k, **kw)
    store = ParameterStore()
    unit = build_unit(store, spec, np.random.default_rng(seed))
    return unit, store, spec


class TestExpansionSpec:
    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="unknown unit kind"):
            ExpansionSpec(kind="magic", ratio=2, channels=4)

    def test_power_of_two_enforced(self):
        with pytest.raises(ConfigError, match="ratio must be a power of 2"):
            ExpansionSpec(kind="proedgeshuffle", ratio=3, channels=4, k=4)
        with pytest.raises(ConfigError, match="ratio must be a power of 2"):
            ExpansionSpec(kind="duplicate", ratio=6, channels=4)

    def test_proedgeshuffle_ratio_cap(self):
        with pytest.raises(ConfigError, match="2, 4, 8, 16"):
            ExpansionSpec(kind="proedgeshuffle", ratio=32, channels=4, k=4)

    def test_graph_kinds_need_k(self):
        with pytest.raises(ConfigError, match="neighbor count"):
            ExpansionSpec(kind="nodeshuffle", ratio=2, channels=4)

    def test_regression_mode_defaults(self):
        assert ExpansionSpec(kind="branch", ratio=2, channels=4).regression_mode == "direct"
        pro = ExpansionSpec(kind="proedgeshuffle", ratio=2, channels=4, k=4)
        assert pro.regression_mode == "edgeconv_before"

    def test_branch_allows_non_power_of_two(self):
        spec = ExpansionSpec(kind="branch", ratio=3, channels=4)
        assert spec.ratio == 3


class TestUniversalShapeLaw:
    @pytest.mark.parametrize("kind", UNIT_KINDS)
    @pytest.mark.parametrize("ratio", [2, 4])
    def test_output_rows_and_block_layout(self, kind, ratio):
        ctx, _ = make_context(n=6, c=4, k=3)
        unit, _, _ = build(kind, ratio=ratio)
        out = unit.expand(ctx)
        assert out.features.shape == (ratio * 6, unit.out_channels)

    @pytest.mark.parametrize("kind", ["branch", "single_mlp", "multilayer_mlp"])
    def test_ratio_3_supported_for_non_progressive(self, kind):
        ctx, _ = make_context(n=5, c=4, k=2)
        unit, _, _ = build(kind, ratio=3)
        assert unit.expand(ctx).features.shape[0] == 15


class TestBranchUnit:
    def test_ratio_1_identity_weights_pass_nonneg_input(self):
        ctx, _ = make_context(n=4, c=3, nonneg=True)
        unit, store, _ = build("branch", ratio=1, channels=3)
        store["unit.branch0.w0"].tensor.data[:] = np.eye(3)
        store["unit.branch0.w1"].tensor.data[:] = np.eye(3)
        out = unit.expand(ctx)
        assert np.allclose(out.features.data, ctx.features.data, atol=1e-15)

    def test_zero_input_zero_output(self):
        # biases start at zero, so a zero feature map stays zero
        cloud = PointCloud(np.random.default_rng(0).normal(size=(4, 3)))
        ctx = ExpansionContext(cloud, None, Tensor(np.zeros((4, 3))))
        unit, _, _ = build("branch", ratio=2, channels=3)
        assert np.all(unit.expand(ctx).features.data == 0.0)

    def test_hand_computed_two_branches(self):
        # scalar features, both layers 1x1: branch b computes relu(w2_b * relu(w1_b * f))
        cloud = PointCloud(np.random.default_rng(0).normal(size=(2, 3)))
        ctx = ExpansionContext(cloud, None, Tensor([[1.0], [-2.0]]))
        unit, store, _ = build("branch", ratio=2, channels=1)
        store["unit.branch0.w0"].tensor.data[:] = [[2.0]]
        store["unit.branch0.w1"].tensor.data[:] = [[3.0]]
        store["unit.branch1.w0"].tensor.data[:] = [[-1.0]]
        store["unit.branch1.w1"].tensor.data[:] = [[5.0]]
        out = unit.expand(ctx).features.data
        # point 0: branch0 relu(3*relu(2*1)) = 6; branch1 relu(5*relu(-1)) = 0
        # point 1: branch0 relu(3*relu(-4)) = 0; branch1 relu(5*relu(2)) = 10
        assert out.tolist() == [[6.0], [0.0], [0.0], [10.0]]


class TestDuplicateUnit:
    def test_one_round_doubles_rows(self):
        ctx, _ = make_context(n=3, c=4, k=2)
        unit, _, _ = build("duplicate", ratio=2)
        assert unit.expand(ctx).features.shape == (6, 4)

    def test_ratio_4_uses_two_rounds(self):
        ctx, _ = make_context(n=3, c=4, k=2)
        unit, _, _ = build("duplicate", ratio=4)
        assert len(unit.round_mlps) == 2
        assert unit.expand(ctx).features.shape == (12, 4)

    def test_children_differ_only_through_code(self):
        # with the code column weights zeroed, both children collapse to the same output
        ctx, _ = make_context(n=4, c=3)
        unit, store, _ = build("duplicate", ratio=2, channels=3)
        store["unit.round0.w0"].tensor.data[-1, :] = 0.0
        out = unit.expand(ctx).features.data
        assert np.array_equal(out[0::2], out[1::2])


class TestMlpUnits:
    def test_single_stacked_identity_children_equal_parent(self):
        ctx, _ = make_context(n=3, c=4, k=2, nonneg=True)
        unit, store, _ = build("single_mlp", ratio=2)
        store["unit.expandmlp.w0"].tensor.data[:] = np.hstack([np.eye(4), np.eye(4)])
        out = unit.expand(ctx).features.data
        assert np.allclose(out[0::2], ctx.features.data, atol=1e-15)
        assert np.allclose(out[1::2], ctx.features.data, atol=1e-15)

    def test_multilayer_identity_hidden_reduces_to_single(self):
        ctx, _ = make_context(n=4, c=3, nonneg=True)
        deep, deep_store, _ = build("multilayer_mlp", ratio=2, channels=3)
        single, single_store, _ = build("single_mlp", ratio=2, channels=3)
        for i in range(5):
            deep_store[f"unit.deepmlp.w{i}"].tensor.data[:] = np.eye(3)
        deep_store["unit.deepmlp.w5"].tensor.data[:] = single_store["unit.expandmlp.w0"].data
        deep_store["unit.deepmlp.b5"].tensor.data[:] = single_store["unit.expandmlp.b0"].data
        assert np.allclose(
            deep.expand(ctx).features.data, single.expand(ctx).features.data, atol=1e-12
        )

    def test_progressive_ratio_4_runs_two_rounds(self):
        ctx, _ = make_context(n=3, c=4, k=2)
        unit, _, _ = build("progressive_mlp", ratio=4)
        assert len(unit.round_mlps) == 2
        assert unit.expand(ctx).features.shape == (12, 4)


class TestNodeShuffle:
    def test_requires_graph(self):
        cloud = PointCloud(np.random.default_rng(0).normal(size=(4, 3)))
        ctx = ExpansionContext(cloud, None, Tensor(np.zeros((4, 4))))
        unit, _, _ = build("nodeshuffle")
        with pytest.raises(ConfigError, match="base index"):
            unit.expand(ctx)

    def test_hand_computed_scalar_case(self):
        # edgeconv 1 -> 2 with hand weights, then shuffle to 6 x 1
        cloud = PointCloud([[0.0, 0, 0], [1.0, 0, 0], [3.0, 0, 0]])
        base = IndexMatrix([[1], [2], [0]])
        ctx = ExpansionContext(cloud, base, Tensor([[1.0], [2.0], [4.0]]))
        unit, store, _ = build("nodeshuffle", ratio=2, channels=1, k=1)
        store["unit.conv.h.w0"].tensor.data[:] = [[1.0, 3.0], [2.0, -1.0]]
        # per row: [relu(x_i + 2 d), relu(3 x_i - d)] with d = x_j - x_i
        # row 0: d=1  -> [3, 2]; row 1: d=2 -> [6, 4]; row 2: d=-3 -> [0, 15]
        out = unit.expand(ctx).features.data
        assert out.tolist() == [[3.0], [2.0], [6.0], [4.0], [0.0], [15.0]]


class TestProEdgeShuffle:
    def test_row_trace_ratio_16(self):
        ctx, _ = make_context(n=4, c=4, k=2)
        unit, _, _ = build("proedgeshuffle", ratio=16, k=2)
        traced = []
        feats = ctx.features
        idx = ctx.base_index
        for conv in unit.convs:
            feats = ad.shuffle_expand(conv(feats, idx), 2)
            idx = expand_index(idx)
            traced.append(feats.shape[0])
        assert traced == [8, 16, 32, 64]
        out = unit.expand(ctx)
        assert out.features.shape == (64, 4)
        assert out.index.rows == 64

    def test_expand_mode_graph_is_expanded_base(self):
        ctx, _ = make_context(n=4, c=4, k=2)
        unit, _, _ = build("proedgeshuffle", ratio=2, k=2)
        out = unit.expand(ctx)
        assert np.array_equal(out.index.entries, expand_index(ctx.base_index).entries)

    def test_feature_knn_mode_recomputes_graph(self):
        ctx, _ = make_context(n=5, c=4, k=2)
        unit, _, _ = build("proedgeshuffle", ratio=2, k=2, index_mode="feature_knn")
        out = unit.expand(ctx)
        assert out.index.rows == 10
        assert out.index.k == 2
        # entries need not be even: the graph came from feature-space KNN
        assert out.features.shape == (10, 4)

    def test_round_count_matches_ratio(self):
        for ratio, rounds in [(2, 1), (4, 2), (8, 3), (16, 4)]:
            unit, _, _ = build("proedgeshuffle", ratio=ratio, k=2)
            assert len(unit.convs) == rounds


class TestRegressionStage:
    def make(self, kind="proedgeshuffle", mode=None, n=6, ratio=2, c=4, k=3, seed=0):
        ctx, _ = make_context(n=n, c=c, k=k, seed=seed)
        spec = ExpansionSpec(kind=kind, ratio=ratio, channels=c, k=k, regression_mode=mode)
        store = ParameterStore()
        rng = np.random.default_rng(seed + 1)
        unit = build_unit(store, spec, rng)
        stage = RegressionStage(store, spec, rng, unit.out_channels)
        return ctx, spec, unit, stage

    @pytest.mark.parametrize("mode", ["direct", "edgeconv_after", "edgeconv_before"])
    def test_all_modes_output_rn_points(self, mode):
        ctx, spec, unit, stage = self.make(mode=mode)
        cloud = finalize_regression(stage, unit.expand(ctx), ctx, spec)
        assert cloud.count == 12

    def test_direct_mode_never_reads_the_index(self):
        class CountingIndex(IndexMatrix):
            def __init__(self, entries):
                super().__init__(entries)
                self.reads = 0

            def __getattribute__(self, name):
                if name == "entries":
                    object.__setattr__(self, "reads", object.__getattribute__(self, "reads") + 1)
                return object.__getattribute__(self, name)

        ctx, spec, unit, stage = self.make(kind="branch", mode="direct", k=3)
        result = unit.expand(ctx)
        probe = CountingIndex(np.asarray(ctx.base_index.entries))
        probe.reads = 0
        stage.forward(result.features, probe)
        assert probe.reads == 0

    def test_missing_graph_for_edgeconv_modes(self):
        ctx, spec, unit, stage = self.make(kind="branch", mode="edgeconv_before", ratio=3)
        result = unit.expand(ctx)
        with pytest.raises(ConfigError, match="not a power of 2"):
            finalize_regression(stage, result, ctx, spec)

    def test_edgeconv_before_identical_features_collapse(self):
        ctx, spec, unit, stage = self.make(mode="edgeconv_before")
        feats = Tensor(np.tile([[0.5, 1.0, -0.3, 0.2]], (12, 1)))
        graph = expanded_graph(ctx.base_index, 2)
        coords = stage.forward(feats, graph).data
        assert np.allclose(coords, coords[0], atol=0)

    def test_derived_graph_matches_repeated_expansion(self):
        ctx, _ = make_context(n=5, c=4, k=2)
        twice = expand_index(expand_index(ctx.base_index))
        assert np.array_equal(expanded_graph(ctx.base_index, 4).entries, twice.entries)


class TestIsolationDichotomy:
    @pytest.mark.parametrize("kind", UNIT_KINDS)
    def test_isolated_units_vs_graph_units(self, kind):
        n, c, k = 16, 8, 4
        rng = np.random.default_rng(33)
        cloud = PointCloud(rng.normal(size=(n, 3)))
        base = knn_bruteforce(cloud, k)
        feats = rng.normal(size=(n, c))
        unit, _, _ = build(kind, ratio=2, channels=c, k=k, seed=5)
        out0 = unit.expand(ExpansionContext(cloud, base, Tensor(feats))).features.data

        j = int(base.entries[0, 0])  # perturbed point is a neighbor of point 0
        bumped = feats.copy()
        bumped[j] += 1e-2
        out1 = unit.expand(ExpansionContext(cloud, base, Tensor(bumped))).features.data

        r = 2
        own = slice(r * j, r * j + r)
        others = np.ones(out0.shape[0], dtype=bool)
        others[own] = False
        if kind in GRAPH_KINDS:
            assert not np.array_equal(out0[others], out1[others]), "neighbors must see the change"
            changed_rows = np.nonzero((out0 != out1).any(axis=1))[0] // r
            assert 0 in changed_rows  # point 0 has j as a neighbor
        else:
            assert np.array_equal(out0[others], out1[others]), "bitwise isolation must hold"
            assert not np.array_equal(out0[own], out1[own])


class TestPermutationEquivariance:
    @pytest.mark.parametrize("kind", UNIT_KINDS)
    def test_block_level_equivariance(self, kind):
        n, c, k, r = 8, 4, 3, 2
        rng = np.random.default_rng(77)
        pts = rng.normal(size=(n, 3))
        feats = rng.normal(size=(n, c))
        perm = rng.permutation(n)

        unit, _, _ = build(kind, ratio=r, channels=c, k=k, seed=9)
        base = knn_bruteforce(PointCloud(pts), k)
        out = unit.expand(ExpansionContext(PointCloud(pts), base, Tensor(feats))).features.data
        base_p = knn_bruteforce(PointCloud(pts[perm]), k)
        out_p = unit.expand(
            ExpansionContext(PointCloud(pts[perm]), base_p, Tensor(feats[perm]))
        ).features.data

        blocks = out.reshape(n, r, -1)
        blocks_p = out_p.reshape(n, r, -1)
        assert np.allclose(blocks_p, blocks[perm], atol=1e-9)


class TestUnitGradients:
    @pytest.mark.parametrize("kind", UNIT_KINDS)
    def test_fd_gradient_through_unit(self, kind):
        ctx, _ = make_context(n=6, c=4, k=3, seed=3, nonneg=True)
        unit, _, _ = build(kind, ratio=2, channels=4, k=3, seed=4)

        def loss(t):
            out = unit.expand(ExpansionContext(ctx.cloud, ctx.base_index, t))
            return ad.sum_all(out.features)

        result = check_gradient(f"unit/{kind}", loss, np.array(ctx.features.data))
        assert result.ok, result.detail
