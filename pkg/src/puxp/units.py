"""Feature-expansion units: N x C point features -> r*N x C' under one contract.

All units keep the children of point i contiguous at output rows
r*i .. r*i + r - 1. The branch/duplicate/MLP units process every point in
isolation; NodeShuffle and ProEdgeShuffle mix neighbor features through
EdgeConv, which is exactly the property the comparison harness probes.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, GradientError, ShapeError
from .geometry import IndexMatrix, PointCloud, expand_index, knn_features
from .nn import EdgeConvLayer, SharedMLP, duplicate_with_code

UNIT_KINDS = (
    "branch",
    "duplicate",
    "single_mlp",
    "multilayer_mlp",
    "progressive_mlp",
    "nodeshuffle",
    "proedgeshuffle",
)
GRAPH_KINDS = ("nodeshuffle", "proedgeshuffle")
POWER_OF_TWO_KINDS = ("duplicate", "progressive_mlp", "proedgeshuffle")
INDEX_MODES = ("expand", "feature_knn")
REGRESSION_MODES = ("direct", "edgeconv_after", "edgeconv_before")


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclasses.dataclass
class ExpansionSpec:
    """Configuration of one feature-expansion unit.

    regression_mode defaults to edgeconv_before for proedgeshuffle (its final
    local fusion pass) and to direct regression for every other kind.
    """

    kind: str
    ratio: int
    channels: int
    k: int | None = None
    index_mode: str = "expand"
    regression_mode: str | None = None
    edge_hidden: tuple = ()

    def __post_init__(self):
        if self.kind not in UNIT_KINDS:
            raise ConfigError(f"unknown unit kind {self.kind!r}; choose from {UNIT_KINDS}")
        self.ratio = int(self.ratio)
        self.channels = int(self.channels)
        if self.ratio < 1:
            raise ConfigError(f"ratio must be a positive integer, got {self.ratio}")
        if self.channels < 1:
            raise ConfigError(f"channels must be a positive integer, got {self.channels}")
        if self.kind in POWER_OF_TWO_KINDS and not _is_power_of_two(self.ratio):
            raise ConfigError(f"ratio must be a power of 2 for unit {self.kind!r}, got {self.ratio}")
        if self.kind == "proedgeshuffle" and self.ratio not in (2, 4, 8, 16):
            raise ConfigError(f"proedgeshuffle supports ratios 2, 4, 8, 16, got {self.ratio}")
        if self.kind in GRAPH_KINDS:
            if self.k is None:
                raise ConfigError(f"unit {self.kind!r} needs a neighbor count k")
            self.k = int(self.k)
        if self.index_mode not in INDEX_MODES:
            raise ConfigError(f"unknown index mode {self.index_mode!r}; choose from {INDEX_MODES}")
        if self.regression_mode is None:
            self.regression_mode = "edgeconv_before" if self.kind == "proedgeshuffle" else "direct"
        if self.regression_mode not in REGRESSION_MODES:
            raise ConfigError(
                f"unknown regression mode {self.regression_mode!r}; choose from {REGRESSION_MODES}"
            )


@dataclasses.dataclass
class ExpansionContext:
    """What a unit sees: the raw cloud, its fixed KNN graph, and features."""

    cloud: PointCloud
    base_index: IndexMatrix | None
    features: Tensor

    def __post_init__(self):
        n = self.features.shape[0]
        if self.cloud.count != n:
            raise ShapeError(f"cloud has {self.cloud.count} points but features have {n} rows")
        if self.base_index is not None and self.base_index.rows != n:
            raise ShapeError(
                f"index matrix has {self.base_index.rows} rows but features have {n}"
            )


@dataclasses.dataclass
class ExpansionResult:
    features: Tensor
    index: IndexMatrix | None  # graph over the expanded rows, when the unit kept one


class _UnitBase:
    kind = ""

    def __init__(self, spec):
        self.spec = spec
        self.out_channels = spec.channels

    def _require_graph(self, ctx):
        if ctx.base_index is None:
            raise ConfigError(f"unit {self.kind!r} needs a base index matrix")
        return ctx.base_index


class BranchUnit(_UnitBase):
    """r independent two-layer point convolutions, concatenated then shuffled."""

    kind = "branch"

    def __init__(self, store, spec, rng, width1=None, width2=None):
        super().__init__(spec)
        c = spec.channels
        w1 = c if width1 is None else int(width1)
        w2 = c if width2 is None else int(width2)
        self.out_channels = w2
        self.branches = [
            SharedMLP(store, f"unit.branch{i}", [c, w1, w2], rng, activate_output=True)
            for i in range(spec.ratio)
        ]

    def expand(self, ctx):
        outs = [branch(ctx.features) for branch in self.branches]
        merged = outs[0]
        for out in outs[1:]:
            merged = ad.concat_last(merged, out)
        return ExpansionResult(ad.shuffle_expand(merged, self.spec.ratio), None)


class DuplicateUnit(_UnitBase):
    """log2(r) rounds of copy-with-latent-code followed by a shared layer."""

    kind = "duplicate"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        rounds = self.spec.ratio.bit_length() - 1
        self.round_mlps = [
            SharedMLP(store, f"unit.round{i}", [c + 1, c], rng, activate_output=True)
            for i in range(rounds)
        ]

    def expand(self, ctx):
        feats = ctx.features
        for mlp in self.round_mlps:
            feats = mlp(duplicate_with_code(feats))
        return ExpansionResult(feats, None)


class SingleMlpUnit(_UnitBase):
    """One shared layer C -> r*C, then shuffle."""

    kind = "single_mlp"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        self.mlp = SharedMLP(store, "unit.expandmlp", [c, spec.ratio * c], rng, activate_output=True)

    def expand(self, ctx):
        return ExpansionResult(ad.shuffle_expand(self.mlp(ctx.features), self.spec.ratio), None)


class MultilayerMlpUnit(_UnitBase):
    """Five shared C -> C layers, then the single-layer expansion and shuffle."""

    kind = "multilayer_mlp"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        widths = [c] * 6 + [spec.ratio * c]
        self.mlp = SharedMLP(store, "unit.deepmlp", widths, rng, activate_output=True)

    def expand(self, ctx):
        return ExpansionResult(ad.shuffle_expand(self.mlp(ctx.features), self.spec.ratio), None)


class ProgressiveMlpUnit(_UnitBase):
    """An extraction layer, then [C -> 2C layer, shuffle] until r*N rows."""

    kind = "progressive_mlp"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        self.extract = SharedMLP(store, "unit.extract", [c, c], rng, activate_output=True)
        rounds = self.spec.ratio.bit_length() - 1
        self.round_mlps = [
            SharedMLP(store, f"unit.double{i}", [c, 2 * c], rng, activate_output=True)
            for i in range(rounds)
        ]

    def expand(self, ctx):
        feats = self.extract(ctx.features)
        for mlp in self.round_mlps:
            feats = ad.shuffle_expand(mlp(feats), 2)
        return ExpansionResult(feats, None)


class NodeShuffleUnit(_UnitBase):
    """EdgeConv C -> r*C on the base graph, then shuffle."""

    kind = "nodeshuffle"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        self.conv = EdgeConvLayer(
            store, "unit.conv", c, spec.ratio * c, rng, hidden=spec.edge_hidden
        )

    def expand(self, ctx):
        base = self._require_graph(ctx)
        return ExpansionResult(ad.shuffle_expand(self.conv(ctx.features, base), self.spec.ratio), None)


class ProEdgeShuffleUnit(_UnitBase):
    """log2(r) rounds of [EdgeConv C -> 2C, shuffle, index update].

    Each round doubles the rows; the neighbor table follows either by the
    index-expansion rule (default, the whole model then only ever uses the
    KNN of the raw cloud) or by recomputing KNN in feature space.
    """

    kind = "proedgeshuffle"

    def __init__(self, store, spec, rng):
        super().__init__(spec)
        c = spec.channels
        rounds = self.spec.ratio.bit_length() - 1
        self.convs = [
            EdgeConvLayer(store, f"unit.conv{i}", c, 2 * c, rng, hidden=spec.edge_hidden)
            for i in range(rounds)
        ]

    def expand(self, ctx):
        feats = ctx.features
        idx = self._require_graph(ctx)
        for conv in self.convs:
            feats = ad.shuffle_expand(conv(feats, idx), 2)
            if self.spec.index_mode == "expand":
                idx = expand_index(idx)
            else:
                idx = knn_features(feats.data, self.spec.k)
        return ExpansionResult(feats, idx)


_UNIT_CLASSES = {
    cls.kind: cls
    for cls in (
        BranchUnit,
        DuplicateUnit,
        SingleMlpUnit,
        MultilayerMlpUnit,
        ProgressiveMlpUnit,
        NodeShuffleUnit,
        ProEdgeShuffleUnit,
    )
}


def build_unit(store, spec, rng):
    return _UNIT_CLASSES[spec.kind](store, spec, rng)


def expanded_graph(base_index, ratio, provided=None):
    """Neighbor table over the r*N expanded rows.

    Units that track their own graph hand it over; anything else gets the
    base graph doubled log2(r) times, which requires a power-of-two ratio.
    """
    if provided is not None:
        return provided
    if base_index is None:
        raise ConfigError("no base index matrix to derive the expanded graph from")
    if not _is_power_of_two(ratio):
        raise ConfigError(f"cannot derive an expanded graph for ratio {ratio} (not a power of 2)")
    idx = base_index
    for _ in range(int(ratio).bit_length() - 1):
        idx = expand_index(idx)
    return idx


class RegressionStage:
    """Turns r*N x C features into r*N coordinates.

    direct: shared head only, never touches a neighbor table.
    edgeconv_before: one EdgeConv C -> C on the expanded graph, then the head.
    edgeconv_after: head first, then EdgeConv 3 -> 3 on the coordinates.
    """

    def __init__(self, store, spec, rng, c_in):
        self.mode = spec.regression_mode
        self.pre = None
        self.post = None
        if self.mode == "edgeconv_before":
            self.pre = EdgeConvLayer(store, "regress.pre", c_in, c_in, rng)
        self.head = SharedMLP(store, "regress.head", [c_in, 3], rng, activate_output=False)
        if self.mode == "edgeconv_after":
            self.post = EdgeConvLayer(store, "regress.post", 3, 3, rng, activate_output=False)

    def forward(self, features, index=None):
        if self.mode == "direct":
            return self.head(features)
        if index is None:
            raise ConfigError(f"regression mode {self.mode!r} needs a graph over the expanded rows")
        if self.mode == "edgeconv_before":
            return self.head(self.pre(features, index))
        coords = self.head(features)
        return self.post(coords, index)


def finalize_regression(stage, result, ctx, spec):
    """Regress expanded features to a PointCloud, deriving the graph if needed."""
    index = None
    if stage.mode != "direct":
        index = expanded_graph(ctx.base_index, spec.ratio, result.index)
    coords = stage.forward(result.features, index)
    finite = np.isfinite(coords.data).all(axis=1)
    if not finite.all():
        row = int(np.nonzero(~finite)[0][0])
        raise GradientError(f"non-finite coordinates at output row {row}")
    return PointCloud(coords.data.copy())
