"""Model assembly, training, evaluation, and the unit-comparison harness.

A model is backbone (N x 3 -> N x C) + expansion unit (N x C -> r*N x C) +
regression stage (r*N x C -> r*N x 3), all sharing one parameter store. The
KNN graph of the raw input is computed once per cloud and reused everywhere,
except when a unit explicitly recomputes feature-space KNN.

Training minimizes the squared chamfer distance with Adam. Everything is
driven by explicit seeds: a (config, seed) pair fully determines parameter
bytes, the loss curve, and every report.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import autodiff as ad
from . import metrics
from .autodiff import ParameterStore, Tape, Tensor
from .errors import ConfigError, DivergenceError, GradientError, ShapeError
from .geometry import PointCloud, knn_accelerated
from .losses import chamfer_loss
from .nn import EdgeConvLayer, SharedMLP
from .optim import AdamState, adam_step
from .shapes import SHAPE_KINDS, SyntheticShape, sample_pair
from .units import (
    ExpansionContext,
    ExpansionSpec,
    RegressionStage,
    build_unit,
    expanded_graph,
)

BACKBONE_KINDS = ("mlp_stack", "edgeconv_stack")


@dataclasses.dataclass
class BackboneSpec:
    kind: str = "edgeconv_stack"
    depth: int = 2
    width: int = 32

    def __post_init__(self):
        if self.kind not in BACKBONE_KINDS:
            raise ConfigError(f"unknown backbone {self.kind!r}; choose from {BACKBONE_KINDS}")
        self.depth = int(self.depth)
        self.width = int(self.width)
        if self.depth < 1 or self.width < 1:
            raise ConfigError(f"backbone depth and width must be positive, got {self}")


class Backbone:
    """Feature extraction stage: raw coordinates to per-point features."""

    def __init__(self, store, spec, rng):
        self.spec = spec
        self.convs = None
        self.mlp = None
        if spec.kind == "mlp_stack":
            widths = [3] + [spec.width] * spec.depth
            self.mlp = SharedMLP(store, "backbone.mlp", widths, rng, activate_output=True)
        else:
            self.convs = [
                EdgeConvLayer(store, f"backbone.conv{i}", 3 if i == 0 else spec.width, spec.width, rng)
                for i in range(spec.depth)
            ]

    def forward(self, coords, base_index):
        if self.mlp is not None:
            return self.mlp(coords)
        if base_index is None:
            raise ConfigError("edgeconv_stack backbone needs a base index matrix")
        h = coords
        for conv in self.convs:
            h = conv(h, base_index)
        return h


class UpsamplingModel:
    """Backbone + expansion unit + regression over one parameter store."""

    def __init__(self, unit_spec, backbone_spec, k, rng):
        if unit_spec.channels != backbone_spec.width:
            raise ConfigError(
                f"unit channels ({unit_spec.channels}) must match backbone width "
                f"({backbone_spec.width})"
            )
        if unit_spec.k is not None and unit_spec.k != int(k):
            raise ConfigError(f"unit k ({unit_spec.k}) disagrees with model k ({k})")
        self.unit_spec = unit_spec
        self.backbone_spec = backbone_spec
        self.k = int(k)
        if self.k < 1:
            raise ConfigError(f"neighbor count k must be positive, got {self.k}")
        self.store = ParameterStore()
        self.backbone = Backbone(self.store, backbone_spec, rng)
        self.unit = build_unit(self.store, unit_spec, rng)
        self.regression = RegressionStage(self.store, unit_spec, rng, self.unit.out_channels)

    @property
    def ratio(self):
        return self.unit_spec.ratio

    def base_graph(self, cloud):
        if cloud.count <= self.k:
            raise ConfigError(f"cloud has {cloud.count} points but k={self.k} needs more")
        return knn_accelerated(cloud, self.k)

    def forward_tensor(self, cloud, base_index=None):
        """Predicted coordinates as a tensor (rows = ratio * cloud.count)."""
        if base_index is None:
            base_index = self.base_graph(cloud)
        feats = self.backbone.forward(Tensor(cloud.points), base_index)
        ctx = ExpansionContext(cloud, base_index, feats)
        result = self.unit.expand(ctx)
        index = None
        if self.regression.mode != "direct":
            index = expanded_graph(base_index, self.ratio, result.index)
        return self.regression.forward(result.features, index)

    def upsample(self, cloud):
        coords = self.forward_tensor(cloud)
        finite = np.isfinite(coords.data).all(axis=1)
        if not finite.all():
            row = int(np.nonzero(~finite)[0][0])
            raise GradientError(f"non-finite coordinates at output row {row}")
        return PointCloud(coords.data.copy())

    def parameter_counts(self):
        """Value counts per stage, keyed by parameter name prefix."""
        counts = {"backbone": 0, "unit": 0, "regress": 0}
        for p in self.store:
            counts[p.name.split(".", 1)[0]] += p.data.size
        return counts


@dataclasses.dataclass
class TrainConfig:
    unit: ExpansionSpec
    backbone: BackboneSpec = dataclasses.field(default_factory=BackboneSpec)
    k: int = 16
    steps: int = 2000
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 1
    seed: int = 1
    shapes: tuple = SHAPE_KINDS
    points: int = 256
    data_seed: int = 100

    def __post_init__(self):
        self.k = int(self.k)
        self.steps = int(self.steps)
        self.points = int(self.points)
        self.batch_size = int(self.batch_size)
        self.seed = int(self.seed)
        self.shapes = tuple(self.shapes)
        if self.unit.ratio < 2:
            raise ConfigError(f"upsampling ratio must be at least 2, got {self.unit.ratio}")
        if self.k < 1 or self.k >= self.points:
            raise ConfigError(f"need 1 <= k < points, got k={self.k}, points={self.points}")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be positive")
        if self.lr < 0 or not (0 <= self.beta1 < 1) or not (0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigError("invalid optimizer settings")
        if not self.shapes:
            raise ConfigError("need at least one shape")
        for s in self.shapes:
            if s not in SHAPE_KINDS:
                raise ConfigError(f"unknown shape {s!r}; choose from {SHAPE_KINDS}")

    def budget_key(self):
        """Everything that must match for a fair unit comparison."""
        return (
            dataclasses.astuple(self.backbone),
            self.k,
            self.steps,
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
            self.batch_size,
            self.unit.ratio,
            self.shapes,
            self.points,
            self.data_seed,
        )


@dataclasses.dataclass
class Patch:
    name: str
    cloud: PointCloud
    gt: PointCloud
    mesh: "object"


def make_dataset(config):
    """One patch per shape; the draw depends only on the data fields."""
    patches = []
    for i, name in enumerate(config.shapes):
        shape = SyntheticShape(name)
        cloud, gt, mesh = sample_pair(shape, config.points, config.unit.ratio, config.data_seed + 7919 * i)
        patches.append(Patch(name, cloud, gt, mesh))
    return patches


def build_model(config):
    rng = np.random.default_rng(config.seed)
    return UpsamplingModel(config.unit, config.backbone, config.k, rng)


@dataclasses.dataclass
class TrainResult:
    model: UpsamplingModel
    losses: list
    config: TrainConfig


def train(config, dataset=None):
    """Minimize chamfer(predicted, gt) with Adam; per-step losses recorded."""
    if dataset is None:
        dataset = make_dataset(config)
    if not dataset:
        raise ConfigError("empty training dataset")
    model = build_model(config)
    state = AdamState(model.store)
    prepared = [(patch, model.base_graph(patch.cloud)) for patch in dataset]
    losses = []
    cursor = 0
    for step in range(config.steps):
        model.store.zero_grads()
        with Tape() as tape:
            total = None
            for _ in range(config.batch_size):
                patch, idx = prepared[cursor % len(prepared)]
                cursor += 1
                pred = model.forward_tensor(patch.cloud, idx)
                loss = chamfer_loss(pred, patch.gt)
                total = loss if total is None else ad.add(total, loss)
            if config.batch_size > 1:
                total = ad.scale(total, 1.0 / config.batch_size)
            value = total.item()
            if not np.isfinite(value):
                raise DivergenceError(step)
            tape.backward(total)
        adam_step(
            model.store, state, lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps
        )
        losses.append(value)
    return TrainResult(model, losses, config)


def evaluate(model, dataset):
    """Per-patch CD/HD/P2F rows plus one aggregate row labeled 'mean'."""
    if not dataset:
        raise ConfigError("empty evaluation dataset")
    reports = []
    for patch in dataset:
        if patch.cloud.count * model.ratio != patch.gt.count:
            raise ShapeError(
                f"patch {patch.name!r}: {patch.cloud.count} x ratio {model.ratio} "
                f"!= {patch.gt.count} ground-truth points"
            )
        pred = model.upsample(patch.cloud)
        reports.append(metrics.report(patch.name, pred, patch.gt, patch.mesh))
    p2f_values = [r.p2f for r in reports]
    reports.append(
        metrics.MetricReport(
            label="mean",
            cd=float(np.mean([r.cd for r in reports])),
            hd=float(np.mean([r.hd for r in reports])),
            p2f=None if any(v is None for v in p2f_values) else float(np.mean(p2f_values)),
            pred_count=int(sum(r.pred_count for r in reports)),
            gt_count=int(sum(r.gt_count for r in reports)),
        )
    )
    return reports


def model_to_checkpoint(model):
    """Checkpoint payload: spec fields plus float32 parameters in store order."""
    from .dataio import Checkpoint

    spec = model.unit_spec
    fields = {
        "unit.kind": spec.kind,
        "unit.ratio": str(spec.ratio),
        "unit.channels": str(spec.channels),
        "unit.k": "none" if spec.k is None else str(spec.k),
        "unit.index_mode": spec.index_mode,
        "unit.regression_mode": spec.regression_mode,
        "unit.edge_hidden": ",".join(str(h) for h in spec.edge_hidden),
        "backbone.kind": model.backbone_spec.kind,
        "backbone.depth": str(model.backbone_spec.depth),
        "backbone.width": str(model.backbone_spec.width),
        "model.k": str(model.k),
    }
    params = [(p.name, p.data.astype("<f4")) for p in model.store]
    return Checkpoint(fields, params)


def model_from_checkpoint(ckpt):
    """Rebuild a model from a checkpoint, validating spec/parameter agreement."""
    from .errors import FormatError

    fields = ckpt.fields
    required = ("unit.kind", "unit.ratio", "unit.channels", "backbone.kind", "model.k")
    for key in required:
        if key not in fields:
            raise FormatError(f"checkpoint is missing spec field {key!r}")
    try:
        unit_spec = ExpansionSpec(
            kind=fields["unit.kind"],
            ratio=int(fields["unit.ratio"]),
            channels=int(fields["unit.channels"]),
            k=None if fields.get("unit.k", "none") == "none" else int(fields["unit.k"]),
            index_mode=fields.get("unit.index_mode", "expand"),
            regression_mode=fields.get("unit.regression_mode") or None,
            edge_hidden=tuple(
                int(h) for h in fields.get("unit.edge_hidden", "").split(",") if h
            ),
        )
        backbone_spec = BackboneSpec(
            kind=fields["backbone.kind"],
            depth=int(fields.get("backbone.depth", 2)),
            width=int(fields.get("backbone.width", unit_spec.channels)),
        )
        model = UpsamplingModel(unit_spec, backbone_spec, int(fields["model.k"]), np.random.default_rng(0))
    except (ConfigError, ValueError) as exc:
        raise FormatError(f"checkpoint spec block is invalid: {exc}") from exc
    stored = dict(ckpt.params)
    expected = model.store.names()
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise FormatError(f"checkpoint parameters do not match spec (missing {missing}, extra {extra})")
    for p in model.store:
        values = stored[p.name]
        if tuple(values.shape) != tuple(p.data.shape):
            raise FormatError(
                f"parameter {p.name!r} has shape {tuple(values.shape)}, expected {tuple(p.data.shape)}"
            )
        p.tensor.data[:] = values.astype(np.float64)
    return model


@dataclasses.dataclass
class ComparisonRow:
    unit: str
    index_mode: str
    regression_mode: str
    cd: float
    hd: float
    p2f: float | None
    unit_params: int
    backbone_params: int
    seeds: int


@dataclasses.dataclass
class ComparisonTable:
    rows: list
    steps: int
    points: int
    ratio: int
    backbone: BackboneSpec
    shapes: tuple


def compare_units(configs, seeds=(1, 2, 3)):
    """Train every config over the shared dataset and seed set, then average.

    Configs must agree on everything except the unit (budget fairness);
    otherwise the comparison is refused.
    """
    if not configs:
        raise ConfigError("no configurations to compare")
    if not seeds:
        raise ConfigError("need at least one seed")
    ref = configs[0]
    for cfg in configs[1:]:
        if cfg.budget_key() != ref.budget_key():
            raise ConfigError(
                "mismatched budgets: all configs must share backbone, steps, optimizer, "
                "ratio, and dataset settings"
            )
    dataset = make_dataset(ref)
    rows = []
    backbone_counts = set()
    for cfg in configs:
        cds, hds, p2fs = [], [], []
        counts = None
        for seed in seeds:
            run = train(dataclasses.replace(cfg, seed=int(seed)), dataset)
            agg = evaluate(run.model, dataset)[-1]
            cds.append(agg.cd)
            hds.append(agg.hd)
            p2fs.append(agg.p2f)
            counts = run.model.parameter_counts()
        backbone_counts.add(counts["backbone"])
        rows.append(
            ComparisonRow(
                unit=cfg.unit.kind,
                # only the progressive unit consumes a high-power index
                index_mode=cfg.unit.index_mode if cfg.unit.kind == "proedgeshuffle" else "-",
                regression_mode=cfg.unit.regression_mode,
                cd=float(np.mean(cds)),
                hd=float(np.mean(hds)),
                p2f=None if any(v is None for v in p2fs) else float(np.mean(p2fs)),
                unit_params=counts["unit"],
                backbone_params=counts["backbone"],
                seeds=len(seeds),
            )
        )
    if len(backbone_counts) > 1:
        raise ConfigError(f"backbone parameter counts differ across configs: {backbone_counts}")
    return ComparisonTable(
        rows=rows,
        steps=ref.steps,
        points=ref.points,
        ratio=ref.unit.ratio,
        backbone=ref.backbone,
        shapes=ref.shapes,
    )
