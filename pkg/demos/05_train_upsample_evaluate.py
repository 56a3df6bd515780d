"""End to end: train a small ProEdgeShuffle upsampler, save it, reload it,
upsample a fresh cloud, and score the result.

Run: python demos/05_train_upsample_evaluate.py   (about half a minute)
"""

import tempfile
from pathlib import Path

import numpy as np

from puxp.dataio import load_checkpoint, save_checkpoint, write_xyz
from puxp.geometry import PointCloud
from puxp.metrics import report
from puxp.pipeline import (
    BackboneSpec,
    TrainConfig,
    evaluate,
    make_dataset,
    model_from_checkpoint,
    model_to_checkpoint,
    train,
)
from puxp.shapes import SyntheticShape, surface_sample
from puxp.units import ExpansionSpec

cfg = TrainConfig(
    unit=ExpansionSpec(kind="proedgeshuffle", ratio=4, channels=16, k=8),
    backbone=BackboneSpec("edgeconv_stack", depth=2, width=16),
    k=8,
    steps=400,
    lr=0.001,
    seed=1,
    shapes=("sphere", "torus"),
    points=64,
)
dataset = make_dataset(cfg)
print(f"training {cfg.unit.kind} for {cfg.steps} steps on {[p.name for p in dataset]} ...")
result = train(cfg, dataset)
print(f"chamfer loss: {result.losses[0]:.4f} -> {result.losses[-1]:.4f}")

for row in evaluate(result.model, dataset):
    p2f = "n/a" if row.p2f is None else f"{row.p2f:.4f}"
    print(f"  {row.label:10s} cd={row.cd:.4f} hd={row.hd:.4f} p2f={p2f}")

# --- checkpoint round trip ---------------------------------------------------
workdir = Path(tempfile.mkdtemp(prefix="puxp-demo-"))
ckpt_path = workdir / "model.puxp"
save_checkpoint(ckpt_path, model_to_checkpoint(result.model))
model = model_from_checkpoint(load_checkpoint(ckpt_path))
print(f"\nsaved and reloaded checkpoint ({ckpt_path.stat().st_size} bytes)")

# --- upsample a cloud the model never saw ------------------------------------
fresh = PointCloud(surface_sample(SyntheticShape("sphere"), 96, np.random.default_rng(99)))
dense = model.upsample(fresh)
out_path = workdir / "dense.xyz"
write_xyz(out_path, dense)
print(f"upsampled a fresh 96-point sphere to {dense.count} points -> {out_path}")

gt = PointCloud(surface_sample(SyntheticShape("sphere"), 4 * 96, np.random.default_rng(100)))
row = report("fresh-sphere", dense, gt)
print(f"against a dense reference draw: cd={row.cd:.4f} hd={row.hd:.4f}")
