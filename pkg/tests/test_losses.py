import numpy as np

from puxp.autodiff import Tape, Tensor
from puxp.checks import check_gradient, finite_difference_gradient
from puxp.geometry import PointCloud
from puxp.losses import chamfer_loss
from puxp.metrics import chamfer


def test_loss_value_equals_metric_exactly():
    rng = np.random.default_rng(3)
    pred = rng.normal(size=(10, 3))
    gt = rng.normal(size=(25, 3))
    assert chamfer_loss(Tensor(pred), gt).item() == chamfer(pred, gt)


def test_zero_for_identical_clouds():
    pts = np.random.default_rng(1).normal(size=(6, 3))
    assert chamfer_loss(Tensor(pts), PointCloud(pts)).item() == 0.0


def test_gradient_matches_finite_differences_four_point_toy():
    rng = np.random.default_rng(7)
    gt = rng.normal(size=(8, 3))
    pred = rng.normal(size=(4, 3))
    result = check_gradient("chamfer_loss", lambda t: chamfer_loss(t, gt), pred)
    assert result.ok, result.detail


def test_gradient_through_matmul_regression_toy():
    # chamfer through a linear map: d loss / d features via the tape
    from puxp import autodiff as ad

    rng = np.random.default_rng(9)
    gt = rng.normal(size=(4, 3))
    w = Tensor(rng.normal(size=(5, 3)))
    feats = rng.normal(size=(4, 5))

    def loss(t):
        return chamfer_loss(ad.matmul(t, w), gt)

    analytic = None
    xt = Tensor(feats, requires_grad=True)
    with Tape() as tape:
        tape.backward(loss(xt))
    analytic = xt.grad
    estimate = finite_difference_gradient(lambda a: loss(Tensor(a)).item(), feats)
    assert np.allclose(analytic, estimate, rtol=1e-4, atol=1e-7)


def test_upstream_scale_flows_through():
    from puxp import autodiff as ad

    rng = np.random.default_rng(5)
    gt = rng.normal(size=(6, 3))
    x = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    with Tape() as tape:
        tape.backward(ad.scale(chamfer_loss(x, gt), 2.0))
    g2 = x.grad.copy()
    x.zero_grad()
    with Tape() as tape:
        tape.backward(chamfer_loss(x, gt))
    assert np.allclose(g2, 2.0 * x.grad, atol=0)
