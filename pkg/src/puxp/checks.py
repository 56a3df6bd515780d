"""Property suites behind the gradcheck/knncheck commands.

Each suite returns CheckResult records so callers (CLI, tests) can decide
how to report. The gradient suite compares tape gradients against central
finite differences, the independent oracle for every differentiable path.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from . import autodiff as ad
from .autodiff import ParameterStore, Tape, Tensor
from .geometry import PointCloud, expand_index, knn_accelerated, knn_bruteforce

GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-7
FD_STEP = 1e-4


@dataclasses.dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    payload: dict | None = None  # failing case, for replay


def finite_difference_gradient(f, x, h=FD_STEP):
    """Central-difference gradient of scalar f at array x."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def gradients_match(analytic, estimate, rtol=GRAD_RTOL, atol=GRAD_ATOL):
    return bool(np.allclose(analytic, estimate, rtol=rtol, atol=atol))


def tape_gradient(build_loss, x):
    """Tape gradient of build_loss (Tensor -> scalar Tensor) at array x."""
    xt = Tensor(x, requires_grad=True)
    with Tape() as tape:
        loss = build_loss(xt)
        tape.backward(loss)
    return np.zeros_like(xt.data) if xt.grad is None else xt.grad


def check_gradient(name, build_loss, x):
    """Compare tape vs finite-difference gradients for one input array."""
    analytic = tape_gradient(build_loss, x)
    estimate = finite_difference_gradient(lambda a: build_loss(Tensor(a)).item(), x)
    ok = gradients_match(analytic, estimate)
    detail = ""
    if not ok:
        err = float(np.max(np.abs(analytic - estimate)))
        detail = f"max abs gradient error {err:.3e}"
    return CheckResult(name, ok, detail, payload=None if ok else {"input": x})


# ---------------------------------------------------------------------------
# gradient suite: core ops


def _op_cases(seed):
    rng = np.random.default_rng(seed)

    def case_matmul():
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        yield "matmul/left", lambda t: ad.sum_all(ad.matmul(t, Tensor(b))), a
        yield "matmul/right", lambda t: ad.sum_all(ad.matmul(Tensor(a), t)), b

    def case_relu():
        # keep inputs away from the kink so finite differences are clean
        x = rng.normal(size=(4, 3))
        x[np.abs(x) < 1e-2] = 0.5
        w = rng.normal(size=(3, 3))
        yield "relu", lambda t: ad.sum_all(ad.matmul(ad.relu(t), Tensor(w))), x

    def case_elementwise():
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 1))
        yield "add", lambda t: ad.sum_all(ad.matmul(ad.add(t, Tensor(b)), Tensor(w))), a
        yield "sub", lambda t: ad.sum_all(ad.matmul(ad.sub(t, Tensor(b)), Tensor(w))), a
        yield "scale", lambda t: ad.sum_all(ad.scale(t, -1.7)), a
        bias = rng.normal(size=4)
        yield "add_bias/x", lambda t: ad.sum_all(ad.add_bias(t, Tensor(bias))), a
        yield "add_bias/bias", lambda t: ad.sum_all(ad.add_bias(Tensor(a), t)), bias

    def case_concat():
        a = rng.normal(size=(4, 2))
        b = rng.normal(size=(4, 3))
        w = rng.normal(size=(5, 2))
        yield "concat_last/left", lambda t: ad.sum_all(ad.matmul(ad.concat_last(t, Tensor(b)), Tensor(w))), a
        yield "concat_last/right", lambda t: ad.sum_all(ad.matmul(ad.concat_last(Tensor(a), t), Tensor(w))), b

    def case_gather_max():
        x = rng.normal(size=(5, 3))
        idx = np.array([[1, 2], [0, 3], [4, 0], [2, 1], [0, 1]])
        w = rng.normal(size=(3, 2))

        def gather_loss(t):
            g = ad.gather_rows(t, idx)
            flat = ad.reshape(g, (10, 3))
            return ad.sum_all(ad.matmul(flat, Tensor(w)))

        yield "gather_rows", gather_loss, x

        def max_loss(t):
            g = ad.gather_rows(t, idx)
            return ad.sum_all(ad.max_over_k(g))

        yield "max_over_k", max_loss, x

    def case_shapes():
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(2, 3))
        yield "reshape", lambda t: ad.sum_all(ad.matmul(ad.reshape(t, (6, 2)), Tensor(w))), x
        yield "shuffle_expand", lambda t: ad.sum_all(ad.matmul(ad.shuffle_expand(t, 2), Tensor(w))), x

    def case_chamfer():
        from .losses import chamfer_loss

        pred = rng.normal(size=(4, 3))
        gt = rng.normal(size=(7, 3))
        yield "chamfer_loss", lambda t: chamfer_loss(t, gt), pred

    for group in (
        case_matmul,
        case_relu,
        case_elementwise,
        case_concat,
        case_gather_max,
        case_shapes,
        case_chamfer,
    ):
        yield from group()


def run_op_gradient_checks(seed=7):
    return [check_gradient(f"op/{name}", fn, x) for name, fn, x in _op_cases(seed)]


def run_unit_gradient_checks(seed=11):
    """Finite-difference check of d sum(output) / d features for all units."""
    from .units import ExpansionContext, ExpansionSpec, UNIT_KINDS, build_unit

    rng = np.random.default_rng(seed)
    n, c, k = 6, 4, 3
    cloud = PointCloud(rng.normal(size=(n, 3)))
    base = knn_bruteforce(cloud, k)
    feats = np.abs(rng.normal(size=(n, c))) + 0.1
    results = []
    for kind in UNIT_KINDS:
        spec = ExpansionSpec(kind=kind, ratio=2, channels=c, k=k)
        unit = build_unit(ParameterStore(), spec, np.random.default_rng(seed + 1))

        def loss(t, unit=unit):
            out = unit.expand(ExpansionContext(cloud, base, t))
            return ad.sum_all(out.features)

        results.append(check_gradient(f"unit/{kind}", loss, feats))
    return results


def run_gradient_checks(seed=7):
    start = time.perf_counter()
    results = run_op_gradient_checks(seed) + run_unit_gradient_checks(seed + 4)
    elapsed = time.perf_counter() - start
    results.append(CheckResult("gradient-suite-runtime", elapsed < 30.0, f"{elapsed:.2f}s"))
    return results


# ---------------------------------------------------------------------------
# KNN oracle suite


def run_knn_checks(clouds=200, seed=2024, k_choices=(4, 8, 16)):
    """kd-tree path must equal the brute-force oracle on seeded random clouds."""
    rng = np.random.default_rng(seed)
    results = []
    start = time.perf_counter()
    mismatches = 0
    first_bad = None
    for trial in range(clouds):
        n = int(rng.integers(20, 513))
        k = int(rng.choice(k_choices))
        pts = rng.normal(size=(n, 3))
        if trial % 5 == 0:
            # snapping to a coarse grid forces exact distance ties
            snapped = np.unique(np.round(pts * 2.0) / 2.0, axis=0)
            if snapped.shape[0] > k:
                pts = snapped
        cloud = PointCloud(pts)
        fast = knn_accelerated(cloud, k)
        slow = knn_bruteforce(cloud, k)
        if not np.array_equal(fast.entries, slow.entries):
            mismatches += 1
            if first_bad is None:
                first_bad = {"points": pts, "k": k, "trial": trial}
    elapsed = time.perf_counter() - start
    results.append(
        CheckResult(
            "knn/oracle-agreement",
            mismatches == 0,
            f"{mismatches} mismatching clouds out of {clouds} ({elapsed:.2f}s)",
            payload=first_bad,
        )
    )
    results.append(CheckResult("knn-suite-runtime", elapsed < 30.0, f"{elapsed:.2f}s"))

    # outlier and grid shapes exercise pruning and tie-heavy rows
    cluster = np.vstack([rng.normal(scale=0.01, size=(40, 3)), [[100.0, 100.0, 100.0]]])
    cloud = PointCloud(cluster)
    results.append(
        CheckResult(
            "knn/outlier-cluster",
            np.array_equal(knn_accelerated(cloud, 5).entries, knn_bruteforce(cloud, 5).entries),
        )
    )
    g = np.arange(4, dtype=np.float64)
    grid = np.array([[x, y, z] for x in g for y in g for z in g])
    cloud = PointCloud(grid)
    results.append(
        CheckResult(
            "knn/grid-ties",
            np.array_equal(knn_accelerated(cloud, 8).entries, knn_bruteforce(cloud, 8).entries),
        )
    )
    return results


def run_index_expansion_checks(graphs=100, seed=5):
    """Structural laws of the doubling rule on seeded random graphs."""
    rng = np.random.default_rng(seed)
    results = []
    bad = []
    for trial in range(graphs):
        n = int(rng.integers(6, 64))
        k = int(rng.integers(1, min(n - 1, 12) + 1))
        cloud = PointCloud(rng.normal(size=(n, 3)))
        idx = knn_bruteforce(cloud, k)
        big = expand_index(idx)
        ok = (
            big.rows == 2 * idx.rows
            and big.k == idx.k
            and np.all(big.entries % 2 == 0)
            and big.entries.max() < 2 * n
            and np.array_equal(big.entries[0::2], idx.entries * 2)
            and np.array_equal(big.entries[1::2], idx.entries * 2)
        )
        if not ok:
            bad.append(trial)
    results.append(
        CheckResult(
            "index-expansion/laws",
            not bad,
            f"{len(bad)} failing graphs out of {graphs}",
            payload=None if not bad else {"trials": bad},
        )
    )
    return results
