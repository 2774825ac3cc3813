import numpy as np
import pytest

from tritask import tensor as T
from tritask.tensor import Tensor
from tritask.gradcheck import grad_check


def leaf(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, shape), requires_grad=True)


def test_linear_function_is_exact():
    x = Tensor(np.random.default_rng(0).random(6), requires_grad=True)
    report = grad_check(lambda: x.mean(), {"x": x})
    assert report.max_rel_err <= 1e-9


def test_requires_grad_enforced():
    x = Tensor(np.ones(3))
    with pytest.raises(ValueError, match="does not require grad"):
        grad_check(lambda: x.sum(), {"x": x})


def test_scalar_output_enforced():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        grad_check(lambda: x * 2.0, {"x": x})


CASES = {}


def case(name):
    def deco(fn):
        CASES[name] = fn
        return fn
    return deco


@case("add")
def _add(rng):
    a, b = leaf(rng, (3, 4)), leaf(rng, (3, 4))
    return lambda: (a + b).sigmoid().sum(), {"a": a, "b": b}


@case("sub")
def _sub(rng):
    a, b = leaf(rng, (3, 4)), leaf(rng, (3, 4))
    return lambda: (a - b).sigmoid().sum(), {"a": a, "b": b}


@case("mul")
def _mul(rng):
    a, b = leaf(rng, (3, 4)), leaf(rng, (3, 4))
    return lambda: (a * b).sum(), {"a": a, "b": b}


@case("div")
def _div(rng):
    a = leaf(rng, (3, 4))
    b = leaf(rng, (3, 4), lo=0.5, hi=1.5)
    return lambda: (a / b).sum(), {"a": a, "b": b}


@case("bias_broadcast")
def _broadcast(rng):
    a = leaf(rng, (4, 5, 5))
    b = leaf(rng, (4, 1, 1))
    return lambda: ((a + b) * 1.5).sigmoid().mean(), {"a": a, "b": b}


@case("relu")
def _relu(rng):
    a = leaf(rng, (4, 4))
    a.data[np.abs(a.data) < 1e-3] += 0.1  # stay away from the kink
    return lambda: (a.relu() * a.relu()).sum(), {"a": a}


@case("sigmoid")
def _sigmoid(rng):
    a = leaf(rng, (4, 4), lo=-3, hi=3)
    return lambda: a.sigmoid().sum(), {"a": a}


@case("exp")
def _exp(rng):
    a = leaf(rng, (3, 3))
    return lambda: a.exp().mean(), {"a": a}


@case("log")
def _log(rng):
    a = leaf(rng, (3, 3), lo=0.2, hi=2.0)
    return lambda: a.log().sum(), {"a": a}


@case("abs")
def _abs(rng):
    a = leaf(rng, (4, 4))
    a.data[np.abs(a.data) < 1e-3] += 0.1
    return lambda: a.abs().sum(), {"a": a}


@case("clamp")
def _clamp(rng):
    a = leaf(rng, (5, 5), lo=-2, hi=2)
    a.data[np.abs(np.abs(a.data) - 1.0) < 1e-3] *= 0.9  # avoid the clamp edges
    return lambda: (a.clamp(-1.0, 1.0) * a.clamp(-1.0, 1.0)).sum(), {"a": a}


@case("mean")
def _mean(rng):
    a = leaf(rng, (6,))
    return lambda: (a * a).mean(), {"a": a}


@case("concat")
def _concat(rng):
    a, b = leaf(rng, (2, 3)), leaf(rng, (2, 3))
    return lambda: T.concat([a, b], axis=0).sigmoid().sum(), {"a": a, "b": b}


@case("reshape_permute")
def _reshape(rng):
    a = leaf(rng, (2, 3, 4))
    return lambda: (a.permute(2, 0, 1).reshape(4, 6).sigmoid()).sum(), {"a": a}


@case("matmul")
def _matmul(rng):
    a, b = leaf(rng, (3, 4)), leaf(rng, (4, 2))
    return lambda: T.matmul(a, b).sigmoid().sum(), {"a": a, "b": b}


@case("softmax")
def _softmax(rng):
    a = leaf(rng, (3, 5), lo=-2, hi=2)
    w = Tensor(rng.random((3, 5)))
    return lambda: (T.softmax(a, axis=1) * w).sum(), {"a": a}


@case("conv2d")
def _conv2d(rng):
    x = leaf(rng, (2, 5, 5))
    w = leaf(rng, (3, 2, 3, 3), lo=-0.5, hi=0.5)
    b = leaf(rng, (3,))
    return lambda: T.conv2d(x, w, b, stride=1, pad=1).sigmoid().sum(), {"x": x, "w": w, "b": b}


@case("conv2d_strided")
def _conv2d_strided(rng):
    x = leaf(rng, (2, 6, 6))
    w = leaf(rng, (2, 2, 2, 2), lo=-0.5, hi=0.5)
    return lambda: T.conv2d(x, w, None, stride=2, pad=0).sum(), {"x": x, "w": w}


@case("avgpool")
def _avgpool(rng):
    x = leaf(rng, (2, 5, 5))
    return lambda: (T.avgpool(x, 3, 1, 1) * T.avgpool(x, 3, 1, 1)).sum(), {"x": x}


@case("resize_bilinear_up")
def _resize_up(rng):
    x = leaf(rng, (2, 3, 3))
    return lambda: (T.resize_bilinear(x, 6, 6).sigmoid()).sum(), {"x": x}


@case("resize_bilinear_general")
def _resize_gen(rng):
    x = leaf(rng, (1, 4, 5))
    return lambda: (T.resize_bilinear(x, 7, 3).sigmoid()).sum(), {"x": x}


@case("dynamic_filter")
def _dynfilter(rng):
    x = leaf(rng, (4, 4, 4))
    f = leaf(rng, (2, 4, 4, 3, 3), lo=-0.5, hi=0.5)
    return lambda: T.dynamic_filter(x, f).sigmoid().sum(), {"x": x, "f": f}


@pytest.mark.parametrize("name", sorted(CASES))
def test_op_gradients_match_finite_differences(name):
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        f, leaves = CASES[name](rng)
        report = grad_check(f, leaves, h=1e-5, tol=1e-4)
        assert report.passed, f"{name} seed {seed}:\n{report}"


def test_composite_conv_relu_mean():
    rng = np.random.default_rng(42)
    x = leaf(rng, (2, 6, 6))
    w = leaf(rng, (3, 2, 3, 3), lo=-0.5, hi=0.5)
    b = leaf(rng, (3,))

    def f():
        return T.conv2d(x, w, b, stride=1, pad=1).relu().mean()

    report = grad_check(f, {"x": x, "w": w, "b": b}, h=1e-5, tol=1e-4)
    assert report.passed, str(report)


def test_l1_style_loss_gradcheck():
    rng = np.random.default_rng(43)
    p = leaf(rng, (1, 5, 5), lo=0.1, hi=0.9)
    g = Tensor(rng.random((1, 5, 5)))

    def f():
        return (p - g).abs().mean()

    report = grad_check(f, {"p": p}, h=1e-5, tol=1e-4)
    assert report.passed, str(report)


def test_sampled_entries_cap():
    rng = np.random.default_rng(44)
    x = leaf(rng, (10, 10))
    report = grad_check(lambda: (x * x).sum(), {"x": x}, max_entries=7)
    assert report.passed
