import numpy as np
import pytest

from incgrad import (
    Dataset,
    FiniteSumObjective,
    ProblemConstants,
    Regularizer,
    make_loss,
)


@pytest.fixture
def two_quadratics():
    """n=2, d=1: components (x-1)^2/2 and (x+1)^2/2.

    Each component is exactly 1-strongly convex and 1-smooth, so the
    matching constants are supplied manually.
    """
    ds = Dataset.from_dense([[1.0], [1.0]], [1.0, -1.0])
    obj = FiniteSumObjective(ds, make_loss("squared"))
    consts = ProblemConstants(n=2, d=1, L=1.0, mu=1.0)
    return obj, consts


def make_random_objective(rng, kind="squared", n=12, d=4, split=0.3, l1=0.0):
    pts = rng.standard_normal((n, d)) / np.sqrt(d)
    w = rng.standard_normal(d)
    if kind == "squared":
        labels = pts @ w + 0.2 * rng.standard_normal(n)
    else:
        labels = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    reg = Regularizer(l1=l1) if l1 else None
    return FiniteSumObjective(Dataset.from_dense(pts, labels),
                              make_loss(kind), split_l2=split, reg=reg)


def central_difference_gradient(fn, x, h=1e-6):
    """Independent finite-difference oracle for smooth gradients."""
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g
