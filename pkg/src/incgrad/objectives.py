"""Finite-sum composite objectives over linear predictors.

The smooth part is an average of per-point terms

    f(x) = (1/n) sum_i f_i(x),    f_i(x) = psi_i(a_i' x) + (split_l2/2) |x|^2,

where ``psi_i`` is a scalar loss tied to label b_i.  A nonsmooth (or
simply separate) regulariser h enters through its proximal operator,
giving the full objective F = f + h.  Folding an L2 term into every
f_i via ``split_l2`` makes each component strongly convex, which is
what the linear-rate solvers rely on; keeping it in h instead leaves
the components merely convex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cscmat import CscMatrix
from .errors import ConfigError, ProxSolveError


def sigmoid(u):
    """Numerically stable logistic function, elementwise."""
    u = np.asarray(u, dtype=float)
    e = np.exp(-np.abs(u))
    return np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


class Dataset:
    """n labelled points in d dimensions, one CSC column per point."""

    def __init__(self, features: CscMatrix, labels):
        labels = np.ascontiguousarray(labels, dtype=np.float64)
        if labels.ndim != 1 or labels.shape[0] != features.ncols:
            raise ConfigError("labels must be a vector with one entry per point")
        self.features = features
        self.labels = labels
        self._dense = None
        self._sqnorms = None

    @classmethod
    def from_dense(cls, points, labels) -> "Dataset":
        """Build from a dense (n, d) row-per-point array."""
        points = np.asarray(points, dtype=np.float64)
        return cls(CscMatrix.from_dense(points.T), labels)

    @property
    def n(self) -> int:
        return self.features.ncols

    @property
    def d(self) -> int:
        return self.features.nrows

    def point(self, i):
        """(coordinate indices, values) of point i."""
        return self.features.column(i)

    def dense_points(self) -> np.ndarray:
        """Dense (n, d) array of the points, cached."""
        if self._dense is None:
            self._dense = np.ascontiguousarray(self.features.to_dense().T)
        return self._dense

    def sqnorms(self) -> np.ndarray:
        if self._sqnorms is None:
            self._sqnorms = self.features.col_sqnorms()
        return self._sqnorms


class LossModel:
    """Scalar loss psi_i(t) on the margin t = a_i' x, with label b_i."""

    kind = "abstract"
    curvature_bound = float("nan")

    def value(self, t, b):
        raise NotImplementedError

    def deriv(self, t, b):
        raise NotImplementedError

    def deriv_scalar(self, t: float, b: float) -> float:
        return float(self.deriv(t, b))

    def check_labels(self, labels):
        pass


class SquaredLoss(LossModel):
    kind = "squared"
    curvature_bound = 1.0

    def value(self, t, b):
        r = np.asarray(t, float) - b
        return 0.5 * r * r

    def deriv(self, t, b):
        return np.asarray(t, float) - b

    def deriv_scalar(self, t, b):
        return t - b


class LogisticLoss(LossModel):
    kind = "logistic"
    curvature_bound = 0.25

    def value(self, t, b):
        return np.logaddexp(0.0, -b * np.asarray(t, float))

    def deriv(self, t, b):
        return -b * sigmoid(-b * np.asarray(t, float))

    def deriv_scalar(self, t, b):
        u = -b * t
        if u >= 0:
            return -b / (1.0 + math.exp(-u))
        e = math.exp(u)
        return -b * e / (1.0 + e)

    def check_labels(self, labels):
        if not np.all(np.abs(labels) == 1.0):
            raise ConfigError("logistic loss requires labels in {-1, +1}")


_LOSSES = {"squared": SquaredLoss, "logistic": LogisticLoss}


def make_loss(kind: str) -> LossModel:
    try:
        return _LOSSES[kind]()
    except KeyError:
        raise ConfigError(f"unknown loss kind {kind!r}") from None


@dataclass(frozen=True)
class Regularizer:
    """Closed-form-prox regulariser: (l2/2)|x|^2 + l1*|x|_1.

    Both strengths zero means no regulariser; one of them zero gives the
    plain L2 / L1 cases, both positive the elastic combination.
    """

    l2: float = 0.0
    l1: float = 0.0

    def __post_init__(self):
        if self.l2 < 0 or self.l1 < 0:
            raise ConfigError("regulariser strengths must be nonnegative")

    @property
    def kind(self) -> str:
        if self.l1 == 0 and self.l2 == 0:
            return "none"
        if self.l1 == 0:
            return "l2"
        if self.l2 == 0:
            return "l1"
        return "elastic"

    def value(self, x):
        x = np.asarray(x, float)
        out = 0.0
        if self.l2:
            out += 0.5 * self.l2 * float(np.sum(x * x))
        if self.l1:
            out += self.l1 * float(np.sum(np.abs(x)))
        return out

    def prox(self, gamma: float, y):
        """argmin_x h(x) + |x - y|^2 / (2 gamma), elementwise.

        Soft-threshold for the L1 part, multiplicative shrinkage for the
        L2 part; the two compose in that order for the elastic case.
        """
        if gamma <= 0:
            raise ValueError("prox step weight gamma must be positive")
        y = np.asarray(y, float)
        if self.kind == "none":
            return y
        out = y
        if self.l1:
            thr = gamma * self.l1
            out = np.sign(out) * np.maximum(np.abs(out) - thr, 0.0)
        if self.l2:
            out = out / (1.0 + gamma * self.l2)
        return out


@dataclass(frozen=True)
class ProblemConstants:
    """Component-level smoothness/strong-convexity constants."""

    n: int
    d: int
    L: float
    mu: float

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("need n >= 1 and d >= 1")
        if not (self.L >= self.mu >= 0):
            raise ConfigError(f"need L >= mu >= 0, got L={self.L}, mu={self.mu}")
        if self.L <= 0:
            raise ConfigError("L must be positive (no valid step size otherwise)")


class FiniteSumObjective:
    """Dataset + loss + optional split-in L2 term + prox regulariser."""

    def __init__(self, dataset: Dataset, loss: LossModel, split_l2: float = 0.0,
                 reg: Regularizer | None = None):
        if split_l2 < 0:
            raise ConfigError("split_l2 must be nonnegative")
        loss.check_labels(dataset.labels)
        self.dataset = dataset
        self.loss = loss
        self.split_l2 = float(split_l2)
        self.reg = reg if reg is not None else Regularizer()

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    @property
    def points(self) -> np.ndarray:
        return self.dataset.dense_points()

    @property
    def labels(self) -> np.ndarray:
        return self.dataset.labels

    # -- smooth part -------------------------------------------------

    def margins(self, x) -> np.ndarray:
        return self.points @ x

    def loss_coeffs(self, x) -> np.ndarray:
        """psi_i'(a_i' x) for every i; the scalar gradient weights."""
        return self.loss.deriv(self.margins(x), self.labels)

    def smooth_value(self, x) -> float:
        x = np.asarray(x, float)
        val = float(np.mean(self.loss.value(self.margins(x), self.labels)))
        if self.split_l2:
            val += 0.5 * self.split_l2 * float(x @ x)
        return val

    def value(self, x, composite: bool = False) -> float:
        """f(x), or F(x) = f(x) + h(x) when composite is set."""
        out = self.smooth_value(x)
        if composite:
            out += self.reg.value(x)
        return out

    def full_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        g = (self.points.T @ self.loss_coeffs(x)) / self.n
        if self.split_l2:
            g = g + self.split_l2 * x
        return g

    def component_value(self, i: int, x) -> float:
        self._check_index(i)
        x = np.asarray(x, float)
        t = float(self.points[i] @ x)
        val = float(self.loss.value(t, self.labels[i]))
        if self.split_l2:
            val += 0.5 * self.split_l2 * float(x @ x)
        return val

    def component_gradient(self, i: int, x) -> np.ndarray:
        """f_i'(x) = psi_i'(a_i' x) a_i + split_l2 * x."""
        self._check_index(i)
        x = np.asarray(x, float)
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        a = self.points[i]
        c = self.loss.deriv_scalar(float(a @ x), self.labels[i])
        g = c * a
        if self.split_l2:
            g = g + self.split_l2 * x
        return g

    def _check_index(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"component index {i} out of range [0, {self.n})")

    # -- batched forms used by the analysis kit ----------------------

    def component_values(self, x) -> np.ndarray:
        """Vector of f_i(x) for all i at a common point."""
        x = np.asarray(x, float)
        vals = self.loss.value(self.margins(x), self.labels)
        if self.split_l2:
            vals = vals + 0.5 * self.split_l2 * float(x @ x)
        return vals

    def component_gradients(self, x) -> np.ndarray:
        """(n, d) matrix whose row i is f_i'(x)."""
        x = np.asarray(x, float)
        g = self.loss_coeffs(x)[:, None] * self.points
        if self.split_l2:
            g = g + self.split_l2 * x
        return g

    def values_at_points(self, phi) -> np.ndarray:
        """f_i(phi_i) for a separate point per component; phi is (n, d)."""
        phi = np.asarray(phi, float)
        t = np.einsum("ij,ij->i", self.points, phi)
        vals = self.loss.value(t, self.labels)
        if self.split_l2:
            vals = vals + 0.5 * self.split_l2 * np.einsum("ij,ij->i", phi, phi)
        return vals

    def gradients_at_points(self, phi) -> np.ndarray:
        """(n, d) matrix whose row i is f_i'(phi_i)."""
        phi = np.asarray(phi, float)
        t = np.einsum("ij,ij->i", self.points, phi)
        g = self.loss.deriv(t, self.labels)[:, None] * self.points
        if self.split_l2:
            g = g + self.split_l2 * phi
        return g


def estimate_constants(obj: FiniteSumObjective) -> ProblemConstants:
    """Exact component constants for the supported losses.

    L is the worst-case component smoothness max_i kappa * |a_i|^2
    plus the split-in L2 strength; the only strong convexity certified
    at the component level is the split-in term itself.
    """
    sq = obj.dataset.sqnorms()
    L = float(obj.loss.curvature_bound * sq.max()) + obj.split_l2
    mu = obj.split_l2
    if L <= 0:
        raise ConfigError("estimated L is zero; no valid step size exists")
    return ProblemConstants(n=obj.n, d=obj.d, L=L, mu=mu)


def scalar_loss_prox(obj: FiniteSumObjective, i: int, gamma: float, z,
                     tol: float = 1e-12, max_iter: int = 100):
    """Proximal step on a single component f_i.

    Solves phi = argmin_x f_i(x) + |x - z|^2 / (2 gamma) by reducing to
    the margin t = a_i' phi: the minimiser moves from z only along a_i
    (after the uniform shrink from any split-in L2 term), so t solves

        (1 + gamma*split) t + gamma |a_i|^2 psi_i'(t) = a_i' z.

    Squared loss gives t in closed form; logistic uses safeguarded
    Newton with a bisection fallback on a bracket that is guaranteed to
    contain the root.  Returns (phi, stored_gradient) where
    stored_gradient = (z - phi)/gamma = f_i'(phi).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    obj._check_index(i)
    z = np.asarray(z, float)
    a = obj.points[i]
    b = float(obj.labels[i])
    q = float(obj.dataset.sqnorms()[i])
    sig = obj.split_l2
    az = float(a @ z)
    shrink = 1.0 + gamma * sig

    if obj.loss.kind == "squared":
        t = (az + gamma * q * b) / (shrink + gamma * q)
    else:
        t = _solve_margin(obj.loss, b, shrink, gamma * q, az, tol, max_iter)

    coef = obj.loss.deriv_scalar(t, b)
    phi = (z - gamma * coef * a) / shrink
    stored = (z - phi) / gamma
    return phi, stored


def _solve_margin(loss, b, shrink, gq, az, tol, max_iter):
    """Root of g(t) = shrink*t + gq*psi'(t) - az, strictly increasing."""
    if gq == 0.0:
        return az / shrink
    # |psi'| <= 1 for logistic, so the root lies in this bracket
    lo = (az - gq) / shrink
    hi = (az + gq) / shrink
    t = az / shrink
    for it in range(max_iter):
        s = sigmoid(np.array(-b * t))
        g = shrink * t + gq * (-b * float(s)) - az
        if abs(g) <= tol:
            return t
        if g > 0:
            hi = t
        else:
            lo = t
        dg = shrink + gq * float(s) * (1.0 - float(s))
        t_new = t - g / dg
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        t = t_new
    s = sigmoid(np.array(-b * t))
    g = shrink * t + gq * (-b * float(s)) - az
    if abs(g) <= tol:
        return t
    raise ProxSolveError(residual=abs(g), iterations=max_iter)
