"""Just-in-time lagged updates for sparse least squares with explicit L2.

Between two touches of a coordinate, every step would have applied the
same dense pieces of the update: a share of the stored-gradient mean
and the (1 - reg*gamma) iterate scaling.  Both can be deferred: the
scaling moves into a scalar beta (the true iterate is beta * x), and a
missed span of m mean-gradient applications collapses to the partial
geometric sum s[m] = sum_{t<m} rho^t with ratio rho = 1 - reg*gamma.
Each step then only touches the nonzero coordinates of the sampled
column: catch the touched coordinates up, take the sparse part of the
step, and account for the step's own mean-gradient share right away so
the mean can be modified afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .solvers import RunResult, _record

BETA_RENORM_THRESHOLD = 1e-280


@dataclass
class LagScalingTable:
    """Partial geometric sums s[0..K] with s[0]=0, s[1]=1."""

    entries: np.ndarray
    rho: float


def build_lag_scaling(rho: float, length: int) -> LagScalingTable:
    """Table covering lag gaps up to ``length`` (length+1 entries)."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(
            f"lag scaling ratio {rho} outside [0, 1]; is reg * gamma >= 1?")
    if length < 1:
        raise ConfigError("scaling table length must be >= 1")
    powers = rho ** np.arange(length, dtype=float)
    entries = np.concatenate(([0.0], np.cumsum(powers)))
    return LagScalingTable(entries=entries, rho=rho)


@dataclass
class LaggedIterate:
    """Scaled iterate with per-coordinate staleness counters.

    The true iterate is beta * x once all lags are flushed; ``lag[i]``
    is the step at which coordinate i was last brought current.
    """

    x: np.ndarray
    lag: np.ndarray
    beta: float = 1.0
    k: int = 0
    touches: int = 0

    @classmethod
    def zeros(cls, d: int) -> "LaggedIterate":
        return cls(x=np.zeros(d), lag=np.zeros(d, dtype=np.int64))


def lagged_update(it: LaggedIterate, g, touched, table: LagScalingTable, a: float):
    """Apply the deferred updates x[i] += s[k - lag[i]] * a * g[i] to the
    touched coordinates and mark them current."""
    gaps = it.k - it.lag[touched]
    if gaps.size and int(gaps.max()) >= table.entries.shape[0]:
        raise ConfigError(
            "lag gap exceeds the scaling table; size it to the full step budget")
    it.x[touched] += table.entries[gaps] * (a * g[touched])
    it.lag[touched] = it.k
    it.touches += int(gaps.size)


def flush_lags(it: LaggedIterate, g, table: LagScalingTable, a: float) -> np.ndarray:
    """Catch every coordinate up and return the true iterate beta * x.

    Idempotent: a second flush at the same step is a no-op since s[0]=0.
    """
    lagged_update(it, g, np.arange(it.x.shape[0]), table, a)
    return it.beta * it.x


def _renormalize(it: LaggedIterate, g, table: LagScalingTable, gamma: float):
    """Fold beta back into x.  All lags are flushed first so that no
    pending gap spans the rescaling."""
    flush_lags(it, g, table, -gamma / it.beta)
    it.x *= it.beta
    it.beta = 1.0


def sparse_saga_lstsq_epoch(data, b, it: LaggedIterate, c, g_avg, gamma, reg,
                            rng, scaling: LagScalingTable | None = None,
                            renorm_threshold: float = BETA_RENORM_THRESHOLD):
    """One pass of n lagged steps for squared loss with explicit L2.

    ``c[i]`` stores the margin a_i' (beta x) from the last visit of
    point i, so the stored gradient is (c[i] - b[i]) a_i and a single
    scalar per point suffices.  The very first pass (it.k < n on entry)
    sweeps the points in order; later passes sample uniformly from rng.
    State (it, c, g_avg) is mutated in place.
    """
    d, n = data.shape
    if reg * gamma >= 1.0:
        raise ConfigError("reg * gamma must be below 1")
    rho = 1.0 - reg * gamma
    if scaling is None:
        scaling = build_lag_scaling(rho, it.k + n)
    elif abs(scaling.rho - rho) > 1e-15:
        raise ConfigError("scaling table was built for a different reg * gamma")
    in_order = it.k < n
    for step in range(n):
        i = step if in_order else int(rng.integers(0, n))
        idx, vals = data.column(i)
        # missed updates for the touched coordinates, then the sparse step
        lagged_update(it, g_avg, idx, scaling, -gamma / it.beta)
        aix = it.beta * float(vals @ it.x[idx])
        cchange = aix - c[i]
        c[i] = aix
        it.beta *= rho
        it.x[idx] += (-cchange * gamma / it.beta) * vals
        it.touches += idx.size
        it.k += 1
        # this step's own mean-gradient share, before the mean changes
        lagged_update(it, g_avg, idx, scaling, -gamma / it.beta)
        g_avg[idx] += (cchange / n) * vals
        it.touches += idx.size
        if it.beta < renorm_threshold:
            _renormalize(it, g_avg, scaling, gamma)


def sparse_saga_lstsq_run(obj, gamma, reg, epochs, rng, x0=None, reference=None,
                          trace_every=1,
                          renorm_threshold=BETA_RENORM_THRESHOLD) -> RunResult:
    """Drive the lagged engine for several epochs, tracing flushed iterates.

    Starts from the origin (the scalar-storage initialisation c = 0 is
    exactly the gradient table at zero); a nonzero x0 is rejected.
    """
    if obj.loss.kind != "squared":
        raise ConfigError("the lazy sparse engine only covers squared loss")
    if obj.split_l2 != 0.0 or obj.reg.kind != "none":
        raise ConfigError("lazy engine expects loss-only components; "
                          "the L2 term is the explicit reg argument")
    if x0 is not None and np.any(np.asarray(x0) != 0):
        raise ConfigError("lazy engine starts at the origin")
    data = obj.dataset.features
    d, n = data.shape
    scaling = build_lag_scaling(1.0 - reg * gamma, max(1, n * epochs))
    it = LaggedIterate.zeros(d)
    c = np.zeros(n)
    # stored gradients at zero: (c_i - b_i) a_i with c = 0
    g_avg = (obj.points.T @ (-obj.labels)) / n
    evals = n * 1.0
    zeros = np.zeros(d)
    records = [_record(obj, 0, 0.0, zeros, None, reference, extra_l2=reg)]
    for ep in range(epochs):
        sparse_saga_lstsq_epoch(data, obj.labels, it, c, g_avg, gamma, reg,
                                rng, scaling, renorm_threshold)
        evals += n
        if (ep + 1) % trace_every == 0 or ep == epochs - 1:
            x_true = flush_lags(it, g_avg, scaling, -gamma / it.beta)
            records.append(_record(obj, it.k, evals, x_true, None, reference,
                                   extra_l2=reg))
    x_final = flush_lags(it, g_avg, scaling, -gamma / it.beta) if epochs \
        else zeros
    return RunResult("saga_lazy", records, x_final, None, evals)
