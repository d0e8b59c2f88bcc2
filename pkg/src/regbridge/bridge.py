"""Residual partial-sum bridges and the omega-squared statistic.

For a view sorted by one ordering column, the bridge is the running sum of
residuals at k/n, divided by sqrt(n * sigma2_hat).  With an intercept in
the design the residuals sum to zero, so each bridge is pinned at both
ends.  The statistic integrates the squared bridge over [0, 1], summed
across ordering columns; the integral of a piecewise-linear square has a
closed form, used here instead of any quadrature.

The module also exposes the raw building blocks used by the Monte Carlo
verification lab: the multivariate partial-sum field over lower-left
orthants and the one-coordinate cumulative sum process taken along a
sorted coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateModelError, ValidationError
from .ordering import OrderedView

__all__ = [
    "BridgeProcess",
    "residual_bridge",
    "evaluate",
    "omega_sq",
    "floor_index",
    "EmpiricalField",
    "empirical_field",
    "concomitant_sum_process",
    "write_bridge_csv",
]


def floor_index(n: int, t) -> np.ndarray:
    """Count of order statistics at or below level t: the [nt] convention.

    A small forward nudge keeps products like 0.3 * 10 from landing one
    step low through floating-point rounding.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValidationError("grid levels must lie in [0, 1]")
    return np.clip(np.floor(n * t + 1e-9).astype(int), 0, n)


@dataclass(frozen=True)
class BridgeProcess:
    """Piecewise-linear process on the nodes k/n, k = 0..n.

    `values[k]` is the process value at k/n; `values[0]` is always 0.
    `column` records the ordering column the bridge came from (-1 for
    synthetic processes built directly from node values).
    """

    values: np.ndarray
    column: int = -1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValidationError("a bridge needs at least nodes 0 and 1")
        if v[0] != 0.0:
            raise ValidationError("bridge must start at 0")
        if not np.all(np.isfinite(v)):
            raise ValidationError("bridge values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0] - 1

    def nodes(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def __call__(self, t):
        return evaluate(self, t)


def residual_bridge(view: OrderedView, sigma2_hat: float) -> BridgeProcess:
    """Normalized running sum of the view's residuals.

    Raises :class:`DegenerateModelError` when sigma2_hat <= 0 (a perfect
    fit leaves nothing to normalize by).
    """
    if view.sorted_residuals is None:
        raise ValidationError("view carries no residuals; fit the model first")
    if not sigma2_hat > 0.0:
        raise DegenerateModelError(
            f"sigma2_hat={sigma2_hat:.3e}: residual variance is zero, "
            "the statistic is undefined")
    n = view.n
    z = np.empty(n + 1)
    z[0] = 0.0
    np.cumsum(view.sorted_residuals, out=z[1:])
    z /= math.sqrt(n * sigma2_hat)
    z[0] = 0.0
    return BridgeProcess(z, column=view.column)


def evaluate(bridge: BridgeProcess, t):
    """Linear interpolation of the bridge at t in [0, 1] (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValidationError("evaluation points must lie in [0, 1]")
    out = np.interp(t_arr, bridge.nodes(), bridge.values)
    return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def omega_sq(bridges) -> float:
    """Sum over bridges of the exact integral of the squared process.

    For each linear segment from a to b over width 1/n the integral of the
    square is (a*a + a*b + b*b) / (3n); summing segments is exact up to
    roundoff, so no quadrature error enters the statistic.
    """
    bridges = tuple(bridges)
    if not bridges:
        raise ValidationError("need at least one bridge")
    n = bridges[0].n
    total = 0.0
    for b in bridges:
        if b.n != n:
            raise ValidationError("all bridges must share the same n")
        a = b.values[:-1]
        c = b.values[1:]
        total += float(np.sum(a * a + a * c + c * c)) / (3.0 * n)
    return total


def write_bridge_csv(bridge: BridgeProcess, path) -> None:
    """Write the bridge nodes as CSV rows (t, value)."""
    nodes = bridge.nodes()
    with open(path, "w", newline="") as fh:
        fh.write("t,value\n")
        for t, v in zip(nodes, bridge.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


# ======================================================================
# Raw partial-sum field (verification lab building blocks)
# ======================================================================

@dataclass(frozen=True, eq=False)
class EmpiricalField:
    """Partial-sum field Q(u) = sum of Y over rows with X <= u coordinatewise."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.shape != (X.shape[0],):
            raise ValidationError("need X of shape (n, d) and Y of shape (n,)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def raw(self, u) -> float:
        u = np.asarray(u, dtype=float)
        mask = np.all(self.X <= u, axis=1)
        return float(self.Y[mask].sum())


def empirical_field(X, Y, queries, centers) -> np.ndarray:
    """Normalized field (Q(u) - n * center(u)) / sqrt(n) at many queries.

    `queries` is (q, d); `centers` supplies the centering value per query
    (the integral of the conditional mean over the query's orthant, under
    whatever law the caller is studying).
    """
    field = EmpiricalField(X, Y)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    centers = np.broadcast_to(np.asarray(centers, dtype=float), (queries.shape[0],))
    if queries.shape[1] != field.d:
        raise ValidationError("query dimension does not match X")
    # (q, n) orthant indicators resolved in one pass
    mask = np.all(field.X[None, :, :] <= queries[:, None, :], axis=2)
    raw = mask @ field.Y
    return (raw - field.n * centers) / math.sqrt(field.n)


def concomitant_sum_process(X, Y, k: int, grid) -> np.ndarray:
    """Cumulative sums of Y along coordinate k, read at grid levels.

    Rows are sorted by X[:, k] (stable) and the first [n * t] sorted Y
    values are summed and divided by sqrt(n), for each t in `grid`.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.shape != (X.shape[0],):
        raise ValidationError("need X of shape (n, d) and Y of shape (n,)")
    if not 0 <= k < X.shape[1]:
        raise ValidationError(f"coordinate {k} out of range")
    n = X.shape[0]
    order = np.argsort(X[:, k], kind="stable")
    csum = np.concatenate(([0.0], np.cumsum(Y[order])))
    idx = floor_index(n, grid)
    return csum[idx] / math.sqrt(n)
