"""Step functions, cumulative-sum diagrams and greatest convex minorants.

Everything here is shared by the finite-sample estimators and by the
limit-process simulation: an estimator component is a right-continuous
:class:`StepFunction`, and the slopes of a convex minorant are computed either
from a lower hull (:func:`convex_minorant`) or by pooling adjacent violators
(:func:`pava`).
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .exceptions import DomainError, InvalidInputError


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function.

    ``f(t)`` is the level of the largest knot ``<= t`` and ``left_value`` for
    ``t`` below the first knot.
    """

    knots: np.ndarray
    levels: np.ndarray
    left_value: float = 0.0

    def __post_init__(self):
        knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        levels = np.atleast_1d(np.asarray(self.levels, dtype=float))
        if knots.shape != levels.shape or knots.ndim != 1:
            raise InvalidInputError("knots and levels must be 1-d arrays of equal length")
        if np.any(np.diff(knots) <= 0):
            raise InvalidInputError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "left_value", float(self.left_value))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right") - 1
        vals = np.where(idx >= 0, self.levels[np.maximum(idx, 0)] if self.levels.size else 0.0,
                        self.left_value)
        return vals if vals.ndim else float(vals)

    def left_limit(self, t):
        """Value of ``f(t-)``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="left") - 1
        vals = np.where(idx >= 0, self.levels[np.maximum(idx, 0)] if self.levels.size else 0.0,
                        self.left_value)
        return vals if vals.ndim else float(vals)

    @property
    def final_value(self):
        return float(self.levels[-1]) if self.levels.size else self.left_value

    def is_monotone(self, tol=0.0):
        if not self.levels.size:
            return True
        return bool(self.levels[0] >= self.left_value - tol and np.all(np.diff(self.levels) >= -tol))

    def jumps(self):
        """Knots where the level changes, with the jump sizes."""
        prev = np.concatenate(([self.left_value], self.levels[:-1]))
        size = self.levels - prev
        keep = size != 0
        return self.knots[keep], size[keep]

    def compress(self):
        """Equivalent step function keeping only knots where the level changes."""
        t, _ = self.jumps()
        return StepFunction(t, self(t), self.left_value)

    @classmethod
    def constant(cls, value):
        return cls(np.empty(0), np.empty(0), value)


@dataclass(frozen=True)
class Diagram:
    """Ordered point set; used for cusum diagrams and sampled paths."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise InvalidInputError("x and y must be 1-d arrays of equal length")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("diagram x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1])

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous polygon through ``vertices`` (x strictly increasing)."""

    x: np.ndarray
    y: np.ndarray
    vertex_index: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    @property
    def vertices(self):
        return np.column_stack([self.x, self.y])

    @property
    def slopes(self):
        return np.diff(self.y) / np.diff(self.x)

    def __call__(self, t):
        return np.interp(t, self.x, self.y)

    def is_convex(self, tol=1e-12):
        return bool(np.all(np.diff(self.slopes) >= -tol))


def cusum(y, w=None):
    """Cumulative-sum diagram ``(sum w, sum w*y)`` starting at the origin."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    return Diagram(np.concatenate(([0.0], np.cumsum(w))),
                   np.concatenate(([0.0], np.cumsum(w * y))))


def convex_minorant(d):
    """Greatest convex minorant of the polygon through the points of ``d``.

    Its vertices are the lower convex hull of the points, found by one
    monotone-chain sweep.
    """
    if not isinstance(d, Diagram):
        d = Diagram.from_points(d)
    if len(d) < 2:
        raise InvalidInputError("convex minorant needs at least two points")
    idx = kernels.lower_hull_indices(d.x, d.y)
    return PiecewiseLinear(d.x[idx], d.y[idx], idx)


def right_slopes(p, at):
    """Right derivative of the polygon ``p`` at each query point.

    Queries must lie in ``[x_first, x_last]``; at ``x_last`` the slope of the
    final segment is returned.
    """
    at = np.asarray(at, dtype=float)
    if p.x.size < 2:
        raise DomainError("polygon has no segments")
    if np.any(at < p.x[0]) or np.any(at > p.x[-1]):
        raise DomainError("slope query outside the minorant's domain")
    seg = np.searchsorted(p.x, at, side="right") - 1
    seg = np.minimum(seg, p.x.size - 2)
    return p.slopes[seg]


def minorant_on_grid(x, y):
    """Values and right slopes of the convex minorant at every point of ``x``.

    The slope at the last point repeats the final segment's slope.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    idx = kernels.lower_hull_indices(x, y)
    vx, vy = x[idx], y[idx]
    values = np.interp(x, vx, vy)
    seg_slopes = np.diff(vy) / np.diff(vx)
    seg = np.minimum(np.searchsorted(vx, x, side="right") - 1, vx.size - 2)
    return values, seg_slopes[seg], idx


def pava(y, w=None):
    """Weighted isotonic (nondecreasing) least-squares regression."""
    y = np.ascontiguousarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise InvalidInputError("pava needs a non-empty 1-d sequence")
    w = np.ones_like(y) if w is None else np.ascontiguousarray(w, dtype=float)
    if w.shape != y.shape:
        raise InvalidInputError("y and w must have equal length")
    if np.any(~(w > 0)):
        raise InvalidInputError("weights must be positive")
    return kernels.pava(y, w)
