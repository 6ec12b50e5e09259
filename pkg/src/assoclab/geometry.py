"""Rectangular windows and finite point configurations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Window:
    """Half-open axis-aligned box ``[lo_1, hi_1) x ... x [lo_d, hi_d)``."""

    bounds: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise ValueError("window needs at least one axis")
        for lo, hi in bounds:
            if not hi > lo:
                raise ValueError(f"degenerate axis [{lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def unit(cls, dimension: int) -> "Window":
        return cls(tuple((0.0, 1.0) for _ in range(dimension)))

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds])

    @property
    def widths(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = self.lows
        hi = lo + self.widths
        return ((pts >= lo) & (pts < hi)).all(axis=1)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random((n, self.dimension))
        return self.lows + u * self.widths


class PointConfiguration:
    """Finite list of points in a window with optional nonnegative weights.

    A missing weight vector means unit weight per point. The configuration
    is a realisation of a random measure: its mass on a region is the sum
    of the weights of the atoms inside.
    """

    __slots__ = ("window", "points", "weights", "metadata")

    def __init__(self, window: Window, points, weights=None, metadata=None):
        points = np.asarray(points, dtype=float).reshape(-1, window.dimension).copy()
        if len(points) and not window.contains(points).all():
            raise ValueError("points outside the window")
        if weights is not None:
            weights = np.asarray(weights, dtype=float).reshape(-1).copy()
            if weights.shape[0] != points.shape[0]:
                raise ValueError("one weight per point required")
            if (weights < 0).any():
                raise ValueError("negative weights")
            weights.setflags(write=False)
        points.setflags(write=False)
        self.window = window
        self.points = points
        self.weights = weights
        self.metadata = dict(metadata or {})

    @classmethod
    def empty(cls, window: Window, metadata=None) -> "PointConfiguration":
        return cls(window, np.empty((0, window.dimension)), metadata=metadata)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def effective_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n_points)
        return self.weights

    @property
    def total_mass(self) -> float:
        return float(self.effective_weights().sum())

    def scaled(self, factor: float) -> "PointConfiguration":
        if factor < 0:
            raise ValueError("negative scale factor")
        return PointConfiguration(
            self.window, self.points, self.effective_weights() * factor, self.metadata
        )

    def __repr__(self):
        w = "" if self.weights is None else ", weighted"
        return f"PointConfiguration({self.n_points} points{w})"
