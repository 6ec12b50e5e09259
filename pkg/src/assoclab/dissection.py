"""Dyadic dissections of a window and the count-vector map.

A dissection at depth k partitions the window into 2^(d*k) half-open dyadic
boxes enumerated lexicographically by multi-index. Mapping a configuration
to its per-box masses embeds random measures into finite nonnegative
vectors; the map is increasing, and refining the dissection is consistent
with aggregation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import Window

DEPTH_CAP = 20


@dataclass(frozen=True)
class DyadicBox:
    """One cell of a depth-k dyadic partition, addressed by multi-index."""

    window: Window
    depth: int
    index: tuple

    def __post_init__(self):
        if len(self.index) != self.window.dimension:
            raise ValueError("multi-index dimension mismatch")
        cells = 1 << self.depth
        if any(not 0 <= i < cells for i in self.index):
            raise ValueError("multi-index outside the partition")
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def bounds(self) -> tuple:
        cells = 1 << self.depth
        out = []
        for (lo, hi), i in zip(self.window.bounds, self.index):
            w = (hi - lo) / cells
            out.append((lo + i * w, lo + (i + 1) * w))
        return tuple(out)

    @property
    def volume(self) -> float:
        return self.window.volume / (1 << (self.depth * self.window.dimension))


@dataclass(frozen=True)
class Dissection:
    """Ordered family of same-depth dyadic boxes partitioning the window."""

    window: Window
    depth: int
    boxes: tuple

    @property
    def n_boxes(self) -> int:
        return len(self.boxes)


def dyadic_dissection(window: Window, depth: int, cap: int = DEPTH_CAP) -> Dissection:
    """All 2^(d*depth) dyadic boxes of the window, lexicographic in multi-index."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > cap:
        raise ValueError(f"dissection depth capped at {cap}, got {depth}")
    cells = 1 << depth
    boxes = tuple(
        DyadicBox(window, depth, idx)
        for idx in itertools.product(range(cells), repeat=window.dimension)
    )
    return Dissection(window, depth, boxes)


def box_indices(points: np.ndarray, window: Window, depth: int) -> np.ndarray:
    """Flat lexicographic box index of each point at the given depth.

    Uses a single fractional coordinate per axis so indices at consecutive
    depths agree exactly under integer halving.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cells = 1 << depth
    frac = (pts - window.lows) / window.widths
    axis_idx = np.floor(frac * cells).astype(np.int64)
    np.clip(axis_idx, 0, cells - 1, out=axis_idx)
    flat = np.zeros(len(pts), dtype=np.int64)
    for a in range(window.dimension):
        flat = flat * cells + axis_idx[:, a]
    return flat


def gamma_counts(config, diss: Dissection) -> np.ndarray:
    """Per-box total weight of the configuration's atoms.

    Coordinate j is the mass inside box j; adding atoms never decreases
    any coordinate.
    """
    counts = np.zeros(diss.n_boxes)
    if config.n_points == 0:
        return counts
    flat = box_indices(config.points, diss.window, diss.depth)
    np.add.at(counts, flat, config.effective_weights())
    return counts


def refine(diss: Dissection, cap: int = DEPTH_CAP):
    """Depth+1 dissection plus the aggregation map from fine to coarse boxes.

    Entry j of the map lists the fine-box indices whose union is coarse
    box j; aggregating fine counts through it reproduces coarse counts
    exactly.
    """
    if diss.depth + 1 > cap:
        raise ValueError(f"dissection depth capped at {cap}")
    finer = dyadic_dissection(diss.window, diss.depth + 1, cap=cap)
    d = diss.window.dimension
    fine_cells = 1 << (diss.depth + 1)
    index_map = []
    for box in diss.boxes:
        children = []
        for offs in itertools.product((0, 1), repeat=d):
            child = tuple(2 * i + o for i, o in zip(box.index, offs))
            flat = 0
            for c in child:
                flat = flat * fine_cells + c
            children.append(flat)
        index_map.append(sorted(children))
    return finer, index_map


def aggregate_counts(fine_counts: np.ndarray, index_map) -> np.ndarray:
    """Sum refined counts back onto the coarse boxes."""
    fine_counts = np.asarray(fine_counts, dtype=float)
    return np.array([fine_counts[idx].sum() for idx in index_map])
