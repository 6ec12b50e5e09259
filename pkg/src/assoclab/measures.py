"""Samplers for point processes and random measures on a rectangular window.

The catalog covers Poisson, mixed Poisson, Cox, cluster, mixed-sampled,
independently weighted, determinantal, Ginibre, permanental, Dirichlet
process and area-interaction models, plus superposition and restriction.
All samplers are pure functions of (spec, generator); density-driven
measures are discretised on a dyadic grid so box masses stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dissection import Dissection, dyadic_dissection
from .fields import CovarianceSpec
from .geometry import PointConfiguration, Window


class UlcViolationError(ValueError):
    """Count distribution failed the ultra-log-concavity inequality."""


class NonConvergenceError(RuntimeError):
    """Monitored chain statistics failed the stationarity diagnostic."""


def _clip_into(points: np.ndarray, window: Window) -> np.ndarray:
    """Guard against float roundoff landing a point on the open upper face."""
    if len(points) == 0:
        return points
    hi = window.lows + window.widths
    return np.minimum(points, np.nextafter(hi, -np.inf))


def _uniform_points(window: Window, rng: np.random.Generator, n: int) -> np.ndarray:
    return _clip_into(window.sample_uniform(rng, n), window)


# ---------------------------------------------------------------------------
# Poisson family


def sample_poisson(intensity, window: Window, rng: np.random.Generator) -> PointConfiguration:
    """Poisson process on the window.

    ``intensity`` may be a constant rate, a :class:`GriddedMeasure`, or a
    pair ``(fn, bound)`` of a location-dependent rate function and an upper
    bound on it (sampled by thinning a homogeneous process at the bound).
    Counts on disjoint sets are independent with the prescribed means.
    """
    if isinstance(intensity, GriddedMeasure):
        if intensity.window != window:
            raise ValueError("gridded intensity lives on a different window")
        return _poisson_from_gridded(intensity, rng)
    if isinstance(intensity, tuple):
        fn, bound = intensity
        if bound < 0:
            raise ValueError("negative intensity bound")
        base = _uniform_points(window, rng, rng.poisson(bound * window.volume))
        if len(base) == 0:
            return PointConfiguration.empty(window)
        vals = np.asarray(fn(base), dtype=float)
        if (vals < 0).any():
            raise ValueError("negative intensity")
        if (vals > bound + 1e-12).any():
            raise ValueError("intensity exceeds the stated bound")
        keep = rng.random(len(base)) < vals / bound
        return PointConfiguration(window, base[keep])
    rate = float(intensity)
    if rate < 0:
        raise ValueError("negative intensity")
    n = rng.poisson(rate * window.volume)
    return PointConfiguration(window, _uniform_points(window, rng, n))


def sample_mixed_poisson(mixing, rate: float, window: Window, rng: np.random.Generator) -> PointConfiguration:
    """Poisson process whose rate is scaled by one random draw ``X = mixing(rng)``."""
    x = float(mixing(rng))
    if x < 0:
        raise ValueError("negative mixing sample")
    config = sample_poisson(x * rate, window, rng)
    config.metadata["mixing_value"] = x
    return config


class GriddedMeasure:
    """Nonnegative measure with piecewise-constant mass on a dyadic grid."""

    __slots__ = ("dissection", "masses")

    def __init__(self, dissection: Dissection, masses):
        masses = np.asarray(masses, dtype=float).copy()
        if masses.shape != (dissection.n_boxes,):
            raise ValueError("one mass per grid cell required")
        if (masses < 0).any():
            raise ValueError("negative cell mass")
        masses.setflags(write=False)
        self.dissection = dissection
        self.masses = masses

    @property
    def window(self) -> Window:
        return self.dissection.window

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())


def _poisson_from_gridded(gm: GriddedMeasure, rng: np.random.Generator) -> PointConfiguration:
    counts = rng.poisson(gm.masses)
    pts = []
    for c, box in zip(counts, gm.dissection.boxes):
        if c == 0:
            continue
        lows = np.array([lo for lo, _ in box.bounds])
        widths = np.array([hi - lo for lo, hi in box.bounds])
        pts.append(lows + rng.random((c, len(lows))) * widths)
    if not pts:
        return PointConfiguration.empty(gm.window)
    points = _clip_into(np.vstack(pts), gm.window)
    return PointConfiguration(gm.window, points)


def sample_cox(directing, rng: np.random.Generator) -> PointConfiguration:
    """Cox process: Poisson sample given one draw of the directing measure.

    ``directing(rng)`` must yield a finite measure, either a weighted
    :class:`PointConfiguration` (atomic) or a :class:`GriddedMeasure`.
    Restricting the result to a region is again Cox, directed by the
    restricted measure.
    """
    measure = directing(rng)
    if isinstance(measure, GriddedMeasure):
        config = _poisson_from_gridded(measure, rng)
        config.metadata["directing"] = "gridded"
        return config
    if isinstance(measure, PointConfiguration):
        w = measure.effective_weights()
        if not np.isfinite(w).all():
            raise ValueError("directing measure is not finite")
        counts = rng.poisson(w)
        points = np.repeat(measure.points, counts, axis=0)
        config = PointConfiguration(measure.window, points, metadata={"directing": "atomic"})
        return config
    raise TypeError("directing sampler must yield a PointConfiguration or GriddedMeasure")


def sample_cluster(
    parent_rate: float,
    offspring_sampler,
    window: Window,
    rng: np.random.Generator,
    edge: str = "wrap",
) -> PointConfiguration:
    """Superposition of i.i.d. offspring measures translated to Poisson parents.

    ``offspring_sampler(rng)`` returns offsets relative to the parent, as an
    (m, d) array or an ``(offsets, weights)`` pair. Offspring falling outside
    the window are wrapped toroidally (default) or clipped away.
    """
    if edge not in ("wrap", "clip"):
        raise ValueError("edge policy must be 'wrap' or 'clip'")
    parents = sample_poisson(parent_rate, window, rng)
    all_pts, all_wts, weighted = [], [], False
    for parent in parents.points:
        out = offspring_sampler(rng)
        if isinstance(out, tuple):
            offsets, wts = out
            weighted = True
        else:
            offsets, wts = out, None
        offsets = np.asarray(offsets, dtype=float).reshape(-1, window.dimension)
        pos = parent + offsets
        if edge == "wrap":
            rel = np.mod(pos - window.lows, window.widths)
            rel = np.where(rel >= window.widths, rel - window.widths, rel)
            pos = window.lows + rel
            keep = np.ones(len(pos), dtype=bool)
        else:
            keep = window.contains(pos)
            pos = pos[keep]
        all_pts.append(_clip_into(pos, window))
        if wts is not None:
            all_wts.append(np.asarray(wts, dtype=float)[keep])
        elif weighted:
            all_wts.append(np.ones(keep.sum()))
    meta = {"edge": edge, "n_parents": parents.n_points}
    if not all_pts:
        return PointConfiguration.empty(window, metadata=meta)
    points = np.vstack(all_pts)
    weights = np.concatenate(all_wts) if weighted else None
    return PointConfiguration(window, points, weights, metadata=meta)


# ---------------------------------------------------------------------------
# Mixed-sampled and weighted processes


def is_ultra_log_concave(pmf, tol: float = 1e-12) -> bool:
    """Check k*p_k^2 >= (k+1)*p_{k+1}*p_{k-1} for every interior k."""
    p = np.asarray(pmf, dtype=float)
    if len(p) < 3:
        return True
    k = np.arange(1, len(p) - 1)
    return bool((k * p[1:-1] ** 2 >= (k + 1) * p[2:] * p[:-2] - tol).all())


def sample_mixed_sampled(
    tau_pmf,
    window: Window,
    rng: np.random.Generator,
    spatial=None,
    weight_sampler=None,
    allow_non_ulc: bool = False,
) -> PointConfiguration:
    """Random number of i.i.d. points, optionally with i.i.d. positive weights.

    ``tau_pmf`` is the count distribution over {0, 1, ...}; it must be
    ultra log-concave unless explicitly waived. ``spatial(rng, n)`` draws
    the point locations (uniform by default).
    """
    pmf = np.asarray(tau_pmf, dtype=float)
    if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-9:
        raise ValueError("count pmf must be a probability vector")
    if not allow_non_ulc and not is_ultra_log_concave(pmf):
        raise UlcViolationError("count distribution is not ultra log-concave")
    tau = int(rng.choice(len(pmf), p=pmf / pmf.sum()))
    points = spatial(rng, tau) if spatial is not None else _uniform_points(window, rng, tau)
    points = np.asarray(points, dtype=float).reshape(tau, window.dimension)
    weights = None
    if weight_sampler is not None:
        weights = np.array([float(weight_sampler(rng)) for _ in range(tau)])
        if (weights <= 0).any():
            raise ValueError("weights must be positive")
    return PointConfiguration(window, points, weights)


def mark_points(config: PointConfiguration, kernel, rng: np.random.Generator) -> PointConfiguration:
    """Attach independent nonnegative marks drawn from ``kernel(position, rng)``."""
    weights = np.array([float(kernel(x, rng)) for x in config.points])
    if len(weights) and (weights < 0).any():
        raise ValueError("marks must be nonnegative")
    return PointConfiguration(config.window, config.points, weights, config.metadata)


# ---------------------------------------------------------------------------
# Determinantal processes


class KernelMatrix:
    """Hermitian positive contraction kernel over a finite ground set."""

    __slots__ = ("matrix", "_eig")

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=complex).copy()
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise ValueError("kernel must be square")
        if np.abs(matrix - matrix.conj().T).max(initial=0.0) > 1e-12:
            raise ValueError("kernel not Hermitian within 1e-12")
        eigvals, eigvecs = np.linalg.eigh(matrix)
        if eigvals.min(initial=0.0) < -1e-10 or eigvals.max(initial=0.0) > 1 + 1e-10:
            raise ValueError(f"kernel eigenvalues outside [0, 1]: [{eigvals.min()}, {eigvals.max()}]")
        matrix.setflags(write=False)
        self.matrix = matrix
        self._eig = (np.clip(eigvals, 0.0, 1.0), eigvecs)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def sample_dpp_finite(
    kernel: KernelMatrix,
    ground_points,
    rng: np.random.Generator,
    window: Window | None = None,
) -> PointConfiguration:
    """Exact determinantal sample: subset with P(T in sample) = det(K_T).

    Spectral algorithm: pick eigenvectors independently with probability
    equal to their eigenvalues, then draw points one at a time from the
    projection kernel, conditioning by orthogonal projection after each
    pick.
    """
    ground_points = np.atleast_2d(np.asarray(ground_points, dtype=float))
    if ground_points.shape[0] != kernel.n:
        raise ValueError("one ground point per kernel row required")
    eigvals, eigvecs = kernel._eig
    sel = rng.random(kernel.n) < eigvals
    V = eigvecs[:, sel]
    chosen = []
    k = V.shape[1]
    for step in range(k):
        probs = np.abs(V) ** 2
        p = probs.sum(axis=1)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        i = int(rng.choice(kernel.n, p=p))
        chosen.append(i)
        j = int(np.argmax(np.abs(V[i, :])))
        v = V[:, j] / V[i, j]
        V = V - np.outer(v, V[i, :])
        V = np.delete(V, j, axis=1)
        if V.shape[1]:
            V, _ = np.linalg.qr(V)
    chosen.sort()
    pts = ground_points[chosen] if chosen else np.empty((0, ground_points.shape[1]))
    if window is None:
        window = _fitting_window(ground_points)
    return PointConfiguration(window, pts, metadata={"ground_indices": tuple(chosen)})


def dpp_subset_law(kernel: KernelMatrix, cap: int = 10) -> np.ndarray:
    """Exact probability of every subset, indexed by bitmask (bit i = point i).

    Inclusion-exclusion over the inclusion probabilities det(K_T); intended
    as an enumeration oracle for small ground sets.
    """
    n = kernel.n
    if n > cap:
        raise ValueError(f"subset enumeration capped at {cap} points")
    K = kernel.matrix
    dets = np.empty(1 << n)
    for mask in range(1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        dets[mask] = 1.0 if not idx else np.linalg.det(K[np.ix_(idx, idx)]).real
    law = np.zeros(1 << n)
    full = (1 << n) - 1
    for s in range(1 << n):
        rest = full & ~s
        total = 0.0
        u = rest
        while True:
            t = s | u
            sign = -1.0 if (bin(u).count("1") & 1) else 1.0
            total += sign * dets[t]
            if u == 0:
                break
            u = (u - 1) & rest
        law[s] = total
    return np.clip(law, 0.0, None)


def _fitting_window(points: np.ndarray) -> Window:
    lo = np.floor(points.min(axis=0)) - 1.0
    hi = np.ceil(points.max(axis=0)) + 1.0
    return Window(tuple(zip(lo, hi)))


def sample_ginibre_finite(n: int, rng: np.random.Generator) -> PointConfiguration:
    """Eigenvalues of an n x n matrix of i.i.d. standard complex normals, as planar points."""
    if n < 1:
        raise ValueError("matrix size must be at least 1")
    g = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    lam = np.linalg.eigvals(g)
    pts = np.column_stack([lam.real, lam.imag])
    window = _fitting_window(pts)
    return PointConfiguration(window, pts, metadata={"window": "auto"})


# ---------------------------------------------------------------------------
# Cox specialisations


def sample_permanental(
    k: int,
    spec: CovarianceSpec,
    base: GriddedMeasure,
    rng: np.random.Generator,
) -> PointConfiguration:
    """Cox process directed by the sum of k squared Gaussian fields on a grid.

    The cell intensity is (X^1_s)^2 + ... + (X^k_s)^2 times the base cell
    mass. The Gaussian covariance must be PSD with nonnegative entries.
    """
    if k < 1:
        raise ValueError("field count must be positive")
    if spec.dimension != base.dissection.n_boxes:
        raise ValueError("covariance dimension must match the grid")
    if spec.cov.min(initial=0.0) < -1e-12:
        raise ValueError("covariance entries must be nonnegative")
    z = rng.standard_normal((k, spec.dimension))
    draws = spec.mean + z @ spec._root.T
    y = (draws**2).sum(axis=0)
    directing = GriddedMeasure(base.dissection, y * base.masses)
    config = _poisson_from_gridded(directing, rng)
    config.metadata["directing"] = "permanental"
    return config


def sample_dirichlet_process(
    total_mass: float,
    window: Window,
    rng: np.random.Generator,
    truncation: int = 1000,
    base_sampler=None,
) -> PointConfiguration:
    """Random probability measure with Dirichlet finite-dimensional laws.

    Stick-breaking at concentration equal to the base measure's total mass,
    truncated after ``truncation`` sticks with the remaining stick folded
    into one final atom, so the weights always sum to exactly 1. Locations
    are i.i.d. from the normalised base (uniform by default).
    """
    c = float(total_mass)
    if not (0 < c < math.inf):
        raise ValueError("base measure must have positive finite total mass")
    m = int(truncation)
    if m < 1:
        raise ValueError("truncation must be at least 1")
    v = rng.beta(1.0, c, size=m)
    log_remaining = np.concatenate([[0.0], np.cumsum(np.log1p(-v))])
    weights = np.empty(m + 1)
    weights[:m] = v * np.exp(log_remaining[:m])
    weights[m] = np.exp(log_remaining[m])
    if base_sampler is not None:
        points = np.asarray(base_sampler(rng, m + 1), dtype=float).reshape(m + 1, window.dimension)
    else:
        points = _uniform_points(window, rng, m + 1)
    return PointConfiguration(window, points, weights, metadata={"truncation": m})


# ---------------------------------------------------------------------------
# Gibbs area-interaction process


@dataclass(frozen=True)
class GibbsSpec:
    """Area-interaction model: Poisson(beta) reference reweighted by
    exp(-alpha * area of the union of radius-r balls)."""

    beta: float
    alpha: float
    r: float
    window: Window

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.r <= 0:
            raise ValueError("r must be positive")


def _covered_delta(points, x, r, window, rng, darts):
    """Monte-Carlo estimate of the area gained by adding the ball at x."""
    d = window.sample_uniform(rng, darts)
    r2 = r * r
    new = ((d - x) ** 2).sum(axis=1) <= r2
    if points:
        arr = np.asarray(points)
        dist2 = ((d[:, None, :] - arr[None, :, :]) ** 2).sum(axis=2)
        old = (dist2 <= r2).any(axis=1)
        gained = new & ~old
    else:
        gained = new
    return window.volume * gained.mean()


def area_interaction_chain(
    spec: GibbsSpec,
    rng: np.random.Generator,
    n_samples: int,
    burn_in: int = 100_000,
    thinning: int = 1_000,
    darts: int = 10_000,
    check_convergence: bool = True,
) -> list[PointConfiguration]:
    """Thinned birth-death Metropolis chain targeting the area-interaction law.

    Proposals are single-point births or deaths with probability one half
    each; acceptance uses the exact density ratio exp(-alpha * delta-area)
    with the covered-area change estimated by dart throwing (the chain is
    therefore approximate for alpha > 0 and exact for alpha = 0). Raises
    :class:`NonConvergenceError` if the thinned count series fails a
    stationarity split test.
    """
    w = spec.window
    vol = w.volume
    beta_vol = spec.beta * vol
    pts: list[tuple] = []
    samples = []
    total_steps = burn_in + n_samples * thinning
    block = 1 << 16
    done = 0
    while done < total_steps:
        todo = min(block, total_steps - done)
        u_move = rng.random(todo)
        u_acc = rng.random(todo)
        u_loc = w.sample_uniform(rng, todo)
        u_idx = rng.random(todo)
        for s in range(todo):
            n = len(pts)
            if u_move[s] < 0.5:
                x = u_loc[s]
                ratio = beta_vol / (n + 1)
                if spec.alpha > 0:
                    gained = _covered_delta(pts, x, spec.r, w, rng, darts)
                    ratio *= math.exp(-spec.alpha * gained)
                if u_acc[s] < ratio:
                    pts.append(tuple(np.minimum(x, np.nextafter(w.lows + w.widths, -np.inf))))
            elif n:
                i = int(u_idx[s] * n)
                ratio = n / beta_vol
                if spec.alpha > 0:
                    x = np.array(pts[i])
                    rest = pts[:i] + pts[i + 1 :]
                    lost = _covered_delta(rest, x, spec.r, w, rng, darts)
                    ratio *= math.exp(spec.alpha * lost)
                if u_acc[s] < ratio:
                    pts[i] = pts[-1]
                    pts.pop()
            step = done + s + 1
            if step > burn_in and (step - burn_in) % thinning == 0:
                samples.append(
                    PointConfiguration(w, np.array(pts).reshape(len(pts), w.dimension))
                )
        done += todo
    if check_convergence and len(samples) >= 50:
        _stationarity_check([c.n_points for c in samples])
    return samples


def _stationarity_check(counts, z_max: float = 5.0):
    counts = np.asarray(counts, dtype=float)
    head = counts[: len(counts) // 5]
    tail = counts[len(counts) // 2 :]
    se = math.sqrt(head.var(ddof=1) / len(head) + tail.var(ddof=1) / len(tail))
    if se == 0:
        return
    z = (head.mean() - tail.mean()) / se
    if abs(z) > z_max:
        raise NonConvergenceError(f"count series fails stationarity split test (z={z:.2f})")


def sample_area_interaction(
    spec: GibbsSpec,
    rng: np.random.Generator,
    burn_in: int = 100_000,
    thinning: int = 1_000,
    darts: int = 10_000,
) -> PointConfiguration:
    """One approximate draw from the area-interaction law."""
    return area_interaction_chain(
        spec, rng, 1, burn_in=burn_in, thinning=thinning, darts=darts, check_convergence=False
    )[0]


# ---------------------------------------------------------------------------
# Measure algebra


def superpose(configs) -> PointConfiguration:
    """Multiset union of the atoms of configurations on a common window."""
    configs = list(configs)
    if not configs:
        raise ValueError("nothing to superpose")
    window = configs[0].window
    if any(c.window != window for c in configs):
        raise ValueError("superposition requires a common window")
    points = np.vstack([c.points for c in configs])
    if all(c.weights is None for c in configs):
        weights = None
    else:
        weights = np.concatenate([c.effective_weights() for c in configs])
    return PointConfiguration(window, points, weights)


def restrict(config: PointConfiguration, region: Window) -> PointConfiguration:
    """Atoms inside the region only; the ambient window is unchanged."""
    keep = region.contains(config.points) if config.n_points else np.zeros(0, dtype=bool)
    weights = None if config.weights is None else config.weights[keep]
    return PointConfiguration(config.window, config.points[keep], weights, config.metadata)


def load_kernel_csv(path) -> KernelMatrix:
    """Kernel matrix from CSV rows of alternating (re, im) entry pairs."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(tok) for tok in line.split(",")]
            if len(vals) % 2:
                raise ValueError("kernel rows need an even number of entries (re, im pairs)")
            rows.append([complex(vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)])
    return KernelMatrix(np.array(rows))
