"""Samplers for discrete-index random fields with known association behaviour.

Every sampler is a pure function of its parameters and an explicit
generator: identical seeds reproduce identical samples bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FieldSample:
    """Realisation of a finite-index random field."""

    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


class CovarianceSpec:
    """Mean vector and PSD covariance matrix of a Gaussian field.

    Symmetry is required within 1e-12 and eigenvalues may dip to -1e-10;
    anything beyond that is rejected rather than silently repaired.
    """

    __slots__ = ("mean", "cov", "_root")

    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float).reshape(-1).copy()
        cov = np.asarray(cov, dtype=float).copy()
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError("covariance shape mismatch")
        if np.abs(cov - cov.T).max(initial=0.0) > 1e-12:
            raise ValueError("covariance not symmetric within 1e-12")
        eigvals, eigvecs = np.linalg.eigh(cov)
        if eigvals.min(initial=0.0) < -1e-10:
            raise ValueError(f"covariance not PSD: min eigenvalue {eigvals.min()}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        self.mean = mean
        self.cov = cov
        # Spectral square root with tiny negative eigenvalues clipped to 0,
        # so numerically semidefinite inputs remain usable.
        self._root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]


def sample_gaussian_field(spec: CovarianceSpec, rng: np.random.Generator) -> FieldSample:
    """Multivariate normal draw with the spec's mean and covariance."""
    z = rng.standard_normal(spec.dimension)
    return FieldSample(spec.mean + spec._root @ z)


def sample_gamma(shape: float, rng: np.random.Generator) -> float:
    """Gamma(shape, 1) draw valid across the whole shape range.

    Shapes below one go through the boost Gamma(a) = Gamma(a+1) * U^(1/a);
    shape zero is the degenerate point mass at zero.
    """
    if shape < 0:
        raise ValueError("negative shape")
    if shape == 0:
        return 0.0
    if shape < 1:
        return float(rng.gamma(shape + 1.0)) * float(rng.random()) ** (1.0 / shape)
    return float(rng.gamma(shape))


def sample_dirichlet_sequence(alpha, truncation: int, rng: np.random.Generator) -> FieldSample:
    """Normalised-gamma sequence: coordinate n is X_n / X for X_n ~ Gamma(alpha_n).

    Only the first ``truncation`` coordinates are returned; the mass of all
    later positive shapes is folded into the normaliser through a single
    gamma draw with the summed tail shape, so the returned coordinates sum
    to at most 1 and to exactly 1 when the truncation covers every positive
    shape.
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if (alpha < 0).any():
        raise ValueError("negative shape parameter")
    m = int(truncation)
    if m < 1:
        raise ValueError("truncation must be at least 1")
    head = alpha[:m]
    if head.max(initial=0.0) <= 0:
        raise ValueError("all-zero shape prefix")
    draws = np.array([sample_gamma(a, rng) for a in head])
    tail_shape = float(alpha[m:].sum())
    tail = sample_gamma(tail_shape, rng) if tail_shape > 0 else 0.0
    total = draws.sum() + tail
    return FieldSample(draws / total, metadata={"truncation": m, "tail_shape": tail_shape})


def sample_multinomial(n: int, probs, rng: np.random.Generator) -> FieldSample:
    """Exact multinomial cell counts."""
    if n < 0:
        raise ValueError("negative trial count")
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-9 or (probs < 0).any():
        raise ValueError("probabilities must be nonnegative and sum to 1")
    return FieldSample(rng.multinomial(n, probs).astype(float))


def sample_permutation(values, rng: np.random.Generator) -> FieldSample:
    """Uniform random permutation of the given values."""
    values = np.asarray(values, dtype=float)
    if not np.isfinite(values).all():
        raise ValueError("values must be finite")
    return FieldSample(rng.permutation(values))


class ExclusionSpec:
    """Symmetric exclusion dynamics on a finite site set.

    ``p`` is a symmetric stochastic matrix of swap rates, ``alpha`` the
    per-site initial occupation probability, ``horizon`` the model time to
    simulate. Irreducibility of the rate graph is checked at construction.
    """

    __slots__ = ("sites", "p", "alpha", "horizon")

    def __init__(self, sites, p, alpha, horizon: float):
        sites = list(sites)
        n = len(sites)
        p = np.asarray(p, dtype=float).copy()
        if p.shape != (n, n):
            raise ValueError("rate matrix shape mismatch")
        if np.abs(p - p.T).max(initial=0.0) > 1e-12:
            raise ValueError("rate matrix not symmetric")
        if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("rows must be probability vectors")
        if not _connected(p > 0):
            raise ValueError("rate graph is not irreducible")
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()
        if ((alpha < 0) | (alpha > 1)).any():
            raise ValueError("occupation probabilities must lie in [0, 1]")
        if horizon < 0:
            raise ValueError("negative horizon")
        p.setflags(write=False)
        alpha.setflags(write=False)
        self.sites = sites
        self.p = p
        self.alpha = alpha
        self.horizon = float(horizon)

    @property
    def n_sites(self) -> int:
        return len(self.sites)


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.flatnonzero(adj[u] | adj[:, u]):
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return seen.all()


def simulate_exclusion(spec: ExclusionSpec, rng: np.random.Generator) -> FieldSample:
    """Occupation vector at the horizon of the symmetric exclusion process.

    Continuous-time next-event simulation: each ordered pair (x, y) with x
    occupied and y empty carries an exponential clock of rate p(x, y); the
    earliest clock swaps the two occupations. Particle count is conserved
    along the whole trajectory.
    """
    eta = (rng.random(spec.n_sites) < spec.alpha).astype(np.int8)
    t = 0.0
    while True:
        occupied = eta == 1
        rates = spec.p * occupied[:, None] * (~occupied)[None, :]
        total = rates.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > spec.horizon:
            break
        flat = rng.choice(rates.size, p=(rates / total).ravel())
        x, y = divmod(int(flat), spec.n_sites)
        eta[x], eta[y] = eta[y], eta[x]
    return FieldSample(eta.astype(float))


def random_integral_field(weight_fns, measure_sampler, rng: np.random.Generator) -> FieldSample:
    """Field of integrals of nonnegative weight functions against a sampled measure.

    Coordinate y is the weight-function value at each atom, summed with the
    atom masses. ``weight_fns`` maps an (n, d) point array to n nonnegative
    values; ``measure_sampler(rng)`` yields the atomic measure.
    """
    config = measure_sampler(rng)
    out = np.zeros(len(weight_fns))
    if config.n_points == 0:
        return FieldSample(out)
    w = config.effective_weights()
    for k, fn in enumerate(weight_fns):
        vals = np.asarray(fn(config.points), dtype=float).reshape(-1)
        if (vals < 0).any():
            raise ValueError("weight functions must be nonnegative")
        out[k] = float(w @ vals)
    return FieldSample(out)
