"""Exact association oracles on small discrete models.

Everything here is exhaustive arithmetic on explicit probability tables:
upper-set covariance checks for negative/positive association, the
reweighted-marginal dominance reformulation, disjoint-occurrence (BK)
checking on binary cubes, and the threshold-integral covariance identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dominance import dominates
from .order import (
    DiscreteDistribution,
    FinitePoset,
    ProductPoset,
    enumerate_upper_sets,
    is_monotone,
    product_poset,
    upper_set_matrix,
)

STATE_CAP = 4096
COV_TOL = 1e-10
NA = "NA"
PA = "PA"


def _check_hypothesis(hyp: str) -> str:
    if hyp not in (NA, PA):
        raise ValueError(f"hypothesis must be 'NA' or 'PA', got {hyp!r}")
    return hyp


class JointPmf:
    """Explicit probability table over a product poset.

    ``probs`` is flat in row-major element order (rightmost factor varying
    fastest). The total state count is capped so exhaustive checks stay
    exhaustive.
    """

    __slots__ = ("poset", "probs")

    def __init__(self, poset: ProductPoset, probs, cap: int = STATE_CAP):
        probs = np.asarray(probs, dtype=float).reshape(-1).copy()
        if poset.n > cap:
            raise ValueError(f"state space capped at {cap}, got {poset.n}")
        if probs.shape != (poset.n,):
            raise ValueError("one probability per product element required")
        if (probs < 0).any():
            raise ValueError("negative probability")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")
        probs.setflags(write=False)
        self.poset = poset
        self.probs = probs

    @property
    def shape(self) -> tuple:
        return tuple(f.n for f in self.poset.factors)

    @property
    def n_coords(self) -> int:
        return len(self.poset.factors)

    def tensor(self) -> np.ndarray:
        return self.probs.reshape(self.shape)

    def split_table(self, coords_j, coords_k) -> np.ndarray:
        """Joint table P(X_J = row, X_K = col) with other coordinates summed out."""
        j = list(coords_j)
        k = list(coords_k)
        rest = [a for a in range(self.n_coords) if a not in j + k]
        t = self.tensor()
        if rest:
            t = t.sum(axis=tuple(rest), keepdims=True)
        t = np.transpose(t, j + k + rest).reshape(
            int(np.prod([self.shape[a] for a in j])), -1
        )
        return t

    def marginal_poset(self, coords) -> ProductPoset:
        return product_poset([self.poset.factors[a] for a in coords])

    def marginal(self, coords) -> "JointPmf":
        coords = list(coords)
        table = self.split_table(coords, [])
        return JointPmf(self.marginal_poset(coords), table.reshape(-1))

    def coordinate_values(self) -> list[np.ndarray]:
        """Real embedding of each factor's elements (element index by default).

        The embedding must be monotone for the factor order; chains built
        in order satisfy this automatically.
        """
        out = []
        for f in self.poset.factors:
            vals = np.arange(f.n, dtype=float)
            if not is_monotone(vals, f):
                raise ValueError("factor order is incompatible with index embedding")
            out.append(vals)
        return out

    def state_values(self) -> np.ndarray:
        """(n_states, n_coords) matrix of the real embedding of every state."""
        embeds = self.coordinate_values()
        grids = np.meshgrid(*embeds, indexing="ij")
        return np.column_stack([g.reshape(-1) for g in grids])

    def batch_values(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Sample (size, n_coords) real-valued state rows from the table."""
        states = self.state_values()
        idx = rng.choice(self.poset.n, size=size, p=self.probs)
        return states[idx]


@dataclass(frozen=True)
class AssociationWitness:
    """Violating pair of upper sets with the offending covariance."""

    upper_j: frozenset
    upper_k: frozenset
    covariance: float


@dataclass(frozen=True)
class CheckResult:
    holds: bool
    witness: AssociationWitness | None = None


def _split_coords(pmf: JointPmf, split_j, hypothesis: str):
    j = sorted(set(int(a) for a in split_j))
    if any(a < 0 or a >= pmf.n_coords for a in j):
        raise ValueError("split indices out of range")
    k = [a for a in range(pmf.n_coords) if a not in j]
    if hypothesis == NA and (not j or not k):
        raise ValueError("NA needs a nonempty proper coordinate subset")
    if not j:
        raise ValueError("empty coordinate subset")
    return j, k


def exact_association_check(pmf: JointPmf, split_j, hypothesis: str = NA) -> CheckResult:
    """Exhaustive upper-set indicator check of the association inequality.

    For NA the covariance of every pair of upper-set indicators over the
    two marginal posets must be nonpositive; for PA every pair over the
    same marginal must be nonnegative. Indicator pairs are the extreme
    monotone functions, so this decides the inequality for all bounded
    monotone pairs.
    """
    hypothesis = _check_hypothesis(hypothesis)
    j, k = _split_coords(pmf, split_j, hypothesis)
    poset_j = pmf.marginal_poset(j)
    uppers_j = enumerate_upper_sets(poset_j)
    a = upper_set_matrix(poset_j, uppers_j).astype(float)

    if hypothesis == NA:
        poset_k = pmf.marginal_poset(k)
        uppers_k = enumerate_upper_sets(poset_k)
        b = upper_set_matrix(poset_k, uppers_k).astype(float)
        table = pmf.split_table(j, k)
        joint = a @ table @ b.T
        pj = a @ table.sum(axis=1)
        pk = b @ table.sum(axis=0)
        cov = joint - np.outer(pj, pk)
        worst = np.unravel_index(int(np.argmax(cov)), cov.shape)
        if cov[worst] <= COV_TOL:
            return CheckResult(True)
        witness = AssociationWitness(
            uppers_j[worst[0]].members, uppers_k[worst[1]].members, float(cov[worst])
        )
        return CheckResult(False, witness)

    p = pmf.split_table(j, []).reshape(-1)
    joint = (a * p) @ a.T
    pu = a @ p
    cov = joint - np.outer(pu, pu)
    worst = np.unravel_index(int(np.argmin(cov)), cov.shape)
    if cov[worst] >= -COV_TOL:
        return CheckResult(True)
    witness = AssociationWitness(
        uppers_j[worst[0]].members, uppers_j[worst[1]].members, float(cov[worst])
    )
    return CheckResult(False, witness)


def reweighted_dominance_check(pmf: JointPmf, split_j, g_values) -> bool:
    """Dominance form of the association inequality for one monotone weight.

    Reweights the J-marginal by a nonnegative monotone function of the
    complementary coordinates and asks whether the reweighted marginal is
    stochastically dominated by the plain one. Negative association makes
    this hold for every admissible weight.
    """
    j, k = _split_coords(pmf, split_j, NA)
    poset_j = pmf.marginal_poset(j)
    poset_k = pmf.marginal_poset(k)
    if isinstance(g_values, dict):
        g = np.array([g_values[e] for e in poset_k.elements], dtype=float)
    else:
        g = np.asarray(g_values, dtype=float).reshape(-1)
    if g.shape != (poset_k.n,):
        raise ValueError("one weight value per complementary state required")
    if (g < 0).any():
        raise ValueError("weight function must be nonnegative")
    if not is_monotone(g, poset_k):
        raise ValueError("weight function is not monotone")
    table = pmf.split_table(j, k)
    weighted = table @ g
    norm = weighted.sum()
    if norm <= 0:
        raise ValueError("weight function has zero expectation")
    mu = DiscreteDistribution(poset_j, weighted / norm)
    nu_mass = table.sum(axis=1)
    nu = DiscreteDistribution(poset_j, nu_mass / nu_mass.sum())
    return dominates(mu, nu, poset_j)


# ---------------------------------------------------------------------------
# Disjoint occurrence on binary cubes


@dataclass(frozen=True)
class BkWitness:
    event_a: tuple
    event_b: tuple
    box_probability: float
    product_bound: float


@dataclass(frozen=True)
class BkResult:
    holds: bool
    witness: BkWitness | None = None


_BK_CACHE: dict = {}


def _bk_tables(n: int):
    """Per-dimension combinatorics: increasing events and box membership.

    Events and states are bitmasks; ``box[a * n_up + b]`` is the state mask
    of the disjoint-occurrence event of upper events a and b.
    """
    if n in _BK_CACHE:
        return _BK_CACHE[n]
    n_states = 1 << n
    full = (1 << n_states) - 1
    # cylinder[s][K]: states agreeing with s on coordinate set K
    cylinders = [
        [
            sum(1 << t for t in range(n_states) if (t & kmask) == (s & kmask))
            for kmask in range(n_states)
        ]
        for s in range(n_states)
    ]
    # increasing events: upward closed under the coordinatewise order
    sup_mask = []
    for s in range(n_states):
        acc = 0
        free = (n_states - 1) & ~s
        u = free
        while True:
            acc |= 1 << (s | u)
            if u == 0:
                break
            u = (u - 1) & free
        sup_mask.append(acc)
    uppers = []
    for event in range(1 << n_states):
        ok = True
        m = event
        while m:
            s = (m & -m).bit_length() - 1
            if sup_mask[s] & ~event & full:
                ok = False
                break
            m &= m - 1
        if ok:
            uppers.append(event)
    # membership[a, s, K] : does the K-cylinder of s sit inside upper event a
    n_up = len(uppers)
    member = np.zeros((n_up, n_states, n_states), dtype=bool)
    for ai, a in enumerate(uppers):
        inv = ~a & full
        for s in range(n_states):
            for kmask in range(n_states):
                member[ai, s, kmask] = (cylinders[s][kmask] & inv) == 0
    pairs = [(k, l) for k in range(n_states) for l in range(n_states) if k & l == 0]
    ks = np.array([k for k, _ in pairs])
    ls = np.array([l for _, l in pairs])
    sa = member[:, :, ks]
    sb = member[:, :, ls]
    box_member = np.zeros((n_up, n_up, n_states), dtype=bool)
    for ai in range(n_up):
        box_member[ai] = (sa[ai][None, :, :] & sb).any(axis=2)
    event_matrix = np.zeros((n_up, n_states), dtype=bool)
    for ai, a in enumerate(uppers):
        for s in range(n_states):
            event_matrix[ai, s] = bool(a >> s & 1)
    tables = (uppers, event_matrix, box_member, cylinders)
    _BK_CACHE[n] = tables
    return tables


def disjoint_occurrence_probability(pmf, states_a, states_b) -> float:
    """P(A box B): both events occur on disjoint coordinate certificates."""
    p = np.asarray(pmf, dtype=float)
    n = int(np.log2(len(p)))
    if 1 << n != len(p):
        raise ValueError("pmf length must be a power of two")
    _, _, _, cylinders = _bk_tables(n)
    mask_a = 0
    for s in states_a:
        mask_a |= 1 << int(s)
    mask_b = 0
    for s in states_b:
        mask_b |= 1 << int(s)
    full = (1 << len(p)) - 1
    inv_a = ~mask_a & full
    inv_b = ~mask_b & full
    total = 0.0
    for s in range(len(p)):
        hit = False
        for kmask in range(len(p)):
            if cylinders[s][kmask] & inv_a:
                continue
            for lmask in range(len(p)):
                if kmask & lmask:
                    continue
                if cylinders[s][lmask] & inv_b == 0:
                    hit = True
                    break
            if hit:
                break
        if hit:
            total += p[s]
    return total


def bk_check(pmf, tol: float = 1e-12, cap: int = 4) -> BkResult:
    """Exhaustive disjoint-occurrence inequality check on a binary cube.

    ``pmf`` is a probability vector over {0,1}^n indexed by bitmask (bit i
    is coordinate i). Verifies P(A box B) <= P(A) P(B) for every pair of
    increasing events; returns the worst violating pair otherwise.
    """
    p = np.asarray(pmf, dtype=float)
    n = int(np.log2(len(p)))
    if 1 << n != len(p):
        raise ValueError("pmf length must be a power of two")
    if n > cap:
        raise ValueError(f"exhaustive check capped at {cap} coordinates")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("pmf must be a probability vector")
    uppers, event_matrix, box_member, _ = _bk_tables(n)
    pu = event_matrix @ p
    pab = box_member @ p
    excess = pab - np.outer(pu, pu)
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[worst] <= tol:
        return BkResult(True)
    a_states = tuple(int(s) for s in np.flatnonzero(event_matrix[worst[0]]))
    b_states = tuple(int(s) for s in np.flatnonzero(event_matrix[worst[1]]))
    return BkResult(
        False,
        BkWitness(a_states, b_states, float(pab[worst]), float(pu[worst[0]] * pu[worst[1]])),
    )


# ---------------------------------------------------------------------------
# Covariance identity


def covariance_identity_check(x, y, grid: int = 200) -> float:
    """Discrepancy between a covariance and its threshold-indicator integral.

    The covariance of two integrable variables equals the double integral
    over thresholds (s, t) of the covariance of the exceedance indicators.
    Both sides are evaluated on the empirical measure of the paired sample
    (the integral by midpoint rule on a grid), so the returned absolute
    difference is pure discretisation error and shrinks as the grid is
    refined.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("paired one-dimensional samples required")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("samples must be bounded")
    r = len(x)
    direct = float(np.mean(x * y) - np.mean(x) * np.mean(y))
    span_x = x.max() - x.min()
    span_y = y.max() - y.min()
    if span_x == 0 or span_y == 0:
        return abs(direct)
    hx = span_x / grid
    hy = span_y / grid
    cx = x.min() + hx * (np.arange(grid) + 0.5)
    cy = y.min() + hy * (np.arange(grid) + 0.5)
    ex = np.concatenate([[x.min() - 1.0], cx, [x.max() + 1.0]])
    ey = np.concatenate([[y.min() - 1.0], cy, [y.max() + 1.0]])
    counts, _, _ = np.histogram2d(x, y, bins=(ex, ey))
    suffix = counts[::-1, ::-1].cumsum(axis=0).cumsum(axis=1)[::-1, ::-1]
    joint = suffix[1:, 1:] / r
    px = suffix[1:, 0] / r
    py = suffix[0, 1:] / r
    integral = float(hx * hy * (joint - np.outer(px, py)).sum())
    return abs(direct - integral)


def random_monotone_values(poset: FinitePoset, rng: np.random.Generator, low=0.0, high=1.0) -> np.ndarray:
    """Random monotone function on a poset: base noise pushed up the order."""
    base = rng.uniform(low, high, size=poset.n)
    out = np.empty(poset.n)
    for i in range(poset.n):
        out[i] = base[poset.leq[:, i]].max()
    return out
