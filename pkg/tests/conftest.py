"""Shared independent oracles for the test suite.

These deliberately avoid the library's own decision paths: dominance is
re-decided by exhaustive integer subset feasibility, chains by survival
functions, chain counts by DFS over covers.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from assoclab.order import FinitePoset, _transitive_closure


def survival_dominates(p_mass, q_mass) -> bool:
    """On a chain, dominance is pointwise comparison of survival functions."""
    sp = np.cumsum(np.asarray(p_mass)[::-1])[::-1]
    sq = np.cumsum(np.asarray(q_mass)[::-1])[::-1]
    return bool((sp <= sq + 1e-12).all())


def brute_force_feasible(p_units, q_units, leq) -> bool:
    """Transportation feasibility on the order-support arcs, exact integers.

    Exhaustive over every subset S of sources: the supply of S must not
    exceed the demand reachable through arcs out of S. Independent of the
    max-flow implementation.
    """
    p_units = [int(u) for u in p_units]
    q_units = [int(u) for u in q_units]
    n = len(p_units)
    leq = np.asarray(leq, dtype=bool)
    for bits in range(1, 1 << n):
        members = [i for i in range(n) if bits >> i & 1]
        supply = sum(p_units[i] for i in members)
        reach = np.zeros(n, dtype=bool)
        for i in members:
            reach |= leq[i]
        demand = sum(q_units[j] for j in range(n) if reach[j])
        if supply > demand:
            return False
    return True


def random_poset(rng: np.random.Generator, n: int, edge_prob: float = 0.35) -> FinitePoset:
    """Random DAG on n labels, closed into a partial order."""
    rel = np.eye(n, dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                rel[i, j] = True
    return FinitePoset(list(range(n)), _transitive_closure(rel))


def random_units(rng: np.random.Generator, n: int, denom: int = 1000) -> np.ndarray:
    """Random exact integer mass split: nonnegative units summing to denom."""
    return rng.multinomial(denom, np.full(n, 1.0 / n))


def upward_push(rng: np.random.Generator, units, leq, moves: int = 5) -> np.ndarray:
    """Move mass upward along the order; the result always dominates the input."""
    units = np.asarray(units, dtype=np.int64).copy()
    n = len(units)
    leq = np.asarray(leq, dtype=bool)
    for _ in range(moves):
        i = int(rng.integers(n))
        ups = [j for j in np.flatnonzero(leq[i]) if j != i]
        if not ups or units[i] == 0:
            continue
        j = int(rng.choice(ups))
        amount = int(rng.integers(units[i] + 1))
        units[i] -= amount
        units[j] += amount
    return units


def count_maximal_chains(poset: FinitePoset) -> int:
    """DFS path count from minimal to maximal elements through covers."""
    n = poset.n
    strict = poset.leq & ~np.eye(n, dtype=bool)
    cover = np.zeros_like(strict)
    for i in range(n):
        for j in range(n):
            if strict[i, j] and not (strict[i] & strict[:, j]).any():
                cover[i, j] = True
    maximal = {i for i in range(n) if not strict[i].any()}

    def paths(i):
        if i in maximal:
            return 1
        return sum(paths(int(j)) for j in np.flatnonzero(cover[i]))

    return sum(paths(i) for i in range(n) if not strict[:, i].any())


def exact_orthant_minus_quarter(rho: float) -> float:
    """Cov(1{X>0}, 1{Y>0}) for standard bivariate normals with correlation rho."""
    return math.asin(rho) / (2 * math.pi)


def enumerate_tuples_mean_count(beta, alpha, r, n_max=4, grid=3):
    """Exact mean count of the area-interaction analog on a tiny discrete grid.

    Configurations are labelled tuples of up to n_max cell centers; covered
    'area' is the fraction of cell centers within distance r of an occupied
    one. Exact by enumeration; used only for direction comparisons.
    """
    centers = np.array(
        [[(i + 0.5) / grid, (j + 0.5) / grid] for i in range(grid) for j in range(grid)]
    )
    m = len(centers)

    def covered(occ):
        if not occ:
            return 0.0
        pts = centers[list(occ)]
        d2 = ((centers[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        return (d2 <= r * r).any(axis=1).sum() / m

    num = den = 0.0
    for n in range(n_max + 1):
        w_n = beta**n / math.factorial(n)
        tot = 0.0
        cnt = 0
        for tup in itertools.product(range(m), repeat=n):
            tot += math.exp(-alpha * covered(tup))
            cnt += 1
        mean_pen = tot / max(cnt, 1)
        num += w_n * mean_pen * n
        den += w_n * mean_pen
    return num / den
