"""Stochastic dominance on finite posets via exact integer max-flow couplings.

Deciding whether one distribution is dominated by another reduces to the
feasibility of a transportation problem whose arcs are exactly the ordered
pairs of the ground set: dominance holds iff the full unit of mass can flow
from the lower marginal to the upper one through order-respecting arcs.
Masses are quantised to integer units over a fixed denominator so the
feasibility decision is exact integer arithmetic, not float comparison.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .order import DiscreteDistribution, FinitePoset, UpperSet

DENOMINATOR = 10**9
MARGINAL_TOL = 1e-9
FEASIBILITY_TOL = 1e-9


class NotDominatedError(ValueError):
    """Raised when a coupling is requested for a non-dominated pair.

    Carries a violating monotone witness: an upper-set indicator whose
    expectation is strictly larger under ``p`` than under ``q``.
    """

    def __init__(self, witness: np.ndarray, gap: float):
        super().__init__(f"not stochastically dominated (witness gap {gap:.3g})")
        self.witness = witness
        self.gap = gap


@dataclass(frozen=True)
class Coupling:
    """Joint table with marginals (p, q) supported on the order relation."""

    poset: FinitePoset
    joint: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.joint, dtype=float)
        if j.shape != (self.poset.n, self.poset.n):
            raise ValueError("joint table shape mismatch")
        if (j < 0).any():
            raise ValueError("negative joint mass")
        if (j[~self.poset.leq] != 0).any():
            raise ValueError("coupling puts mass outside the order relation")
        j.setflags(write=False)
        object.__setattr__(self, "joint", j)

    @property
    def row_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)


def _quantize(mass: np.ndarray, denom: int) -> np.ndarray:
    """Integer units summing exactly to ``denom`` (largest-remainder rounding)."""
    scaled = mass * denom
    base = np.floor(scaled).astype(np.int64)
    deficit = denom - int(base.sum())
    if deficit < 0 or deficit > len(mass):
        raise ValueError("mass vector too far from total 1 to quantize")
    if deficit:
        order = np.argsort(-(scaled - base), kind="stable")
        base[order[:deficit]] += 1
    return base


def _max_flow(p_units: np.ndarray, q_units: np.ndarray, leq: np.ndarray):
    """Edmonds-Karp on the bipartite transport network.

    Nodes: 0 source, 1..n lower copies, n+1..2n upper copies, 2n+1 sink.
    Returns (flow value, interior flow matrix, residual-reachable node set).
    """
    n = len(p_units)
    size = 2 * n + 2
    source, sink = 0, 2 * n + 1
    inf = int(p_units.sum()) + 1

    cap = {}
    adj = [[] for _ in range(size)]

    def add_edge(u, v, c):
        if (u, v) not in cap:
            adj[u].append(v)
            adj[v].append(u)
            cap[(u, v)] = 0
            cap[(v, u)] = 0
        cap[(u, v)] += c

    for i in range(n):
        add_edge(source, 1 + i, int(p_units[i]))
        add_edge(1 + n + i, sink, int(q_units[i]))
    for i in range(n):
        for j in np.flatnonzero(leq[i]):
            add_edge(1 + i, 1 + n + int(j), inf)

    flow = {e: 0 for e in cap}
    total = 0
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v in adj[u]:
                if v not in parent and cap[(u, v)] - flow[(u, v)] > 0:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            reachable = set(parent)
            break
        bottleneck = inf
        v = sink
        while parent[v] is not None:
            u = parent[v]
            bottleneck = min(bottleneck, cap[(u, v)] - flow[(u, v)])
            v = u
        v = sink
        while parent[v] is not None:
            u = parent[v]
            flow[(u, v)] += bottleneck
            flow[(v, u)] -= bottleneck
            v = u
        total += bottleneck

    interior = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in np.flatnonzero(leq[i]):
            interior[i, j] = flow[(1 + i, 1 + n + int(j))]
    return total, interior, reachable


def _check_pair(p: DiscreteDistribution, q: DiscreteDistribution, poset):
    if poset is None:
        poset = p.poset
    if p.poset is not poset and p.poset != poset:
        raise ValueError("p is not defined on the given poset")
    if q.poset is not poset and q.poset != poset:
        raise ValueError("q is not defined on the given poset")
    return poset


def _solve(p, q, poset, denom):
    p_units = _quantize(p.mass, denom)
    q_units = _quantize(q.mass, denom)
    total, interior, reachable = _max_flow(p_units, q_units, poset.leq)
    return total, interior, reachable


def dominates(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    poset: FinitePoset | None = None,
    denom: int = DENOMINATOR,
) -> bool:
    """True iff p is stochastically dominated by q on the poset.

    Equivalent formulations: an order-supported coupling with marginals
    (p, q) exists, resp. every monotone function has expectation under p
    at most its expectation under q. Decided by integer max-flow with
    feasibility threshold |maxflow - 1| <= 1e-9 after rescaling.
    """
    poset = _check_pair(p, q, poset)
    total, _, _ = _solve(p, q, poset, denom)
    return (denom - total) <= denom * FEASIBILITY_TOL


def construct_coupling(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    poset: FinitePoset | None = None,
    denom: int = DENOMINATOR,
) -> Coupling:
    """A coupling of (p, q) supported on the order relation.

    The returned table is whatever feasible flow the solver produced; only
    the marginal and support invariants are guaranteed, not a canonical
    form. Raises :class:`NotDominatedError` with a min-cut witness when
    dominance fails.
    """
    poset = _check_pair(p, q, poset)
    total, interior, reachable = _solve(p, q, poset, denom)
    if (denom - total) > denom * FEASIBILITY_TOL:
        witness = _witness_from_cut(poset, reachable)
        gap = p.expect(witness) - q.expect(witness)
        raise NotDominatedError(witness, gap)
    return Coupling(poset, interior.astype(float) / denom)


def _witness_from_cut(poset: FinitePoset, reachable) -> np.ndarray:
    """Upper-set indicator extracted from the min cut of the flow network.

    The upward closure of the residual-reachable lower copies carries more
    p-mass than q-mass whenever the flow is infeasible.
    """
    lower = [i for i in range(poset.n) if (1 + i) in reachable]
    mask = poset.up_closure(lower)
    return mask.astype(float)


def dominance_witness(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    poset: FinitePoset | None = None,
    denom: int = DENOMINATOR,
) -> np.ndarray:
    """A 0/1 monotone function f with E_p[f] > E_q[f], from the min cut.

    Only defined when dominance fails; raises ValueError otherwise.
    """
    poset = _check_pair(p, q, poset)
    total, _, reachable = _solve(p, q, poset, denom)
    if (denom - total) <= denom * FEASIBILITY_TOL:
        raise ValueError("dominance holds; no witness exists")
    witness = _witness_from_cut(poset, reachable)
    if p.expect(witness) - q.expect(witness) <= 0:
        raise AssertionError("min-cut witness has non-positive gap")
    return witness


def witness_upper_set(poset: FinitePoset, witness: np.ndarray) -> UpperSet:
    """Wrap a 0/1 witness vector as an UpperSet value."""
    members = frozenset(poset.elements[i] for i in np.flatnonzero(witness > 0.5))
    return UpperSet(poset, members)
