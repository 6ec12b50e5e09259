"""Monte-Carlo association tests for samplers, with reproducible reports.

Replicates are drawn in fixed-size chunks, each chunk on its own derived
generator, so serial and threaded runs produce identical results and any
report is byte-reproducible from (config, seed). Verdicts can falsify an
association hypothesis; a "consistent" verdict is never a proof.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dissection import Dissection, gamma_counts

NA = "NA"
PA = "PA"
CAVEAT = (
    "A 'consistent' verdict means no significant violation was found; "
    "Monte-Carlo tests can falsify association but never prove it."
)
DEFAULT_QUANTILES = (0.25, 0.5, 0.75)
MIN_REPLICATES = 1000


def derived_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for a (seed, path) address, independent across addresses."""
    return np.random.default_rng([int(seed)] + [int(p) for p in path])


# ---------------------------------------------------------------------------
# Monotone score functions


@dataclass(frozen=True)
class ThresholdScore:
    """Indicator that one coordinate reaches a threshold."""

    coord: int
    threshold: float

    @property
    def support(self) -> tuple:
        return (self.coord,)

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        return (counts[:, self.coord] >= self.threshold).astype(float)

    def describe(self) -> str:
        return f"1{{n[{self.coord}]>={self.threshold:g}}}"


@dataclass(frozen=True)
class LinearScore:
    """Clipped nonnegative-weight linear score of several coordinates."""

    coords: tuple
    weights: tuple
    offset: float
    scale: float

    @property
    def support(self) -> tuple:
        return self.coords

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        s = counts[:, list(self.coords)] @ np.array(self.weights)
        return np.clip((s - self.offset) / self.scale, 0.0, 1.0)

    def describe(self) -> str:
        w = ",".join(f"{x:.3f}" for x in self.weights)
        return f"clip((w.n-{self.offset:.3f})/{self.scale:.3f}), w=[{w}]"


@dataclass(frozen=True)
class TestFunctionFamily:
    """Paired monotone bounded score functions with disjoint supports."""

    __test__ = False  # not a pytest class, despite the domain name

    pairs: tuple
    recipe: dict
    seed: int

    def __post_init__(self):
        for f, g in self.pairs:
            if set(f.support) & set(g.support):
                raise ValueError("paired scores must have disjoint supports")


def build_default_family(
    counts: np.ndarray,
    coords_j,
    coords_k,
    seed: int,
    size: int = 32,
    quantiles=DEFAULT_QUANTILES,
    n_linear: int = 3,
) -> TestFunctionFamily:
    """Threshold indicators at empirical quantiles plus random linear scores.

    Thresholds come from the sampled counts themselves; the nonnegative
    linear weights are drawn once from a seeded stream, so the family is a
    deterministic function of (counts, split, seed).
    """
    rng = derived_rng(seed, 2)

    def pool(coords):
        coords = list(coords)
        members = []
        for c in coords:
            for q in quantiles:
                members.append(ThresholdScore(c, float(np.quantile(counts[:, c], q))))
        for _ in range(n_linear):
            w = rng.random(len(coords))
            s_raw = counts[:, coords] @ w
            offset = float(np.quantile(s_raw, 0.5))
            scale = float(np.quantile(s_raw, 0.9)) - offset
            if scale <= 0:
                scale = 1.0
            members.append(LinearScore(tuple(coords), tuple(w), offset, scale))
        return members

    fs = pool(coords_j)
    gs = pool(coords_k)
    all_pairs = [(f, g) for f in fs for g in gs]
    if len(all_pairs) > size:
        order = rng.permutation(len(all_pairs))[:size]
        all_pairs = [all_pairs[i] for i in sorted(order)]
    recipe = {
        "kind": "default",
        "quantiles": list(quantiles),
        "n_linear": n_linear,
        "size": size,
        "coords_j": [int(c) for c in coords_j],
        "coords_k": [int(c) for c in coords_k],
    }
    return TestFunctionFamily(tuple(all_pairs), recipe, seed)


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class PairResult:
    pair_id: int
    f_desc: str
    g_desc: str
    estimate: float
    se: float
    z: float
    p: float
    p_corrected: float
    verdict: str
    se_method: str = "delta"


@dataclass(frozen=True)
class TestReport:
    """Outcome of one Monte-Carlo association test with full provenance."""

    __test__ = False  # not a pytest class, despite the domain name

    hypothesis: str
    verdict: str
    pairs: tuple
    replicates: int
    seed: int
    level: float
    family_recipe: dict
    metadata: dict = field(default_factory=dict)
    caveat: str = CAVEAT

    @property
    def violated(self) -> bool:
        return self.verdict == "violated"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["pair_id", "f_desc", "g_desc", "estimate", "se", "z", "p", "verdict"])
            for row in self.pairs:
                writer.writerow(
                    [
                        row.pair_id,
                        row.f_desc,
                        row.g_desc,
                        repr(row.estimate),
                        repr(row.se),
                        repr(row.z),
                        repr(row.p),
                        row.verdict,
                    ]
                )

    def summary(self) -> dict:
        return {
            "schema": 1,
            "hypothesis": self.hypothesis,
            "verdict": self.verdict,
            "replicates": self.replicates,
            "seed": self.seed,
            "level": self.level,
            "family_recipe": self.family_recipe,
            "metadata": self.metadata,
            "n_pairs": len(self.pairs),
            "n_violated": sum(1 for r in self.pairs if r.verdict == "violated"),
            "n_skipped": sum(1 for r in self.pairs if r.verdict == "skipped"),
            "caveat": self.caveat,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Replicate collection


def collect_counts(
    sampler,
    replicates: int,
    seed: int,
    dissection: Dissection | None = None,
    batch_sampler=None,
    chunk: int = 1024,
    workers: int = 1,
) -> np.ndarray:
    """Stack replicate count vectors, chunked over derived generators.

    ``sampler(rng)`` yields a point configuration (mapped through the
    dissection) or a plain value vector; ``batch_sampler(rng, m)`` can
    replace it with one vectorised call per chunk. Results are identical
    for any worker count at a fixed chunk size.
    """
    starts = list(range(0, replicates, chunk))

    def run_chunk(ci: int) -> np.ndarray:
        rng = derived_rng(seed, 1, ci)
        m = min(chunk, replicates - starts[ci])
        if batch_sampler is not None:
            arr = np.asarray(batch_sampler(rng, m), dtype=float)
            if arr.shape[0] != m:
                raise ValueError("batch sampler returned a wrong number of rows")
            return arr
        rows = []
        for _ in range(m):
            s = sampler(rng)
            if dissection is not None:
                rows.append(gamma_counts(s, dissection))
            else:
                rows.append(np.asarray(getattr(s, "values", s), dtype=float))
        return np.vstack(rows)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(run_chunk, range(len(starts))))
    else:
        blocks = [run_chunk(ci) for ci in range(len(starts))]
    return np.vstack(blocks)


def _one_sided_p(z: float, hypothesis: str) -> float:
    # NA is violated by significantly positive covariance, PA by negative.
    if hypothesis == NA:
        return 0.5 * math.erfc(z / math.sqrt(2.0))
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _block_jackknife_se(fv, gv, blocks: int = 50) -> float:
    r = len(fv)
    blocks = min(blocks, r)
    edges = np.linspace(0, r, blocks + 1).astype(int)
    sf, sg, sfg = fv.sum(), gv.sum(), (fv * gv).sum()
    estimates = []
    for b in range(blocks):
        lo, hi = edges[b], edges[b + 1]
        m = r - (hi - lo)
        if m == 0:
            continue
        bf = fv[lo:hi].sum()
        bg = gv[lo:hi].sum()
        bfg = (fv[lo:hi] * gv[lo:hi]).sum()
        estimates.append((sfg - bfg) / m - (sf - bf) * (sg - bg) / m**2)
    estimates = np.asarray(estimates)
    b = len(estimates)
    return float(np.sqrt((b - 1) / b * ((estimates - estimates.mean()) ** 2).sum()))


def evaluate_pairs(counts: np.ndarray, family: TestFunctionFamily, hypothesis: str, level: float):
    """Covariance estimate, standard error and one-sided test per pair."""
    raw = []
    for pid, (f, g) in enumerate(family.pairs):
        fv = f(counts)
        gv = g(counts)
        if fv.std() == 0.0 or gv.std() == 0.0:
            raw.append((pid, f, g, None))
            continue
        r = len(fv)
        est = float((fv * gv).mean() - fv.mean() * gv.mean())
        prod = (fv - fv.mean()) * (gv - gv.mean())
        se_delta = float(prod.std(ddof=1) / math.sqrt(r))
        se_jack = _block_jackknife_se(fv, gv)
        method = "delta"
        se = se_delta
        if se_delta <= 0 or not math.isfinite(se_delta):
            se, method = se_jack, "jackknife"
        elif se_jack > 0 and not (1 / 3 <= se_delta / se_jack <= 3):
            se, method = se_jack, "jackknife"
        raw.append((pid, f, g, (est, se, method)))

    tested = [r for r in raw if r[3] is not None and r[3][1] > 0]
    m = max(len(tested), 1)
    results = []
    for pid, f, g, stats in raw:
        if stats is None or stats[1] <= 0:
            results.append(
                PairResult(pid, f.describe(), g.describe(), math.nan, math.nan, math.nan,
                           math.nan, math.nan, "skipped")
            )
            continue
        est, se, method = stats
        z = est / se
        p = _one_sided_p(z, hypothesis)
        p_corr = min(1.0, p * m)
        verdict = "violated" if p_corr < level else "consistent"
        results.append(PairResult(pid, f.describe(), g.describe(), est, se, z, p, p_corr, verdict, method))
    return results


def test_counts(
    counts: np.ndarray,
    split,
    hypothesis: str = NA,
    level: float = 0.01,
    seed: int = 0,
    family: TestFunctionFamily | None = None,
    family_size: int = 32,
    metadata: dict | None = None,
    replicates: int | None = None,
) -> TestReport:
    """Run the association test on an already assembled count matrix."""
    if hypothesis not in (NA, PA):
        raise ValueError(f"hypothesis must be 'NA' or 'PA', got {hypothesis!r}")
    coords_j, coords_k = [list(map(int, c)) for c in split]
    if hypothesis == NA and set(coords_j) & set(coords_k):
        raise ValueError("NA split must use disjoint coordinate sets")
    if family is None:
        family = build_default_family(counts, coords_j, coords_k, seed, size=family_size)
    pairs = evaluate_pairs(counts, family, hypothesis, level)
    verdict = "violated" if any(r.verdict == "violated" for r in pairs) else "consistent"
    meta = dict(metadata or {})
    meta.setdefault("split_j", coords_j)
    meta.setdefault("split_k", coords_k)
    return TestReport(
        hypothesis=hypothesis,
        verdict=verdict,
        pairs=tuple(pairs),
        replicates=int(replicates if replicates is not None else len(counts)),
        seed=seed,
        level=level,
        family_recipe=family.recipe,
        metadata=meta,
    )


test_counts.__test__ = False  # library function, not a pytest item


def mc_association_test(
    sampler,
    split,
    replicates: int,
    hypothesis: str = NA,
    dissection: Dissection | None = None,
    level: float = 0.01,
    seed: int = 0,
    family: TestFunctionFamily | None = None,
    family_size: int = 32,
    batch_sampler=None,
    chunk: int = 1024,
    workers: int = 1,
    metadata: dict | None = None,
) -> TestReport:
    """Estimate score-pair covariances over replicates and test the hypothesis.

    A negative-association test is violated when some Bonferroni-corrected
    one-sided test finds a covariance significantly above zero (positive
    association: significantly below). Replicate streams are derived from
    (seed, chunk index); identical inputs give byte-identical reports.
    """
    if replicates < MIN_REPLICATES:
        raise ValueError(f"at least {MIN_REPLICATES} replicates required")
    counts = collect_counts(
        sampler, replicates, seed,
        dissection=dissection, batch_sampler=batch_sampler, chunk=chunk, workers=workers,
    )
    meta = dict(metadata or {})
    meta.setdefault("chunk", chunk)
    if dissection is not None:
        meta.setdefault("dissection_depth", dissection.depth)
    return test_counts(
        counts, split, hypothesis, level, seed, family, family_size, meta, replicates
    )


# ---------------------------------------------------------------------------
# Harnesses


@dataclass(frozen=True)
class TruncationReport:
    levels: tuple
    reports: tuple
    stable: bool


def truncation_stability_test(
    sampler_factory,
    levels,
    hypothesis: str = NA,
    replicates: int = 10_000,
    seed: int = 0,
    level: float = 0.01,
    split_rule=None,
    family_size: int = 32,
) -> TruncationReport:
    """Association verdicts across nested index-set truncations.

    ``sampler_factory(m)`` yields a sampler of the first m coordinates;
    verdict stability across truncation levels is the finite-to-countable
    direction exercised empirically.
    """
    reports = []
    for m in levels:
        if split_rule is not None:
            coords_j, coords_k = split_rule(m)
        else:
            coords_j = list(range(m // 2))
            coords_k = list(range(m // 2, m))
        rep = mc_association_test(
            sampler_factory(m),
            (coords_j, coords_k),
            replicates,
            hypothesis=hypothesis,
            level=level,
            seed=seed,
            family_size=family_size,
            metadata={"truncation": int(m)},
        )
        reports.append(rep)
    verdicts = {r.verdict for r in reports}
    return TruncationReport(tuple(int(m) for m in levels), tuple(reports), len(verdicts) == 1)


@dataclass(frozen=True)
class StageResult:
    label: str
    report: TestReport
    mean_error: float
    var_error: float
    mean_band: float
    var_band: float

    @property
    def moments_ok(self) -> bool:
        return self.mean_error <= self.mean_band and self.var_error <= self.var_band


@dataclass(frozen=True)
class ConvergenceReport:
    stages: tuple
    target_report: TestReport
    verdicts_agree: bool

    @property
    def moments_ok(self) -> bool:
        return all(s.moments_ok for s in self.stages)


def weak_convergence_harness(
    stage_samplers,
    target_sampler,
    dissection: Dissection,
    hypothesis: str = NA,
    replicates: int = 10_000,
    seed: int = 0,
    level: float = 0.01,
    split=None,
    moment_atol=0.0,
    family_size: int = 32,
) -> ConvergenceReport:
    """Test a sampler sequence against its weak limit.

    For each stage: count-vector first and second moments must match the
    target within ``atol + 4 * se`` bands, and the association verdict must
    agree along the sequence and at the limit. ``stage_samplers`` is a list
    of (label, sampler) pairs; ``moment_atol`` may be a scalar or a mapping
    from label to the model-specific approximation allowance.
    """
    n = dissection.n_boxes
    if split is None:
        split = (list(range(n // 2)), list(range(n // 2, n)))

    target_counts = collect_counts(target_sampler, replicates, seed, dissection=dissection)
    t_mean = target_counts.mean(axis=0)
    t_var = target_counts.var(axis=0, ddof=1)
    t_mean_se = target_counts.std(axis=0, ddof=1) / math.sqrt(replicates)
    t_var_se = _moment_se(target_counts**2)
    target_report = test_counts(
        target_counts, split, hypothesis, level, seed, family_size=family_size,
        metadata={"stage": "target"}, replicates=replicates,
    )

    stages = []
    for si, (label, sampler) in enumerate(stage_samplers):
        counts = collect_counts(sampler, replicates, seed, dissection=dissection)
        atol = moment_atol.get(label, 0.0) if isinstance(moment_atol, dict) else float(moment_atol)
        mean_se = counts.std(axis=0, ddof=1) / math.sqrt(replicates)
        var_se = _moment_se(counts**2)
        mean_err = float(np.abs(counts.mean(axis=0) - t_mean).max())
        var_err = float(np.abs(counts.var(axis=0, ddof=1) - t_var).max())
        mean_band = float(atol + 4 * np.sqrt(mean_se**2 + t_mean_se**2).max())
        var_band = float(atol + 4 * np.sqrt(var_se**2 + t_var_se**2).max())
        report = test_counts(
            counts, split, hypothesis, level, seed, family_size=family_size,
            metadata={"stage": str(label)}, replicates=replicates,
        )
        stages.append(StageResult(str(label), report, mean_err, var_err, mean_band, var_band))
    verdicts = {s.report.verdict for s in stages} | {target_report.verdict}
    return ConvergenceReport(tuple(stages), target_report, len(verdicts) == 1)


def _moment_se(values: np.ndarray) -> np.ndarray:
    return values.std(axis=0, ddof=1) / math.sqrt(len(values))
