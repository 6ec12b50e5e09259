"""Experiment configuration: strict JSON schema and sampler construction.

Configs are versioned; unknown fields are errors rather than warnings so a
stored config always reproduces the run that wrote it.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import measures
from .dissection import dyadic_dissection
from .fields import CovarianceSpec, ExclusionSpec, sample_dirichlet_sequence, sample_gaussian_field, sample_multinomial, simulate_exclusion
from .geometry import Window

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending field."""


def _require(d: dict, key: str, ctx: str):
    if key not in d:
        raise ConfigError(f"{ctx}: missing required field '{key}'")
    return d[key]


def _check_keys(d: dict, allowed, ctx: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{ctx}: unknown field(s) {sorted(unknown)}")


def _positive_int(value, ctx: str, minimum: int = 1) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{ctx}: expected an integer >= {minimum}, got {value!r}")
    return value


def _number(value, ctx: str):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ConfigError(f"{ctx}: expected a finite number, got {value!r}")
    return float(value)


def parse_window(raw, ctx: str = "window") -> Window:
    _check_keys(raw, {"bounds"}, ctx)
    bounds = _require(raw, "bounds", ctx)
    try:
        return Window(tuple((float(lo), float(hi)) for lo, hi in bounds))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{ctx}: {exc}") from exc


def _mixing_sampler(raw: dict, ctx: str):
    kind = _require(raw, "kind", ctx)
    if kind == "fixed":
        _check_keys(raw, {"kind", "value"}, ctx)
        v = _number(_require(raw, "value", ctx), ctx)
        if v < 0:
            raise ConfigError(f"{ctx}: mixing value must be nonnegative")
        return lambda rng: v
    if kind == "two_point":
        _check_keys(raw, {"kind", "values", "probs"}, ctx)
        values = [_number(v, ctx) for v in _require(raw, "values", ctx)]
        probs = [_number(p, ctx) for p in _require(raw, "probs", ctx)]
        if len(values) != len(probs) or abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0:
            raise ConfigError(f"{ctx}: values/probs must align and probs sum to 1")
        values_arr = np.array(values)
        probs_arr = np.array(probs)
        return lambda rng: float(values_arr[rng.choice(len(values_arr), p=probs_arr)])
    if kind == "gamma":
        _check_keys(raw, {"kind", "shape", "scale"}, ctx)
        shape = _number(_require(raw, "shape", ctx), ctx)
        scale = _number(_require(raw, "scale", ctx), ctx)
        return lambda rng: float(rng.gamma(shape, scale))
    if kind == "uniform":
        _check_keys(raw, {"kind", "low", "high"}, ctx)
        low = _number(_require(raw, "low", ctx), ctx)
        high = _number(_require(raw, "high", ctx), ctx)
        return lambda rng: float(rng.uniform(low, high))
    raise ConfigError(f"{ctx}: unknown mixing kind {kind!r}")


MEASURE_KINDS = {
    "poisson", "mixed_poisson", "cox_dirichlet", "cluster", "mixed_sampled",
    "binomial_thinning", "dpp", "ginibre", "permanental", "dirichlet_process",
    "area_interaction",
}
FIELD_KINDS = {"gaussian_field", "dirichlet_sequence", "multinomial", "exclusion"}


@dataclass(frozen=True)
class BuiltProcess:
    mode: str  # "measure" or "field"
    sampler: object = None
    batch_sampler: object = None
    n_coords: int | None = None
    chunk_override: int | None = None


def build_process(raw: dict, window: Window | None, depth: int | None = None) -> BuiltProcess:
    """Turn the tagged process spec into a per-replicate sampler."""
    ctx = "process"
    kind = _require(raw, "kind", ctx)
    ctx = f"process[{kind}]"

    if kind == "poisson":
        _check_keys(raw, {"kind", "rate"}, ctx)
        rate = _number(_require(raw, "rate", ctx), ctx)
        if rate < 0:
            raise ConfigError(f"{ctx}: rate must be nonnegative")
        return BuiltProcess("measure", lambda rng: measures.sample_poisson(rate, window, rng))

    if kind == "mixed_poisson":
        _check_keys(raw, {"kind", "rate", "mixing"}, ctx)
        rate = _number(_require(raw, "rate", ctx), ctx)
        mixing = _mixing_sampler(_require(raw, "mixing", ctx), f"{ctx}.mixing")
        return BuiltProcess(
            "measure", lambda rng: measures.sample_mixed_poisson(mixing, rate, window, rng)
        )

    if kind == "cox_dirichlet":
        _check_keys(raw, {"kind", "total_mass", "scale", "truncation"}, ctx)
        total = _number(_require(raw, "total_mass", ctx), ctx)
        scale = _number(raw.get("scale", 1.0), ctx)
        trunc = _positive_int(raw.get("truncation", 1000), ctx)
        directing = lambda rng: measures.sample_dirichlet_process(
            total, window, rng, truncation=trunc
        ).scaled(scale)
        return BuiltProcess("measure", lambda rng: measures.sample_cox(directing, rng))

    if kind == "cluster":
        _check_keys(raw, {"kind", "parent_rate", "offspring_mean", "offspring_sd", "edge"}, ctx)
        parent_rate = _number(_require(raw, "parent_rate", ctx), ctx)
        mu_c = _number(_require(raw, "offspring_mean", ctx), ctx)
        sd = _number(_require(raw, "offspring_sd", ctx), ctx)
        edge = raw.get("edge", "wrap")
        d = window.dimension

        def offspring(rng):
            m = rng.poisson(mu_c)
            return rng.normal(0.0, sd, size=(m, d))

        return BuiltProcess(
            "measure",
            lambda rng: measures.sample_cluster(parent_rate, offspring, window, rng, edge=edge),
        )

    if kind == "mixed_sampled":
        _check_keys(raw, {"kind", "tau_pmf", "allow_non_ulc"}, ctx)
        pmf = np.array([_number(p, ctx) for p in _require(raw, "tau_pmf", ctx)])
        waive = bool(raw.get("allow_non_ulc", False))
        if not waive and not measures.is_ultra_log_concave(pmf):
            raise ConfigError(f"{ctx}: count pmf is not ultra log-concave (set allow_non_ulc to waive)")
        return BuiltProcess(
            "measure",
            lambda rng: measures.sample_mixed_sampled(pmf, window, rng, allow_non_ulc=waive),
        )

    if kind == "binomial_thinning":
        _check_keys(raw, {"kind", "rate", "n"}, ctx)
        rate = _number(_require(raw, "rate", ctx), ctx)
        n = _positive_int(_require(raw, "n", ctx), ctx)
        p = rate * window.volume / n
        if p > 1:
            raise ConfigError(f"{ctx}: keep probability {p} exceeds 1; increase n")
        from scipy.stats import binom

        pmf = binom.pmf(np.arange(n + 1), n, p)
        pmf = pmf / pmf.sum()
        return BuiltProcess(
            "measure", lambda rng: measures.sample_mixed_sampled(pmf, window, rng)
        )

    if kind == "dpp":
        _check_keys(raw, {"kind", "kernel", "kernel_csv", "points"}, ctx)
        if "kernel_csv" in raw:
            kernel = measures.load_kernel_csv(raw["kernel_csv"])
        else:
            entries = _require(raw, "kernel", ctx)
            mat = np.array(
                [[complex(e[0], e[1]) for e in row] for row in entries], dtype=complex
            )
            kernel = measures.KernelMatrix(mat)
        points = np.array(_require(raw, "points", ctx), dtype=float)
        return BuiltProcess(
            "measure",
            lambda rng: measures.sample_dpp_finite(kernel, points, rng, window=window),
        )

    if kind == "ginibre":
        _check_keys(raw, {"kind", "n"}, ctx)
        n = _positive_int(_require(raw, "n", ctx), ctx)

        def sampler(rng):
            config = measures.sample_ginibre_finite(n, rng)
            keep = window.contains(config.points)
            return measures.PointConfiguration(window, config.points[keep])

        return BuiltProcess("measure", sampler)

    if kind == "permanental":
        _check_keys(raw, {"kind", "k", "grid_depth", "cell_mass", "sigma2"}, ctx)
        k = _positive_int(_require(raw, "k", ctx), ctx)
        depth = _positive_int(_require(raw, "grid_depth", ctx), ctx, minimum=0)
        cell_mass = _number(_require(raw, "cell_mass", ctx), ctx)
        sigma2 = _number(raw.get("sigma2", 1.0), ctx)
        grid = dyadic_dissection(window, depth)
        base = measures.GriddedMeasure(grid, np.full(grid.n_boxes, cell_mass))
        spec = CovarianceSpec(np.zeros(grid.n_boxes), sigma2 * np.eye(grid.n_boxes))
        return BuiltProcess(
            "measure", lambda rng: measures.sample_permanental(k, spec, base, rng)
        )

    if kind == "dirichlet_process":
        _check_keys(raw, {"kind", "total_mass", "truncation"}, ctx)
        total = _number(_require(raw, "total_mass", ctx), ctx)
        trunc = _positive_int(raw.get("truncation", 1000), ctx)
        return BuiltProcess(
            "measure",
            lambda rng: measures.sample_dirichlet_process(total, window, rng, truncation=trunc),
        )

    if kind == "area_interaction":
        _check_keys(raw, {"kind", "beta", "alpha", "r", "burn_in", "thinning", "darts"}, ctx)
        spec = measures.GibbsSpec(
            _number(_require(raw, "beta", ctx), ctx),
            _number(_require(raw, "alpha", ctx), ctx),
            _number(_require(raw, "r", ctx), ctx),
            window,
        )
        burn_in = _positive_int(raw.get("burn_in", 100_000), ctx, minimum=0)
        thinning = _positive_int(raw.get("thinning", 1_000), ctx)
        darts = _positive_int(raw.get("darts", 10_000), ctx)
        diss = dyadic_dissection(window, depth)

        def batch(rng, m):
            from .dissection import gamma_counts

            chain = measures.area_interaction_chain(
                spec, rng, m, burn_in=burn_in, thinning=thinning, darts=darts,
                check_convergence=False,
            )
            return np.vstack([gamma_counts(c, diss) for c in chain])

        # Thinned states of one trajectory, so replicates must stay in a
        # single chunk rather than restart the chain per chunk.
        return BuiltProcess("measure", batch_sampler=batch, chunk_override=10**9)

    if kind == "gaussian_field":
        _check_keys(raw, {"kind", "mean", "cov"}, ctx)
        spec = CovarianceSpec(
            np.array(_require(raw, "mean", ctx), dtype=float),
            np.array(_require(raw, "cov", ctx), dtype=float),
        )
        return BuiltProcess(
            "field",
            lambda rng: sample_gaussian_field(spec, rng),
            n_coords=spec.dimension,
        )

    if kind == "dirichlet_sequence":
        _check_keys(raw, {"kind", "alpha", "truncation"}, ctx)
        alpha = np.array([_number(a, ctx) for a in _require(raw, "alpha", ctx)])
        trunc = _positive_int(raw.get("truncation", len(alpha)), ctx)
        return BuiltProcess(
            "field",
            lambda rng: sample_dirichlet_sequence(alpha, trunc, rng),
            n_coords=trunc,
        )

    if kind == "multinomial":
        _check_keys(raw, {"kind", "n", "probs"}, ctx)
        n = _positive_int(_require(raw, "n", ctx), ctx, minimum=0)
        probs = np.array([_number(p, ctx) for p in _require(raw, "probs", ctx)])
        return BuiltProcess(
            "field", lambda rng: sample_multinomial(n, probs, rng), n_coords=len(probs)
        )

    if kind == "exclusion":
        _check_keys(raw, {"kind", "sites", "p", "alpha", "horizon"}, ctx)
        n_sites = _positive_int(_require(raw, "sites", ctx), ctx)
        spec = ExclusionSpec(
            list(range(n_sites)),
            np.array(_require(raw, "p", ctx), dtype=float),
            np.array(_require(raw, "alpha", ctx), dtype=float)
            if isinstance(raw["alpha"], list)
            else _number(raw["alpha"], ctx),
            _number(_require(raw, "horizon", ctx), ctx),
        )
        return BuiltProcess(
            "field", lambda rng: simulate_exclusion(spec, rng), n_coords=n_sites
        )

    raise ConfigError(f"process: unknown kind {kind!r}")


TOP_KEYS = {
    "schema", "seed", "replicates", "hypothesis", "level", "process", "window",
    "dissection_depth", "split", "family", "chunk", "workers", "output",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description, kept alongside its raw JSON echo."""

    raw: dict
    seed: int
    replicates: int
    hypothesis: str
    level: float
    process: BuiltProcess
    window: Window | None
    dissection_depth: int | None
    split: tuple
    family_size: int
    family_quantiles: tuple
    chunk: int
    workers: int
    output_dir: str | None
    output_prefix: str
    write_samples: bool
    write_figures: bool

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        _check_keys(raw, TOP_KEYS, "config")
        schema = _require(raw, "schema", "config")
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"config: unsupported schema version {schema!r}")
        seed = _positive_int(_require(raw, "seed", "config"), "config.seed", minimum=0)
        replicates = _positive_int(_require(raw, "replicates", "config"), "config.replicates")
        hypothesis = _require(raw, "hypothesis", "config")
        if hypothesis not in ("NA", "PA"):
            raise ConfigError(f"config.hypothesis: must be 'NA' or 'PA', got {hypothesis!r}")
        level = _number(raw.get("level", 0.01), "config.level")
        if not 0 < level < 1:
            raise ConfigError("config.level: must lie in (0, 1)")

        process_raw = _require(raw, "process", "config")
        kind = _require(process_raw, "kind", "process")
        window = None
        depth = None
        if kind in MEASURE_KINDS:
            window = parse_window(_require(raw, "window", "config"), "config.window")
            depth = _positive_int(
                _require(raw, "dissection_depth", "config"), "config.dissection_depth", minimum=0
            )
        elif kind in FIELD_KINDS:
            if "window" in raw or "dissection_depth" in raw:
                raise ConfigError(
                    f"config: field process {kind!r} takes no window or dissection_depth"
                )
        else:
            raise ConfigError(f"process: unknown kind {kind!r}")
        process = build_process(process_raw, window, depth)

        split_raw = _require(raw, "split", "config")
        _check_keys(split_raw, {"j", "k"}, "config.split")
        split_j = [int(i) for i in _require(split_raw, "j", "config.split")]
        split_k = [int(i) for i in _require(split_raw, "k", "config.split")]
        n_coords = (1 << (depth * window.dimension)) if window is not None else process.n_coords
        for name, idxs in (("j", split_j), ("k", split_k)):
            if any(i < 0 or i >= n_coords for i in idxs):
                raise ConfigError(f"config.split.{name}: index out of range for {n_coords} coordinates")
        if hypothesis == "NA" and set(split_j) & set(split_k):
            raise ConfigError("config.split: NA requires disjoint j and k")

        family_raw = raw.get("family", {})
        _check_keys(family_raw, {"size", "quantiles"}, "config.family")
        family_size = _positive_int(family_raw.get("size", 32), "config.family.size")
        quantiles = tuple(
            _number(q, "config.family.quantiles") for q in family_raw.get("quantiles", (0.25, 0.5, 0.75))
        )

        chunk = _positive_int(raw.get("chunk", 1024), "config.chunk")
        if process.chunk_override is not None:
            chunk = max(chunk, replicates)
        # worker pool defaults to available parallelism; chunked streams make
        # the output identical for any worker count
        workers = _positive_int(raw.get("workers", os.cpu_count() or 1), "config.workers")

        output_raw = raw.get("output", {})
        _check_keys(output_raw, {"dir", "prefix", "samples", "figures"}, "config.output")
        return cls(
            raw=raw,
            seed=seed,
            replicates=replicates,
            hypothesis=hypothesis,
            level=level,
            process=process,
            window=window,
            dissection_depth=depth,
            split=(split_j, split_k),
            family_size=family_size,
            family_quantiles=quantiles,
            chunk=chunk,
            workers=workers,
            output_dir=output_raw.get("dir"),
            output_prefix=output_raw.get("prefix", "experiment"),
            write_samples=bool(output_raw.get("samples", False)),
            write_figures=bool(output_raw.get("figures", False)),
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON ({exc})") from exc
        return cls.from_dict(raw)
