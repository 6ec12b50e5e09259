"""Config-driven experiment execution: artifacts on disk, CI-friendly exits."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .dissection import dyadic_dissection, gamma_counts
from .mctest import TestReport, collect_counts, test_counts

EXIT_CONSISTENT = 0
EXIT_ERROR = 1
EXIT_VIOLATED = 2

OUTPUT_DIR_ENV = "ASSOCLAB_OUT"


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    report: TestReport
    paths: tuple


def output_dir(config_dir: str | None, override: str | None = None) -> Path:
    chosen = override or config_dir or os.environ.get(OUTPUT_DIR_ENV, ".")
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run(config: ExperimentConfig, out_dir: str | None = None, figures: bool | None = None) -> RunResult:
    """Execute one configured association test and write its artifacts.

    Writes the per-pair report CSV and a JSON summary echoing the full
    config; optionally raw samples and report figures. Exit code 0 means
    the hypothesis was consistent with the data, 2 that it was violated.
    """
    diss = None
    if config.window is not None:
        diss = dyadic_dissection(config.window, config.dissection_depth)
    counts = collect_counts(
        config.process.sampler,
        config.replicates,
        config.seed,
        dissection=diss,
        batch_sampler=config.process.batch_sampler,
        chunk=config.chunk,
        workers=config.workers,
    )
    report = test_counts(
        counts,
        config.split,
        hypothesis=config.hypothesis,
        level=config.level,
        seed=config.seed,
        family_size=config.family_size,
        metadata={"config": config.raw, "chunk": config.chunk},
        replicates=config.replicates,
    )
    out = output_dir(config.output_dir, out_dir)
    prefix = config.output_prefix
    csv_path = out / f"{prefix}_report.csv"
    json_path = out / f"{prefix}_summary.json"
    report.to_csv(csv_path)
    report.to_json(json_path)
    paths = [csv_path, json_path]
    if config.write_samples:
        samples_path = out / f"{prefix}_counts.csv"
        _write_counts_csv(samples_path, counts)
        paths.append(samples_path)
    if figures if figures is not None else config.write_figures:
        from .plots import render_report_figures

        paths.extend(render_report_figures(csv_path, out, prefix))
    code = EXIT_VIOLATED if report.violated else EXIT_CONSISTENT
    return RunResult(code, report, tuple(paths))


def _write_counts_csv(path, counts: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate_id"] + [f"count_{i}" for i in range(counts.shape[1])])
        for rid, row in enumerate(counts):
            writer.writerow([rid] + [repr(float(v)) for v in row])


def write_sample_csv(path_or_handle, configs) -> None:
    """Point samples as CSV blocks: replicate_id, coordinates, weight."""
    own = isinstance(path_or_handle, (str, Path))
    fh = open(path_or_handle, "w", newline="", encoding="utf-8") if own else path_or_handle
    try:
        writer = csv.writer(fh)
        first = configs[0] if configs else None
        d = first.window.dimension if first is not None else 0
        writer.writerow(["replicate_id"] + [f"x{i + 1}" for i in range(d)] + ["weight"])
        for rid, cfg in enumerate(configs):
            weights = cfg.effective_weights()
            for pt, w in zip(cfg.points, weights):
                writer.writerow([rid] + [repr(float(x)) for x in pt] + [repr(float(w))])
    finally:
        if own:
            fh.close()


def run_file(path, out_dir: str | None = None, figures: bool | None = None) -> RunResult:
    config = ExperimentConfig.from_json(path)
    return run(config, out_dir=out_dir, figures=figures)
