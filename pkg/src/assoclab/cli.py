"""Command-line interface: sampling, association tests, dominance, BK checks.

Exit codes are uniform across subcommands so CI can gate on them:
0 = hypothesis consistent / property holds, 2 = violated / fails,
1 = configuration or execution error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import measures
from .config import ConfigError, ExperimentConfig, parse_window
from .dissection import dyadic_dissection
from .dominance import NotDominatedError, construct_coupling, dominance_witness, dominates
from .mctest import weak_convergence_harness
from .oracles import JointPmf, bk_check, exact_association_check
from .order import DiscreteDistribution, FinitePoset, load_poset, product_poset
from .runner import (
    EXIT_CONSISTENT,
    EXIT_ERROR,
    EXIT_VIOLATED,
    output_dir,
    run,
    write_sample_csv,
)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_pmf_file(path) -> tuple[JointPmf, list, str]:
    """Joint pmf JSON: factors (chains/antichains/custom), flat probs, defaults."""
    raw = _load_json(path)
    factors = []
    for spec in raw["factors"]:
        kind = spec.get("kind", "chain")
        if kind == "chain":
            factors.append(FinitePoset.chain(range(int(spec["size"]))))
        elif kind == "antichain":
            factors.append(FinitePoset.antichain(range(int(spec["size"]))))
        elif kind == "custom":
            factors.append(FinitePoset.from_covers(spec["elements"], spec["covers"]))
        else:
            raise ConfigError(f"pmf factors: unknown kind {kind!r}")
    pmf = JointPmf(product_poset(factors), np.array(raw["probs"], dtype=float))
    split = [int(i) for i in raw.get("split_j", [0])]
    hyp = raw.get("hypothesis", "NA")
    return pmf, split, hyp


def load_mass_csv(path, poset: FinitePoset) -> DiscreteDistribution:
    """Mass vector CSV: either ``label,mass`` rows or bare masses in order."""
    values = {}
    bare = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "," in line:
                label, mass = line.rsplit(",", 1)
                values[label.strip()] = float(mass)
            else:
                bare.append(float(line))
    if values and bare:
        raise ConfigError("mass file mixes labelled and bare rows")
    if values:
        try:
            mass = [values[str(e)] for e in poset.elements]
        except KeyError as exc:
            raise ConfigError(f"mass file is missing element {exc}") from exc
    else:
        if len(bare) != poset.n:
            raise ConfigError(f"expected {poset.n} masses, got {len(bare)}")
        mass = bare
    return DiscreteDistribution(poset, np.array(mass))


def _provenance_lines(**kv) -> list[str]:
    return [f"# {k}={v}" for k, v in kv.items()]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    config = ExperimentConfig.from_dict(raw)
    result = run(config, out_dir=args.out, figures=True if args.figures else None)
    print(f"verdict: {result.report.verdict}")
    for path in result.paths:
        print(f"wrote {path}")
    return result.exit_code


def cmd_sample(args) -> int:
    window = parse_window(json.loads(args.window)) if args.window else None
    rng = np.random.default_rng(args.seed)
    configs = []
    for _ in range(args.replicates):
        if args.process == "poisson":
            if args.rate is None:
                raise ConfigError("sample: --rate required for the poisson process")
            w = window or measures.Window.unit(2)
            configs.append(measures.sample_poisson(args.rate, w, rng))
        elif args.process == "ginibre":
            if args.n is None:
                raise ConfigError("sample: --n required for the ginibre process")
            configs.append(measures.sample_ginibre_finite(args.n, rng))
        elif args.process == "dirichlet-process":
            if args.total_mass is None:
                raise ConfigError("sample: --total-mass required for the dirichlet process")
            w = window or measures.Window.unit(2)
            configs.append(
                measures.sample_dirichlet_process(
                    args.total_mass, w, rng, truncation=args.truncation
                )
            )
        else:
            raise ConfigError(f"sample: unknown process {args.process!r}")
    header = _provenance_lines(
        process=args.process, seed=args.seed, replicates=args.replicates
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(header) + "\n")
            write_sample_csv(fh, configs)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write("\n".join(header) + "\n")
        write_sample_csv(sys.stdout, configs)
    return EXIT_CONSISTENT


def cmd_exact_check(args) -> int:
    pmf, split, hyp = load_pmf_file(args.pmf)
    if args.split is not None:
        split = [int(t) for t in args.split.split(",") if t != ""]
    if args.hypothesis is not None:
        hyp = args.hypothesis
    result = exact_association_check(pmf, split, hyp)
    if result.holds:
        print(f"{hyp}: holds")
        return EXIT_CONSISTENT
    w = result.witness
    print(
        f"{hyp}: violated (upper sets {sorted(map(str, w.upper_j))} / "
        f"{sorted(map(str, w.upper_k))}, covariance {w.covariance:+.6g})"
    )
    return EXIT_VIOLATED


def cmd_dominance(args) -> int:
    poset = load_poset(args.poset)
    p = load_mass_csv(args.p, poset)
    q = load_mass_csv(args.q, poset)
    header = _provenance_lines(poset=args.poset, p=args.p, q=args.q, seed=args.seed)
    if dominates(p, q, poset):
        coupling = construct_coupling(p, q, poset)
        print("dominates: true")
        lines = header + [",".join([""] + [str(e) for e in poset.elements])]
        for i, e in enumerate(poset.elements):
            lines.append(",".join([str(e)] + [repr(float(v)) for v in coupling.joint[i]]))
        text = "\n".join(lines) + "\n"
        if args.out:
            path = Path(args.out)
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path}")
        else:
            sys.stdout.write(text)
        return EXIT_CONSISTENT
    witness = dominance_witness(p, q, poset)
    gap = p.expect(witness) - q.expect(witness)
    print(f"dominates: false (witness gap {gap:.6g})")
    lines = header + ["element,f"]
    for e, v in zip(poset.elements, witness):
        lines.append(f"{e},{v:g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        path = Path(args.out)
        path.write_text(text, encoding="utf-8")
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return EXIT_VIOLATED


def cmd_bk_check(args) -> int:
    raw = _load_json(args.pmf)
    result = bk_check(np.array(raw["probs"], dtype=float))
    if result.holds:
        print("BK: holds")
        return EXIT_CONSISTENT
    w = result.witness
    print(
        f"BK: violated (P(A box B)={w.box_probability:.6g} > "
        f"P(A)P(B)={w.product_bound:.6g})"
    )
    return EXIT_VIOLATED


def cmd_converge(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    seed = int(raw["seed"])
    hypothesis = raw.get("hypothesis", "NA")
    replicates = int(raw["replicates"])
    level = float(raw.get("level", 0.01))
    window = parse_window(raw["window"])
    diss = dyadic_dissection(window, int(raw["dissection_depth"]))
    seq = raw["sequence"]
    if seq["kind"] != "binomial_thinning":
        raise ConfigError(f"converge: unsupported sequence kind {seq['kind']!r}")
    rate = float(seq["rate"])
    stages = []
    from .config import build_process

    for n in seq["stages"]:
        built = build_process(
            {"kind": "binomial_thinning", "rate": rate, "n": int(n)}, window
        )
        stages.append((str(n), built.sampler))
    target_built = build_process(dict(raw["target"]), window)
    atol = raw.get("moment_atol", 0.0)
    if isinstance(atol, dict):
        atol = {str(k): float(v) for k, v in atol.items()}
    report = weak_convergence_harness(
        stages,
        target_built.sampler,
        diss,
        hypothesis=hypothesis,
        replicates=replicates,
        seed=seed,
        level=level,
        moment_atol=atol,
    )
    out = output_dir(raw.get("output", {}).get("dir"), args.out)
    prefix = raw.get("output", {}).get("prefix", "converge")
    summary = {
        "schema": 1,
        "seed": seed,
        "config": raw,
        "verdicts_agree": report.verdicts_agree,
        "moments_ok": report.moments_ok,
        "target_verdict": report.target_report.verdict,
        "stages": [
            {
                "label": s.label,
                "verdict": s.report.verdict,
                "mean_error": s.mean_error,
                "mean_band": s.mean_band,
                "var_error": s.var_error,
                "var_band": s.var_band,
            }
            for s in report.stages
        ],
    }
    json_path = out / f"{prefix}_summary.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths = [json_path]
    for s in report.stages:
        p = out / f"{prefix}_stage_{s.label}_report.csv"
        s.report.to_csv(p)
        paths.append(p)
    target_path = out / f"{prefix}_target_report.csv"
    report.target_report.to_csv(target_path)
    paths.append(target_path)
    for s in report.stages:
        print(
            f"stage {s.label}: verdict={s.report.verdict} "
            f"mean_error={s.mean_error:.4g} (band {s.mean_band:.4g})"
        )
    print(f"target: verdict={report.target_report.verdict}")
    for p in paths:
        print(f"wrote {p}")
    if args.figures:
        from .plots import render_report_figures

        for s in report.stages:
            render_report_figures(out / f"{prefix}_stage_{s.label}_report.csv", out)
    violated = report.target_report.violated or any(s.report.violated for s in report.stages)
    return EXIT_VIOLATED if violated else EXIT_CONSISTENT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assoclab",
        description="Association testing for random fields, point processes and random measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment end to end")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--figures", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_at = sub.add_parser("assoc-test", help="alias of run: Monte-Carlo association test")
    p_at.add_argument("--config", required=True)
    p_at.add_argument("--out", default=None)
    p_at.add_argument("--seed", type=int, default=None)
    p_at.add_argument("--workers", type=int, default=None)
    p_at.add_argument("--figures", action="store_true")
    p_at.set_defaults(func=cmd_run)

    p_sample = sub.add_parser("sample", help="draw replicates of a process as CSV")
    p_sample.add_argument("--process", required=True,
                          choices=["poisson", "ginibre", "dirichlet-process"])
    p_sample.add_argument("--rate", type=float, default=None)
    p_sample.add_argument("--n", type=int, default=None)
    p_sample.add_argument("--total-mass", type=float, default=None)
    p_sample.add_argument("--truncation", type=int, default=1000)
    p_sample.add_argument("--window", default=None, help='JSON bounds, e.g. {"bounds": [[0,1],[0,1]]}')
    p_sample.add_argument("--replicates", type=int, default=1)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", default=None)
    p_sample.set_defaults(func=cmd_sample)

    p_exact = sub.add_parser("exact-check", help="exhaustive association oracle on a pmf file")
    p_exact.add_argument("--pmf", required=True)
    p_exact.add_argument("--split", default=None, help="comma-separated coordinate indices for J")
    p_exact.add_argument("--hypothesis", choices=["NA", "PA"], default=None)
    p_exact.add_argument("--seed", type=int, default=0)
    p_exact.set_defaults(func=cmd_exact_check)

    p_dom = sub.add_parser("dominance", help="decide stochastic dominance and build a coupling")
    p_dom.add_argument("--poset", required=True)
    p_dom.add_argument("--p", required=True)
    p_dom.add_argument("--q", required=True)
    p_dom.add_argument("--out", default=None)
    p_dom.add_argument("--seed", type=int, default=0)
    p_dom.set_defaults(func=cmd_dominance)

    p_bk = sub.add_parser("bk-check", help="disjoint-occurrence inequality on a binary-cube pmf")
    p_bk.add_argument("--pmf", required=True)
    p_bk.add_argument("--seed", type=int, default=0)
    p_bk.set_defaults(func=cmd_bk_check)

    p_conv = sub.add_parser("converge", help="weak-convergence harness for a sampler sequence")
    p_conv.add_argument("--config", required=True)
    p_conv.add_argument("--out", default=None)
    p_conv.add_argument("--seed", type=int, default=None)
    p_conv.add_argument("--figures", action="store_true")
    p_conv.set_defaults(func=cmd_converge)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except NotDominatedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
