"""Command-line front end: config validation, dispatch, artifact writing.

Exit codes form a fixed contract so pipelines can gate on them:

  0  success
  2  config schema violation (message names the offending field path)
  3  assumption violation in strict mode (downgraded to warnings by
     --permissive)
  4  at least one hard bound verdict is "violated"
  5  I/O failure

Every verb except validate-config writes records.csv and summary.json into
the output directory. Thread-count precedence: --threads flag, then the
GRAPHONSIM_THREADS environment variable, then the config value; 0 means one
worker per CPU.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

from . import dynamics, matnorm
from . import rng as streams
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentContext,
    RateRow,
    RateTable,
    ReplicationRecord,
    build_model,
    coupling_msd,
    estimate_mean_sup,
    estimate_tail,
    deviation_norms,
    farm_records,
    fit_rate,
    summary_skeleton,
    verify_bound,
    write_records_csv,
    write_summary,
)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_ASSUMPTION = 3
EXIT_VIOLATED = 4
EXIT_IO = 5

THREADS_ENV = "GRAPHONSIM_THREADS"


class AssumptionError(ValueError):
    """A validated config falls outside the regime the checks assume."""


def check_assumptions(config: ExperimentConfig) -> Tuple[List[str], List[str]]:
    """Machine checks of the modelling assumptions behind the experiments.

    Returns (hard failures, warnings). Hard failures abort strict runs; the
    warnings mark regimes where specific checks lose their backing (they are
    still echoed into summary.json).
    """
    failures: List[str] = []
    warnings: List[str] = []
    model = None
    try:
        model = build_model(config)
        model.spot_check(streams.stream(config.master_seed, streams.PROBE, 0))
    except ConfigError:
        raise
    except ValueError as exc:
        failures.append(f"drift contract: {exc}")
    if model is not None and not math.isfinite(model.phi_bound):
        warnings.append(
            "pairwise drift is unbounded; the concentration checks assume a bounded interaction"
        )
    rule = config.sparsity()
    if not rule.degree_diverges():
        failures.append(
            "sparsity: the mean degree n*p(n) must diverge "
            "(power-law exponent must be < 1)"
        )
    elif not rule.squared_degree_diverges():
        warnings.append(
            "sparsity: n*p(n)^2 does not diverge; the Gram-norm and W2 sparse-system "
            "checks need a power-law exponent < 1/2 or p(n) = 1"
        )
    return failures, warnings


def parse_and_validate(text: str, permissive: bool = False) -> Tuple[ExperimentConfig, List[str]]:
    """Parse a JSON config document, validate structure and assumptions.

    Raises ConfigError on schema problems and AssumptionError on strict-mode
    assumption failures; returns the config plus accumulated warnings.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"config is not well-formed JSON: {exc}") from exc
    config = ExperimentConfig.from_dict(raw)
    failures, warnings = check_assumptions(config)
    if failures:
        if not permissive:
            raise AssumptionError("; ".join(failures))
        warnings = [f"(permissive) {f}" for f in failures] + warnings
    return config, warnings


def _resolve_threads(flag: Optional[int], config: ExperimentConfig) -> int:
    value = flag
    if value is None and os.environ.get(THREADS_ENV):
        try:
            value = int(os.environ[THREADS_ENV])
        except ValueError:
            value = None
    if value is None:
        value = config.threads
    if value == 0:
        value = os.cpu_count() or 1
    return max(1, value)


def default_bound_kind(config: ExperimentConfig) -> str:
    """Concentration-bound variant matching the configured metric/comparison."""
    weighted = config.comparison == "weight_vs_reference"
    if config.metric == "W1":
        return "w1_weight" if weighted else "w1_sparse"
    if config.metric == "dBL":
        return "bl_sparse"
    if weighted:
        return "w2_weight"
    return "w2_sparse_dense" if config.sparsity_form == "dense" else "w2_sparse"


def _print_table(header: List[str], rows: List[List[str]]) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    print(line)
    print("-" * len(line))
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def _write_distance_curve(config: ExperimentConfig, context: ExperimentContext, path: Path) -> None:
    """Per-time distance curve of replication 0 at the largest n, plot-ready."""
    from . import metrics as metrics_mod

    n = max(config.n_list)
    paths = dynamics.simulate_coupled(
        context.model, context.initial_law, context.graphon, context.sparsity,
        n, context.grid, config.master_seed, replication=0,
    )
    if config.comparison == "sparse_vs_weight":
        flow_a = metrics_mod.MeasureFlow.from_paths(paths.random_graph)
        flow_b = metrics_mod.MeasureFlow.from_paths(paths.graphon_weight)
    else:
        own = paths.graphon_weight if config.comparison == "weight_vs_reference" else paths.random_graph
        flow_a = metrics_mod.MeasureFlow.from_paths(own)
        flow_b = context.reference_flow()
    with open(path, "w", newline="\n") as fh:
        fh.write("metric,time_index,value\n")
        for m in range(len(flow_a)):
            value = metrics_mod.distance(flow_a[m], flow_b[m], config.metric)
            fh.write(f"{config.metric},{m},{value:.17g}\n")


def _distance_run(config: ExperimentConfig, workers: int, out: Path, export_paths: bool) -> int:
    context = ExperimentContext(config)
    all_records: List[ReplicationRecord] = []
    means = []
    tails = []
    coupling_rows = []
    for n in config.n_list:
        records = farm_records(config, n, context, workers=workers)
        all_records.extend(records)
        mean, se = estimate_mean_sup(config, n, records=records)
        means.append({"n": n, "metric": config.metric, "mean": mean, "stderr": se})
        for a in config.thresholds:
            est = estimate_tail(config, n, a, records=records)
            tails.append(est.to_dict())
        if config.comparison == "sparse_vs_weight":
            cmean, cse = coupling_msd(config, n, records=records)
            coupling_rows.append(RateRow(n=n, p_n=context.sparsity.probability(n), mean=cmean, stderr=cse))

    summary = summary_skeleton(config)
    summary["mean_sup"] = means
    summary["tail_estimates"] = tails
    if coupling_rows:
        table = RateTable(tuple(coupling_rows))
        summary["coupling_msd"] = table.to_dict()
        if len(coupling_rows) >= 3 and all(r.mean > 0 for r in coupling_rows):
            slope, slope_se = fit_rate(table, x="np")
            summary["coupling_msd"]["fit"] = {"x": "np", "slope": slope, "stderr": slope_se}
    mean_rows = [r for r in means if r["mean"] > 0]
    if len(mean_rows) >= 3:
        table = RateTable(
            tuple(
                RateRow(n=r["n"], p_n=context.sparsity.probability(r["n"]), mean=r["mean"], stderr=r["stderr"])
                for r in mean_rows
            )
        )
        slope, slope_se = fit_rate(table, x="n")
        summary["mean_sup_fit"] = {"x": "n", "slope": slope, "stderr": slope_se}

    write_records_csv(out / "records.csv", config.run_id(), all_records)
    _write_distance_curve(config, context, out / "distances.csv")
    if export_paths:
        with open(out / "paths.csv", "w", newline="\n") as fh:
            fh.write("replication,particle,step,coordinate,value\n")
            for n in config.n_list:
                paths = dynamics.simulate_coupled(
                    context.model,
                    context.initial_law,
                    context.graphon,
                    context.sparsity,
                    n,
                    context.grid,
                    config.master_seed,
                    replication=0,
                )
                dynamics.export_paths_csv(paths.graphon_weight, 0, fh)
    write_summary(out / "summary.json", summary)

    _print_table(
        ["n", "metric", "mean sup", "stderr"],
        [[str(r["n"]), r["metric"], f"{r['mean']:.6g}", f"{r['stderr']:.3g}"] for r in means],
    )
    if tails:
        print()
        _print_table(
            ["n", "a", "p_hat", "95% CI"],
            [
                [str(t["n"]), f"{t['a']:.4g}", f"{t['p_hat']:.4g}", f"[{t['ci_low']:.4g}, {t['ci_high']:.4g}]"]
                for t in tails
            ],
        )
    return EXIT_OK


def _norm_verify_run(config: ExperimentConfig, out: Path, args) -> int:
    kind = "gram" if args.verb == "verify-gram" else "cutnorm"
    n = args.n
    replications = args.replications
    etas = args.thresholds or list(config.thresholds) or [0.4]
    context = ExperimentContext(config)
    cfg = config if replications == config.replications else replace(config, replications=replications)
    norms = deviation_norms(cfg, n, gram=(kind == "gram"), context=context)
    checks = [
        verify_bound(cfg, n, eta, kind, context=context, norms=norms) for eta in etas
    ]
    records = [
        ReplicationRecord(
            n=n,
            p_n=context.sparsity.probability(n),
            replication=rep,
            metric=f"{kind}_over_n",
            sup_value=float(v),
            overflow=False,
        )
        for rep, v in enumerate(norms)
    ]
    write_records_csv(out / "records.csv", cfg.run_id(), records)
    summary = summary_skeleton(cfg)
    summary["bound_checks"] = [c.to_dict() for c in checks]
    write_summary(out / "summary.json", summary)
    _print_table(
        ["kind", "eta", "p_hat", f"{int(checks[0].estimate.confidence*100)}% CI", "bound", "verdict"],
        [
            [
                c.kind,
                f"{c.threshold:.4g}",
                f"{c.estimate.p_hat:.4g}",
                f"[{c.estimate.ci_low:.4g}, {c.estimate.ci_high:.4g}]",
                f"{c.analytic_bound:.4g}",
                c.verdict,
            ]
            for c in checks
        ],
    )
    return EXIT_VIOLATED if any(c.verdict == "violated" for c in checks) else EXIT_OK


def _lln_run(config: ExperimentConfig, workers: int, out: Path, args) -> int:
    if len(config.n_list) < 2:
        raise ConfigError("experiment.n_list", "the paired check needs at least two n values")
    n_small, n_large = min(config.n_list), max(config.n_list)
    context = ExperimentContext(config)
    rec_small = farm_records(config, n_small, context, workers=workers)
    rec_large = farm_records(config, n_large, context, workers=workers)
    small = {r.replication: r.sup_value for r in rec_small if r.metric == config.metric}
    large = {r.replication: r.sup_value for r in rec_large if r.metric == config.metric}
    wins = sum(1 for rep in small if large[rep] < small[rep])
    fraction = wins / len(small)
    ok = fraction >= args.min_fraction
    records = rec_small + rec_large
    write_records_csv(out / "records.csv", config.run_id(), records)
    summary = summary_skeleton(config)
    summary["paired_check"] = {
        "n_small": n_small,
        "n_large": n_large,
        "replications": len(small),
        "wins": wins,
        "fraction": fraction,
        "min_fraction": args.min_fraction,
        "verdict": "ok" if ok else "violated",
    }
    write_summary(out / "summary.json", summary)
    print(
        f"paired sup-{config.metric}: n={n_large} below n={n_small} in "
        f"{wins}/{len(small)} replications (need >= {args.min_fraction:.0%}) -> "
        f"{'ok' if ok else 'violated'}"
    )
    return EXIT_OK if ok else EXIT_VIOLATED


def _concentration_run(config: ExperimentConfig, workers: int, out: Path, args) -> int:
    if len(config.n_list) < 2:
        raise ConfigError("experiment.n_list", "the trend check needs at least two n values")
    ns = sorted(config.n_list)
    n_scale, ns_checked = ns[-1], ns[:-1]
    context = ExperimentContext(config)
    mean_cfg = replace(config, replications=args.mean_replications)
    scale_records = farm_records(mean_cfg, n_scale, context, workers=workers)
    mean_scale, _ = estimate_mean_sup(mean_cfg, n_scale, records=scale_records)
    a = args.threshold_factor * mean_scale
    kind = default_bound_kind(config)
    all_records: List[ReplicationRecord] = list(scale_records)
    estimates = []
    for n in ns_checked:
        records = farm_records(config, n, context, workers=workers)
        all_records.extend(records)
        est = estimate_tail(config, n, a, records=records)
        bound = matnorm.concentration_tail_bound(
            kind, a, n, config.bound_params, p=context.sparsity.probability(n)
        )
        estimates.append((n, est, bound))
    p_hats = [est.p_hat for _, est, _ in estimates]
    floor = 1.0 / config.replications
    rates = [-math.log(max(est.p_hat, floor)) / n for n, est, _ in estimates]
    monotone_p = all(p_hats[i] >= p_hats[i + 1] for i in range(len(p_hats) - 1))
    monotone_rate = all(rates[i] <= rates[i + 1] for i in range(len(rates) - 1))
    ok = monotone_p and monotone_rate
    write_records_csv(out / "records.csv", config.run_id(), all_records)
    summary = summary_skeleton(config)
    summary["concentration_trend"] = {
        "threshold": a,
        "threshold_factor": args.threshold_factor,
        "scale_n": n_scale,
        "scale_mean": mean_scale,
        "bound_kind": kind,
        "estimates": [
            {"n": n, **est.to_dict(), "illustrative_bound": bound} for n, est, bound in estimates
        ],
        "p_hat_nonincreasing": monotone_p,
        "rate_nondecreasing": monotone_rate,
        "verdict": "ok" if ok else "violated",
        "note": "delta/K are illustrative; the verdict only grades the trend",
    }
    write_summary(out / "summary.json", summary)
    _print_table(
        ["n", "p_hat", "-log(p)/n", "illustrative bound"],
        [
            [str(n), f"{est.p_hat:.4g}", f"{rate:.4g}", f"{bound:.3g}"]
            for (n, est, bound), rate in zip(estimates, rates)
        ],
    )
    print(f"trend verdict: {'ok' if ok else 'violated'} (threshold a = {a:.6g})")
    return EXIT_OK if ok else EXIT_VIOLATED


def _bounds_run(config: ExperimentConfig, out: Path, args) -> int:
    thresholds = args.thresholds or list(config.thresholds)
    if not thresholds:
        raise ConfigError("experiment.thresholds", "the bounds verb needs a threshold grid")
    kinds = args.kinds or list(matnorm.TAIL_BOUND_KINDS)
    rule = config.sparsity()
    lines = ["kind,n,p_n,threshold,value"]
    rows = []
    for kind in kinds:
        for n in config.n_list:
            p_n = rule.probability(n)
            for a in thresholds:
                if kind == "cutnorm":
                    if not 0.0 < a <= n:
                        continue
                    value = matnorm.cutnorm_tail_bound(a, n, p_n)
                elif kind == "gram":
                    value = matnorm.gram_tail_bound(a, n, p_n)
                else:
                    value = matnorm.concentration_tail_bound(kind, a, n, config.bound_params, p=p_n)
                lines.append(f"{kind},{n},{p_n:.17g},{a:.17g},{value:.17g}")
                rows.append({"kind": kind, "n": n, "p_n": p_n, "threshold": a, "value": value})
    with open(out / "records.csv", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    summary = summary_skeleton(config)
    summary["bound_curves"] = rows
    write_summary(out / "summary.json", summary)
    print(f"wrote {len(rows)} bound values for kinds: {', '.join(kinds)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphonsim",
        description="Simulate graphon-coupled particle systems and check their concentration behavior.",
    )
    parser.add_argument("verb", choices=[
        "simulate",
        "metrics",
        "verify-cutnorm",
        "verify-gram",
        "verify-lln",
        "verify-concentration",
        "bounds",
        "validate-config",
    ])
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--out", default="out", help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=None, help="override the config master seed")
    parser.add_argument("--permissive", action="store_true", help="downgrade assumption failures to warnings")
    parser.add_argument("--threads", type=int, default=None, help="worker count; 0 = one per CPU")
    parser.add_argument("--n", type=int, default=12, help="matrix size for the norm verification verbs")
    parser.add_argument(
        "--replications", type=int, default=2000, help="sample count for the norm verification verbs"
    )
    parser.add_argument(
        "--thresholds",
        type=lambda s: [float(x) for x in s.split(",")],
        default=None,
        help="comma-separated threshold grid (eta or a), overriding the config",
    )
    parser.add_argument(
        "--kinds",
        type=lambda s: s.split(","),
        default=None,
        help="bound kinds for the bounds verb (default: all)",
    )
    parser.add_argument(
        "--min-fraction", type=float, default=0.95, help="pass bar for the paired LLN check"
    )
    parser.add_argument(
        "--mean-replications",
        type=int,
        default=50,
        help="replications used to scale the concentration threshold",
    )
    parser.add_argument(
        "--threshold-factor",
        type=float,
        default=1.5,
        help="threshold = factor * mean sup-distance at the largest n",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    config_path = Path(args.config)
    try:
        text = config_path.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        config, warnings = parse_and_validate(text, permissive=args.permissive)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except AssumptionError as exc:
        print(f"error: assumption check failed: {exc} (use --permissive to continue)", file=sys.stderr)
        return EXIT_ASSUMPTION

    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)

    if args.verb == "validate-config":
        print(f"config valid (run id {config.run_id()})")
        return EXIT_OK

    workers = _resolve_threads(args.threads, config)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.verb in ("simulate", "metrics"):
            return _distance_run(config, workers, out, export_paths=args.verb == "simulate")
        if args.verb in ("verify-cutnorm", "verify-gram"):
            return _norm_verify_run(config, out, args)
        if args.verb == "verify-lln":
            return _lln_run(config, workers, out, args)
        if args.verb == "verify-concentration":
            return _concentration_run(config, workers, out, args)
        if args.verb == "bounds":
            return _bounds_run(config, out, args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"error: invalid request: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError(f"unhandled verb {args.verb}")


if __name__ == "__main__":
    sys.exit(main())
