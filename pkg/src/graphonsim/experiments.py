"""Monte Carlo orchestration: replication farming, tail estimates, rate fits.

A replication is fully determined by (config, master_seed, replication
index): it simulates the coupled pair of finite systems, measures the
configured sup-over-time distance, and emits one record per statistic.
Aggregation into tail estimates and rate tables is a pure function of the
record set, so batches merge commutatively and reruns are bit-reproducible.

Overflowed replications are never dropped: they carry a flag and count as
exceedances in every tail estimate, which can only overstate a tail.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as scipy_stats

from . import __version__
from . import dynamics, graphon, matnorm, metrics
from . import rng as streams

COMPARISONS = ("sparse_vs_weight", "weight_vs_reference", "sparse_vs_reference")
METRICS = ("W1", "W2", "dBL")


class ConfigError(ValueError):
    """Structural problem in an experiment configuration."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(path, message)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment; plain data, fully picklable."""

    model_name: str = "kuramoto"
    coupling: float = 1.0
    dim: int = 1
    psi_name: str = "zero"
    theta: float = 1.0
    sigma: float = 1.0
    initial_kind: str = "uniform_box"
    initial_params: tuple = (("low", -math.pi), ("high", math.pi))
    graphon_name: str = "constant"
    graphon_params: tuple = (("value", 0.5),)
    sparsity_form: str = "dense"
    sparsity_exponent: float = 0.0
    horizon: float = 1.0
    steps: int = 100
    n_list: Tuple[int, ...] = (64,)
    n_ref: int = 2000
    metric: str = "W1"
    comparison: str = "weight_vs_reference"
    thresholds: Tuple[float, ...] = ()
    replications: int = 100
    master_seed: int = 0
    record_norm: bool = False
    threads: int = 1
    delta: float = 1.0
    big_k: float = 1.0

    def __post_init__(self):
        # canonical key order so equality and run ids are construction-independent
        object.__setattr__(self, "initial_params", tuple(sorted(self.initial_params)))
        object.__setattr__(self, "graphon_params", tuple(sorted(self.graphon_params)))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "thresholds", tuple(float(a) for a in self.thresholds))
        _require(self.replications >= 1, "experiment.replications", "must be >= 1")
        _require(len(self.n_list) >= 1, "experiment.n_list", "must be nonempty")
        _require(all(n >= 1 for n in self.n_list), "experiment.n_list", "entries must be >= 1")
        _require(
            self.n_ref >= 4 * max(self.n_list),
            "experiment.n_ref",
            f"reference ensemble must satisfy n_ref >= 4 * max(n_list) = {4 * max(self.n_list)}",
        )
        _require(all(a > 0 for a in self.thresholds), "experiment.thresholds", "must be positive")
        _require(self.metric in METRICS, "experiment.metric", f"must be one of {METRICS}")
        _require(
            self.comparison in COMPARISONS, "experiment.comparison", f"must be one of {COMPARISONS}"
        )
        _require(self.steps >= 1, "grid.steps", "must be >= 1")
        _require(self.horizon > 0.0, "grid.horizon", "must be positive")
        _require(self.sigma >= 0.0, "sigma", "must be nonnegative")
        _require(self.delta > 0.0, "bounds.delta", "must be positive")
        _require(self.big_k > 0.0, "bounds.big_k", "must be positive")
        _require(self.threads >= 0, "experiment.threads", "must be >= 0 (0 = auto)")
        if self.metric == "dBL":
            largest = max(self.n_list)
            if self.comparison != "sparse_vs_weight":
                largest += self.n_ref
            else:
                largest *= 2
            _require(
                largest <= metrics.BL_CAP,
                "experiment.metric",
                f"dBL LP is capped at {metrics.BL_CAP} union support points, this run needs {largest}",
            )

    @property
    def bound_params(self) -> matnorm.BoundParams:
        return matnorm.BoundParams(delta=self.delta, big_k=self.big_k)

    @property
    def grid(self) -> dynamics.TimeGrid:
        return dynamics.TimeGrid(horizon=self.horizon, steps=self.steps)

    def sparsity(self) -> graphon.SparsityRule:
        return graphon.SparsityRule(form=self.sparsity_form, exponent=self.sparsity_exponent)

    def to_dict(self) -> dict:
        return {
            "model": {"name": self.model_name, "coupling": self.coupling, "dim": self.dim},
            "psi": {"name": self.psi_name, "theta": self.theta},
            "sigma": self.sigma,
            "initial": {"kind": self.initial_kind, **dict(self.initial_params)},
            "graphon": {"name": self.graphon_name, **dict(self.graphon_params)},
            "sparsity": {"form": self.sparsity_form, "exponent": self.sparsity_exponent},
            "grid": {"horizon": self.horizon, "steps": self.steps},
            "experiment": {
                "n_list": list(self.n_list),
                "n_ref": self.n_ref,
                "metric": self.metric,
                "comparison": self.comparison,
                "thresholds": list(self.thresholds),
                "replications": self.replications,
                "master_seed": self.master_seed,
                "record_norm": self.record_norm,
                "threads": self.threads,
            },
            "bounds": {"delta": self.delta, "big_k": self.big_k},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build and structurally validate a config from a key-value tree.

        Unknown sections or keys are rejected so typos cannot silently fall
        back to defaults.
        """
        _require(isinstance(raw, dict), "", "config must be a key-value tree")
        known = {"model", "psi", "sigma", "initial", "graphon", "sparsity", "grid", "experiment", "bounds"}
        for key in raw:
            _require(key in known, key, "unknown section")

        def section(name: str, allowed: set) -> dict:
            sec = raw.get(name, {})
            _require(isinstance(sec, dict), name, "must be a mapping")
            for key in sec:
                _require(key in allowed, f"{name}.{key}", "unknown key")
            return sec

        model = section("model", {"name", "coupling", "dim"})
        psi = section("psi", {"name", "theta"})
        initial = section("initial", {"kind", "low", "high", "at", "mean", "cov"})
        graphon_sec = section("graphon", {"name", "value", "values", "lipschitz_constant"})
        sparsity = section("sparsity", {"form", "exponent"})
        grid = section("grid", {"horizon", "steps"})
        experiment = section(
            "experiment",
            {
                "n_list",
                "n_ref",
                "metric",
                "comparison",
                "thresholds",
                "replications",
                "master_seed",
                "record_norm",
                "threads",
            },
        )
        bounds = section("bounds", {"delta", "big_k"})

        _require("name" in model, "model.name", "required")
        _require("n_list" in experiment, "experiment.n_list", "required")
        _require("master_seed" in experiment, "experiment.master_seed", "required")

        def freeze(sec: dict, skip=()) -> tuple:
            return tuple(
                (k, _freeze_value(v)) for k, v in sorted(sec.items()) if k not in skip
            )

        initial_kind = initial.get("kind", "uniform_box")
        graphon_name = graphon_sec.get("name", "constant")
        try:
            return cls(
                model_name=model["name"],
                coupling=float(model.get("coupling", 1.0)),
                dim=int(model.get("dim", 1)),
                psi_name=psi.get("name", "zero"),
                theta=float(psi.get("theta", 1.0)),
                sigma=float(raw.get("sigma", 1.0)),
                initial_kind=initial_kind,
                initial_params=freeze(initial, skip=("kind",)) or (("low", -math.pi), ("high", math.pi)),
                graphon_name=graphon_name,
                graphon_params=freeze(graphon_sec, skip=("name",)),
                sparsity_form=sparsity.get("form", "dense"),
                sparsity_exponent=float(sparsity.get("exponent", 0.0)),
                horizon=float(grid.get("horizon", 1.0)),
                steps=int(grid.get("steps", 100)),
                n_list=tuple(int(n) for n in experiment["n_list"]),
                n_ref=int(experiment.get("n_ref", 2000)),
                metric=experiment.get("metric", "W1"),
                comparison=experiment.get("comparison", "weight_vs_reference"),
                thresholds=tuple(float(a) for a in experiment.get("thresholds", [])),
                replications=int(experiment.get("replications", 100)),
                master_seed=int(experiment["master_seed"]),
                record_norm=bool(experiment.get("record_norm", False)),
                threads=int(experiment.get("threads", 1)),
                delta=float(bounds.get("delta", 1.0)),
                big_k=float(bounds.get("big_k", 1.0)),
            )
        except (TypeError, KeyError) as exc:
            raise ConfigError("", f"malformed config value: {exc}") from exc

    def run_id(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _freeze_value(v):
    if isinstance(v, list):
        return tuple(_freeze_value(x) for x in v)
    return v


def _thaw_value(v):
    if isinstance(v, tuple):
        return [_thaw_value(x) for x in v]
    return v


def build_graphon(config: ExperimentConfig) -> graphon.Graphon:
    params = dict(config.graphon_params)
    name = config.graphon_name
    if name == "constant":
        return graphon.constant(float(params.get("value", 0.5)))
    if name == "product":
        return graphon.product()
    if name == "min":
        return graphon.minimum()
    if name == "piecewise_constant":
        _require("values" in params, "graphon.values", "required for the piecewise-constant family")
        return graphon.piecewise_constant(_thaw_value(params["values"]))
    raise ConfigError("graphon.name", f"unknown graphon family '{name}'")


def build_model(config: ExperimentConfig) -> dynamics.InteractionModel:
    try:
        return dynamics.make_model(
            config.model_name,
            coupling=config.coupling,
            dim=config.dim,
            psi_name=config.psi_name,
            theta=config.theta,
            sigma=config.sigma,
        )
    except ValueError as exc:
        raise ConfigError("model.name", str(exc)) from exc


def build_initial_law(config: ExperimentConfig) -> dynamics.InitialLaw:
    try:
        return dynamics.make_initial_law(config.initial_kind, **dict(config.initial_params))
    except (ValueError, KeyError) as exc:
        raise ConfigError("initial", str(exc)) from exc


class ExperimentContext:
    """Prebuilt model/graphon/initial-law plus a lazily built reference flow."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.model = build_model(config)
        self.graphon = build_graphon(config)
        self.initial_law = build_initial_law(config)
        self.sparsity = config.sparsity()
        self.grid = config.grid
        self._reference_flow: Optional[metrics.MeasureFlow] = None

    def reference_flow(self) -> metrics.MeasureFlow:
        if self._reference_flow is None:
            ensemble = dynamics.simulate_reference(
                self.model,
                self.initial_law,
                self.graphon,
                self.config.n_ref,
                self.grid,
                self.config.master_seed,
            )
            self._reference_flow = metrics.MeasureFlow.from_paths(ensemble.paths)
        return self._reference_flow

    def set_reference_paths(self, paths: np.ndarray) -> None:
        self._reference_flow = metrics.MeasureFlow.from_paths(paths)


@dataclass(frozen=True)
class ReplicationRecord:
    """One statistic of one replication; ``sup_value`` is NaN on overflow."""

    n: int
    p_n: float
    replication: int
    metric: str
    sup_value: float
    overflow: bool


def run_replication(
    config: ExperimentConfig,
    n: int,
    replication: int,
    context: Optional[ExperimentContext] = None,
) -> List[ReplicationRecord]:
    """Simulate one replication and measure the configured statistics.

    Deterministic given (config, master_seed, replication). An integrator
    overflow yields flagged records instead of an exception, so downstream
    tail counts never lose a replication.
    """
    ctx = context if context is not None else ExperimentContext(config)
    p_n = ctx.sparsity.probability(n)
    row_metrics = [config.metric]
    if config.comparison == "sparse_vs_weight":
        row_metrics.append("coupling_sq")
    if config.record_norm:
        row_metrics.append("deviation_norm")

    def rows(values: Dict[str, float], overflow: bool) -> List[ReplicationRecord]:
        return [
            ReplicationRecord(
                n=n,
                p_n=p_n,
                replication=replication,
                metric=name,
                sup_value=values.get(name, math.nan),
                overflow=overflow,
            )
            for name in row_metrics
        ]

    try:
        paths = dynamics.simulate_coupled(
            ctx.model,
            ctx.initial_law,
            ctx.graphon,
            ctx.sparsity,
            n,
            ctx.grid,
            config.master_seed,
            replication=replication,
        )
    except dynamics.SimulationOverflow:
        return rows({}, overflow=True)

    values: Dict[str, float] = {}
    flow_sparse = None
    flow_weight = None
    if config.comparison == "sparse_vs_weight":
        flow_sparse = metrics.MeasureFlow.from_paths(paths.random_graph)
        flow_weight = metrics.MeasureFlow.from_paths(paths.graphon_weight)
        values[config.metric] = metrics.sup_distance(flow_sparse, flow_weight, config.metric)
        gap = np.linalg.norm(paths.random_graph - paths.graphon_weight, axis=2).max(axis=1)
        values["coupling_sq"] = float(np.mean(gap ** 2))
    else:
        reference = ctx.reference_flow()
        own = paths.graphon_weight if config.comparison == "weight_vs_reference" else paths.random_graph
        values[config.metric] = metrics.sup_distance(
            metrics.MeasureFlow.from_paths(own), reference, config.metric
        )
    if config.record_norm:
        dev = paths.matrices.deviation
        if n <= matnorm.EXACT_CAP:
            values["deviation_norm"] = matnorm.norm_inf_to_1_exact(dev)
        else:
            values["deviation_norm"] = matnorm.norm_inf_to_1_heuristic(
                dev, 50, streams.stream(config.master_seed, streams.PROBE, replication)
            )
    return rows(values, overflow=False)


def _run_chunk(config_dict: dict, n: int, reps: Sequence[int], reference_paths) -> List[ReplicationRecord]:
    config = ExperimentConfig.from_dict(config_dict)
    context = ExperimentContext(config)
    if reference_paths is not None:
        context.set_reference_paths(reference_paths)
    out: List[ReplicationRecord] = []
    for rep in reps:
        out.extend(run_replication(config, n, rep, context))
    return out


def farm_records(
    config: ExperimentConfig,
    n: int,
    context: Optional[ExperimentContext] = None,
    replications: Optional[int] = None,
    workers: int = 1,
) -> List[ReplicationRecord]:
    """All replication records for one n, in replication order.

    ``workers`` > 1 distributes whole chunks of replications over processes;
    the result is sorted back into replication order, so the aggregate is
    independent of scheduling.
    """
    total = config.replications if replications is None else replications
    ctx = context if context is not None else ExperimentContext(config)
    needs_ref = config.comparison != "sparse_vs_weight"
    if workers <= 1 or total < 4:
        out: List[ReplicationRecord] = []
        for rep in range(total):
            out.extend(run_replication(config, n, rep, ctx))
        return out
    reference_paths = None
    if needs_ref:
        flow = ctx.reference_flow()
        reference_paths = np.stack([m.atoms for m in flow.measures], axis=1)
    chunks = np.array_split(np.arange(total), workers)
    payload = config.to_dict()
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_chunk, payload, n, [int(r) for r in chunk], reference_paths)
            for chunk in chunks
            if len(chunk)
        ]
        for fut in futures:
            out.extend(fut.result())
    out.sort(key=lambda r: (r.replication, r.metric))
    return out


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Exact binomial confidence interval from beta quantiles."""
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    low = 0.0 if successes == 0 else float(scipy_stats.beta.ppf(alpha / 2.0, successes, trials - successes + 1))
    high = (
        1.0
        if successes == trials
        else float(scipy_stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, trials - successes))
    )
    return low, high


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of a sup-distance exceedance probability."""

    n: int
    a: float
    replications: int
    exceed_count: int
    overflow_count: int
    p_hat: float
    ci_low: float
    ci_high: float
    confidence: float
    analytic_bound: Optional[float] = None

    @classmethod
    def from_records(
        cls,
        records: Sequence[ReplicationRecord],
        metric: str,
        n: int,
        a: float,
        confidence: float = 0.95,
        analytic_bound: Optional[float] = None,
    ) -> "TailEstimate":
        rows = [r for r in records if r.metric == metric and r.n == n]
        if not rows:
            raise ValueError(f"no '{metric}' records for n={n}")
        total = len(rows)
        overflow = sum(r.overflow for r in rows)
        exceed = sum(1 for r in rows if r.overflow or r.sup_value > a)
        p_hat = exceed / total
        low, high = clopper_pearson(exceed, total, confidence)
        return cls(
            n=n,
            a=a,
            replications=total,
            exceed_count=exceed,
            overflow_count=overflow,
            p_hat=p_hat,
            ci_low=low,
            ci_high=high,
            confidence=confidence,
            analytic_bound=analytic_bound,
        )

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items()}


def estimate_tail(
    config: ExperimentConfig,
    n: int,
    a: float,
    context: Optional[ExperimentContext] = None,
    records: Optional[Sequence[ReplicationRecord]] = None,
    confidence: float = 0.95,
) -> TailEstimate:
    """Exceedance probability of the configured sup-distance at threshold a."""
    if a < 0.0:
        raise ValueError("threshold must be nonnegative")
    if records is None:
        records = farm_records(config, n, context)
    return TailEstimate.from_records(records, config.metric, n, a, confidence)


def estimate_mean_sup(
    config: ExperimentConfig,
    n: int,
    metric: Optional[str] = None,
    context: Optional[ExperimentContext] = None,
    records: Optional[Sequence[ReplicationRecord]] = None,
) -> Tuple[float, float]:
    """Sample mean and standard error of the sup-distance across replications."""
    metric = metric or config.metric
    if records is None:
        records = farm_records(config, n, context)
    values = np.array([r.sup_value for r in records if r.metric == metric and r.n == n])
    if values.size == 0:
        raise ValueError(f"no '{metric}' records for n={n}")
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def coupling_msd(
    config: ExperimentConfig,
    n: int,
    context: Optional[ExperimentContext] = None,
    records: Optional[Sequence[ReplicationRecord]] = None,
) -> Tuple[float, float]:
    """Mean over particles of the squared sup-over-time coupling gap.

    Requires comparison sparse_vs_weight; the per-replication statistic is
    (1/n) sum_i (sup_m |X_i(m) - Xbar_i(m)|)^2 and the return value is its
    mean and standard error across replications.
    """
    if config.comparison != "sparse_vs_weight":
        raise ValueError("coupling diagnostics need comparison = sparse_vs_weight")
    return estimate_mean_sup(config, n, metric="coupling_sq", context=context, records=records)


@dataclass(frozen=True)
class RateRow:
    n: int
    p_n: float
    mean: float
    stderr: float


@dataclass(frozen=True)
class RateTable:
    rows: Tuple[RateRow, ...]

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: r.n))
        object.__setattr__(self, "rows", rows)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows]}


def fit_rate(table: RateTable, x: str = "n") -> Tuple[float, float]:
    """Least-squares slope of log(mean) against log(n) or log(n * p_n).

    Returns (slope, stderr); needs at least three rows with positive means.
    """
    if len(table.rows) < 3:
        raise ValueError("rate fit needs at least 3 rows")
    if any(r.mean <= 0.0 for r in table.rows):
        raise ValueError("rate fit needs positive means")
    if x == "n":
        xs = np.log([r.n for r in table.rows])
    elif x == "np":
        xs = np.log([r.n * r.p_n for r in table.rows])
    else:
        raise ValueError("x must be 'n' or 'np'")
    ys = np.log([r.mean for r in table.rows])
    xbar = xs.mean()
    sxx = float(np.sum((xs - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("rate fit needs at least two distinct n values")
    slope = float(np.sum((xs - xbar) * (ys - ys.mean())) / sxx)
    intercept = float(ys.mean() - slope * xbar)
    resid = ys - (intercept + slope * xs)
    dof = len(table.rows) - 2
    sigma2 = float(np.sum(resid ** 2) / dof) if dof > 0 else 0.0
    return slope, math.sqrt(sigma2 / sxx)


@dataclass(frozen=True)
class BoundCheck:
    """Empirical tail frequency against a closed-form bound.

    ``hard`` marks checks whose bound holds for every n; soft checks (the
    Gram bound and the distance-concentration bounds, whose constants or
    minimal n are not pinned down) are flagged instead of failed.
    """

    kind: str
    n: int
    p_n: float
    threshold: float
    estimate: TailEstimate
    analytic_bound: float
    verdict: str  # "ok" | "violated" | "flagged"
    hard: bool
    warnings: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["estimate"] = self.estimate.to_dict()
        payload["warnings"] = list(self.warnings)
        return payload


def deviation_norms(
    config: ExperimentConfig,
    n: int,
    gram: bool = False,
    context: Optional[ExperimentContext] = None,
    replications: Optional[int] = None,
) -> np.ndarray:
    """Exact norms of the centered interaction matrix over fresh samples.

    Returns norm/n per replication (of the Gram matrix when requested); the
    adjacency stream matches the one the simulator uses, so replication r
    sees the same graph here and in a simulation run.
    """
    if n > matnorm.EXACT_CAP:
        raise ValueError(f"exact norm checks need n <= {matnorm.EXACT_CAP}")
    ctx = context if context is not None else ExperimentContext(config)
    p = ctx.sparsity.probability(n)
    total = config.replications if replications is None else replications
    out = np.empty(total)
    for rep in range(total):
        sample = graphon.sample_adjacency(
            ctx.graphon, n, p, streams.stream(config.master_seed, streams.ADJACENCY, rep)
        )
        dev = graphon.interaction_matrices(sample, ctx.graphon).deviation
        mat = dev.T @ dev if gram else dev
        out[rep] = matnorm.norm_inf_to_1_exact(mat) / n
    return out


def verify_bound(
    config: ExperimentConfig,
    n: int,
    threshold: float,
    kind: str,
    context: Optional[ExperimentContext] = None,
    norms: Optional[np.ndarray] = None,
    confidence: float = 0.99,
) -> BoundCheck:
    """Compare an empirical exceedance frequency with its analytic bound.

    kind "cutnorm"/"gram" sample adjacency matrices only; the remaining kinds
    run the configured simulation tail estimate against the matching
    concentration bound with the user-supplied (illustrative) constants.
    A check is "violated" when the CI lower edge exceeds the bound; soft
    kinds report "flagged" instead.
    """
    ctx = context if context is not None else ExperimentContext(config)
    p_n = ctx.sparsity.probability(n)
    warnings: Tuple[str, ...] = ()
    if kind in ("cutnorm", "gram"):
        if norms is None:
            norms = deviation_norms(config, n, gram=(kind == "gram"), context=ctx)
        exceed = int(np.sum(norms > threshold))
        total = len(norms)
        low, high = clopper_pearson(exceed, total, confidence)
        if kind == "cutnorm":
            bound = matnorm.cutnorm_tail_bound(threshold, n, p_n)
            hard = True
        else:
            bound = matnorm.gram_tail_bound(threshold, n, p_n)
            hard = False
            if not ctx.sparsity.squared_degree_diverges():
                warnings = (
                    "gram bound regime: n * p(n)^2 does not diverge for this sparsity rule "
                    "(needs a power-law exponent < 1/2 or p(n) = 1)",
                )
        estimate = TailEstimate(
            n=n,
            a=threshold,
            replications=total,
            exceed_count=exceed,
            overflow_count=0,
            p_hat=exceed / total,
            ci_low=low,
            ci_high=high,
            confidence=confidence,
            analytic_bound=bound,
        )
    elif kind in matnorm.TAIL_BOUND_KINDS:
        estimate = estimate_tail(config, n, threshold, context=ctx, confidence=confidence)
        bound = matnorm.concentration_tail_bound(
            kind, threshold, n, config.bound_params, p=p_n
        )
        estimate = replace(estimate, analytic_bound=bound)
        hard = False
        warnings = ("bound constants delta/K are user-supplied and illustrative",)
    else:
        raise ValueError(f"unknown bound kind '{kind}'")
    exceeds = estimate.ci_low > bound
    verdict = ("violated" if hard else "flagged") if exceeds else "ok"
    return BoundCheck(
        kind=kind,
        n=n,
        p_n=p_n,
        threshold=threshold,
        estimate=estimate,
        analytic_bound=bound,
        verdict=verdict,
        hard=hard,
        warnings=warnings,
    )


def records_csv_lines(run_id: str, records: Sequence[ReplicationRecord]) -> List[str]:
    """Stable CSV serialization; floats carry 17 significant digits."""
    lines = ["run_id,n,p_n,replication,metric,sup_value,overflow_flag"]
    ordered = sorted(records, key=lambda r: (r.n, r.replication, r.metric))
    for r in ordered:
        lines.append(
            f"{run_id},{r.n},{r.p_n:.17g},{r.replication},{r.metric},{r.sup_value:.17g},{int(r.overflow)}"
        )
    return lines


def write_records_csv(path, run_id: str, records: Sequence[ReplicationRecord]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(records_csv_lines(run_id, records)) + "\n")


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return value


def write_summary(path, payload: dict) -> None:
    """Deterministic JSON dump; floats round-trip losslessly."""
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_skeleton(config: ExperimentConfig) -> dict:
    return {
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "run_id": config.run_id(),
        "version": __version__,
    }
