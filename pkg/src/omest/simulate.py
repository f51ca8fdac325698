"""Monte Carlo calibration of the missed-item estimators.

Two-searcher data are generated under the equal-detectability model and
every requested estimator is scored against the known number of missed
items. Replicate ``i`` draws from its own stream, spawned from the seed and
``i``, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np
from scipy import stats

from . import classical, moments, posterior
from .moments import SearchCounts, Scenario, Undefined

__all__ = [
    "FullSearch",
    "FixedSample",
    "SimConfig",
    "Replicate",
    "EstimatorSummary",
    "SimResult",
    "ESTIMATORS",
    "replicate_rng",
    "simulate_replicate",
    "run",
    "n_ab_goodness_of_fit",
]

RNG_ALGORITHM = "numpy PCG64, SeedSequence(seed, spawn_key=(replicate,))"
ESTIMATORS = ("exact", "chapman", "lincoln_petersen", "credible")


@dataclass(frozen=True)
class FullSearch:
    """Every item is sought; each is found independently with p_a and p_b."""

    p_a: float
    p_b: float


@dataclass(frozen=True)
class FixedSample:
    """A marks a random n_a-subset; B then draws a random n_b-subset."""

    n_a: int
    n_b: int


@dataclass(frozen=True)
class SimConfig:
    true_n: int
    mode: FullSearch | FixedSample
    replicates: int = 1000
    seed: int = 0
    estimators: tuple[str, ...] = ("exact", "chapman", "lincoln_petersen")
    interval_mass: float = 0.9545
    # None pairs FullSearch with the full-search shift and FixedSample with 0
    estimator_shift: int | None = None
    keep_log: bool = False

    def __post_init__(self):
        if not isinstance(self.true_n, int) or self.true_n < 1:
            raise ValueError("true_n must be a positive integer")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if isinstance(self.mode, FullSearch):
            for name in ("p_a", "p_b"):
                p = getattr(self.mode, name)
                if not 0 < p <= 1:
                    raise ValueError(f"{name} must lie in (0, 1], got {p}")
        elif isinstance(self.mode, FixedSample):
            for name in ("n_a", "n_b"):
                n = getattr(self.mode, name)
                if not isinstance(n, int) or not 0 <= n <= self.true_n:
                    raise ValueError(f"{name} must be an integer in [0, true_n], got {n}")
        else:
            raise ValueError("mode must be FullSearch or FixedSample")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        if not 0 < self.interval_mass < 1:
            raise ValueError("interval_mass must lie in (0, 1)")
        if self.estimator_shift is not None and self.estimator_shift < 0:
            raise ValueError("estimator_shift must be non-negative")

    @property
    def scenario(self) -> Scenario:
        if self.estimator_shift is not None:
            return Scenario.from_shift(self.estimator_shift)
        if isinstance(self.mode, FullSearch):
            return Scenario.full_search()
        return Scenario.fixed_sample()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode"] = {"kind": "full" if isinstance(self.mode, FullSearch) else "fixed", **asdict(self.mode)}
        d["estimators"] = list(self.estimators)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        mode = dict(d.pop("mode"))
        kind = mode.pop("kind")
        if kind == "full":
            d["mode"] = FullSearch(float(mode["p_a"]), float(mode["p_b"]))
        elif kind == "fixed":
            d["mode"] = FixedSample(int(mode["n_a"]), int(mode["n_b"]))
        else:
            raise ValueError(f"unknown simulation mode {kind!r}")
        if "estimators" in d:
            d["estimators"] = tuple(d["estimators"])
        return cls(**d)


@dataclass(frozen=True)
class Replicate:
    counts: SearchCounts
    true_missed: int


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def simulate_replicate(config: SimConfig, rng: np.random.Generator) -> Replicate:
    n = config.true_n
    if isinstance(config.mode, FullSearch):
        found_a = rng.random(n) < config.mode.p_a
        found_b = rng.random(n) < config.mode.p_b
    else:
        found_a = np.zeros(n, dtype=bool)
        found_b = np.zeros(n, dtype=bool)
        found_a[rng.choice(n, config.mode.n_a, replace=False)] = True
        found_b[rng.choice(n, config.mode.n_b, replace=False)] = True
    n_a, n_b = int(found_a.sum()), int(found_b.sum())
    n_ab = int(np.count_nonzero(found_a & found_b))
    counts = SearchCounts(n_a, n_b, n_ab)
    return Replicate(counts, n - counts.n_f)


def _estimate(name: str, counts: SearchCounts, scenario: Scenario, z: float, mass: float):
    """(point, lower, upper); point is None when undefined, bounds None when absent."""
    if name == "exact":
        mean = moments.mean_exact(counts, scenario)
        if isinstance(mean, Undefined):
            return None, None, None
        sd = moments.sd_exact(counts, scenario)
        if isinstance(sd, Undefined):
            return mean, None, None
        return mean, mean - z * sd, mean + z * sd
    if name == "chapman":
        _, missed = classical.chapman(counts)
        sd = math.sqrt(classical.seber_variance(counts))
        return missed, missed - z * sd, missed + z * sd
    if name == "lincoln_petersen":
        lp = classical.lincoln_petersen(counts)
        if isinstance(lp, Undefined):
            return None, None, None
        return lp[1], None, None
    if name == "credible":
        try:
            table = posterior.build_table(counts, scenario, 1e-8, max_terms=10**7, moment_order=1)
        except (posterior.DivergentSeriesError, posterior.BudgetExceededError):
            return None, None, None
        mean = posterior.table_moment(table, 1)
        ci = posterior.credible_interval(table, mass)
        point = mean.value if math.isfinite(mean.error_bound) else None
        return point, float(ci.lower), float(ci.upper)
    raise ValueError(f"unknown estimator {name!r}")


def _run_block(config: SimConfig, start: int, stop: int):
    scenario = config.scenario
    z = NormalDist().inv_cdf(0.5 + config.interval_mass / 2)
    k = len(config.estimators)
    size = stop - start
    counts_arr = np.zeros((size, 3), dtype=np.int64)
    truth = np.zeros(size, dtype=np.int64)
    est = np.full((size, k), np.nan)
    lo = np.full((size, k), np.nan)
    hi = np.full((size, k), np.nan)
    for row, i in enumerate(range(start, stop)):
        rep = simulate_replicate(config, replicate_rng(config.seed, i))
        c = rep.counts
        counts_arr[row] = (c.n_a, c.n_b, c.n_ab)
        truth[row] = rep.true_missed
        for j, name in enumerate(config.estimators):
            point, low, high = _estimate(name, c, scenario, z, config.interval_mass)
            if point is not None:
                est[row, j] = point
            if low is not None:
                lo[row, j], hi[row, j] = low, high
    return start, counts_arr, truth, est, lo, hi


@dataclass
class EstimatorSummary:
    name: str
    n_defined: int
    fraction_undefined: float
    mean_estimate: float | None
    mean_bias: float | None
    bias_se: float | None
    rmse: float | None
    coverage: float | None
    n_intervals: int


@dataclass
class SimResult:
    config: SimConfig
    estimators: dict[str, EstimatorSummary]
    mean_true_missed: float
    true_missed_se: float
    mean_n_ab: float
    n_ab_se: float
    n_ab_histogram: dict[int, int]
    rng_algorithm: str = RNG_ALGORITHM
    replicate_log: list[dict] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "rng_algorithm": self.rng_algorithm,
            "mean_true_missed": self.mean_true_missed,
            "true_missed_se": self.true_missed_se,
            "mean_n_ab": self.mean_n_ab,
            "n_ab_se": self.n_ab_se,
            "n_ab_histogram": {str(k): v for k, v in sorted(self.n_ab_histogram.items())},
            "estimators": {name: asdict(s) for name, s in self.estimators.items()},
        }

    def to_json(self, fp=None, **kwargs) -> str | None:
        if fp is None:
            return json.dumps(self.to_dict(), **kwargs)
        json.dump(self.to_dict(), fp, **kwargs)
        return None

    def write_summary_csv(self, fp) -> None:
        columns = [f.name for f in EstimatorSummary.__dataclass_fields__.values()]
        writer = csv.DictWriter(fp, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for summary in self.estimators.values():
            writer.writerow({k: "" if v is None else v for k, v in asdict(summary).items()})

    def write_log_csv(self, fp) -> None:
        if self.replicate_log is None:
            raise ValueError("run with keep_log=True to record replicates")
        if not self.replicate_log:
            return
        writer = csv.DictWriter(fp, fieldnames=list(self.replicate_log[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.replicate_log)


def _se(values: np.ndarray) -> float:
    if len(values) < 2:
        return math.nan
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def _summarise(name, est, lo, hi, truth) -> EstimatorSummary:
    defined = ~np.isnan(est)
    n_def = int(defined.sum())
    frac_undef = 1.0 - n_def / len(est)
    has_interval = ~np.isnan(lo)
    n_int = int(has_interval.sum())
    coverage = None
    if n_int:
        t = truth[has_interval]
        coverage = float(np.mean((lo[has_interval] <= t) & (t <= hi[has_interval])))
    if not n_def:
        return EstimatorSummary(name, 0, frac_undef, None, None, None, None, coverage, n_int)
    err = est[defined] - truth[defined]
    return EstimatorSummary(
        name=name,
        n_defined=n_def,
        fraction_undefined=frac_undef,
        mean_estimate=float(np.mean(est[defined])),
        mean_bias=float(np.mean(err)),
        bias_se=_se(err),
        rmse=float(math.sqrt(np.mean(err**2))),
        coverage=coverage,
        n_intervals=n_int,
    )


def run(config: SimConfig, workers: int = 1, chunk: int = 1000) -> SimResult:
    """Simulate every replicate and score every estimator.

    Output is bit-identical for a given config whatever ``workers`` is.
    """
    n = config.replicates
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    if workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_run_block, [config] * len(bounds), *zip(*bounds)))
    else:
        blocks = [_run_block(config, s, e) for s, e in bounds]
    blocks.sort(key=lambda b: b[0])
    counts_arr = np.concatenate([b[1] for b in blocks])
    truth = np.concatenate([b[2] for b in blocks]).astype(float)
    est = np.concatenate([b[3] for b in blocks])
    lo = np.concatenate([b[4] for b in blocks])
    hi = np.concatenate([b[5] for b in blocks])

    summaries = {
        name: _summarise(name, est[:, j], lo[:, j], hi[:, j], truth)
        for j, name in enumerate(config.estimators)
    }
    n_ab = counts_arr[:, 2]
    values, freq = np.unique(n_ab, return_counts=True)
    log = None
    if config.keep_log:
        log = []
        for i in range(n):
            row = {
                "replicate": i,
                "n_a": int(counts_arr[i, 0]),
                "n_b": int(counts_arr[i, 1]),
                "n_ab": int(counts_arr[i, 2]),
                "true_missed": int(truth[i]),
            }
            for j, name in enumerate(config.estimators):
                row[name] = "" if np.isnan(est[i, j]) else float(est[i, j])
            log.append(row)
    return SimResult(
        config=config,
        estimators=summaries,
        mean_true_missed=float(np.mean(truth)),
        true_missed_se=_se(truth),
        mean_n_ab=float(np.mean(n_ab)),
        n_ab_se=_se(n_ab.astype(float)),
        n_ab_histogram={int(v): int(f) for v, f in zip(values, freq)},
        replicate_log=log,
    )


def n_ab_goodness_of_fit(result: SimResult) -> tuple[float, float]:
    """Chi-square test of the simulated overlaps against the hypergeometric law.

    Only meaningful for fixed-sample runs. Cells with expected count below
    five are pooled into their neighbours. Returns ``(statistic, p_value)``.
    """
    config = result.config
    if not isinstance(config.mode, FixedSample):
        raise ValueError("the overlap is hypergeometric only for fixed-sample runs")
    dist = stats.hypergeom(config.true_n, config.mode.n_a, config.mode.n_b)
    support = np.arange(max(0, config.mode.n_a + config.mode.n_b - config.true_n),
                        min(config.mode.n_a, config.mode.n_b) + 1)
    expected = dist.pmf(support) * config.replicates
    observed = np.array([result.n_ab_histogram.get(int(k), 0) for k in support], dtype=float)
    obs_cells, exp_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= 5:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if exp_cells:
        obs_cells[-1] += acc_o
        exp_cells[-1] += acc_e
    obs_cells, exp_cells = np.array(obs_cells), np.array(exp_cells)
    if len(obs_cells) < 2:
        return 0.0, 1.0
    exp_cells *= obs_cells.sum() / exp_cells.sum()
    statistic, p_value = stats.chisquare(obs_cells, exp_cells)
    return float(statistic), float(p_value)
