"""Assemble and render estimate reports for the command line and batch files."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

from . import classical, moments, posterior
from .moments import SearchCounts, Scenario, Undefined

DEFAULT_PRECISION = 4
PRECISION_ENV = "OMEST_PRECISION"


def default_precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_PRECISION
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{PRECISION_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{PRECISION_ENV} must be at least 1")
    return value


def format_value(value, precision: int = DEFAULT_PRECISION) -> str:
    """Render to ``precision`` significant figures without exponent notation.

    Digits left of the decimal point are never dropped, so large totals
    print as whole numbers. Undefined values print as ``undefined`` plus the
    overlap they would need.
    """
    if isinstance(value, Undefined):
        return str(value)
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if value == 0:
        return "0"
    decimals = max(precision - 1 - math.floor(math.log10(abs(value))), 0)
    text = f"{value:.{decimals}f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


@dataclass(frozen=True)
class EstimateRequest:
    counts: SearchCounts
    scenario: Scenario
    include_classical: bool = False
    include_posterior: bool = False
    flat_prior: bool = False
    interval_mass: float = 0.68
    tail_tol: float = posterior.DEFAULT_TAIL_TOL


def _json_value(value):
    if isinstance(value, Undefined):
        return {"undefined": True, "min_n_ab": value.min_n_ab}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass(frozen=True)
class Report:
    request: EstimateRequest
    moments: moments.MomentReport
    classical: classical.ClassicalReport | None
    posterior: dict | None
    discrepancy: dict
    warnings: tuple[str, ...]

    def to_dict(self) -> dict:
        req, mom, c = self.request, self.moments, self.request.counts
        out = {
            "request": {
                "n_a": c.n_a,
                "n_b": c.n_b,
                "n_ab": c.n_ab,
                "scenario": req.scenario.selector,
                "shift": req.scenario.shift,
                "flat_prior": req.flat_prior,
                "include_classical": req.include_classical,
                "include_posterior": req.include_posterior,
                "interval_mass": req.interval_mass,
                "tail_tol": req.tail_tol,
            },
            "derived": {"x_a": c.x_a, "x_b": c.x_b, "n_f": c.n_f},
            "moments": {
                "mean": _json_value(mom.mean),
                "total_mean": _json_value(mom.total_mean),
                "variance": _json_value(mom.variance),
                "sd": _json_value(mom.sd),
                "skewness": _json_value(mom.skewness),
                "kurtosis": _json_value(mom.kurtosis),
                "mean_error_bound": mom.mean_error_bound,
                "variance_error_bound": mom.variance_error_bound,
                "shift_derived": mom.shift_derived,
            },
            "classical": None,
            "posterior": None,
            "discrepancy": {k: _json_value(v) for k, v in self.discrepancy.items()},
            "warnings": list(self.warnings),
        }
        if self.classical is not None:
            cl = self.classical
            out["classical"] = {
                "lp_total": _json_value(cl.lp_total),
                "lp_missed": _json_value(cl.lp_missed),
                "chapman_total": cl.chapman_total,
                "chapman_missed": cl.chapman_missed,
                "seber_variance": cl.seber_variance,
                "seber_sd": cl.seber_sd,
            }
        if self.posterior is not None:
            out["posterior"] = {k: _json_value(v) for k, v in self.posterior.items()}
        return out

    def render(self, precision: int = DEFAULT_PRECISION) -> str:
        fmt = lambda v: format_value(v, precision)  # noqa: E731
        req, mom, c = self.request, self.moments, self.request.counts
        lines = [
            f"counts        n_a={c.n_a} n_b={c.n_b} n_ab={c.n_ab} "
            f"(n_f={c.n_f}, x_a={c.x_a}, x_b={c.x_b})",
            f"scenario      {req.scenario.selector} (shift {req.scenario.shift}: "
            f"{req.scenario.description})",
            "",
            f"missed <X>    {fmt(mom.mean)}",
            f"total <N>     {fmt(mom.total_mean)}",
            f"sd            {fmt(mom.sd)}",
            f"variance      {fmt(mom.variance)}",
            f"skewness      {fmt(mom.skewness)}",
            f"kurtosis      {fmt(mom.kurtosis)}",
        ]
        if mom.mean_error_bound is not None:
            lines.append(f"flat-prior mean difference   <= {fmt(mom.mean_error_bound)}")
        if mom.variance_error_bound is not None:
            lines.append(f"flat-prior variance difference <= {fmt(mom.variance_error_bound)}")
        if self.classical is not None:
            cl = self.classical
            lines += [
                "",
                f"Lincoln-Petersen  total {fmt(cl.lp_total)}  missed {fmt(cl.lp_missed)}",
                f"Chapman           total {fmt(cl.chapman_total)}  missed {fmt(cl.chapman_missed)}",
                f"Seber sd          {fmt(cl.seber_sd)}",
            ]
        d = self.discrepancy
        lines += [
            "",
            f"exact - Chapman   {fmt(d['exact_minus_chapman'])}",
            f"x_a/n_ab, x_b/n_ab  {fmt(d['ratio_a'])}, {fmt(d['ratio_b'])}",
        ]
        if self.posterior is not None:
            p = self.posterior
            lines += [
                "",
                f"posterior mode    {p['mode']} (total {p['mode'] + c.n_f})",
                f"posterior mean    {fmt(p['mean'])}",
                f"{p['interval_mass']:g} credible interval  "
                f"[{p['interval_lower']}, {p['interval_upper']}]",
                f"tail mass bound   {p['tail_mass_bound']:.3g}",
            ]
        if self.warnings:
            lines.append("")
            lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def build_report(request: EstimateRequest) -> Report:
    counts, scenario = request.counts, request.scenario
    mom = moments.moment_report(counts, scenario)
    warnings = []
    if counts.n_ab == 0:
        warnings.append("no overlap between the searches: no moment of the missed count exists")
    for name in ("mean", "variance", "skewness", "kurtosis"):
        value = getattr(mom, name)
        if isinstance(value, Undefined) and counts.n_ab:
            warnings.append(f"{name} undefined under {scenario.selector}: requires n_ab >= {value.min_n_ab}")
    if mom.shift_derived and not isinstance(mom.skewness, Undefined):
        warnings.append(f"skewness and kurtosis follow from the prior shift s={scenario.shift}")

    cl_report = classical.classical_report(counts)
    chap = cl_report.chapman_missed
    poisson = cl_report.poisson
    discrepancy = {
        "exact_minus_chapman": mom.mean if isinstance(mom.mean, Undefined) else mom.mean - chap,
        "ratio_a": poisson.ratio_a if poisson else None,
        "ratio_b": poisson.ratio_b if poisson else None,
        "poisson_x_star": poisson.mode_x_star if poisson else None,
        "stationary_x": poisson.stationary_x if poisson else None,
        "exponent_rate": poisson.exponent_rate if poisson else None,
        "poisson_reliable": poisson.reliable if poisson else False,
    }
    if request.include_classical and cl_report.large_discrepancy:
        warnings.append(
            "unique finds are not small compared with the overlap: "
            "Chapman and Lincoln-Petersen are expected to fall short of the exact mean"
        )

    post = None
    if request.include_posterior:
        table = posterior.build_table(
            counts, scenario, request.tail_tol, flat_prior=request.flat_prior, moment_order=1
        )
        mean = posterior.table_moment(table, 1)
        ci = posterior.credible_interval(table, request.interval_mass)
        if mean.warning:
            warnings.append(mean.warning)
        post = {
            "family": table.family.value,
            "mode": posterior.mode(table),
            "mean": mean.value if math.isfinite(mean.error_bound) else None,
            "mean_error_bound": mean.error_bound,
            "interval_mass": request.interval_mass,
            "interval_lower": ci.lower,
            "interval_upper": ci.upper,
            "interval_probability": ci.probability,
            "tail_mass_bound": table.tail_mass_bound,
            "x_max": table.x_max,
        }
    return Report(
        request=request,
        moments=mom,
        classical=cl_report if request.include_classical else None,
        posterior=post,
        discrepancy=discrepancy,
        warnings=tuple(warnings),
    )


BATCH_COLUMNS = [
    "id", "na", "nb", "nab", "mean", "sd", "skewness", "kurtosis",
    "chapman", "lp", "seber_sd", "status",
]


def batch_row(row: dict, scenario: Scenario, precision: int = DEFAULT_PRECISION) -> dict:
    """One output row; invalid input gives ``status=error`` and empty numbers.

    ``mean``, ``chapman`` and ``lp`` are all missed-item estimates.
    """
    out = {col: "" for col in BATCH_COLUMNS}
    out.update({k: (row.get(k) or "").strip() for k in ("id", "na", "nb", "nab")})
    try:
        counts = SearchCounts(int(out["na"]), int(out["nb"]), int(out["nab"]))
    except (TypeError, ValueError) as exc:
        out["status"] = "error"
        out["error"] = str(exc)
        return out
    fmt = lambda v: format_value(v, precision)  # noqa: E731
    mom = moments.moment_report(counts, scenario)
    cl = classical.classical_report(counts)
    out.update(
        mean=fmt(mom.mean),
        sd=fmt(mom.sd),
        skewness=fmt(mom.skewness),
        kurtosis=fmt(mom.kurtosis),
        chapman=fmt(cl.chapman_missed),
        lp=fmt(cl.lp_missed),
        seber_sd=fmt(cl.seber_sd),
        status="ok",
    )
    return out
