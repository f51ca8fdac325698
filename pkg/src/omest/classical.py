"""Classical capture-recapture estimators used for comparison.

Lincoln-Petersen, Chapman and Seber's variance are the approximations the
exact moments are compared against. The Poisson diagnostics quantify when
those approximations are expected to agree with the exact results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .moments import SearchCounts, Undefined

__all__ = [
    "ClassicalReport",
    "PoissonDiagnostics",
    "lincoln_petersen",
    "chapman",
    "seber_variance",
    "poisson_diagnostics",
    "classical_report",
]

# Ratios x/n_ab above this are treated as "not << 1".
POISSON_RATIO_THRESHOLD = 0.1


def lincoln_petersen(counts: SearchCounts) -> tuple[float, float] | Undefined:
    """Naive ``(total, missed) = (n_a n_b / n_ab, x_a x_b / n_ab)``.

    With no overlap the estimate would be infinite, which cannot describe a
    finite set, so it is reported as undefined instead.
    """
    if counts.n_ab == 0:
        return Undefined(1)
    return (
        counts.n_a * counts.n_b / counts.n_ab,
        counts.x_a * counts.x_b / counts.n_ab,
    )


def chapman(counts: SearchCounts) -> tuple[float, float]:
    """Chapman's ``(total, missed)``; missed is ``x_a x_b / (n_ab + 1)``."""
    missed = counts.x_a * counts.x_b / (counts.n_ab + 1)
    return counts.n_f + missed, missed


def seber_variance(counts: SearchCounts) -> float:
    return (
        (counts.n_a + 1)
        * (counts.n_b + 1)
        * counts.x_a
        * counts.x_b
        / ((counts.n_ab + 1) ** 2 * (counts.n_ab + 2))
    )


@dataclass(frozen=True)
class PoissonDiagnostics:
    """How well a Poisson law describes the fixed-sample posterior.

    ``mode_x_star`` is the rate ``x_a x_b / n_f`` of the Poisson factor in
    the exact product decomposition of the posterior. ``stationary_x`` is
    the real root ``x_a x_b / n_ab`` of ``P(X) = P(X - 1)``; the integer
    posterior mode is ``ceil(stationary_x) - 1`` (or 0).
    """

    mode_x_star: float
    stationary_x: float
    ratio_a: float
    ratio_b: float
    exponent_rate: float
    reliable: bool


def poisson_diagnostics(
    counts: SearchCounts, threshold: float = POISSON_RATIO_THRESHOLD
) -> PoissonDiagnostics:
    if counts.n_f == 0:
        raise ValueError("poisson diagnostics need at least one item found")
    x_a, x_b, n_f = counts.x_a, counts.x_b, counts.n_f
    x_star = x_a * x_b / n_f
    if counts.n_ab == 0:
        ratio_a = ratio_b = stationary = math.inf
    else:
        ratio_a = x_a / counts.n_ab
        ratio_b = x_b / counts.n_ab
        stationary = x_a * x_b / counts.n_ab
    # a searcher with no unique finds forces x_star = 0, so its factor is 1
    rate = 0.0
    if x_a:
        rate += math.log1p(x_star / x_a)
    if x_b:
        rate += math.log1p(x_star / x_b)
    rate -= math.log1p(x_star / n_f)
    reliable = 0 < ratio_a <= threshold and 0 < ratio_b <= threshold
    return PoissonDiagnostics(x_star, stationary, ratio_a, ratio_b, rate, reliable)


@dataclass(frozen=True)
class ClassicalReport:
    lp_total: float | Undefined
    lp_missed: float | Undefined
    chapman_total: float
    chapman_missed: float
    seber_variance: float
    seber_sd: float
    poisson: PoissonDiagnostics | None
    large_discrepancy: bool


def classical_report(counts: SearchCounts) -> ClassicalReport:
    """Every classical quantity for one set of counts.

    ``large_discrepancy`` flags the regime where Chapman's estimate is
    expected to fall well short of the exact mean: no overlap, or either
    searcher's unique finds not small compared with the overlap.
    """
    lp = lincoln_petersen(counts)
    lp_total, lp_missed = (lp, lp) if isinstance(lp, Undefined) else lp
    ch_total, ch_missed = chapman(counts)
    var = seber_variance(counts)
    poisson = poisson_diagnostics(counts) if counts.n_f else None
    if counts.n_ab == 0:
        large = True
    else:
        large = max(counts.x_a, counts.x_b) / counts.n_ab > POISSON_RATIO_THRESHOLD
    return ClassicalReport(
        lp_total=lp_total,
        lp_missed=lp_missed,
        chapman_total=ch_total,
        chapman_missed=ch_missed,
        seber_variance=var,
        seber_sd=math.sqrt(var),
        poisson=poisson,
        large_discrepancy=large,
    )
