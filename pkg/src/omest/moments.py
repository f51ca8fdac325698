"""Exact moments of the number of items missed by two searchers.

Every search procedure / prior combination handled here reduces to the
fixed-sample posterior

    P(X) ∝ (X + x_a)! (X + x_b)! / (X! (X + n_f + s)!)

for an integer *prior shift* ``s``: the scenario is equivalent to the
fixed-sample problem with ``n_a, n_b, n_ab`` all increased by ``s`` while
``x_a`` and ``x_b`` stay put.

Closed forms are evaluated in exact rational arithmetic, so counts in the
hundreds of thousands neither overflow nor lose precision to cancellation
in the central-moment combinations.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "InvalidCounts",
    "SearchCounts",
    "ScenarioKind",
    "Scenario",
    "Undefined",
    "MomentReport",
    "raw_moment",
    "mean_exact",
    "variance_exact",
    "sd_exact",
    "skewness_exact",
    "kurtosis_exact",
    "flat_prior_error_bounds",
    "moment_report",
]


class InvalidCounts(ValueError):
    """Raised when (n_a, n_b, n_ab) cannot come from two searches."""


@dataclass(frozen=True)
class SearchCounts:
    """Items found by searcher A, by B, and by both."""

    n_a: int
    n_b: int
    n_ab: int

    def __post_init__(self):
        for name in ("n_a", "n_b", "n_ab"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidCounts(f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise InvalidCounts(f"{name} must be non-negative, got {value}")
        if self.n_ab > min(self.n_a, self.n_b):
            raise InvalidCounts(
                f"n_ab={self.n_ab} exceeds min(n_a, n_b)={min(self.n_a, self.n_b)}"
            )

    @property
    def x_a(self) -> int:
        """Items found only by A."""
        return self.n_a - self.n_ab

    @property
    def x_b(self) -> int:
        """Items found only by B."""
        return self.n_b - self.n_ab

    @property
    def n_f(self) -> int:
        """Distinct items found by either searcher."""
        return self.n_a + self.n_b - self.n_ab

    def shifted(self, s: int) -> "SearchCounts":
        return SearchCounts(self.n_a + s, self.n_b + s, self.n_ab + s)

    def swapped(self) -> "SearchCounts":
        return SearchCounts(self.n_b, self.n_a, self.n_ab)


class ScenarioKind(enum.Enum):
    FIXED_SAMPLE = "fixed"
    PARTIAL_PLUS_COMPREHENSIVE = "partial"
    FULL_SEARCH_ALMOST_CONSTANT_PRIOR = "full"
    FULL_SEARCH_NORMALISABLE_PRIOR = "proper-prior"
    CUSTOM = "shift"


_PRESET_SHIFTS = {
    ScenarioKind.FIXED_SAMPLE: 0,
    ScenarioKind.PARTIAL_PLUS_COMPREHENSIVE: 1,
    ScenarioKind.FULL_SEARCH_ALMOST_CONSTANT_PRIOR: 2,
    ScenarioKind.FULL_SEARCH_NORMALISABLE_PRIOR: 4,
}

_DESCRIPTIONS = {
    ScenarioKind.FIXED_SAMPLE: "both searchers stop after a predetermined number of items",
    ScenarioKind.PARTIAL_PLUS_COMPREHENSIVE: "one predetermined-size search, one search for every item",
    ScenarioKind.FULL_SEARCH_ALMOST_CONSTANT_PRIOR: "both search for every item, prior (N+1)/(N+2)",
    ScenarioKind.FULL_SEARCH_NORMALISABLE_PRIOR: "both search for every item, prior (N+1)/((N+2)(N+3)(N+4))",
    ScenarioKind.CUSTOM: "user-supplied prior shift",
}


@dataclass(frozen=True)
class Scenario:
    """Search procedure and prior, reduced to an integer prior shift."""

    shift: int
    kind: ScenarioKind

    def __post_init__(self):
        if isinstance(self.shift, bool) or not isinstance(self.shift, int) or self.shift < 0:
            raise ValueError(f"prior shift must be a non-negative integer, got {self.shift!r}")
        preset = _PRESET_SHIFTS.get(self.kind)
        if preset is not None and preset != self.shift:
            raise ValueError(f"{self.kind.name} requires shift {preset}, got {self.shift}")

    @classmethod
    def fixed_sample(cls) -> "Scenario":
        return cls(0, ScenarioKind.FIXED_SAMPLE)

    @classmethod
    def partial_plus_comprehensive(cls) -> "Scenario":
        return cls(1, ScenarioKind.PARTIAL_PLUS_COMPREHENSIVE)

    @classmethod
    def full_search(cls) -> "Scenario":
        return cls(2, ScenarioKind.FULL_SEARCH_ALMOST_CONSTANT_PRIOR)

    @classmethod
    def normalisable_prior(cls) -> "Scenario":
        return cls(4, ScenarioKind.FULL_SEARCH_NORMALISABLE_PRIOR)

    @classmethod
    def from_shift(cls, s: int) -> "Scenario":
        """Preset scenario for ``s`` in {0, 1, 2, 4}; a custom one otherwise."""
        for kind, preset in _PRESET_SHIFTS.items():
            if preset == s:
                return cls(s, kind)
        return cls(s, ScenarioKind.CUSTOM)

    @classmethod
    def parse(cls, selector: str) -> "Scenario":
        """Parse ``fixed|full|partial|proper-prior|shift:<s>``."""
        text = selector.strip().lower()
        for kind in _PRESET_SHIFTS:
            if text == kind.value:
                return cls(_PRESET_SHIFTS[kind], kind)
        match = re.fullmatch(r"shift:(\d+)", text)
        if match:
            return cls.from_shift(int(match.group(1)))
        raise ValueError(
            f"unknown scenario {selector!r}; expected fixed, full, partial, "
            "proper-prior or shift:<s>"
        )

    @property
    def selector(self) -> str:
        if self.kind is ScenarioKind.CUSTOM:
            return f"shift:{self.shift}"
        return self.kind.value

    @property
    def description(self) -> str:
        return _DESCRIPTIONS[self.kind]


@dataclass(frozen=True)
class Undefined:
    """A moment that does not exist for the observed overlap.

    ``min_n_ab`` is the smallest overlap for which it would exist under the
    same scenario.
    """

    min_n_ab: int

    def __str__(self):
        return f"undefined (requires n_ab >= {self.min_n_ab})"


def _is_defined(value) -> bool:
    return not isinstance(value, Undefined)


def _threshold(p: int, shift: int) -> int:
    # <X^p> needs n_ab + s > p + 1
    return max(p + 2 - shift, 0)


@lru_cache(maxsize=None)
def _stirling2(p: int, k: int) -> int:
    if p == k:
        return 1
    if k == 0 or k > p:
        return 0
    return k * _stirling2(p - 1, k) + _stirling2(p - 1, k - 1)


def _falling_moments(counts: SearchCounts, shift: int, kmax: int) -> list[Fraction]:
    """Factorial moments <X(X-1)...(X-k+1)> for k = 1..kmax."""
    m = counts.n_ab + shift
    out = []
    term = Fraction(1)
    for i in range(1, kmax + 1):
        term *= Fraction((counts.x_a + i) * (counts.x_b + i), m - 1 - i)
        out.append(term)
    return out


def _raw_exact(counts: SearchCounts, shift: int, p: int):
    if counts.n_ab + shift <= p + 1:
        return Undefined(_threshold(p, shift))
    if p == 0:
        return Fraction(1)
    falling = _falling_moments(counts, shift, p)
    return sum(_stirling2(p, k) * falling[k - 1] for k in range(1, p + 1))


def _check_inputs(counts, scenario):
    if not isinstance(counts, SearchCounts):
        raise TypeError("counts must be a SearchCounts")
    if not isinstance(scenario, Scenario):
        raise TypeError("scenario must be a Scenario")


def raw_moment(counts: SearchCounts, scenario: Scenario, p: int) -> float | Undefined:
    """Raw moment ``<X^p>`` of the number of missed items.

    Uses the factorial-moment expansion ``X^p = sum_k S(p, k) X^(k)`` with
    Stirling numbers of the second kind; each factorial moment is a finite
    product of count ratios. Exists only when ``n_ab + shift > p + 1``.
    """
    _check_inputs(counts, scenario)
    if isinstance(p, bool) or not isinstance(p, int) or p < 1:
        raise ValueError(f"moment order must be a positive integer, got {p!r}")
    value = _raw_exact(counts, scenario.shift, p)
    return float(value) if _is_defined(value) else value


def mean_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    """Posterior mean of the missed-item count, ``(x_a+1)(x_b+1)/(n_ab+s-2)``."""
    return raw_moment(counts, scenario, 1)


def _variance_fraction(counts: SearchCounts, shift: int):
    m = counts.n_ab + shift
    if m <= 3:
        return Undefined(_threshold(2, shift))
    num = (counts.x_a + 1) * (counts.x_b + 1) * (m + counts.x_a - 1) * (m + counts.x_b - 1)
    return Fraction(num, (m - 2) ** 2 * (m - 3))


def variance_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    _check_inputs(counts, scenario)
    value = _variance_fraction(counts, scenario.shift)
    return float(value) if _is_defined(value) else value


def sd_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    var = variance_exact(counts, scenario)
    return math.sqrt(var) if _is_defined(var) else var


def skewness_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    """Third central moment normalised by ``<X^2>^(3/2)``.

    The normalisation uses the raw second moment, not the variance.
    """
    _check_inputs(counts, scenario)
    s = scenario.shift
    m3 = _raw_exact(counts, s, 3)
    if not _is_defined(m3):
        return m3
    m1 = _raw_exact(counts, s, 1)
    m2 = _raw_exact(counts, s, 2)
    central = m3 - 3 * m2 * m1 + 2 * m1**3
    return float(central) / float(m2) ** 1.5


def kurtosis_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    """Fourth central moment normalised by ``<X^2>^2`` (raw second moment)."""
    _check_inputs(counts, scenario)
    s = scenario.shift
    m4 = _raw_exact(counts, s, 4)
    if not _is_defined(m4):
        return m4
    m1, m2, m3 = (_raw_exact(counts, s, p) for p in (1, 2, 3))
    central = m4 - 4 * m3 * m1 + 6 * m2 * m1**2 - 3 * m1**4
    return float(central / m2**2)


def flat_prior_error_bounds(counts: SearchCounts, p: int) -> tuple[float, float] | Undefined:
    """Bracket on ``<X^p>`` for a full search under a flat prior on N.

    The flat-prior moment lies within ``<X^p>_s=2 * (1 ± 1/(n_f + 1))``,
    where ``<X^p>_s=2`` is the exact moment under the almost-constant prior.
    """
    if not isinstance(counts, SearchCounts):
        raise TypeError("counts must be a SearchCounts")
    if isinstance(p, bool) or not isinstance(p, int) or p < 1:
        raise ValueError(f"moment order must be a positive integer, got {p!r}")
    centre = _raw_exact(counts, 2, p)
    if not _is_defined(centre):
        return centre
    half = centre / (counts.n_f + 1)
    return float(centre - half), float(centre + half)


@dataclass(frozen=True)
class MomentReport:
    counts: SearchCounts
    scenario: Scenario
    mean: float | Undefined
    variance: float | Undefined
    sd: float | Undefined
    skewness: float | Undefined
    kurtosis: float | Undefined
    mean_error_bound: float | None = None
    variance_error_bound: float | None = None

    @property
    def total_mean(self) -> float | Undefined:
        """Expected total number of items, ``n_f + <X>``."""
        if isinstance(self.mean, Undefined):
            return self.mean
        return self.counts.n_f + self.mean

    @property
    def shift_derived(self) -> bool:
        """Higher moments obtained through a non-zero prior shift."""
        return self.scenario.shift != 0


def moment_report(counts: SearchCounts, scenario: Scenario) -> MomentReport:
    """All moments for one scenario.

    For the full-search scenario the report also carries the worst-case
    difference from a flat prior on N: ``<X>/(n_f+1)`` for the mean, and the
    propagated bracket width for the variance.
    """
    _check_inputs(counts, scenario)
    mean = mean_exact(counts, scenario)
    variance = variance_exact(counts, scenario)
    mean_err = var_err = None
    if scenario.kind is ScenarioKind.FULL_SEARCH_ALMOST_CONSTANT_PRIOR:
        n1 = counts.n_f + 1
        if _is_defined(mean):
            mean_err = mean / n1
        second = _raw_exact(counts, 2, 2)
        if _is_defined(second):
            m1 = float(_raw_exact(counts, 2, 1))
            var_err = float(second) / n1 + m1 * m1 * (2 / n1 + 1 / n1**2)
    return MomentReport(
        counts=counts,
        scenario=scenario,
        mean=mean,
        variance=variance,
        sd=math.sqrt(variance) if _is_defined(variance) else variance,
        skewness=skewness_exact(counts, scenario),
        kurtosis=kurtosis_exact(counts, scenario),
        mean_error_bound=mean_err,
        variance_error_bound=var_err,
    )
