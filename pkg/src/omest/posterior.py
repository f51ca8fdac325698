"""Numerical posterior over the number of missed items.

The posterior is tabulated on ``X = 0..x_max`` in the log domain. The
neglected tail is bracketed from both sides, so moments of the table come
with rigorous error bars and serve as an independent check on the closed
forms in :mod:`omest.moments`.

Tail bracketing
---------------
Past ``x_max = M`` the term ratio ``t(X+1)/t(X)`` of any summand used here
is a ratio of products of linear factors ``prod(X + a_i) / prod(X + b_j)``.
It is compared with the ratio ``(X + alpha)/(X + alpha + delta)`` of
``g(X) = Gamma(X + alpha) / Gamma(X + alpha + delta)``, where
``delta = sum(b) - sum(a)``. The tail of ``g`` telescopes::

    sum_{X > M} g(X) = g(M) (M + alpha) / (delta - 1)

so if the ratio of ``t`` stays below (above) that of ``g`` for every
``X >= M``, the tail of ``t`` is at most (at least) ``t(M) (M + alpha) /
(delta - 1)``. The ratio condition is a polynomial inequality, linear in
``alpha``; it is certified by requiring every coefficient of the polynomial
re-expanded about ``M`` to carry the right sign, which is exact integer
arithmetic. The tightest admissible ``alpha`` on each side gives the
bracket.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .moments import SearchCounts, Scenario, ScenarioKind, Undefined

__all__ = [
    "WeightFamily",
    "DivergentSeriesError",
    "BudgetExceededError",
    "PosteriorTable",
    "TableMoment",
    "CredibleInterval",
    "log_weight",
    "normalization_exact",
    "build_table",
    "table_moment",
    "mode",
    "credible_interval",
]

DEFAULT_TAIL_TOL = 1e-10
DEFAULT_MAX_TERMS = 10**8
_EPS = np.finfo(float).eps


class WeightFamily(enum.Enum):
    SHIFTED = "shifted"
    FLAT_PRIOR = "flat-prior"


class DivergentSeriesError(ValueError):
    """The posterior cannot be normalised for these counts."""

    def __init__(self, message: str, min_n_ab: int):
        super().__init__(message)
        self.min_n_ab = min_n_ab


class BudgetExceededError(RuntimeError):
    """The table would need more terms than allowed."""


def _family(scenario: Scenario, flat_prior: bool) -> WeightFamily:
    if not flat_prior:
        return WeightFamily.SHIFTED
    if scenario.kind is not ScenarioKind.FULL_SEARCH_ALMOST_CONSTANT_PRIOR:
        raise ValueError("the flat-prior weight only applies to the full-search scenario")
    return WeightFamily.FLAT_PRIOR


def log_weight(counts: SearchCounts, scenario: Scenario, x, *, flat_prior: bool = False):
    """Unnormalised log posterior weight of ``X = x`` missed items.

    ``x`` may be a scalar or an integer array.
    """
    family = _family(scenario, flat_prior)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    base = gammaln(x + counts.x_a + 1) + gammaln(x + counts.x_b + 1) - gammaln(x + 1)
    if family is WeightFamily.FLAT_PRIOR:
        out = base - gammaln(x + counts.n_f + 2) - np.log(x + counts.n_f + 1)
    else:
        out = base - gammaln(x + counts.n_f + scenario.shift + 1)
    return float(out) if out.ndim == 0 else out


def normalization_exact(counts: SearchCounts, scenario: Scenario) -> float | Undefined:
    """Log of the exact sum of the shifted-family weights over ``X >= 0``.

    Closed form from Gauss's summation of the hypergeometric series at unit
    argument; the series converges only when ``n_ab + shift > 1``.
    """
    m = counts.n_ab + scenario.shift
    if m <= 1:
        return Undefined(max(2 - scenario.shift, 0))
    lg = math.lgamma
    return (
        lg(counts.x_a + 1)
        + lg(counts.x_b + 1)
        + lg(m - 1)
        - lg(m + counts.x_b)
        - lg(m + counts.x_a)
    )


# --- exact tail bracketing -------------------------------------------------


def _ratio_factors(counts: SearchCounts, shift: int, family: WeightFamily, p: int):
    """Linear factors of t(X+1)/t(X) for t(X) = X^p w(X)."""
    if family is WeightFamily.FLAT_PRIOR:
        num = [counts.x_a + 1, counts.x_b + 1, counts.n_f + 1]
        den = [1, counts.n_f + 2, counts.n_f + 2]
    else:
        num = [counts.x_a + 1, counts.x_b + 1]
        den = [1, counts.n_f + shift + 1]
    return num + [1] * p, den + [0] * p


def _poly_from_roots(shifts) -> list[int]:
    """Coefficients (lowest first) of prod(X + a)."""
    coeffs = [1]
    for a in shifts:
        nxt = [0] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            nxt[i] += c * a
            nxt[i + 1] += c
        coeffs = nxt
    return coeffs


def _poly_sub(a, b):
    n = max(len(a), len(b))
    a = a + [0] * (n - len(a))
    b = b + [0] * (n - len(b))
    return [x - y for x, y in zip(a, b)]


def _taylor_shift(coeffs, m: int) -> list[int]:
    """Coefficients of P(m + Y) given those of P(X)."""
    c = list(coeffs)
    n = len(c)
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            c[j] += m * c[j + 1]
    return c


def _tail_factors(num, den, m: int) -> tuple[float, float] | None:
    """``(lo, hi)`` with ``lo t(m) <= sum_{X>m} t(X) <= hi t(m)``.

    Returns None when the series diverges or ``m`` is not yet far enough
    into the tail for the comparison to be certified.
    """
    delta = sum(den) - sum(num)
    if delta <= 1 or m < 1:
        return None
    pn = _poly_from_roots(num)
    pd = _poly_from_roots(den)
    # D(alpha) = pd (X + alpha) - pn (X + alpha + delta) = d0 + alpha d1
    d0 = _poly_sub([0] + pd, _poly_sub([0] + pn, [-delta * c for c in pn]))
    d1 = _poly_sub(pd, pn)
    s0 = _taylor_shift(d0, m)
    s1 = _taylor_shift(d1, m) + [0] * (len(s0) - len(d1))

    up_min, up_max = None, None  # alpha range with D >= 0 on [m, inf)
    lo_min, lo_max = None, None  # alpha range with D <= 0 on [m, inf)
    up_ok = lo_ok = True
    for a, b in zip(s0, s1):
        if b == 0:
            up_ok &= a >= 0
            lo_ok &= a <= 0
            continue
        r = Fraction(-a, b)
        if b > 0:
            up_min = r if up_min is None else max(up_min, r)
            lo_max = r if lo_max is None else min(lo_max, r)
        else:
            up_max = r if up_max is None else min(up_max, r)
            lo_min = r if lo_min is None else max(lo_min, r)
    if not (up_ok and lo_ok) or up_min is None or lo_max is None:
        return None
    if up_max is not None and up_min > up_max:
        return None
    if lo_min is not None and lo_max < lo_min:
        return None
    if m + lo_max <= 0 or m + up_min <= 0:
        return None
    return float(m + lo_max) / (delta - 1), float(m + up_min) / (delta - 1)


# --- tables -----------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorTable:
    """Log weights on ``X = 0..x_max`` plus a bracket on the neglected tail.

    ``tail_lower`` and ``tail_upper`` bound the weight beyond ``x_max``
    relative to the tabulated weight. The normalisation uses the midpoint,
    so the tabulated probabilities sum to ``1 - eps`` with
    ``0 <= eps <= tail_mass_bound``. ``log_rounding`` estimates the floating
    error carried by ``log_norm`` from the log-gamma evaluations.
    """

    counts: SearchCounts
    scenario: Scenario
    family: WeightFamily
    log_weights: np.ndarray
    log_partial: float
    tail_lower: float
    tail_upper: float
    tail_tol: float
    log_rounding: float = 0.0

    @property
    def x_max(self) -> int:
        return len(self.log_weights) - 1

    @property
    def x(self) -> np.ndarray:
        return np.arange(len(self.log_weights))

    @property
    def log_norm(self) -> float:
        return self.log_partial + math.log1p(0.5 * (self.tail_lower + self.tail_upper))

    @property
    def tail_mass_bound(self) -> float:
        return self.tail_upper

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_norm)

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    def metadata(self) -> dict:
        return {
            "n_a": self.counts.n_a,
            "n_b": self.counts.n_b,
            "n_ab": self.counts.n_ab,
            "n_f": self.counts.n_f,
            "scenario": self.scenario.selector,
            "shift": self.scenario.shift,
            "family": self.family.value,
            "x_max": self.x_max,
            "log_norm": self.log_norm,
            "tail_mass_bound": self.tail_mass_bound,
            "tail_tol": self.tail_tol,
            "log_rounding": self.log_rounding,
        }

    def to_dict(self) -> dict:
        pmf = self.pmf
        return {
            "metadata": self.metadata(),
            "x": self.x.tolist(),
            "pmf": pmf.tolist(),
            "cdf": np.cumsum(pmf).tolist(),
        }

    def to_json(self, fp=None, **kwargs) -> str | None:
        if fp is None:
            return json.dumps(self.to_dict(), **kwargs)
        json.dump(self.to_dict(), fp, **kwargs)
        return None

    def to_csv(self, fp=None) -> str | None:
        """Write ``x,pmf,cdf`` rows; returns the text when ``fp`` is None."""
        buf = io.StringIO() if fp is None else fp
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "pmf", "cdf"])
        pmf = self.pmf
        for x, p, c in zip(range(len(pmf)), pmf, np.cumsum(pmf)):
            writer.writerow([x, repr(float(p)), repr(float(c))])
        return buf.getvalue() if fp is None else None


def _mode_from_factors(num, den) -> int:
    """Smallest X with w(X+1) <= w(X); the weights cross that level once."""

    def descending(x):
        pn = pd = 1
        for a in num:
            pn *= x + a
        for b in den:
            pd *= x + b
        return pn <= pd

    if descending(0):
        return 0
    hi = 1
    while not descending(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if descending(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _lgamma_scale(counts: SearchCounts, shift: int, m: int) -> np.ndarray:
    # absolute rounding of each log weight: a few ulps of its largest log-gamma term
    x = np.arange(m + 1, dtype=float)
    return 8 * _EPS * np.maximum(gammaln(x + counts.n_f + shift + 3), 1.0)


def build_table(
    counts: SearchCounts,
    scenario: Scenario,
    tail_tol: float = DEFAULT_TAIL_TOL,
    *,
    flat_prior: bool = False,
    max_terms: int = DEFAULT_MAX_TERMS,
    moment_order: int = 4,
) -> PosteriorTable:
    """Tabulate the posterior until the neglected mass is below ``tail_tol``.

    The table is also extended until the tail of ``X^p w(X)`` can be
    bracketed for every convergent ``p <= moment_order``, so that
    :func:`table_moment` always has an error bar for those orders.
    """
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    family = _family(scenario, flat_prior)
    shift = scenario.shift
    if family is WeightFamily.SHIFTED and counts.n_ab + shift < 2:
        need = 2 - shift
        raise DivergentSeriesError(
            f"posterior is not normalisable for n_ab={counts.n_ab} under the "
            f"{scenario.selector} scenario (requires n_ab >= {need}); "
            "a more convergent prior such as proper-prior is needed",
            need,
        )
    num0, den0 = _ratio_factors(counts, shift, family, 0)
    delta0 = sum(den0) - sum(num0)
    peak = _mode_from_factors(num0, den0)
    orders = [p for p in range(1, moment_order + 1) if delta0 - p > 1]

    m = min(max(64, 2 * peak + 32), max_terms - 1)
    lw = log_weight(counts, scenario, np.arange(m + 1), flat_prior=flat_prior)
    while True:
        top = lw.max()
        partial = float(np.sum(np.exp(lw - top)))
        t_m = math.exp(lw[m] - top)
        bracket = _tail_factors(num0, den0, m)
        ready = bracket is not None and all(
            _tail_factors(*_ratio_factors(counts, shift, family, p), m) is not None
            for p in orders
        )
        if ready:
            lo, hi = (t_m * f / partial for f in bracket)
            if hi <= tail_tol:
                break
            grow = min(max((hi / tail_tol) ** (1.0 / (delta0 - 1)) * 1.25, 1.25), 1000.0)
        else:
            grow = 2.0
        new_m = int(math.ceil(m * grow))
        if new_m >= max_terms:
            if m >= max_terms - 1:
                raise BudgetExceededError(
                    f"posterior table would need more than {max_terms} terms "
                    f"to reach tail_tol={tail_tol:g}"
                )
            new_m = max_terms - 1
        extra = log_weight(counts, scenario, np.arange(m + 1, new_m + 1), flat_prior=flat_prior)
        lw = np.concatenate([lw, extra])
        m = new_m

    lw.setflags(write=False)
    w = np.exp(lw - top)
    log_rounding = float(np.dot(w, _lgamma_scale(counts, shift, m)) / partial)
    return PosteriorTable(
        counts=counts,
        scenario=scenario,
        family=family,
        log_weights=lw,
        log_partial=float(top + math.log(partial)),
        tail_lower=lo,
        tail_upper=hi,
        tail_tol=tail_tol,
        log_rounding=log_rounding,
    )


@dataclass(frozen=True)
class TableMoment:
    value: float
    error_bound: float
    divergent: bool = False
    warning: str | None = None


def table_moment(table: PosteriorTable, p: int) -> TableMoment:
    """``<X^p>`` from the table, tail included, with an additive error bound.

    When the moment does not exist the truncated sum is still returned, but
    flagged: it grows without limit as the table is extended.
    """
    if isinstance(p, bool) or not isinstance(p, int) or p < 0:
        raise ValueError(f"moment order must be a non-negative integer, got {p!r}")
    if p == 0:
        return TableMoment(1.0, 0.0)
    counts, shift = table.counts, table.scenario.shift
    m = table.x_max
    lw = table.log_weights
    top = lw.max()
    w = np.exp(lw - top)
    xp = np.arange(m + 1, dtype=float) ** p
    partial_p = float(np.dot(xp, w))
    partial_0 = math.exp(table.log_partial - top)
    num, den = _ratio_factors(counts, shift, table.family, p)
    delta = sum(den) - sum(num)
    lo0, hi0 = table.tail_lower, table.tail_upper
    mid0 = 0.5 * (lo0 + hi0)
    if delta <= 1:
        value = partial_p / (partial_0 * (1 + mid0))
        return TableMoment(
            value,
            math.inf,
            divergent=True,
            warning=(
                f"<X^{p}> does not exist for n_ab={counts.n_ab} under this posterior; "
                "the truncated sum grows without bound as x_max increases"
            ),
        )
    bracket = _tail_factors(num, den, m)
    if bracket is None:
        value = partial_p / (partial_0 * (1 + mid0))
        return TableMoment(
            value,
            math.inf,
            warning=f"tail of <X^{p}> not bracketed at x_max={m}; rebuild with moment_order >= {p}",
        )
    t_m = xp[m] * w[m]
    tail_lo, tail_hi = t_m * bracket[0], t_m * bracket[1]
    value = (partial_p + 0.5 * (tail_lo + tail_hi)) / (partial_0 * (1 + mid0))
    low = (partial_p + tail_lo) / (partial_0 * (1 + hi0))
    high = (partial_p + tail_hi) / (partial_0 * (1 + lo0))
    scale = _lgamma_scale(counts, shift, m)
    weight_err = float(np.dot(xp * w, scale)) / partial_p if partial_p > 0 else 0.0
    rounding = (4 * _EPS * math.log2(m + 2) + weight_err + table.log_rounding) * abs(value)
    return TableMoment(value, max(high - value, value - low) + rounding)


def mode(table: PosteriorTable) -> int:
    """Most probable number of missed items; ties go to the smaller X."""
    num, den = _ratio_factors(table.counts, table.scenario.shift, table.family, 0)
    return _mode_from_factors(num, den)


@dataclass(frozen=True)
class CredibleInterval:
    lower: int
    upper: int
    mass: float
    probability: float


def credible_interval(table: PosteriorTable, mass: float) -> CredibleInterval:
    """Shortest run ``[lower, upper]`` holding at least ``mass`` probability.

    Among equally short runs the one holding more probability wins, then
    the one with the smaller lower end; a vanishing mass therefore lands on
    the mode.
    """
    if not 0 < mass < 1:
        raise ValueError("mass must lie strictly between 0 and 1")
    if mass >= 1 - table.tail_mass_bound:
        raise BudgetExceededError(
            f"mass {mass} is not guaranteed within the table "
            f"(tail bound {table.tail_mass_bound:.3g}); rebuild with a smaller tail_tol"
        )
    pmf = table.pmf
    cdf = np.cumsum(pmf)
    before = np.concatenate([[0.0], cdf[:-1]])
    upper = np.searchsorted(cdf, before + mass, side="left")
    valid = upper < len(cdf)
    if not valid.any():
        raise BudgetExceededError(f"mass {mass} is not reachable within the table")
    lower = np.flatnonzero(valid)
    width = upper[lower] - lower
    shortest = lower[width == width.min()]
    held = cdf[upper[shortest]] - before[shortest]
    best = int(shortest[np.argmax(held)])
    top = int(upper[best])
    return CredibleInterval(best, top, mass, float(cdf[top] - before[best]))
