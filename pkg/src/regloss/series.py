"""Exact convergence/divergence classification for exp-polynomial series.

Every series certified by this package has terms of the closed form

    term(n) = c * n**k * exp(q_1*n + q_2*n**2 + ... + q_m*n**m),

with the constant part of the exponent absorbed into ``c``.  The family is
closed under products and real powers, so composite terms (products of
schedule sequences, powers, exponential clocks) stay inside it and the
convergence question has an exact answer: the sign of the highest-degree
exponent coefficient decides, and the pure-power case falls back to the
p-series rule.  No floating-point thresholds enter the classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "ExpPolySeries",
    "Classification",
    "AlignmentError",
    "classify",
    "classify_bounded",
    "partial_sum",
    "partial_sums",
    "product_and_power",
    "exp_factor",
    "tail_sum",
]

# exp(x) overflows float64 slightly above this
_LOG_FLOAT_MAX = 709.0


class AlignmentError(ValueError):
    """Series with different start indices cannot be combined termwise."""


def _trim(coeffs) -> tuple[float, ...]:
    """Drop trailing exact zeros so the leading coefficient is meaningful."""
    out = list(float(q) for q in coeffs)
    while out and out[-1] == 0.0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class ExpPolySeries:
    """Term family ``c * n**k * exp(q(n))`` for n = start, start+1, ...

    ``exponent_poly`` holds (q_1, ..., q_m); the degree-0 part of the
    exponent belongs in ``coefficient``.
    """

    coefficient: float = 1.0
    power: float = 0.0
    exponent_poly: tuple[float, ...] = field(default_factory=tuple)
    start: int = 1

    def __post_init__(self):
        if self.start < 1:
            raise ValueError(f"start index must be >= 1, got {self.start}")
        object.__setattr__(self, "coefficient", float(self.coefficient))
        object.__setattr__(self, "power", float(self.power))
        object.__setattr__(self, "exponent_poly", _trim(self.exponent_poly))

    def log_term(self, n: int) -> float:
        """log |term(n)|; -inf when the coefficient vanishes."""
        if self.coefficient == 0.0:
            return -math.inf
        value = math.log(abs(self.coefficient)) + self.power * math.log(n)
        return value + self._exponent(n)

    def _exponent(self, n: int) -> float:
        acc = 0.0
        for j, q in enumerate(self.exponent_poly, start=1):
            acc += q * float(n) ** j
        return acc

    def term(self, n: int) -> float:
        """Value of the n-th term; +/-inf on overflow."""
        if n < self.start:
            raise ValueError(f"index {n} precedes start {self.start}")
        if self.coefficient == 0.0:
            return 0.0
        sign = 1.0 if self.coefficient > 0 else -1.0
        log_t = self.log_term(n)
        if log_t > _LOG_FLOAT_MAX:
            return sign * math.inf
        expo = self._exponent(n)
        if abs(expo) > 706.0:
            # the exponential alone would over/underflow; combine in log space
            return sign * math.exp(log_t)
        return self.coefficient * float(n) ** self.power * math.exp(expo)

    def as_dict(self) -> dict:
        return {
            "c": self.coefficient,
            "k": self.power,
            "q": list(self.exponent_poly),
            "n0": self.start,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExpPolySeries":
        return cls(
            coefficient=data["c"],
            power=data["k"],
            exponent_poly=tuple(data["q"]),
            start=data["n0"],
        )


@dataclass(frozen=True)
class Classification:
    verdict: str  # convergent | divergent | bounded | unbounded
    reason: str

    @property
    def converges(self) -> bool:
        return self.verdict in ("convergent", "bounded")


def classify(series: ExpPolySeries) -> Classification:
    """Exact convergence verdict for the sum of |term(n)|.

    Rule: the highest-degree nonzero exponent coefficient decides
    (positive -> divergent, negative -> convergent); with no exponential
    part the p-series rule applies (convergent iff power < -1, so the
    harmonic boundary counts as divergent).
    """
    if series.coefficient == 0.0:
        return Classification("convergent", "zero coefficient")
    q = series.exponent_poly
    if q:
        lead = q[-1]
        deg = len(q)
        if lead > 0:
            return Classification(
                "divergent", f"leading exponent coefficient q_{deg} = {lead:g} > 0"
            )
        return Classification(
            "convergent", f"leading exponent coefficient q_{deg} = {lead:g} < 0"
        )
    if series.power < -1.0:
        return Classification("convergent", f"p-series with power {series.power:g} < -1")
    return Classification("divergent", f"p-series with power {series.power:g} >= -1")


def classify_bounded(series: ExpPolySeries) -> Classification:
    """Exact boundedness verdict for the term family itself."""
    if series.coefficient == 0.0:
        return Classification("bounded", "zero coefficient")
    q = series.exponent_poly
    if q:
        lead = q[-1]
        deg = len(q)
        if lead > 0:
            return Classification(
                "unbounded", f"leading exponent coefficient q_{deg} = {lead:g} > 0"
            )
        return Classification(
            "bounded", f"leading exponent coefficient q_{deg} = {lead:g} < 0"
        )
    if series.power > 0.0:
        return Classification("unbounded", f"power {series.power:g} > 0")
    return Classification("bounded", f"power {series.power:g} <= 0")


def partial_sum(series: ExpPolySeries, upto: int) -> float:
    """Sum of terms from start through ``upto``; +inf once a term overflows."""
    if upto < series.start:
        raise ValueError(f"upper index {upto} precedes start {series.start}")
    terms = []
    for n in range(series.start, upto + 1):
        t = series.term(n)
        if math.isinf(t):
            return t
        terms.append(t)
    return math.fsum(terms)


def partial_sums(series: ExpPolySeries, upto: int) -> list[float]:
    """Running partial sums S(start), ..., S(upto), saturating at +inf."""
    out = []
    acc: list[float] = []
    saturated = math.nan
    for n in range(series.start, upto + 1):
        t = series.term(n)
        if math.isinf(t) or not math.isnan(saturated):
            saturated = t if math.isnan(saturated) else saturated
            out.append(saturated)
            continue
        acc.append(t)
        out.append(math.fsum(acc))
    return out


def product_and_power(series: list[ExpPolySeries], exponents: list[float]) -> ExpPolySeries:
    """Combine ``prod_i series_i ** e_i`` into a single exp-polynomial family.

    Coefficients multiply through their powers, while the n-powers and the
    exponent polynomials combine linearly.
    """
    if len(series) != len(exponents):
        raise ValueError("series and exponents must have equal length")
    if not series:
        raise ValueError("empty product")
    start = series[0].start
    if any(s.start != start for s in series):
        raise AlignmentError("all factors must share the same start index")
    coeff = 1.0
    power = 0.0
    q: list[float] = []
    for s, e in zip(series, exponents):
        coeff *= math.pow(s.coefficient, e)
        power += e * s.power
        for j, qj in enumerate(s.exponent_poly):
            while len(q) <= j:
                q.append(0.0)
            q[j] += e * qj
    return ExpPolySeries(coefficient=coeff, power=power, exponent_poly=tuple(q), start=start)


def exp_factor(coefficient: float, degree: int, start: int = 1) -> ExpPolySeries:
    """The family exp(coefficient * n**degree), e.g. an exponential clock."""
    if degree < 1:
        raise ValueError("degree must be >= 1")
    q = [0.0] * degree
    q[degree - 1] = coefficient
    return ExpPolySeries(coefficient=1.0, power=0.0, exponent_poly=tuple(q), start=start)


def tail_sum(series: ExpPolySeries, after: int, rel_tol: float = 1e-18, max_terms: int = 200_000) -> float:
    """Numeric tail sum_{n > after} term(n) for a convergent series.

    Terms are accumulated until they stop moving the running total; callers
    must have certified convergence first.
    """
    if classify(series).verdict != "convergent":
        raise ValueError("tail_sum requires a certified convergent series")
    acc = 0.0
    n = max(after, series.start - 1)
    for _ in range(max_terms):
        n += 1
        t = series.term(n)
        acc += t
        if t <= rel_tol * acc and t < 1e-290:
            break
        if acc > 0 and t <= rel_tol * acc:
            break
    return acc
