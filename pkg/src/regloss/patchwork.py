"""Rescale-and-patch construction: schedules, placement, certificates.

The construction places rescaled copies of a base mixing pair (velocity,
datum) in pairwise disjoint cubes that accumulate at a point.  Three
positive sequences drive it: spatial scales lam_n (the n-th cube has side
3*lam_n and hosts data supported in the concentric cube of side lam_n),
time scales tau_n, and amplitudes gamma_n.

Two ready-made schedules are provided: the total-loss schedule
(lam = e^-n, tau = n^-3, gamma = e^-n^2), under which transported data
lose every positive fractional order instantly while the velocity stays
bounded in all order-1 Sobolev norms; and the partial-loss schedule
(tau = 1/n, lam and gamma exponential with rate alpha), which trades
higher velocity regularity for loss above a computable fraction of the
datum's order.

Everything infinite is certified at the series level through
exp-polynomial classification; grids only ever see finite truncations
inside a window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import Box, Cube, Grid, ScalarField
from .mixing import FlowMap, MixerConstants, exact_solution_at
from .series import (
    ExpPolySeries,
    classify,
    classify_bounded,
    exp_factor,
    product_and_power,
    tail_sum,
)
from .sobolev import sphere_surface_area

__all__ = [
    "UnsupportedScheduleError",
    "InfeasiblePlacementError",
    "ResolutionError",
    "LipschitzEmbeddingError",
    "Condition",
    "ConstructionParams",
    "Schedule",
    "PieceSpec",
    "ConditionCertificate",
    "total_loss_schedule",
    "partial_loss_schedule",
    "make_piece",
    "place_cubes",
    "evaluate_condition",
    "blowup_time",
    "hs_lower_bound_series",
    "hs_lower_bound_partial_sums",
    "evaluate_truncated_solution",
]

_LOG_FLOAT_MAX = 709.0


class UnsupportedScheduleError(ValueError):
    """Schedule outside the exp-polynomial closure the certifier needs."""


class InfeasiblePlacementError(ValueError):
    """Cube placement impossible: the spatial scales are not summable."""


class ResolutionError(ValueError):
    """Window grid too coarse for the requested number of pieces."""


class LipschitzEmbeddingError(ValueError):
    """Velocity space embeds into Lipschitz; the construction cannot apply."""


class Condition(str, Enum):
    """Series-level conditions governing the patched construction."""

    CUBE_PLACEMENT = "A"  # sum lam_n < inf: disjoint cubes in a compact set
    VELOCITY_NORM = "B"  # velocity bounded in the order-r, L^p norm at time t
    VELOCITY_BOUND = "B-tilde"  # lam_n/tau_n bounded: velocity sup-norm bounded
    VELOCITY_NORM_LIPSCHITZ = "B-hat"  # r = 1 case of B, time-independent
    DATUM_NORM = "C"  # initial datum in the order-sigma Hilbert scale
    DATUM_BOUND = "C-tilde"  # gamma_n bounded: solution sup-norm bounded
    DATUM_L2 = "C-hat"  # initial datum in L^2 (C at sigma = 0)
    NORM_BLOWUP = "D"  # order-s norm infinite at time t


@dataclass(frozen=True)
class ConstructionParams:
    """Parameters of the partial-loss construction.

    beta = 1 - r + d/p measures how far the velocity space is from
    embedding into Lipschitz; alpha is the spatial decay rate per unit
    horizon; mu_bar is the fraction of the datum's order above which loss
    is certified within the horizon, in the limit of critically chosen
    alpha; the effective threshold of the generated schedule itself is
    alpha/(alpha + c).
    """

    dimension: int
    r: float
    p: float
    sigma: float
    horizon: float
    alpha: float
    beta: float
    mu_bar: float
    rate_b: float
    rate_c: float

    def __post_init__(self):
        if not 0.0 < self.mu_bar < 1.0:
            raise ValueError("loss threshold must lie in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def mu_effective(self) -> float:
        """Loss threshold realized by the schedule's own alpha."""
        return self.alpha / (self.alpha + self.rate_c)


@dataclass(frozen=True)
class Schedule:
    """The three driving sequences plus the cube-placement data."""

    lam: ExpPolySeries
    tau: ExpPolySeries
    gamma: ExpPolySeries
    dimension: int
    accumulation_point: tuple[float, ...]
    params: ConstructionParams | None = None

    def __post_init__(self):
        if len(self.accumulation_point) != self.dimension:
            raise ValueError("accumulation point dimension mismatch")

    def as_dict(self) -> dict:
        return {
            "lam": self.lam.as_dict(),
            "tau": self.tau.as_dict(),
            "gamma": self.gamma.as_dict(),
            "dimension": self.dimension,
            "accumulation_point": list(self.accumulation_point),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        return cls(
            lam=ExpPolySeries.from_dict(data["lam"]),
            tau=ExpPolySeries.from_dict(data["tau"]),
            gamma=ExpPolySeries.from_dict(data["gamma"]),
            dimension=data["dimension"],
            accumulation_point=tuple(data["accumulation_point"]),
        )


@dataclass(frozen=True)
class PieceSpec:
    """Rescale-and-translate recipe of one piece of the construction."""

    n: int
    lam: float
    tau: float
    gamma: float
    center: tuple[float, ...]


@dataclass(frozen=True)
class ConditionCertificate:
    """Exact verdict for one condition, with the assembled series recorded."""

    condition: Condition
    verdict: str  # convergent | divergent | bounded | unbounded
    series: ExpPolySeries
    params: dict
    reason: str

    @property
    def holds(self) -> bool:
        """True when the condition certifies the good case (A-C family)."""
        return self.verdict in ("convergent", "bounded")

    def to_dict(self) -> dict:
        return {
            "condition": self.condition.value,
            "verdict": self.verdict,
            "series": self.series.as_dict(),
            "params": dict(self.params),
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConditionCertificate":
        return cls(
            condition=Condition(data["condition"]),
            verdict=data["verdict"],
            series=ExpPolySeries.from_dict(data["series"]),
            params=dict(data["params"]),
            reason=data["reason"],
        )


def total_loss_schedule(
    dimension: int = 2, accumulation_point: tuple[float, ...] | None = None
) -> Schedule:
    """Schedule destroying all positive fractional orders instantly.

    lam_n = e^-n, tau_n = n^-3, gamma_n = e^-(n^2).
    """
    if accumulation_point is None:
        accumulation_point = (0.0,) * dimension
    return Schedule(
        lam=ExpPolySeries(1.0, 0.0, (-1.0,)),
        tau=ExpPolySeries(1.0, -3.0, ()),
        gamma=ExpPolySeries(1.0, 0.0, (0.0, -1.0)),
        dimension=dimension,
        accumulation_point=tuple(accumulation_point),
    )


def partial_loss_schedule(
    dimension: int,
    r: float,
    p: float,
    sigma: float,
    horizon: float,
    b: float,
    c: float,
    alpha_margin: float = 2.0,
    accumulation_point: tuple[float, ...] | None = None,
) -> Schedule:
    """Schedule losing the fraction of regularity above mu_bar * sigma.

    Requires r > 1 and p < d/(r-1) (the velocity space must not embed in
    Lipschitz).  tau_n = 1/n, lam_n = exp(-alpha*T*n), and gamma_n =
    n^-2 * exp(alpha*(d/2 - sigma)*T*n), with alpha = alpha_margin times
    the critical rate (r-1)*b/beta.  alpha_margin > 1 makes the velocity
    condition converge with margin; alpha_margin = 1 sits exactly at the
    critical rate where the loss threshold reaches mu_bar.
    """
    if r <= 1:
        raise LipschitzEmbeddingError("partial-loss mode needs a derivative order r > 1")
    if not p < dimension / (r - 1):
        raise LipschitzEmbeddingError(
            f"p = {p} >= d/(r-1) = {dimension / (r - 1):g}: velocity space embeds in Lipschitz"
        )
    if b <= 0 or c <= 0:
        raise ValueError("rate constants must be positive")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if alpha_margin < 1.0:
        raise ValueError("alpha margin below 1 is inadmissible")
    beta = 1.0 - r + dimension / p
    alpha = alpha_margin * (r - 1) * b / beta
    mu_bar = (r - 1) * b / ((r - 1) * b + c * beta)
    params = ConstructionParams(
        dimension=dimension,
        r=r,
        p=p,
        sigma=sigma,
        horizon=horizon,
        alpha=alpha,
        beta=beta,
        mu_bar=mu_bar,
        rate_b=b,
        rate_c=c,
    )
    if accumulation_point is None:
        accumulation_point = (0.0,) * dimension
    return Schedule(
        lam=ExpPolySeries(1.0, 0.0, (-alpha * horizon,)),
        tau=ExpPolySeries(1.0, -1.0, ()),
        gamma=ExpPolySeries(1.0, -2.0, (alpha * (dimension / 2.0 - sigma) * horizon,)),
        dimension=dimension,
        accumulation_point=tuple(accumulation_point),
        params=params,
    )


def _clock_degree(tau: ExpPolySeries) -> int:
    """Degree m with tau_n = n^-m, required to express exp(const/tau_n)."""
    m = -tau.power
    if (
        tau.coefficient != 1.0
        or tau.exponent_poly
        or m != int(m)
        or int(m) < 1
    ):
        raise UnsupportedScheduleError(
            "time scales must be exact negative integer powers n^-m to keep "
            "exp(const/tau_n) inside the exp-polynomial family"
        )
    return int(m)


def place_cubes(schedule: Schedule, count: int) -> list[Cube]:
    """First ``count`` cubes: disjoint, compactly contained, accumulating.

    Cubes are laid along the first axis with the n-th cube of side
    3*lam_n at offset 6*sum_{m>n} lam_m from the accumulation point, which
    leaves a gap of 3*lam_{n+1} between consecutive cubes.  Requires
    sum lam_n < inf, certified exactly before any placement.
    """
    if count < 1:
        raise ValueError("need at least one cube")
    verdict = classify(schedule.lam)
    if verdict.verdict != "convergent":
        raise InfeasiblePlacementError(
            f"spatial scales are not summable ({verdict.reason}); no compact placement exists"
        )
    cubes = []
    acc = schedule.accumulation_point
    for n in range(1, count + 1):
        lam_n = schedule.lam.term(n)
        offset = 6.0 * tail_sum(schedule.lam, n)
        center = (acc[0] + offset + 1.5 * lam_n,) + tuple(acc[1:])
        cubes.append(Cube(center, 3.0 * lam_n))
    return cubes


def make_piece(schedule: Schedule, n: int) -> PieceSpec:
    """Rescale-and-translate recipe for the n-th piece.

    The piece's velocity is (lam_n/tau_n) u(t/tau_n, (x - center)/lam_n)
    and its datum gamma_n rho((x - center)/lam_n), so the velocity
    sup-norm scales by lam_n/tau_n and the datum sup-norm by gamma_n.
    """
    if n < 1:
        raise ValueError(f"piece index must be >= 1, got {n}")
    return PieceSpec(
        n=n,
        lam=schedule.lam.term(n),
        tau=schedule.tau.term(n),
        gamma=schedule.gamma.term(n),
        center=place_cubes(schedule, n)[n - 1].center,
    )


def evaluate_condition(
    schedule: Schedule,
    condition: Condition,
    *,
    s: float | None = None,
    t: float | None = None,
    r: float | None = None,
    p: float | None = None,
    sigma: float | None = None,
    b: float | None = None,
    c: float | None = None,
) -> ConditionCertificate:
    """Assemble the condition's term family and classify it exactly."""
    condition = Condition(condition)
    d = schedule.dimension
    lam, tau, gamma = schedule.lam, schedule.tau, schedule.gamma
    params: dict = {"d": d, "schedule": schedule.as_dict()}

    def _need(**kwargs):
        for name, value in kwargs.items():
            if value is None:
                raise ValueError(f"condition {condition.value} needs parameter {name!r}")
            params[name] = value

    if condition is Condition.CUBE_PLACEMENT:
        series = lam
        result = classify(series)
    elif condition is Condition.VELOCITY_NORM:
        _need(r=r, p=p, b=b, t=t)
        m = _clock_degree(tau)
        series = product_and_power(
            [lam, tau, exp_factor((r - 1.0) * b * t, m, lam.start)], [1.0 - r + d / p, -1.0, 1.0]
        )
        result = classify(series)
    elif condition is Condition.VELOCITY_NORM_LIPSCHITZ:
        _need(p=p)
        series = product_and_power([lam, tau], [d / p, -1.0])
        result = classify(series)
    elif condition is Condition.VELOCITY_BOUND:
        series = product_and_power([lam, tau], [1.0, -1.0])
        result = classify_bounded(series)
    elif condition is Condition.DATUM_NORM:
        _need(sigma=sigma)
        series = product_and_power([gamma, lam], [1.0, d / 2.0 - sigma])
        result = classify(series)
    elif condition is Condition.DATUM_BOUND:
        series = gamma
        result = classify_bounded(series)
    elif condition is Condition.DATUM_L2:
        series = product_and_power([gamma, lam], [1.0, d / 2.0])
        result = classify(series)
    elif condition is Condition.NORM_BLOWUP:
        _need(s=s, t=t, c=c)
        m = _clock_degree(tau)
        series = product_and_power(
            [gamma, lam, exp_factor(2.0 * s * c * t, m, lam.start)], [2.0, d - 2.0 * s, 1.0]
        )
        result = classify(series)
    else:  # pragma: no cover
        raise ValueError(f"unknown condition {condition}")
    return ConditionCertificate(
        condition=condition,
        verdict=result.verdict,
        series=series,
        params=params,
        reason=result.reason,
    )


def blowup_time(s: float, sigma: float, alpha: float, c: float, horizon: float) -> float:
    """First time the order-s norm leaves the Hilbert scale.

    Returns (sigma - s) * alpha * horizon / (s * c) for s <= sigma and 0
    for s > sigma (loss is immediate above the datum's order).  Blow-up
    happens within the horizon iff the returned time is below it, which
    for critically chosen alpha is the threshold s/sigma > mu_bar.
    """
    if s <= 0 or c <= 0:
        raise ValueError("order s and rate c must be positive")
    if s > sigma:
        return 0.0
    return (sigma - s) * alpha * horizon / (s * c)


def _lower_bound_terms(
    schedule: Schedule,
    s: float,
    t: float,
    upto: int,
    constants: MixerConstants,
    d: int,
) -> list[float]:
    if not 0.0 < s < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {s}")
    m = _clock_degree(schedule.tau)
    base = product_and_power([schedule.gamma, schedule.lam], [2.0, d - 2.0 * s])
    c_s = constants.lower_prefactor(s)
    c_d = sphere_surface_area(d)
    log_pos_coeff = 2.0 * math.log(c_s)
    log_neg_coeff = math.log(c_d * constants.l2_norm**2 / s)
    terms = []
    for n in range(base.start, upto + 1):
        lt = base.log_term(n)
        clock = 2.0 * s * constants.mixing_rate * t * float(n) ** m
        log_pos = lt + log_pos_coeff + clock
        log_neg = lt + log_neg_coeff
        pos = math.inf if log_pos > _LOG_FLOAT_MAX else math.exp(log_pos)
        neg = math.inf if log_neg > _LOG_FLOAT_MAX else math.exp(log_neg)
        terms.append(pos - neg)
    return terms


def hs_lower_bound_series(
    schedule: Schedule, s: float, t: float, upto: int, constants: MixerConstants, d: int
) -> float:
    """Partial sum of the certified lower bound for the squared order-s norm.

    Term n is gamma_n^2 * lam_n^(d-2s) * [C_s^2 exp(2*s*c*t/tau_n)
    - C_d * C_0^2 / s], with C_s the measured growth prefactor, C_0 the
    conserved L2 norm and C_d the unit-sphere area.  The sum saturates at
    +inf once a term overflows; it is unbounded in the truncation exactly
    when the blow-up condition diverges.
    """
    terms = _lower_bound_terms(schedule, s, t, upto, constants, d)
    if any(math.isinf(x) for x in terms):
        return math.inf
    return math.fsum(terms)


def hs_lower_bound_partial_sums(
    schedule: Schedule, s: float, t: float, upto: int, constants: MixerConstants, d: int
) -> list[float]:
    """Running partial sums of the lower bound, saturating at +inf."""
    terms = _lower_bound_terms(schedule, s, t, upto, constants, d)
    out = []
    acc = 0.0
    for x in terms:
        acc = acc + x if not math.isinf(acc) else acc
        out.append(acc)
    return out


def evaluate_truncated_solution(
    schedule: Schedule,
    base_flow: FlowMap,
    base_datum: ScalarField,
    count: int,
    t: float,
    window: Cube,
    grid: Grid,
) -> ScalarField:
    """Patched solution truncated to ``count`` pieces, sampled on a window.

    The window cube becomes the fundamental cell of the returned field's
    grid.  Each piece is evaluated through the exact transported base
    solution at its own rescaled time t/tau_n, mapped into its cube and
    scaled by gamma_n; piece supports are asserted pairwise disjoint.
    """
    if abs(grid.length - window.side) > 1e-12:
        raise ValueError("window grid must use the window side as its cell length")
    if count < 1:
        raise ValueError("need at least one piece")
    cubes = place_cubes(schedule, count)
    lam_last = schedule.lam.term(count)
    if lam_last < 2.0 * grid.spacing:
        raise ResolutionError(
            f"piece {count} has scale {lam_last:.3e} below two window cells "
            f"({grid.spacing:.3e} each); shrink the window or lower the count"
        )
    corner = tuple(c - window.half for c in window.center)
    axes = [corner[i] + grid.axis() for i in range(grid.dimension)]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"))
    out = np.zeros(grid.shape)
    occupied = np.zeros(grid.shape, dtype=bool)
    base_grid = base_datum.grid
    lo = [math.inf] * grid.dimension
    hi = [-math.inf] * grid.dimension
    for n in range(1, count + 1):
        lam_n = schedule.lam.term(n)
        tau_n = schedule.tau.term(n)
        gamma_n = schedule.gamma.term(n)
        center = cubes[n - 1].center
        local_time = t / tau_n
        if local_time > base_flow.total_time + 1e-9:
            raise ValueError(
                f"piece {n} needs the base protocol up to time {local_time:.3g}, "
                f"but it spans only {base_flow.total_time:.3g}"
            )
        state = exact_solution_at(base_datum, base_flow, local_time)
        mask = np.ones(grid.shape, dtype=bool)
        unit = []
        for i in range(grid.dimension):
            delta = coords[i] - center[i]
            mask &= np.abs(delta) < 0.5 * lam_n
            unit.append(delta / lam_n + 0.5 * base_grid.length)
        if not mask.any():
            continue
        assert not (occupied & mask).any(), f"piece {n} overlaps an earlier piece"
        sampled = map_coordinates(
            state.values,
            np.stack(unit) / base_grid.spacing,
            order=5,
            mode="grid-wrap",
        )
        out[mask] += gamma_n * sampled[mask]
        occupied |= mask
        for i in range(grid.dimension):
            lo[i] = min(lo[i], center[i] - 0.5 * lam_n - corner[i])
            hi[i] = max(hi[i], center[i] + 0.5 * lam_n - corner[i])
    if math.isinf(lo[0]):
        support = Box.whole(grid)
    else:
        support = Box(
            tuple(0.5 * (a + b) for a, b in zip(lo, hi)),
            tuple(0.5 * (b - a) for a, b in zip(lo, hi)),
        )
    return ScalarField(grid, out, support)
