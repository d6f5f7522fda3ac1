"""Rank correlation primitives: average ranks, Spearman, daily coefficients and
Fisher-z averaging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .campaign import (
    Campaign,
    PhaseTag,
    RegularTimeSeries,
    SiteId,
    ParameterId,
    align_pairs,
    check_aligned,
    CADENCE,
)

DEFAULT_CLAMP_EPS = 1e-7
DEFAULT_MIN_PAIRS = 72


class UndefinedCorrelation(ValueError):
    """At least one input is constant."""


class InsufficientData(ValueError):
    """Fewer than two paired observations."""


@dataclass(frozen=True)
class CorrelationConfig:
    min_pairs: int = DEFAULT_MIN_PAIRS
    clamp_eps: float = DEFAULT_CLAMP_EPS
    day_offset_seconds: int = 0
    phase_pairing: str = "all"

    def __post_init__(self):
        if self.min_pairs < 3:
            raise ValueError("min_pairs must be >= 3")
        if not 0 < self.clamp_eps <= 1e-3:
            raise ValueError("clamp_eps must lie in (0, 1e-3]")
        if not 0 <= self.day_offset_seconds < 86400:
            raise ValueError("day_offset_seconds must lie in [0, 86400)")
        if self.phase_pairing not in ("all", "matched"):
            raise ValueError("phase_pairing must be 'all' or 'matched'")


def average_ranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of the positions they cover."""
    return rank_rows(np.atleast_2d(np.asarray(values, dtype=np.float64)))[0]


def rank_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise average ranks of a 2-d array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("cannot rank an empty sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("ranks need finite values")
    rows, n = x.shape
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    pos = np.broadcast_to(np.arange(n), (rows, n))
    starts = np.ones((rows, n), dtype=bool)
    starts[:, 1:] = xs[:, 1:] != xs[:, :-1]
    ends = np.ones((rows, n), dtype=bool)
    ends[:, :-1] = starts[:, 1:]
    first = np.maximum.accumulate(np.where(starts, pos, 0), axis=1)
    last = np.minimum.accumulate(np.where(ends, pos, n - 1)[:, ::-1], axis=1)[:, ::-1]
    ranks = np.empty_like(xs)
    np.put_along_axis(ranks, order, (first + last) / 2.0 + 1.0, axis=1)
    return ranks


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-d sequences of equal length")
    if x.size < 2:
        raise InsufficientData(f"need at least 2 pairs, got {x.size}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = np.dot(xc, xc)
    syy = np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("correlation undefined for constant input")
    r = np.dot(xc, yc) / (np.sqrt(sxx) * np.sqrt(syy))
    return float(min(1.0, max(-1.0, r)))


def spearman(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two 1-d sequences of equal length")
    if x.size < 2:
        raise InsufficientData(f"need at least 2 pairs, got {x.size}")
    return pearson(average_ranks(x), average_ranks(y))


def fisher_mean(rs: Iterable[Optional[float]], clamp_eps: float = DEFAULT_CLAMP_EPS) -> Optional[float]:
    """tanh of the mean arctanh over present coefficients; None if there are none.

    Each coefficient is clamped to +-(1 - clamp_eps) first so |r| = 1 stays finite.
    """
    if not 0 < clamp_eps <= 1e-3:
        raise ValueError("clamp_eps must lie in (0, 1e-3]")
    vals = np.array([r for r in rs if r is not None and not np.isnan(r)], dtype=np.float64)
    if vals.size == 0:
        return None
    lim = 1.0 - clamp_eps
    z = np.arctanh(np.clip(vals, -lim, lim))
    return float(np.tanh(z.sum() / z.size))


@dataclass(frozen=True)
class DailyCorrelation:
    day_index: int
    r: Optional[float]
    n_pairs: int


def daily_spearman(
    a: RegularTimeSeries,
    b: RegularTimeSeries,
    min_pairs: int = DEFAULT_MIN_PAIRS,
    day_offset: int = 0,
) -> list[DailyCorrelation]:
    """One Spearman coefficient per day touched by either series."""
    if min_pairs < 3:
        raise ValueError("min_pairs must be >= 3")
    check_aligned(a, b)
    lo = min(a.start, b.start)
    hi = max(a.end, b.end)
    first_day = (lo - day_offset) // 86400
    last_day = (hi - 1 - day_offset) // 86400
    out = []
    for day in range(first_day, last_day + 1):
        t0 = day * 86400 + day_offset
        i0 = (t0 - a.start) // CADENCE
        pairs = align_pairs(a, b, range(i0, i0 + 86400 // CADENCE))
        r = None
        if pairs.count >= min_pairs:
            try:
                r = spearman(pairs.x, pairs.y)
            except UndefinedCorrelation:
                r = None
        out.append(DailyCorrelation(int(day), r, pairs.count))
    return out


def whole_period_spearman(a: RegularTimeSeries, b: RegularTimeSeries) -> Optional[float]:
    lo = min(a.start, b.start)
    hi = max(a.end, b.end)
    i0 = (lo - a.start) // CADENCE
    pairs = align_pairs(a, b, range(i0, i0 + (hi - lo) // CADENCE))
    try:
        return spearman(pairs.x, pairs.y)
    except (UndefinedCorrelation, InsufficientData):
        return None


def phase_combinations(
    pi: ParameterId, pj: ParameterId, same_series_possible: bool, pairing: str = "all"
) -> list[tuple[PhaseTag, PhaseTag]]:
    """Ordered phase pairs to correlate between two channels groups.

    ``same_series_possible`` is true when both sides live at one site and are the
    same parameter; identical-series pairs are then dropped.
    """
    if pairing == "matched" and pi.phase_cardinality == pj.phase_cardinality:
        combos = list(zip(pi.phases, pj.phases))
    else:
        combos = [(p, q) for p in pi.phases for q in pj.phases]
    if same_series_possible:
        combos = [(p, q) for p, q in combos if p != q]
    return combos


def pair_mean(
    a: Optional[RegularTimeSeries],
    b: Optional[RegularTimeSeries],
    cfg: CorrelationConfig,
) -> Optional[float]:
    if a is None or b is None:
        return None
    days = daily_spearman(a, b, cfg.min_pairs, cfg.day_offset_seconds)
    return fisher_mean([d.r for d in days], cfg.clamp_eps)


def phase_aggregate(
    site: SiteId,
    param_i: ParameterId,
    param_j: ParameterId,
    campaign: Campaign,
    cfg: CorrelationConfig = CorrelationConfig(),
) -> Optional[float]:
    """Single representative coefficient for a parameter pair at one site."""
    for p in (param_i, param_j):
        if not any(campaign.get(site, p, ph) is not None for ph in p.phases):
            raise KeyError(f"parameter {p.code} not measured at site {site.name}")
    combos = phase_combinations(param_i, param_j, param_i == param_j, "all")
    means = [
        pair_mean(campaign.get(site, param_i, p), campaign.get(site, param_j, q), cfg)
        for p, q in combos
    ]
    return fisher_mean(means, cfg.clamp_eps)


def site_pair_aggregate(
    site_a: SiteId,
    site_b: SiteId,
    parameter: ParameterId,
    campaign: Campaign,
    cfg: CorrelationConfig = CorrelationConfig(),
) -> Optional[float]:
    """Phase-aggregated coefficient of one parameter between two sites."""
    combos = phase_combinations(parameter, parameter, site_a == site_b, cfg.phase_pairing)
    means = [
        pair_mean(campaign.get(site_a, parameter, p), campaign.get(site_b, parameter, q), cfg)
        for p, q in combos
    ]
    return fisher_mean(means, cfg.clamp_eps)
