"""Domain types for measurement campaigns plus day slicing and pair alignment."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Mapping, Optional

import numpy as np

CADENCE = 600
SLOTS_PER_DAY = 86400 // CADENCE
VOLTAGE_LEVELS = (110, 220, 380)


class AlignmentError(ValueError):
    """Two series (or a series and a grid) do not share the 600 s cadence grid."""


class QuantityKind(str, enum.Enum):
    VOLTAGE = "voltage"
    CURRENT = "current"


class PhaseTag(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    TOTAL = "TOTAL"


THREE_PHASES = (PhaseTag.L1, PhaseTag.L2, PhaseTag.L3)


@dataclass(frozen=True)
class ParameterId:
    code: str
    quantity_kind: QuantityKind
    phase_cardinality: int = 3
    harmonic_order: Optional[int] = None

    def __post_init__(self):
        if self.phase_cardinality not in (1, 3):
            raise ValueError(f"{self.code}: phase_cardinality must be 1 or 3")
        object.__setattr__(self, "quantity_kind", QuantityKind(self.quantity_kind))

    @property
    def phases(self) -> tuple[PhaseTag, ...]:
        return THREE_PHASES if self.phase_cardinality == 3 else (PhaseTag.TOTAL,)


def _default_parameters() -> tuple[ParameterId, ...]:
    odd = range(3, 16, 2)
    volt = [
        ParameterId("Urms", "voltage"),
        ParameterId("Upst", "voltage"),
        ParameterId("UNB", "voltage", 1),
        ParameterId("Uthd", "voltage"),
    ] + [ParameterId(f"U{h:02d}", "voltage", 3, h) for h in odd]
    curr = [ParameterId("Irms", "current"), ParameterId("Ithc", "current")] + [
        ParameterId(f"I{h:02d}", "current", 3, h) for h in odd
    ]
    return tuple(volt + curr)


DEFAULT_PARAMETERS = _default_parameters()


@dataclass(frozen=True)
class SiteId:
    name: str
    voltage_level: int
    substation: str = ""

    def __post_init__(self):
        if self.voltage_level not in VOLTAGE_LEVELS:
            raise ValueError(f"site {self.name}: voltage level must be one of {VOLTAGE_LEVELS}")


@dataclass(frozen=True)
class SeriesKey:
    site: SiteId
    parameter: ParameterId
    phase: PhaseTag

    def __post_init__(self):
        object.__setattr__(self, "phase", PhaseTag(self.phase))
        if self.phase not in self.parameter.phases:
            raise ValueError(
                f"phase {self.phase.value} inconsistent with {self.parameter.code} "
                f"(cardinality {self.parameter.phase_cardinality})"
            )

    def __str__(self):
        return f"{self.site.name}/{self.parameter.code}/{self.phase.value}"


def to_epoch(ts: datetime) -> int:
    if ts.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware UTC")
    return int(ts.timestamp())


def from_epoch(seconds: int) -> datetime:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc)


@dataclass(frozen=True, eq=False)
class RegularTimeSeries:
    """Fixed 600 s cadence samples; ``mask`` marks present slots.

    Missing slots hold NaN in ``values`` but are only ever read through ``mask``.
    """

    start: int
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        start = to_epoch(self.start) if isinstance(self.start, datetime) else int(self.start)
        if start % CADENCE:
            raise AlignmentError(f"series start {from_epoch(start).isoformat()} not on a 10-minute boundary")
        values = np.array(self.values, dtype=np.float64)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 1 or values.shape != mask.shape or values.size < 1:
            raise ValueError("series needs a nonempty 1-d values array with a matching mask")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("present values must be finite")
        values[~mask] = np.nan
        values.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_optional(cls, start, values: Iterable[Optional[float]]) -> "RegularTimeSeries":
        vals = list(values)
        mask = [v is not None for v in vals]
        return cls(start, [np.nan if v is None else v for v in vals], mask)

    @property
    def cadence(self) -> int:
        return CADENCE

    @property
    def end(self) -> int:
        """Epoch second one cadence past the last slot."""
        return self.start + len(self) * CADENCE

    def __len__(self):
        return self.values.size

    def timestamp(self, i: int) -> int:
        return self.start + i * CADENCE

    def optional_values(self) -> list[Optional[float]]:
        return [float(v) if m else None for v, m in zip(self.values, self.mask)]

    def coverage(self) -> float:
        return float(self.mask.mean())

    def __eq__(self, other):
        if not isinstance(other, RegularTimeSeries):
            return NotImplemented
        return (
            self.start == other.start
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values[self.mask], other.values[other.mask])
        )

    __hash__ = None


@dataclass(frozen=True)
class DaySlice:
    day_index: int
    samples: range
    partial: bool


def slice_days(series: RegularTimeSeries, day_boundary_offset: int = 0) -> list[DaySlice]:
    """Split a series into campaign-clock days.

    ``day_index`` counts days since the Unix epoch on the shifted clock, so
    indices are comparable across series.
    """
    if not 0 <= day_boundary_offset < 86400:
        raise ValueError("day_boundary_offset must lie in [0, 86400)")
    out = []
    n = len(series)
    i = 0
    while i < n:
        t = series.timestamp(i) - day_boundary_offset
        day = t // 86400
        day_end = (day + 1) * 86400 + day_boundary_offset
        stop = min(n, i + (day_end - series.timestamp(i)) // CADENCE)
        out.append(DaySlice(day, range(i, stop), stop - i != SLOTS_PER_DAY))
        i = stop
    return out


@dataclass(frozen=True)
class AlignedPairs:
    x: np.ndarray
    y: np.ndarray
    times: np.ndarray

    @property
    def count(self) -> int:
        return int(self.x.size)


def check_aligned(a: RegularTimeSeries, b: RegularTimeSeries) -> int:
    """Slot offset of ``b`` relative to ``a``."""
    delta = b.start - a.start
    if delta % CADENCE:
        raise AlignmentError("series are not on a common 600 s grid")
    return delta // CADENCE


def align_pairs(a: RegularTimeSeries, b: RegularTimeSeries, samples: Optional[range] = None) -> AlignedPairs:
    """Pairs present in both series. ``samples`` indexes into ``a``."""
    shift = check_aligned(a, b)
    if samples is None:
        samples = range(len(a))
    idx = np.arange(samples.start, samples.stop)
    idx = idx[(idx >= 0) & (idx < len(a))]
    jdx = idx - shift
    ok = (jdx >= 0) & (jdx < len(b))
    idx, jdx = idx[ok], jdx[ok]
    both = a.mask[idx] & b.mask[jdx]
    idx, jdx = idx[both], jdx[both]
    return AlignedPairs(a.values[idx], b.values[jdx], a.start + idx * CADENCE)


def day_floor(epoch: int) -> int:
    return epoch - epoch % 86400


@dataclass(frozen=True, eq=False)
class Campaign:
    sites: tuple[SiteId, ...]
    parameters: tuple[ParameterId, ...]
    series: Mapping[SeriesKey, RegularTimeSeries]
    period: tuple[date, date] = None
    _site_index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        sites = tuple(self.sites)
        params = tuple(self.parameters)
        names = [s.name for s in sites]
        if len(set(names)) != len(names):
            raise ValueError("site names must be unique within a campaign")
        if len({p.code for p in params}) != len(params):
            raise ValueError("parameter codes must be unique")
        series = dict(sorted(self.series.items(), key=lambda kv: self._order_key(kv[0], sites, params)))
        period = self.period
        if period is None and series:
            lo = min(s.start for s in series.values())
            hi = max(s.end for s in series.values())
            period = (from_epoch(day_floor(lo)).date(), from_epoch(day_floor(hi - 1) + 86400).date())
        if period is not None:
            p0 = to_epoch(datetime.combine(period[0], datetime.min.time(), timezone.utc))
            p1 = to_epoch(datetime.combine(period[1], datetime.min.time(), timezone.utc))
            for key, s in series.items():
                if s.start < p0 or s.end > p1:
                    raise ValueError(f"series {key} extends outside the campaign period")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "parameters", params)
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "_site_index", {s.name: s for s in sites})

    @staticmethod
    def _order_key(key: SeriesKey, sites, params):
        try:
            return (sites.index(key.site), params.index(key.parameter), key.phase.value)
        except ValueError:
            raise ValueError(f"series {key} references a site or parameter outside the campaign") from None

    def site(self, name: str) -> SiteId:
        try:
            return self._site_index[name]
        except KeyError:
            raise KeyError(f"unknown site {name!r}") from None

    def parameter(self, code: str) -> ParameterId:
        for p in self.parameters:
            if p.code == code:
                return p
        raise KeyError(f"unknown parameter {code!r}")

    def get(self, site: SiteId | str, parameter: ParameterId | str, phase: PhaseTag | str) -> Optional[RegularTimeSeries]:
        """Series for one channel, or None if it was never measured. Names and codes are accepted."""
        if isinstance(site, str):
            site = self.site(site)
        if isinstance(parameter, str):
            parameter = self.parameter(parameter)
        return self.series.get(SeriesKey(site, parameter, PhaseTag(phase)))

    def period_bounds(self) -> tuple[int, int]:
        p0, p1 = self.period
        return (
            to_epoch(datetime.combine(p0, datetime.min.time(), timezone.utc)),
            to_epoch(datetime.combine(p1, datetime.min.time(), timezone.utc)),
        )

    def __eq__(self, other):
        if not isinstance(other, Campaign):
            return NotImplemented
        return (
            self.sites == other.sites
            and self.parameters == other.parameters
            and self.period == other.period
            and list(self.series) == list(other.series)
            and all(self.series[k] == other.series[k] for k in self.series)
        )

    __hash__ = None


@dataclass(frozen=True)
class DayGrid:
    """Dense day-by-slot layout covering a campaign period on a shifted clock."""

    origin: int
    n_days: int

    @classmethod
    def for_campaign(cls, campaign: Campaign, day_offset: int = 0) -> "DayGrid":
        lo, hi = campaign.period_bounds()
        origin = day_floor(lo - day_offset) + day_offset
        n_days = -(-(hi - origin) // 86400)
        return cls(origin, int(n_days))

    @property
    def day_index0(self) -> int:
        return (self.origin - self._offset()) // 86400

    def _offset(self) -> int:
        return self.origin % 86400

    def place(self, series: Optional[RegularTimeSeries]) -> tuple[np.ndarray, np.ndarray]:
        """(values, mask) arrays of shape (n_days, 144) for one series."""
        n = self.n_days * SLOTS_PER_DAY
        vals = np.zeros(n)
        mask = np.zeros(n, dtype=bool)
        if series is not None:
            off = series.start - self.origin
            if off % CADENCE:
                raise AlignmentError("series not on the campaign grid")
            i0 = off // CADENCE
            i1 = i0 + len(series)
            if i0 < 0 or i1 > n:
                raise ValueError("series extends outside the day grid")
            vals[i0:i1] = np.where(series.mask, series.values, 0.0)
            mask[i0:i1] = series.mask
        return vals.reshape(self.n_days, SLOTS_PER_DAY), mask.reshape(self.n_days, SLOTS_PER_DAY)

