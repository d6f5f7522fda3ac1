"""Seeded synthetic campaigns with planted correlation groups."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .campaign import (
    DEFAULT_PARAMETERS,
    SLOTS_PER_DAY,
    VOLTAGE_LEVELS,
    Campaign,
    ParameterId,
    RegularTimeSeries,
    SeriesKey,
    SiteId,
    to_epoch,
)

# rough magnitudes so exported values look like 10-minute PQ aggregates
NOMINAL = {"Urms": 100.0, "Upst": 0.3, "UNB": 0.5, "Uthd": 1.5, "Irms": 200.0, "Ithc": 5.0}


def _nominal(p: ParameterId) -> float:
    if p.code in NOMINAL:
        return NOMINAL[p.code]
    return 0.5 if p.quantity_kind.value == "voltage" else 1.0


@dataclass(frozen=True)
class PlantedGroup:
    """Sites whose series for ``parameters`` share a common latent profile.

    With ``couple_parameters`` all listed parameters share one profile too,
    which plants parameter-to-parameter correlation at each member site.
    """

    sites: tuple[str, ...]
    parameters: tuple[str, ...]
    sigma: float = 0.25
    couple_parameters: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "parameters", tuple(self.parameters))


@dataclass(frozen=True)
class SynthSpec:
    sites_per_level: tuple[int, int, int] = (38, 21, 26)
    parameters: tuple[ParameterId, ...] = DEFAULT_PARAMETERS
    days: int = 30
    start: date = date(2024, 1, 1)
    groups: tuple[PlantedGroup, ...] = ()
    background_sigma: float = 1.0
    day_shift_sigma: float = 0.0
    missing_fraction: float = 0.0
    seed: int = 0
    site_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.background_sigma < 0 or self.day_shift_sigma < 0:
            raise ValueError("noise levels must be >= 0")
        if not 0 <= self.missing_fraction < 1:
            raise ValueError("missing_fraction must lie in [0, 1)")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        names = {s.name for s in self.build_sites()}
        codes = {p.code for p in self.parameters}
        for g in self.groups:
            if not set(g.sites) <= names:
                raise ValueError(f"group sites {sorted(set(g.sites) - names)} not in the site list")
            if not set(g.parameters) <= codes:
                raise ValueError(f"group parameters {sorted(set(g.parameters) - codes)} unknown")

    def build_sites(self) -> list[SiteId]:
        n_total = sum(self.sites_per_level)
        names = self.site_names or tuple(f"S{i + 1:02d}" for i in range(n_total))
        if len(names) != n_total:
            raise ValueError("site_names length must equal the total site count")
        out = []
        i = 0
        for level, count in zip(VOLTAGE_LEVELS, self.sites_per_level):
            for _ in range(count):
                out.append(SiteId(names[i], level, f"SS{i % 50 + 1:02d}"))
                i += 1
        return out


def _stream(seed: int, *tokens) -> np.random.Generator:
    key = [zlib.crc32(str(t).encode()) for t in tokens]
    return np.random.default_rng(np.random.SeedSequence(seed % 2**64, spawn_key=key))


def latent_profile(rng: np.random.Generator, n_slots: int) -> np.ndarray:
    """Diurnal shape: 1-3 sinusoids (daily, half-daily, weekly) plus a slow random walk."""
    t = np.arange(n_slots) / SLOTS_PER_DAY
    out = np.sin(2 * np.pi * t + rng.uniform(0, 2 * np.pi))
    for _ in range(int(rng.integers(0, 3))):
        period = rng.choice([0.5, 7.0])
        out += rng.uniform(0.2, 0.6) * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    out += np.cumsum(rng.normal(0.0, 0.01, n_slots))
    return out


def generate_campaign(spec: SynthSpec) -> Campaign:
    sites = spec.build_sites()
    n = spec.days * SLOTS_PER_DAY
    start = to_epoch(datetime.combine(spec.start, datetime.min.time(), timezone.utc))

    latents: dict[tuple[int, str], np.ndarray] = {}
    membership: dict[tuple[str, str], list[int]] = {}
    for gi, g in enumerate(spec.groups):
        for code in g.parameters:
            token = "*" if g.couple_parameters else code
            if (gi, token) not in latents:
                latents[(gi, token)] = latent_profile(_stream(spec.seed, "latent", gi, token), n)
            for s in g.sites:
                membership.setdefault((s, code), []).append(gi)

    series = {}
    for site in sites:
        for p in spec.parameters:
            groups = membership.get((site.name, p.code), [])
            nominal = _nominal(p)
            decimals = 5 - int(np.floor(np.log10(nominal)))
            for ph in p.phases:
                key = SeriesKey(site, p, ph)
                rng = _stream(spec.seed, "series", key)
                if groups:
                    sigma = min(spec.groups[gi].sigma for gi in groups)
                    signal = sum(
                        latents[(gi, "*" if spec.groups[gi].couple_parameters else p.code)] for gi in groups
                    )
                else:
                    sigma = spec.background_sigma
                    signal = np.zeros(n)
                signal = signal + rng.normal(0.0, 1.0, n) * sigma
                if spec.day_shift_sigma > 0:
                    shifts = rng.normal(0.0, spec.day_shift_sigma, spec.days)
                    signal = signal + np.repeat(shifts, SLOTS_PER_DAY)
                values = np.round(nominal * (1.0 + 0.1 * signal), decimals)
                mask = np.ones(n, dtype=bool)
                if spec.missing_fraction > 0:
                    mask = rng.random(n) >= spec.missing_fraction
                    if not mask.any():
                        mask[0] = True
                series[key] = RegularTimeSeries(start, values, mask)
    period = (spec.start, date.fromordinal(spec.start.toordinal() + spec.days))
    return Campaign(tuple(sites), tuple(spec.parameters), series, period)


def grouped_spec(
    n_groups: int = 3,
    group_size: int = 4,
    sigma: float = 0.25,
    days: int = 30,
    seed: int = 0,
    parameters: Sequence[ParameterId] = DEFAULT_PARAMETERS,
    **kw,
) -> SynthSpec:
    """Sites split into equal planted groups sharing every parameter's profile.

    Sites are spread over voltage levels as evenly as the count allows.
    """
    total = n_groups * group_size
    per_level = (total - 2 * (total // 3), total // 3, total // 3)
    names = tuple(f"S{i + 1:02d}" for i in range(total))
    codes = tuple(p.code for p in parameters)
    groups = tuple(
        PlantedGroup(names[g * group_size : (g + 1) * group_size], codes, sigma) for g in range(n_groups)
    )
    return SynthSpec(per_level, tuple(parameters), days, groups=groups, seed=seed, site_names=names, **kw)


def network_spec(seed: int = 0, days: int = 30) -> SynthSpec:
    """85-site transmission-network campaign with several overlapping group structures.

    Twelve extra-high-voltage sites and fourteen 110 kV sites form two
    mutually correlated blocks over different parameter subsets, U03 and Upst
    share network-wide profiles over large site subsets, and every site couples
    Uthd/U05/U07 and Ithc/I05/I07 internally.
    """
    base = SynthSpec(seed=seed, days=days)
    sites = base.build_sites()
    hv = [s.name for s in sites if s.voltage_level == 110]
    ehv = [s.name for s in sites if s.voltage_level != 110]
    groups = [
        PlantedGroup(tuple(ehv[:12]), ("Urms", "Irms", "U05", "U07", "I05", "I07", "Uthd", "Ithc"), 0.3),
        PlantedGroup(tuple(hv[:14]), ("Urms", "Upst", "U05", "U07", "U11", "U13", "I03", "I05", "Irms", "Ithc", "Uthd"), 0.3),
        PlantedGroup(tuple(hv[10:] + ehv[8:20]), ("U03",), 0.3),
        PlantedGroup(tuple(hv[:20] + ehv[:6]), ("Upst",), 0.35),
    ]
    for name in hv + ehv:
        groups.append(PlantedGroup((name,), ("Uthd", "U05", "U07"), 0.4, couple_parameters=True))
        groups.append(PlantedGroup((name,), ("Ithc", "I05", "I07"), 0.4, couple_parameters=True))
    return SynthSpec(seed=seed, days=days, groups=tuple(groups))
