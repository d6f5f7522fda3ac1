"""Reading, writing and validating campaign CSV files."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .campaign import (
    CADENCE,
    DEFAULT_PARAMETERS,
    Campaign,
    ParameterId,
    PhaseTag,
    RegularTimeSeries,
    SeriesKey,
    SiteId,
    from_epoch,
)

MEASUREMENT_COLUMNS = ["timestamp", "site", "parameter", "phase", "value"]
MANIFEST_COLUMNS = ["site", "voltage_level", "substation"]
PARAMETER_COLUMNS = ["code", "kind", "phase_cardinality", "harmonic_order"]

_TS_RE = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z")


class IngestError(ValueError):
    pass


class MalformedRowError(IngestError):
    pass


class UnknownCodeError(IngestError):
    pass


class PhaseMismatchError(IngestError):
    pass


class DuplicateRecordError(IngestError):
    pass


class GridAlignmentError(IngestError):
    pass


def _read_rows(path: Path, columns: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != columns:
            raise MalformedRowError(f"{path}: expected header {','.join(columns)}")
        return list(reader)


def read_manifest(path) -> list[SiteId]:
    sites, seen = [], set()
    for lineno, row in enumerate(_read_rows(Path(path), MANIFEST_COLUMNS), start=2):
        try:
            site = SiteId(row["site"], int(row["voltage_level"]), row["substation"])
        except (TypeError, ValueError) as exc:
            raise MalformedRowError(f"{path}:{lineno}: {exc}") from None
        if site.name in seen:
            raise MalformedRowError(f"{path}:{lineno}: duplicate site {site.name!r}")
        seen.add(site.name)
        sites.append(site)
    return sites


def read_parameters(path=None) -> list[ParameterId]:
    """Built-in parameters, overridden or extended by an optional parameters.csv."""
    registry = {p.code: p for p in DEFAULT_PARAMETERS}
    if path is not None and Path(path).exists():
        for lineno, row in enumerate(_read_rows(Path(path), PARAMETER_COLUMNS), start=2):
            try:
                order = int(row["harmonic_order"]) if row["harmonic_order"] else None
                registry[row["code"]] = ParameterId(row["code"], row["kind"], int(row["phase_cardinality"]), order)
            except (TypeError, ValueError) as exc:
                raise MalformedRowError(f"{path}:{lineno}: {exc}") from None
    return list(registry.values())


@dataclass
class _Issues:
    strict: bool
    malformed: list = field(default_factory=list)
    unknown: list = field(default_factory=list)
    phase: list = field(default_factory=list)
    misaligned: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)

    def flag(self, kind: str, exc_type, rows: np.ndarray, message: str):
        if rows.size == 0:
            return
        if self.strict:
            raise exc_type(f"row {int(rows[0]) + 2}: {message}")
        getattr(self, kind).extend(int(r) + 2 for r in rows)


def _epoch_seconds(ts: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    """Epoch seconds per row and a bad-row mask; strict ISO-8601 with Z only."""
    codes, uniques = pd.factorize(ts, sort=False)
    ok = np.array([bool(_TS_RE.fullmatch(u)) for u in uniques], dtype=bool)
    parsed = pd.to_datetime(pd.Series(uniques), format="%Y-%m-%dT%H:%M:%SZ", errors="coerce", utc=True)
    ok &= parsed.notna().to_numpy()
    secs = np.zeros(len(uniques), dtype=np.int64)
    secs[ok] = (parsed[ok] - pd.Timestamp(0, tz="UTC")) // pd.Timedelta(seconds=1)
    return secs[codes], ~ok[codes]


def _parse_values(col: np.ndarray, issues: _Issues) -> tuple[np.ndarray, np.ndarray]:
    present = col != ""
    vals = np.full(col.size, np.nan)
    bad = np.zeros(col.size, dtype=bool)
    try:
        vals[present] = col[present].astype(np.float64)
    except ValueError:
        for i in np.flatnonzero(present):
            try:
                vals[i] = float(col[i])
            except ValueError:
                bad[i] = True
    bad |= present & ~np.isfinite(vals)
    issues.flag("malformed", MalformedRowError, np.flatnonzero(bad), "value is not a finite decimal number")
    return vals, present & ~bad, bad


def _load(measurements_path, manifest_path, parameters_path, strict: bool):
    sites = read_manifest(manifest_path)
    if parameters_path is None:
        guess = Path(measurements_path).with_name("parameters.csv")
        parameters_path = guess if guess.exists() else None
    registry = read_parameters(parameters_path)
    issues = _Issues(strict)

    df = pd.read_csv(measurements_path, dtype=str, keep_default_na=False, na_filter=False)
    if list(df.columns) != MEASUREMENT_COLUMNS:
        raise MalformedRowError(f"{measurements_path}: expected header {','.join(MEASUREMENT_COLUMNS)}")
    nrows = len(df)
    t, bad_ts = _epoch_seconds(df["timestamp"])
    issues.flag("malformed", MalformedRowError, np.flatnonzero(bad_ts), "timestamp must be ISO-8601 UTC with Z")
    values, present, bad_values = _parse_values(df["value"].to_numpy(dtype=object), issues)
    keep = ~bad_ts & ~bad_values

    site_index = {s.name: i for i, s in enumerate(sites)}
    param_index = {p.code: i for i, p in enumerate(registry)}
    phase_index = {ph.value: i for i, ph in enumerate(PhaseTag)}

    def codes_for(column: str, index: dict, exc_type, what: str):
        codes, uniques = pd.factorize(df[column], sort=False)
        lut = np.array([index.get(u, -1) for u in uniques], dtype=np.int64)
        mapped = lut[codes] if len(uniques) else np.zeros(nrows, dtype=np.int64)
        issues.flag(
            "unknown" if exc_type is UnknownCodeError else "malformed",
            exc_type,
            np.flatnonzero(mapped < 0),
            f"unknown {what}",
        )
        return mapped

    s_idx = codes_for("site", site_index, UnknownCodeError, "site")
    p_idx = codes_for("parameter", param_index, UnknownCodeError, "parameter")
    ph_idx = codes_for("phase", phase_index, MalformedRowError, "phase")
    keep &= (s_idx >= 0) & (p_idx >= 0) & (ph_idx >= 0)

    card = np.array([p.phase_cardinality for p in registry])
    total = phase_index["TOTAL"]
    inconsistent = keep & ((card[np.maximum(p_idx, 0)] == 1) != (ph_idx == total))
    issues.flag("phase", PhaseMismatchError, np.flatnonzero(inconsistent), "phase inconsistent with parameter cardinality")
    keep &= ~inconsistent

    misaligned = keep & (t % CADENCE != 0)
    issues.flag("misaligned", GridAlignmentError, np.flatnonzero(misaligned), "timestamp not on the 10-minute grid")
    keep &= ~misaligned

    rows = np.flatnonzero(keep)
    key = (s_idx[rows] * len(registry) + p_idx[rows]) * len(PhaseTag) + ph_idx[rows]
    order = np.lexsort((rows, t[rows], key))
    rows, key = rows[order], key[order]
    dup = np.zeros(rows.size, dtype=bool)
    dup[1:] = (key[1:] == key[:-1]) & (t[rows][1:] == t[rows][:-1])
    if dup.any():
        issues.flag("duplicates", DuplicateRecordError, np.sort(rows[dup]), "duplicate (site, parameter, phase, timestamp) record")
        rows, key = rows[~dup], key[~dup]

    series = {}
    phases = list(PhaseTag)
    bounds = np.flatnonzero(np.diff(key)) + 1
    for chunk in np.split(np.arange(rows.size), bounds) if rows.size else []:
        r = rows[chunk]
        k = int(key[chunk[0]])
        ts = t[r]
        slots = (ts - ts[0]) // CADENCE
        vals = np.full(int(slots[-1]) + 1, np.nan)
        mask = np.zeros(vals.size, dtype=bool)
        vals[slots] = np.where(present[r], values[r], np.nan)
        mask[slots] = present[r]
        site = sites[k // (len(registry) * len(PhaseTag))]
        param = registry[(k // len(PhaseTag)) % len(registry)]
        series[SeriesKey(site, param, phases[k % len(PhaseTag)])] = RegularTimeSeries(int(ts[0]), vals, mask)

    used = {k.parameter.code for k in series}
    params = tuple(p for p in registry if p.code in used)
    return Campaign(tuple(sites), params, series), issues


def parse_measurements(measurements_path, manifest_path, parameters_path=None) -> Campaign:
    """Parse measurements.csv + manifest.csv into a grid-aligned Campaign.

    Raises an :class:`IngestError` subclass naming the first offending row
    (1-based file line numbers, header = line 1).
    """
    campaign, _ = _load(measurements_path, manifest_path, parameters_path, strict=True)
    return campaign


def read_campaign_dir(directory) -> Campaign:
    d = Path(directory)
    params = d / "parameters.csv"
    return parse_measurements(d / "measurements.csv", d / "manifest.csv", params if params.exists() else None)


def write_campaign(campaign: Campaign, directory) -> None:
    """Export in the ingest schema; values use shortest round-trip decimal text."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for s in campaign.sites:
            w.writerow([s.name, s.voltage_level, s.substation])
    defaults = {p.code: p for p in DEFAULT_PARAMETERS}
    if any(defaults.get(p.code) != p for p in campaign.parameters):
        with open(d / "parameters.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PARAMETER_COLUMNS)
            for p in campaign.parameters:
                w.writerow([p.code, p.quantity_kind.value, p.phase_cardinality, p.harmonic_order or ""])
    stamps: dict[int, str] = {}

    def stamp(sec: int) -> str:
        s = stamps.get(sec)
        if s is None:
            s = stamps[sec] = from_epoch(sec).strftime("%Y-%m-%dT%H:%M:%SZ")
        return s

    with open(d / "measurements.csv", "w", newline="") as fh:
        fh.write(",".join(MEASUREMENT_COLUMNS) + "\n")
        for key, s in campaign.series.items():
            prefix = f",{key.site.name},{key.parameter.code},{key.phase.value},"
            lines = [
                stamp(s.start + i * CADENCE) + prefix + (repr(v) if m else "")
                for i, (v, m) in enumerate(zip(s.values.tolist(), s.mask.tolist()))
            ]
            fh.write("\n".join(lines))
            fh.write("\n")


@dataclass
class SeriesStats:
    key: str
    n_slots: int
    n_present: int
    n_gaps: int
    longest_gap: int
    coverage: float


@dataclass
class ValidationReport:
    series: list[SeriesStats] = field(default_factory=list)
    grid_violations: list[int] = field(default_factory=list)
    duplicate_records: int = 0
    malformed_rows: list[int] = field(default_factory=list)
    unknown_code_rows: list[int] = field(default_factory=list)
    phase_mismatch_rows: list[int] = field(default_factory=list)

    def coverage(self) -> dict[str, float]:
        return {s.key: s.coverage for s in self.series}

    @property
    def ok(self) -> bool:
        return not (
            self.grid_violations
            or self.duplicate_records
            or self.malformed_rows
            or self.unknown_code_rows
            or self.phase_mismatch_rows
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "duplicate_records": self.duplicate_records,
            "grid_violations": self.grid_violations,
            "malformed_rows": self.malformed_rows,
            "unknown_code_rows": self.unknown_code_rows,
            "phase_mismatch_rows": self.phase_mismatch_rows,
            "series": [s.__dict__ for s in self.series],
        }


def _gap_runs(mask: np.ndarray) -> tuple[int, int]:
    missing = np.concatenate([[False], ~mask, [False]]).astype(np.int8)
    edges = np.diff(missing)
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    if starts.size == 0:
        return 0, 0
    return int(starts.size), int((stops - starts).max())


def validate_campaign(campaign: Campaign) -> ValidationReport:
    """Gap and coverage statistics; coverage is relative to the campaign period."""
    report = ValidationReport()
    if not campaign.series:
        return report
    lo, hi = campaign.period_bounds()
    period_slots = (hi - lo) // CADENCE
    for key, s in campaign.series.items():
        full = np.zeros(period_slots, dtype=bool)
        i0 = (s.start - lo) // CADENCE
        full[i0 : i0 + len(s)] = s.mask
        n_gaps, longest = _gap_runs(full)
        report.series.append(
            SeriesStats(str(key), period_slots, int(s.mask.sum()), n_gaps, longest, float(s.mask.sum()) / period_slots)
        )
    return report


def validate_files(measurements_path, manifest_path, parameters_path=None) -> ValidationReport:
    """Lenient scan: offending rows are reported rather than raised."""
    campaign, issues = _load(measurements_path, manifest_path, parameters_path, strict=False)
    report = validate_campaign(campaign)
    report.grid_violations = issues.misaligned
    report.duplicate_records = len(issues.duplicates)
    report.malformed_rows = issues.malformed
    report.unknown_code_rows = issues.unknown
    report.phase_mismatch_rows = issues.phase
    return report
