"""Mean-correlation matrices between parameters at a site and between sites for a
parameter, computed with a vectorized daily Spearman engine."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .campaign import Campaign, DayGrid, ParameterId, SiteId, SLOTS_PER_DAY
from .rankcorr import CorrelationConfig, phase_combinations, rank_rows

PARAMETERS_AT_SITE = "parameters-at-site"
SITES_FOR_PARAMETER = "sites-for-parameter"


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    labels: tuple[str, ...]
    entries: np.ndarray
    mode: str
    subject: str = ""
    period: tuple[str, str] = ("", "")
    n_days: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        labels = tuple(self.labels)
        e = np.array(self.entries, dtype=np.float64)
        if e.shape != (len(labels), len(labels)):
            raise ValueError("entries must be square and match the labels")
        if not np.array_equal(np.isnan(e), np.isnan(e.T)) or not np.array_equal(e[~np.isnan(e)], e.T[~np.isnan(e)]):
            raise ValueError("correlation matrix must be symmetric")
        present = e[~np.isnan(e)]
        if present.size and (present.min() < -1 or present.max() > 1):
            raise ValueError("correlations must lie in [-1, 1]")
        e.flags.writeable = False
        nd = None
        if self.n_days is not None:
            nd = np.array(self.n_days, dtype=np.int64)
            nd.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "n_days", nd)
        object.__setattr__(self, "period", tuple(str(p) for p in self.period))

    def __len__(self):
        return len(self.labels)

    def get(self, a: str, b: str) -> Optional[float]:
        v = self.entries[self.labels.index(a), self.labels.index(b)]
        return None if np.isnan(v) else float(v)

    def to_csv(self, path) -> None:
        path = Path(path)
        write_label_matrix(path, self.labels, self.entries)
        meta = {
            "mode": self.mode,
            "subject": self.subject,
            "period": list(self.period),
            "labels": list(self.labels),
            "n_days": None if self.n_days is None else self.n_days.tolist(),
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def from_csv(cls, path) -> "CorrelationMatrix":
        path = Path(path)
        labels, entries = read_label_matrix(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        return cls(labels, entries, meta["mode"], meta.get("subject", ""), tuple(meta["period"]), meta.get("n_days"))


def format_float(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def write_label_matrix(path: Path, labels: Sequence[str], values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *labels])
        for lab, row in zip(labels, values):
            w.writerow([lab, *(format_float(v) for v in row)])


def read_label_matrix(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["label"]:
        raise ValueError(f"{path}: missing 'label' header")
    labels = rows[0][1:]
    if [r[0] for r in rows[1:]] != labels:
        raise ValueError(f"{path}: row labels do not match column labels")
    vals = np.array([[float(c) if c != "" else np.nan for c in r[1:]] for r in rows[1:]], dtype=np.float64)
    return labels, vals.reshape(len(labels), len(labels))


def daily_channel_correlations(values: np.ndarray, masks: np.ndarray, min_pairs: int):
    """Spearman coefficient for every channel pair on every day.

    ``values``/``masks`` have shape (channels, days, 144). Returns ``(r, n)``
    arrays of shape (days, channels, channels); absent coefficients are NaN.
    Channels sharing a day's missing-data pattern are ranked once, so a block
    of pairs reduces to one matrix product.
    """
    C, D, _ = values.shape
    r = np.full((D, C, C), np.nan)
    n = np.zeros((D, C, C), dtype=np.int64)
    for d in range(D):
        m = masks[:, d, :]
        patterns, inverse = np.unique(m, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        members = [np.flatnonzero(inverse == g) for g in range(len(patterns))]
        for g in range(len(patterns)):
            for h in range(g, len(patterns)):
                common = patterns[g] & patterns[h]
                k = int(common.sum())
                ig, ih = members[g], members[h]
                n[d][np.ix_(ig, ih)] = k
                n[d][np.ix_(ih, ig)] = k
                if k < min_pairs:
                    continue
                zg = _normalized_ranks(values[ig, d][:, common])
                zh = zg if h == g else _normalized_ranks(values[ih, d][:, common])
                block = np.clip(zg @ zh.T, -1.0, 1.0)
                if h == g:
                    block = np.triu(block) + np.triu(block, 1).T
                r[d][np.ix_(ig, ih)] = block
                r[d][np.ix_(ih, ig)] = block.T
    return r, n


def _normalized_ranks(x: np.ndarray) -> np.ndarray:
    k = x.shape[1]
    c = rank_rows(x) - (k + 1) / 2.0
    ss = np.einsum("ij,ij->i", c, c)
    out = np.full_like(c, np.nan)
    ok = ss > 0
    out[ok] = c[ok] / np.sqrt(ss[ok])[:, None]
    return out


def fisher_reduce(r: np.ndarray, axis: int, clamp_eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Fisher-z mean along ``axis`` skipping NaN; returns (mean r, count)."""
    lim = 1.0 - clamp_eps
    valid = ~np.isnan(r)
    z = np.arctanh(np.clip(np.where(valid, r, 0.0), -lim, lim))
    cnt = valid.sum(axis=axis)
    zs = np.where(valid, z, 0.0).sum(axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.tanh(zs / cnt)
    out[cnt == 0] = np.nan
    return out, cnt


@dataclass(frozen=True)
class _Unit:
    """A batch of channels sharing one daily correlation tensor."""

    values: np.ndarray
    masks: np.ndarray
    # per label pair (a, b): list of (channel_i, channel_j) combos
    pairs: list
    n_labels: int
    min_pairs: int
    clamp_eps: float


def _run_unit(unit: _Unit) -> tuple[np.ndarray, np.ndarray]:
    r, _ = daily_channel_correlations(unit.values, unit.masks, unit.min_pairs)
    per_channel, _ = fisher_reduce(r, 0, unit.clamp_eps)
    valid_day = ~np.isnan(r)
    L = unit.n_labels
    out = np.full((L, L), np.nan)
    days = np.zeros((L, L), dtype=np.int64)
    by_width: dict[int, list] = {}
    for (a, b), combos in unit.pairs:
        if combos:
            by_width.setdefault(len(combos), []).append(((a, b), combos))
    for items in by_width.values():
        a = np.array([ab[0] for ab, _ in items])
        b = np.array([ab[1] for ab, _ in items])
        ci = np.array([[c[0] for c in combos] for _, combos in items])
        cj = np.array([[c[1] for c in combos] for _, combos in items])
        mean, _ = fisher_reduce(per_channel[ci, cj], 1, unit.clamp_eps)
        used = valid_day[:, ci, cj].any(axis=2).sum(axis=0)
        out[a, b] = mean
        out[b, a] = mean
        days[a, b] = used
        days[b, a] = used
    return out, days


def _map_units(units: list, workers: int) -> list:
    if workers <= 1 or len(units) <= 1:
        return [_run_unit(u) for u in units]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_unit, units))


def _period_strings(campaign: Campaign) -> tuple[str, str]:
    return tuple(d.isoformat() for d in campaign.period)


def _stack(campaign: Campaign, grid: DayGrid, keys) -> tuple[np.ndarray, np.ndarray]:
    vals = np.zeros((len(keys), grid.n_days, SLOTS_PER_DAY))
    masks = np.zeros((len(keys), grid.n_days, SLOTS_PER_DAY), dtype=bool)
    for i, (site, param, phase) in enumerate(keys):
        vals[i], masks[i] = grid.place(campaign.get(site, param, phase))
    return vals, masks


def _parameter_unit(site: SiteId, campaign: Campaign, cfg: CorrelationConfig, grid: DayGrid) -> _Unit:
    params = campaign.parameters
    keys, index = [], {}
    for p in params:
        for ph in p.phases:
            index[(p.code, ph)] = len(keys)
            keys.append((site, p, ph))
    pairs = []
    for a, pa in enumerate(params):
        for b in range(a, len(params)):
            pb = params[b]
            combos = phase_combinations(pa, pb, a == b, "all")
            pairs.append(((a, b), [(index[(pa.code, p)], index[(pb.code, q)]) for p, q in combos]))
    vals, masks = _stack(campaign, grid, keys)
    return _Unit(vals, masks, pairs, len(params), cfg.min_pairs, cfg.clamp_eps)


def parameter_matrix(
    site: SiteId | str, campaign: Campaign, cfg: CorrelationConfig = CorrelationConfig()
) -> CorrelationMatrix:
    return parameter_matrices(campaign, cfg, sites=[site])[0]


def parameter_matrices(
    campaign: Campaign,
    cfg: CorrelationConfig = CorrelationConfig(),
    sites: Optional[Sequence[SiteId | str]] = None,
    workers: int = 1,
) -> list[CorrelationMatrix]:
    """Parameter x parameter matrices, one per site (all sites by default)."""
    grid = DayGrid.for_campaign(campaign, cfg.day_offset_seconds)
    chosen = [campaign.site(s) if isinstance(s, str) else s for s in (sites or campaign.sites)]
    units = [_parameter_unit(s, campaign, cfg, grid) for s in chosen]
    labels = [p.code for p in campaign.parameters]
    return [
        CorrelationMatrix(labels, out, PARAMETERS_AT_SITE, s.name, _period_strings(campaign), days)
        for s, (out, days) in zip(chosen, _map_units(units, workers))
    ]


def _site_unit(param: ParameterId, campaign: Campaign, cfg: CorrelationConfig, grid: DayGrid) -> _Unit:
    sites = campaign.sites
    keys, index = [], {}
    for s in sites:
        for ph in param.phases:
            index[(s.name, ph)] = len(keys)
            keys.append((s, param, ph))
    pairs = []
    for a, sa in enumerate(sites):
        for b in range(a + 1, len(sites)):
            sb = sites[b]
            combos = phase_combinations(param, param, False, cfg.phase_pairing)
            pairs.append(((a, b), [(index[(sa.name, p)], index[(sb.name, q)]) for p, q in combos]))
    vals, masks = _stack(campaign, grid, keys)
    return _Unit(vals, masks, pairs, len(sites), cfg.min_pairs, cfg.clamp_eps)


def site_matrices(
    campaign: Campaign, cfg: CorrelationConfig = CorrelationConfig(), workers: int = 1
) -> dict[str, CorrelationMatrix]:
    """Site x site matrix per parameter; diagonal entries are absent."""
    if len(campaign.sites) < 2:
        raise ValueError("site matrices need at least two sites")
    grid = DayGrid.for_campaign(campaign, cfg.day_offset_seconds)
    labels = [s.name for s in campaign.sites]
    out = {}
    # build units lazily in batches to bound memory
    batch = max(1, workers)
    params = list(campaign.parameters)
    for i in range(0, len(params), batch):
        chunk = params[i : i + batch]
        units = [_site_unit(p, campaign, cfg, grid) for p in chunk]
        for p, (m, days) in zip(chunk, _map_units(units, workers)):
            out[p.code] = CorrelationMatrix(labels, m, SITES_FOR_PARAMETER, p.code, _period_strings(campaign), days)
    return out
