"""Threshold significance and aggregation of many correlation matrices into
counts and shares of consistently significant correlations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .matrices import CorrelationMatrix, read_label_matrix, write_label_matrix

SENSES = ("positive", "negative", "absolute")


@dataclass(frozen=True)
class ThresholdRule:
    tau: float = 0.7
    sense: str = "positive"

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.sense not in SENSES:
            raise ValueError(f"sense must be one of {SENSES}")

    def indicator(self, r: np.ndarray) -> np.ndarray:
        """Elementwise 0/1 significance; NaN (absent) is never significant."""
        r = np.asarray(r, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            if self.sense == "positive":
                hit = r >= self.tau
            elif self.sense == "negative":
                hit = r <= -self.tau
            else:
                hit = np.abs(r) >= self.tau
        return (hit & ~np.isnan(r)).astype(np.int64)


def significant(r: Optional[float], rule: ThresholdRule = ThresholdRule()) -> int:
    if r is None:
        return 0
    return int(rule.indicator(np.array([r]))[0])


@dataclass(frozen=True, eq=False)
class AggregationMatrix:
    labels: tuple[str, ...]
    counts: np.ndarray
    M: int
    rule: ThresholdRule
    valid: Optional[np.ndarray] = None
    denominator: str = "total"

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (len(self.labels),) * 2 or not np.array_equal(c, c.T):
            raise ValueError("counts must be a symmetric square matrix over the labels")
        if c.min(initial=0) < 0 or c.max(initial=0) > self.M:
            raise ValueError("counts must lie in [0, M]")
        if self.denominator not in ("total", "valid"):
            raise ValueError("denominator must be 'total' or 'valid'")
        c.flags.writeable = False
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "counts", c)

    @property
    def shares(self) -> np.ndarray:
        if self.denominator == "valid" and self.valid is not None:
            with np.errstate(invalid="ignore", divide="ignore"):
                s = self.counts / self.valid
            return np.where(self.valid > 0, s, 0.0)
        return self.counts / self.M

    def to_csv(self, directory, stem: str = "aggregation") -> None:
        d = Path(directory)
        write_label_matrix(d / f"{stem}_counts.csv", self.labels, self.counts.astype(np.float64))
        write_label_matrix(d / f"{stem}_shares.csv", self.labels, self.shares)
        meta = {
            "tau": self.rule.tau,
            "sense": self.rule.sense,
            "M": self.M,
            "denominator": self.denominator,
            "labels": list(self.labels),
        }
        if self.valid is not None:
            meta["valid"] = np.asarray(self.valid).tolist()
        (d / f"{stem}.json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def from_csv(cls, directory, stem: str = "aggregation") -> "AggregationMatrix":
        d = Path(directory)
        meta = json.loads((d / f"{stem}.json").read_text())
        labels, counts = read_label_matrix(d / f"{stem}_counts.csv")
        valid = np.array(meta["valid"]) if "valid" in meta else None
        return cls(
            labels, counts.astype(np.int64), meta["M"], ThresholdRule(meta["tau"], meta["sense"]), valid, meta["denominator"]
        )


def aggregation_counts(
    matrices: Sequence[CorrelationMatrix], rule: ThresholdRule = ThresholdRule(), denominator: str = "total"
) -> AggregationMatrix:
    """Per entry, the number of source matrices whose coefficient is significant."""
    if not matrices:
        raise ValueError("need at least one correlation matrix")
    labels = matrices[0].labels
    for m in matrices[1:]:
        if m.labels != labels:
            raise ValueError(f"label mismatch between matrices ({m.subject or 'unnamed'})")
    stack = np.stack([m.entries for m in matrices])
    counts = rule.indicator(stack).sum(axis=0)
    valid = (~np.isnan(stack)).sum(axis=0)
    return AggregationMatrix(labels, counts, len(matrices), rule, valid, denominator)


def per_parameter_site_shares(
    site_mats: Mapping[str, CorrelationMatrix], rule: ThresholdRule = ThresholdRule()
) -> dict[str, float]:
    """Share of distinct unordered site pairs with a significant coefficient, per parameter."""
    labels = None
    out = {}
    for code, m in site_mats.items():
        if labels is None:
            labels = m.labels
        elif m.labels != labels:
            raise ValueError(f"site labels differ for parameter {code}")
        n = len(m.labels)
        iu = np.triu_indices(n, k=1)
        pairs = iu[0].size
        out[code] = float(rule.indicator(m.entries[iu]).sum() / pairs) if pairs else 0.0
    return out


def write_shares_by_parameter(shares: Mapping[str, float], directory, rule: ThresholdRule, n_sites: int) -> None:
    d = Path(directory)
    with open(d / "shares_by_parameter.csv", "w") as fh:
        fh.write("parameter,share\n")
        for code, s in shares.items():
            fh.write(f"{code},{s!r}\n")
    meta = {
        "tau": rule.tau,
        "sense": rule.sense,
        "n_sites": n_sites,
        "pair_convention": "unordered distinct pairs, S*(S-1)/2",
    }
    (d / "shares_by_parameter.json").write_text(json.dumps(meta, indent=1) + "\n")
