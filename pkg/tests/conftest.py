from datetime import datetime, timezone

import numpy as np
import pytest

from pqcorr.campaign import DEFAULT_PARAMETERS, Campaign, RegularTimeSeries, SeriesKey, SiteId

T0 = int(datetime(2024, 1, 1, tzinfo=timezone.utc).timestamp())

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def param(code):
    return next(p for p in DEFAULT_PARAMETERS if p.code == code)


def build_campaign(data, sites=None, start=T0, period=None):
    """``data`` maps (site, code, phase) -> 1-d array (NaN = missing)."""
    names = sorted({k[0] for k in data}) if sites is None else sites
    site_ids = {n: SiteId(n, 110, "SS") for n in names}
    codes = []
    for k in data:
        if k[1] not in codes:
            codes.append(k[1])
    params = tuple(p for p in DEFAULT_PARAMETERS if p.code in codes)
    series = {}
    for (s, code, ph), vals in data.items():
        vals = np.asarray(vals, dtype=float)
        series[SeriesKey(site_ids[s], param(code), ph)] = RegularTimeSeries(start, vals, ~np.isnan(vals))
    return Campaign(tuple(site_ids[n] for n in names), params, series, period)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
