import random

import numpy as np
import pytest

from pqcorr.campaign import PhaseTag
from pqcorr.ingest import (
    DuplicateRecordError,
    GridAlignmentError,
    MalformedRowError,
    PhaseMismatchError,
    UnknownCodeError,
    parse_measurements,
    read_campaign_dir,
    validate_campaign,
    validate_files,
    write_campaign,
)
from pqcorr.synth import grouped_spec, generate_campaign

from conftest import param

HEADER = "timestamp,site,parameter,phase,value"
MANIFEST = "site,voltage_level,substation\nA,110,SS1\nB,380,SS2\n"


def _stamp(i):
    return f"2024-01-01T{i // 6:02d}:{i % 6 * 10:02d}:00Z"


def _write(tmp_path, rows, manifest=MANIFEST):
    (tmp_path / "manifest.csv").write_text(manifest)
    (tmp_path / "measurements.csv").write_text("\n".join([HEADER, *rows]) + "\n")
    return tmp_path / "measurements.csv", tmp_path / "manifest.csv"


def _day_rows():
    rows = []
    for ph in ("L1", "L2", "L3"):
        rows += [f"{_stamp(i)},A,Urms,{ph},{230 + i * 0.5}" for i in range(144)]
    return rows


def test_parse_three_phases(tmp_path):
    c = parse_measurements(*_write(tmp_path, _day_rows()))
    assert len(c.series) == 3
    s = c.get("A", param("Urms"), PhaseTag.L2)
    assert len(s) == 144 and s.mask.all()
    assert s.values[3] == 231.5
    assert [p.code for p in c.parameters] == ["Urms"]


def test_blank_value_is_missing(tmp_path):
    rows = _day_rows()
    rows[5] = _stamp(5) + ",A,Urms,L1,"
    s = parse_measurements(*_write(tmp_path, rows)).get("A", param("Urms"), PhaseTag.L1)
    assert not s.mask[5] and np.isnan(s.values[5])
    assert s.mask.sum() == 143


def test_duplicate_names_row(tmp_path):
    rows = _day_rows()
    rows.append(_stamp(7) + ",A,Urms,L1,1.0")
    with pytest.raises(DuplicateRecordError, match=f"row {len(rows) + 1}"):
        parse_measurements(*_write(tmp_path, rows))


def test_off_grid_timestamp(tmp_path):
    rows = [f"2024-01-01T00:{m:02d}:00Z,A,UNB,TOTAL,1.0" for m in (0, 13, 26)]
    with pytest.raises(GridAlignmentError, match="row 3"):
        parse_measurements(*_write(tmp_path, rows))


@pytest.mark.parametrize(
    "stamp",
    ["2024-01-01T00:10:00", "2024-01-01T00:10:00+00:00", "2024-01-01 00:10:00Z", "2024-13-01T00:10:00Z"],
)
def test_non_utc_timestamp_rejected(tmp_path, stamp):
    rows = ["2024-01-01T00:00:00Z,A,UNB,TOTAL,1.0", f"{stamp},A,UNB,TOTAL,2.0"]
    with pytest.raises(MalformedRowError, match="row 3"):
        parse_measurements(*_write(tmp_path, rows))


def test_bad_value_rejected(tmp_path):
    rows = ["2024-01-01T00:00:00Z,A,UNB,TOTAL,abc"]
    with pytest.raises(MalformedRowError, match="row 2"):
        parse_measurements(*_write(tmp_path, rows))
    rows = ["2024-01-01T00:00:00Z,A,UNB,TOTAL,inf"]
    with pytest.raises(MalformedRowError):
        parse_measurements(*_write(tmp_path, rows))


def test_unknown_codes(tmp_path):
    with pytest.raises(UnknownCodeError, match="site"):
        parse_measurements(*_write(tmp_path, ["2024-01-01T00:00:00Z,Z,UNB,TOTAL,1.0"]))
    with pytest.raises(UnknownCodeError, match="parameter"):
        parse_measurements(*_write(tmp_path, ["2024-01-01T00:00:00Z,A,XYZ,TOTAL,1.0"]))


def test_phase_mismatch(tmp_path):
    with pytest.raises(PhaseMismatchError):
        parse_measurements(*_write(tmp_path, ["2024-01-01T00:00:00Z,A,UNB,L1,1.0"]))
    with pytest.raises(PhaseMismatchError):
        parse_measurements(*_write(tmp_path, ["2024-01-01T00:00:00Z,A,Urms,TOTAL,1.0"]))


def test_bad_header(tmp_path):
    (tmp_path / "manifest.csv").write_text(MANIFEST)
    (tmp_path / "measurements.csv").write_text("time,site,parameter,phase,value\n")
    with pytest.raises(MalformedRowError):
        parse_measurements(tmp_path / "measurements.csv", tmp_path / "manifest.csv")


def test_manifest_errors(tmp_path):
    with pytest.raises(MalformedRowError):
        parse_measurements(*_write(tmp_path, [], "site,voltage_level,substation\nA,20,SS\n"))
    with pytest.raises(MalformedRowError):
        parse_measurements(*_write(tmp_path, [], "site,voltage_level,substation\nA,110,SS\nA,220,SS\n"))


def test_row_order_irrelevant(tmp_path):
    rows = _day_rows() + [f"{_stamp(i)},B,UNB,TOTAL,{i}" for i in range(0, 144, 2)]
    a = parse_measurements(*_write(tmp_path, rows))
    random.Random(0).shuffle(rows)
    b = parse_measurements(*_write(tmp_path, rows))
    assert a == b
    # sparse rows leave gaps rather than shifting samples
    s = b.get("B", param("UNB"), PhaseTag.TOTAL)
    assert len(s) == 143 and s.mask.sum() == 72 and s.values[2] == 2.0


def test_custom_parameter_file(tmp_path):
    (tmp_path / "parameters.csv").write_text("code,kind,phase_cardinality,harmonic_order\nU21,voltage,3,21\n")
    rows = [f"{_stamp(i)},A,U21,L1,{i}" for i in range(3)]
    c = parse_measurements(*_write(tmp_path, rows))
    assert c.parameters[0].code == "U21" and c.parameters[0].harmonic_order == 21


def test_write_read_round_trip(tmp_path):
    c = generate_campaign(grouped_spec(2, 2, days=2, seed=5, parameters=(param("Urms"), param("UNB")), missing_fraction=0.1))
    write_campaign(c, tmp_path)
    back = read_campaign_dir(tmp_path)
    assert back == c
    assert not (tmp_path / "parameters.csv").exists()
    first = (tmp_path / "measurements.csv").read_text()
    write_campaign(back, tmp_path)
    assert (tmp_path / "measurements.csv").read_text() == first


def test_validation_coverage(tmp_path):
    rows = _day_rows() + [f"{_stamp(i)},B,UNB,TOTAL,{i}" for i in range(72)]
    c = parse_measurements(*_write(tmp_path, rows))
    cov = validate_campaign(c).coverage()
    assert sorted(cov.values()) == [0.5, 1.0, 1.0, 1.0]
    gap = [s for s in validate_campaign(c).series if s.coverage == 0.5][0]
    assert (gap.n_gaps, gap.longest_gap) == (1, 72)


def test_validation_empty_campaign(tmp_path):
    report = validate_files(*_write(tmp_path, []))
    assert report.ok and report.series == []
    assert report.to_dict()["series"] == []


def test_validate_files_collects_problems(tmp_path):
    rows = [
        "2024-01-01T00:00:00Z,A,UNB,TOTAL,1.0",
        "2024-01-01T00:13:00Z,A,UNB,TOTAL,1.0",
        "2024-01-01T00:00:00Z,A,UNB,TOTAL,2.0",
        "2024-01-01T00:10:00Z,Q,UNB,TOTAL,1.0",
        "2024-01-01T00:10:00Z,A,UNB,L2,1.0",
        "2024-01-01T00:20:00Z,A,UNB,TOTAL,x",
    ]
    report = validate_files(*_write(tmp_path, rows))
    assert not report.ok
    assert report.grid_violations == [3]
    assert report.duplicate_records == 1
    assert report.unknown_code_rows == [5]
    assert report.phase_mismatch_rows == [6]
    assert report.malformed_rows == [7]
