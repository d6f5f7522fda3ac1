import json
from pathlib import Path

import pytest

from pqcorr import cli
from pqcorr.aggregate import AggregationMatrix
from pqcorr.ingest import write_campaign
from pqcorr.structure import NumericError
from pqcorr.synth import generate_campaign, grouped_spec

from conftest import param

CODES = ("Urms", "UNB", "U03", "U05", "Irms", "I05")


@pytest.fixture(scope="module")
def campaign_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("campaign")
    spec = grouped_spec(3, 2, 0.25, days=3, seed=4, parameters=tuple(param(c) for c in CODES))
    write_campaign(generate_campaign(spec), d)
    return d


@pytest.fixture(scope="module")
def pipeline_out(campaign_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["pipeline", "--in", str(campaign_dir), "--out", str(out)]) == 0
    return out


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_pipeline_artifacts(pipeline_out):
    names = set(_tree(pipeline_out))
    for required in (
        "validation.json",
        "run_manifest.json",
        "params/S01.csv",
        "params/S01.json",
        "sites/U03.csv",
        "params_aggregation_counts.csv",
        "sites_aggregation_shares.csv",
        "shares_by_parameter.csv",
        "sites_dendrogram.json",
        "sites_dendrogram.nwk",
        "sites_dendrogram_clusters.csv",
        "sites_embedding.csv",
        "params_embedding.csv",
    ):
        assert required in names
    svgs = sorted(n for n in names if n.endswith(".svg"))
    assert len(svgs) == 5
    clusters = (pipeline_out / "sites_dendrogram_clusters.csv").read_text().splitlines()[1:]
    assert [int(line.split(",")[1]) for line in clusters] == [0, 0, 1, 1, 2, 2]
    manifest = json.loads((pipeline_out / "run_manifest.json").read_text())
    assert manifest["command"] == "pipeline" and len(manifest["inputs"]["measurements.csv"]) == 64


def test_pipeline_rerun_byte_identical(campaign_dir, pipeline_out, tmp_path):
    assert cli.main(["pipeline", "--in", str(campaign_dir), "--out", str(tmp_path)]) == 0
    assert _tree(tmp_path) == _tree(pipeline_out)


def test_aggregate_tau_monotone(pipeline_out, tmp_path):
    for tau in ("0.7", "0.9"):
        assert cli.main(["aggregate", "--matrices", str(pipeline_out / "sites"), "--out", str(tmp_path / tau), "--tau", tau]) == 0
    lo = AggregationMatrix.from_csv(tmp_path / "0.7", "aggregation")
    hi = AggregationMatrix.from_csv(tmp_path / "0.9", "aggregation")
    assert (hi.counts <= lo.counts).all()
    assert hi.rule.tau == 0.9


def test_cluster_embed_shares(pipeline_out, tmp_path):
    shares = str(pipeline_out / "sites_aggregation_shares.csv")
    assert cli.main(["cluster", "--matrix", shares, "--out", str(tmp_path), "--k", "3"]) == 0
    assert cli.main(["embed", "--matrix", shares, "--out", str(tmp_path), "--dims", "2"]) == 0
    assert cli.main(["shares-by-parameter", "--matrices", str(pipeline_out / "sites"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dendrogram.nwk").read_text().endswith(";\n")
    assert (tmp_path / "embedding.csv").read_text().startswith("label,x,y\n")
    assert (tmp_path / "shares_by_parameter.csv").exists()


def test_correlate_subcommands(campaign_dir, tmp_path):
    assert cli.main(["correlate", "params", "--in", str(campaign_dir), "--out", str(tmp_path), "--site", "S02"]) == 0
    assert [p.name for p in (tmp_path / "params").glob("*.csv")] == ["S02.csv"]
    assert cli.main(["correlate", "sites", "--in", str(campaign_dir), "--out", str(tmp_path), "--threads", "2"]) == 0
    assert len(list((tmp_path / "sites").glob("*.csv"))) == len(CODES)


@pytest.mark.parametrize(
    "kind, source",
    [
        ("heatmap", "sites_aggregation_shares.csv"),
        ("heatmap", "params/S01.csv"),
        ("dendrogram", "sites_dendrogram.json"),
        ("scatter", "sites_embedding.csv"),
    ],
)
def test_plot_kinds(pipeline_out, campaign_dir, tmp_path, kind, source):
    out = tmp_path / "fig.svg"
    argv = ["plot", kind, "--in", str(pipeline_out / source), "--out", str(out), "--campaign", str(campaign_dir)]
    assert cli.main(argv) == 0
    assert out.read_text().startswith("<?xml")


def test_plot_series(campaign_dir, tmp_path):
    out = tmp_path / "s.svg"
    assert cli.main(["plot", "series", "--in", str(campaign_dir), "--out", str(out), "--parameter", "UNB"]) == 0
    assert out.read_text().count('class="series"') == 6


def test_validate(campaign_dir, tmp_path):
    assert cli.main(["validate", "--in", str(campaign_dir), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "validation.json").read_text())["ok"] is True
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.csv").write_text((campaign_dir / "manifest.csv").read_text())
    (bad / "measurements.csv").write_text("timestamp,site,parameter,phase,value\n2024-01-01T00:05:00Z,S01,UNB,TOTAL,1\n")
    assert cli.main(["validate", "--in", str(bad)]) == 2
    assert cli.main(["pipeline", "--in", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_usage_errors(campaign_dir, tmp_path, capsys):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["correlate", "params", "--in", str(campaign_dir), "--out", str(tmp_path)]) == 1
    assert cli.main(["aggregate", "--matrices", "x", "--out", "y", "--bogus"]) == 1
    assert cli.main(["aggregate", "--matrices", "x", "--out", "y", "--tau", "1.5"]) == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    assert cli.main(["validate", "--in", str(campaign_dir), "--config", str(cfg)]) == 1
    assert "c.cfg:1" in capsys.readouterr().err


def test_data_errors(tmp_path):
    assert cli.main(["correlate", "sites", "--in", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2
    assert cli.main(["aggregate", "--matrices", str(tmp_path), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_code(pipeline_out, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericError("eigen residual too large")

    monkeypatch.setattr(cli, "classical_mds", boom)
    shares = str(pipeline_out / "sites_aggregation_shares.csv")
    assert cli.main(["embed", "--matrix", shares, "--out", str(tmp_path)]) == 3


def test_synth_presets(tmp_path):
    assert cli.main(["synth", "--out", str(tmp_path / "a"), "--days", "1", "--groups", "2", "--group-size", "2"]) == 0
    assert cli.main(["synth", "--out", str(tmp_path / "b"), "--days", "1", "--groups", "2", "--group-size", "2"]) == 0
    a = (tmp_path / "a" / "measurements.csv").read_bytes()
    assert a == (tmp_path / "b" / "measurements.csv").read_bytes()
    assert len(a.splitlines()) == 1 + 4 * 58 * 144
