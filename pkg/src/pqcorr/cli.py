"""Command-line entry point.

Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .aggregate import AggregationMatrix, aggregation_counts, per_parameter_site_shares, write_shares_by_parameter
from .campaign import DEFAULT_PARAMETERS, Campaign, PhaseTag
from .config import Config, ConfigError, load_config
from .ingest import IngestError, read_campaign_dir, read_manifest, read_parameters, validate_files, write_campaign
from .matrices import CorrelationMatrix, parameter_matrices, read_label_matrix, site_matrices
from .render import StyleMap, render_dendrogram, render_heatmap, render_scatter, render_series
from .structure import Dendrogram, Embedding, NumericError, classical_mds, cut, to_distance, upgma
from .synth import SynthSpec, generate_campaign, grouped_spec, network_spec

log = logging.getLogger("pqcorr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_run_manifest(out: Path, command: str, cfg: Config, inputs: list[Path]) -> None:
    doc = {
        "command": command,
        "config": cfg.to_dict(),
        "inputs": {p.name: _sha256(p) for p in sorted(inputs) if p.is_file()},
        "versions": {
            "pqcorr": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _campaign_inputs(directory: Path) -> list[Path]:
    return [directory / n for n in ("measurements.csv", "manifest.csv", "parameters.csv")]


def _load_matrices(directory: Path) -> list[CorrelationMatrix]:
    files = sorted(p for p in directory.glob("*.csv") if p.with_suffix(".json").exists())
    if not files:
        raise IngestError(f"no correlation matrices found in {directory}")
    return [CorrelationMatrix.from_csv(p) for p in files]


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# -- individual steps, shared by subcommands and the pipeline --------------------------


def step_params(campaign: Campaign, cfg: Config, out: Path, sites=None) -> list[CorrelationMatrix]:
    mats = parameter_matrices(campaign, cfg.correlation, sites=sites, workers=cfg.threads)
    d = out / "params"
    d.mkdir(parents=True, exist_ok=True)
    for m in mats:
        m.to_csv(d / f"{_safe(m.subject)}.csv")
    return mats


def step_sites(campaign: Campaign, cfg: Config, out: Path) -> dict[str, CorrelationMatrix]:
    mats = site_matrices(campaign, cfg.correlation, workers=cfg.threads)
    d = out / "sites"
    d.mkdir(parents=True, exist_ok=True)
    for code, m in mats.items():
        m.to_csv(d / f"{_safe(code)}.csv")
    return mats


def step_cluster(labels, values, cfg: Config, out: Path, stem: str) -> Dendrogram:
    dend = upgma(to_distance(values, labels))
    dend.to_json(out / f"{stem}.json")
    (out / f"{stem}.nwk").write_text(dend.to_newick() + "\n")
    k = min(cfg.n_clusters, dend.n_leaves)
    groups = cut(dend, k)
    with open(out / f"{stem}_clusters.csv", "w") as fh:
        fh.write("label,cluster\n")
        for lab, g in zip(dend.labels, groups):
            fh.write(f"{lab},{g}\n")
    return dend


def step_embed(labels, values, cfg: Config, out: Path, stem: str) -> Embedding:
    D = to_distance(values, labels)
    emb = classical_mds(D, min(cfg.mds_dims, len(D)))
    emb.to_csv(out / f"{stem}.csv")
    return emb


# -- subcommands -----------------------------------------------------------------------


def cmd_synth(args, cfg: Config) -> int:
    if args.preset == "network":
        spec = network_spec(seed=args.seed, days=args.days)
    elif args.preset == "groups":
        spec = grouped_spec(args.groups, args.group_size, args.sigma, args.days, args.seed,
                            day_shift_sigma=args.day_shift_sigma, missing_fraction=args.missing_fraction)
    else:
        spec = SynthSpec(seed=args.seed, days=args.days, day_shift_sigma=args.day_shift_sigma,
                         missing_fraction=args.missing_fraction)
    out = Path(args.out)
    write_campaign(generate_campaign(spec), out)
    write_run_manifest(out, "synth", cfg, [])
    return EXIT_OK


def cmd_validate(args, cfg: Config) -> int:
    src = Path(args.inp)
    report = validate_files(src / "measurements.csv", src / "manifest.csv")
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    if args.out:
        write_run_manifest(out, "validate", cfg, _campaign_inputs(src))
    return EXIT_OK if report.ok else EXIT_DATA


def cmd_correlate(args, cfg: Config) -> int:
    src, out = Path(args.inp), Path(args.out)
    campaign = read_campaign_dir(src)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "params":
        if not args.all_sites and not args.site:
            raise UsageError("correlate params needs --site S or --all-sites")
        step_params(campaign, cfg, out, None if args.all_sites else [args.site])
    else:
        step_sites(campaign, cfg, out)
    write_run_manifest(out, f"correlate {args.mode}", cfg, _campaign_inputs(src))
    return EXIT_OK


def cmd_aggregate(args, cfg: Config) -> int:
    src, out = Path(args.matrices), Path(args.out)
    mats = _load_matrices(src)
    out.mkdir(parents=True, exist_ok=True)
    agg = aggregation_counts(mats, cfg.rule, cfg.denominator)
    agg.to_csv(out, args.stem)
    write_run_manifest(out, "aggregate", cfg, sorted(src.glob("*.csv")))
    return EXIT_OK


def cmd_shares(args, cfg: Config) -> int:
    src, out = Path(args.matrices), Path(args.out)
    order = {p.code: i for i, p in enumerate(DEFAULT_PARAMETERS)}
    loaded = sorted(_load_matrices(src), key=lambda m: (order.get(m.subject, len(order)), m.subject))
    mats = {m.subject: m for m in loaded}
    out.mkdir(parents=True, exist_ok=True)
    shares = per_parameter_site_shares(mats, cfg.rule)
    write_shares_by_parameter(shares, out, cfg.rule, len(next(iter(mats.values()))))
    write_run_manifest(out, "shares-by-parameter", cfg, sorted(src.glob("*.csv")))
    return EXIT_OK


def cmd_cluster(args, cfg: Config) -> int:
    src, out = Path(args.matrix), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels, values = read_label_matrix(src)
    step_cluster(labels, values, cfg, out, args.stem)
    write_run_manifest(out, "cluster", cfg, [src])
    return EXIT_OK


def cmd_embed(args, cfg: Config) -> int:
    src, out = Path(args.matrix), Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    labels, values = read_label_matrix(src)
    step_embed(labels, values, cfg, out, args.stem)
    write_run_manifest(out, "embed", cfg, [src])
    return EXIT_OK


def _style(args) -> StyleMap:
    if getattr(args, "campaign", None):
        campaign_dir = Path(args.campaign)
        style = StyleMap.for_sites(read_manifest(campaign_dir / "manifest.csv"))
        pstyle = StyleMap.for_parameters(read_parameters())
        style.colors.update(pstyle.colors)
        style.category_of.update(pstyle.category_of)
        return style
    return StyleMap.for_parameters(DEFAULT_PARAMETERS)


def cmd_plot(args, cfg: Config) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    style = _style(args)
    if args.kind == "heatmap":
        src = Path(args.input)
        if src.with_suffix(".json").exists():
            svg = render_heatmap(CorrelationMatrix.from_csv(src), style)
        elif src.stem.endswith("_shares"):
            svg = render_heatmap(AggregationMatrix.from_csv(src.parent, src.stem[: -len("_shares")]), style)
        else:
            raise IngestError(f"{src}: neither a correlation matrix nor an aggregation shares file")
    elif args.kind == "dendrogram":
        svg = render_dendrogram(Dendrogram.from_json(args.input), style)
    elif args.kind == "scatter":
        svg = render_scatter(Embedding.from_csv(args.input), style)
    else:
        campaign = read_campaign_dir(args.input)
        svg = render_series(_series_overlay(campaign, args.parameter, args.phase), True, style)
    out.write_text(svg)
    return EXIT_OK


def _series_overlay(campaign: Campaign, code: str, phase: Optional[str]):
    param = campaign.parameter(code)
    ph = PhaseTag(phase) if phase else param.phases[0]
    return {s.name: campaign.get(s, param, ph) for s in campaign.sites if campaign.get(s, param, ph) is not None}


def cmd_pipeline(args, cfg: Config) -> int:
    src, out = Path(args.inp), Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    report = validate_files(src / "measurements.csv", src / "manifest.csv")
    (out / "validation.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    if not report.ok:
        log.error("input validation failed; see %s", out / "validation.json")
        return EXIT_DATA
    campaign = read_campaign_dir(src)
    style = StyleMap.for_sites(campaign.sites)
    pstyle = StyleMap.for_parameters(campaign.parameters)
    figs = out / "figures"
    figs.mkdir(exist_ok=True)

    pmats = step_params(campaign, cfg, out)
    pagg = aggregation_counts(pmats, cfg.rule, cfg.denominator)
    pagg.to_csv(out, "params_aggregation")
    step_cluster(pagg.labels, pagg.shares, cfg, out, "params_dendrogram")
    step_embed(pagg.labels, pagg.shares, cfg, out, "params_embedding")
    (figs / "params_heatmap.svg").write_text(render_heatmap(pagg, pstyle))

    if len(campaign.sites) >= 2:
        smats = step_sites(campaign, cfg, out)
        sagg = aggregation_counts(list(smats.values()), cfg.rule, cfg.denominator)
        sagg.to_csv(out, "sites_aggregation")
        shares = per_parameter_site_shares(smats, cfg.rule)
        write_shares_by_parameter(shares, out, cfg.rule, len(campaign.sites))
        dend = step_cluster(sagg.labels, sagg.shares, cfg, out, "sites_dendrogram")
        emb = step_embed(sagg.labels, sagg.shares, cfg, out, "sites_embedding")
        (figs / "sites_heatmap.svg").write_text(render_heatmap(sagg, style))
        (figs / "sites_dendrogram.svg").write_text(render_dendrogram(dend, style))
        if emb.k >= 2:
            (figs / "sites_mds.svg").write_text(render_scatter(emb, style))
    # overlay the parameter with the most widespread site-to-site correlation
    top = max(shares, key=shares.get) if len(campaign.sites) >= 2 else campaign.parameters[0].code
    (figs / f"series_{_safe(top)}.svg").write_text(render_series(_series_overlay(campaign, top, None), True, style))
    write_run_manifest(out, "pipeline", cfg, _campaign_inputs(src))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (default: $PQCORR_CONFIG)")
    common.add_argument("--threads", type=int, help="maximum worker processes")
    common.add_argument("--tau", type=float)
    common.add_argument("--sense", choices=("positive", "negative", "absolute"))
    common.add_argument("--min-pairs", type=int)
    common.add_argument("--phase-pairing", choices=("all", "matched"))
    common.add_argument("--denominator", choices=("total", "valid"))
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="pqcorr", description="Correlation structures in power-quality campaigns")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic campaign")
    s.add_argument("--out", required=True)
    s.add_argument("--preset", choices=("groups", "network", "null"), default="groups")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--days", type=int, default=30)
    s.add_argument("--groups", type=int, default=3)
    s.add_argument("--group-size", type=int, default=4)
    s.add_argument("--sigma", type=float, default=0.25)
    s.add_argument("--day-shift-sigma", type=float, default=0.0)
    s.add_argument("--missing-fraction", type=float, default=0.0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("validate", parents=[common], help="check campaign files")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("correlate", parents=[common], help="mean-correlation matrices")
    s.add_argument("mode", choices=("params", "sites"))
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--site")
    s.add_argument("--all-sites", action="store_true")
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("aggregate", parents=[common], help="counts/shares of significant correlations")
    s.add_argument("--matrices", required=True, help="directory of correlation matrix CSVs")
    s.add_argument("--out", required=True)
    s.add_argument("--stem", default="aggregation")
    s.set_defaults(func=cmd_aggregate)

    s = sub.add_parser("shares-by-parameter", parents=[common], help="per-parameter share of significant site pairs")
    s.add_argument("--matrices", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_shares)

    s = sub.add_parser("cluster", parents=[common], help="average-linkage dendrogram")
    s.add_argument("--matrix", required=True, help="label-matrix CSV (shares or correlations)")
    s.add_argument("--out", required=True)
    s.add_argument("--stem", default="dendrogram")
    s.add_argument("--k", type=int, dest="n_clusters")
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("embed", parents=[common], help="classical MDS embedding")
    s.add_argument("--matrix", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dims", type=int)
    s.add_argument("--stem", default="embedding")
    s.set_defaults(func=cmd_embed)

    s = sub.add_parser("plot", parents=[common], help="render an SVG")
    s.add_argument("kind", choices=("heatmap", "dendrogram", "scatter", "series"))
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--campaign", help="campaign directory for site colors")
    s.add_argument("--parameter", default="U03")
    s.add_argument("--phase")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("pipeline", parents=[common], help="run everything end to end")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        cfg = load_config(args.config).replace(
            threads=args.threads,
            tau=args.tau,
            sense=args.sense,
            min_pairs=args.min_pairs,
            phase_pairing=args.phase_pairing,
            denominator=args.denominator,
            n_clusters=getattr(args, "n_clusters", None),
            mds_dims=getattr(args, "dims", None),
        )
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"pqcorr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"pqcorr: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (IngestError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"pqcorr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
