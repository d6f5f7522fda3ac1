"""Identification, aggregation and visualization of correlation structures in
large power-quality measurement campaigns."""

__version__ = "0.1.0"

from .aggregate import AggregationMatrix, ThresholdRule, aggregation_counts, per_parameter_site_shares, significant
from .campaign import (
    DEFAULT_PARAMETERS,
    Campaign,
    ParameterId,
    PhaseTag,
    RegularTimeSeries,
    SeriesKey,
    SiteId,
    align_pairs,
    slice_days,
)
from .estimators import AverageLinkage, ClassicalMDS, DailySpearman, SignificanceAggregator
from .ingest import parse_measurements, read_campaign_dir, validate_campaign, write_campaign
from .matrices import CorrelationMatrix, parameter_matrices, parameter_matrix, site_matrices
from .rankcorr import (
    CorrelationConfig,
    average_ranks,
    daily_spearman,
    fisher_mean,
    pearson,
    phase_aggregate,
    spearman,
    whole_period_spearman,
)
from .structure import Dendrogram, DistanceMatrix, Embedding, classical_mds, cut, stress, to_distance, upgma
from .synth import PlantedGroup, SynthSpec, generate_campaign, grouped_spec, network_spec
