"""Single-pass event detection in short-text streams.

The package clusters messages by compression distance as they arrive,
retires clusters whose inter-arrival model says they have gone quiet,
and promotes clusters with enough distinct authors to events.  It also
ships a synthetic stream generator and an evaluation harness so the
whole pipeline can be exercised without any external data.
"""

from squall.compression import (
    BenchReport,
    CompressorSpec,
    CompressorUnavailableError,
    EmptyTextError,
    SizeCache,
    compressor_benchmark,
    pair_distance,
)
from squall.detector import EventDetector, StreamOrderError
from squall.evaluation import (
    DetectionReport,
    MatchPolicy,
    ThroughputReport,
    match_events,
    objective_score,
    throughput_report,
)
from squall.model import (
    Cluster,
    EngineConfig,
    Event,
    InterArrivalStats,
    Tweet,
    cluster_pair_distance,
    expiry_deadline,
    top_keywords,
    tweet_cluster_distance,
    user_diversity,
)
from squall.streamio import (
    GroundTruth,
    RecordParseError,
    StreamStats,
    TruthEvent,
    iter_tweets,
    parse_record,
)
from squall.synth import SyntheticSpec, fixture_spec, generate_stream

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "Cluster",
    "CompressorSpec",
    "CompressorUnavailableError",
    "DetectionReport",
    "EmptyTextError",
    "EngineConfig",
    "Event",
    "EventDetector",
    "GroundTruth",
    "InterArrivalStats",
    "MatchPolicy",
    "RecordParseError",
    "SizeCache",
    "StreamOrderError",
    "StreamStats",
    "SyntheticSpec",
    "ThroughputReport",
    "TruthEvent",
    "Tweet",
    "cluster_pair_distance",
    "compressor_benchmark",
    "expiry_deadline",
    "fixture_spec",
    "generate_stream",
    "iter_tweets",
    "match_events",
    "objective_score",
    "pair_distance",
    "parse_record",
    "throughput_report",
    "top_keywords",
    "tweet_cluster_distance",
    "user_diversity",
]
