"""Scoring detected events against ground truth, and quality measures.

Detected events are matched to annotated ones by member-set Jaccard
overlap (optionally gated on time overlap), greedily from the
strongest pair down.  Precision, recall and F1 fall out of the match.
The module also carries the clustering objective used to sanity-check
partitions, with an exhaustive small-case search as its oracle, and a
simple throughput report for benchmark runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from squall.compression import CompressorSpec, SizeCache
from squall.model import Cluster, Event, cluster_pair_distance, user_diversity
from squall.streamio import GroundTruth


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    """Jaccard overlap of two id collections; empty vs empty is 0."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def _spans_overlap(a0: float, a1: float, b0: float, b1: float) -> bool:
    return a0 <= b1 and b0 <= a1


@dataclass(frozen=True)
class MatchPolicy:
    """How detected events are paired with truth events.

    ``min_jaccard`` is the member-overlap floor for a valid pair.
    ``require_time_overlap`` additionally demands that the detected
    lifespan touches the annotated span.  ``allow_many_to_one`` lets a
    fragmented event count every fragment as correct: extra detected
    events may attach to an already-matched truth event.
    """

    min_jaccard: float = 0.5
    require_time_overlap: bool = True
    allow_many_to_one: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.min_jaccard <= 1.0:
            raise ValueError(
                f"min_jaccard must be in (0, 1], got {self.min_jaccard}"
            )


@dataclass(frozen=True)
class MatchResult:
    """Outcome of pairing detected events with truth events."""

    pairs: tuple[tuple[str, int, float], ...]
    unmatched_truth: tuple[str, ...]
    unmatched_detected: tuple[int, ...]


def match_events(
    detected: Sequence[Event],
    truth: GroundTruth,
    policy: MatchPolicy | None = None,
) -> MatchResult:
    """Greedy best-overlap matching between detections and annotations.

    Candidate pairs above the policy floor are taken strongest first;
    ties break on truth id then detected id, so the result is stable.
    """
    if policy is None:
        policy = MatchPolicy()
    candidates = []
    for t in truth.events:
        t_members = set(t.member_ids)
        for d in detected:
            if policy.require_time_overlap:
                d_end = d.closed_ts if d.closed_ts is not None else float("inf")
                if not _spans_overlap(d.created_ts, d_end, t.start_ts, t.end_ts):
                    continue
            score = jaccard(t_members, d.member_ids)
            if score >= policy.min_jaccard:
                candidates.append((-score, t.event_id, d.event_id, score))
    candidates.sort()

    matched_truth: set[str] = set()
    matched_detected: set[int] = set()
    pairs = []
    for _, t_id, d_id, score in candidates:
        if d_id in matched_detected:
            continue
        if t_id in matched_truth and not policy.allow_many_to_one:
            continue
        pairs.append((t_id, d_id, score))
        matched_truth.add(t_id)
        matched_detected.add(d_id)

    unmatched_truth = tuple(
        t.event_id for t in truth.events if t.event_id not in matched_truth
    )
    unmatched_detected = tuple(
        d.event_id for d in detected if d.event_id not in matched_detected
    )
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_truth=unmatched_truth,
        unmatched_detected=unmatched_detected,
    )


@dataclass(frozen=True)
class DetectionReport:
    """Precision, recall and F1 of one detection run."""

    n_truth: int
    n_detected: int
    n_matched_truth: int
    n_matched_detected: int
    precision: float
    recall: float
    f1: float
    pairs: tuple[tuple[str, int, float], ...]

    @classmethod
    def from_match(
        cls, result: MatchResult, n_truth: int, n_detected: int
    ) -> "DetectionReport":
        n_matched_truth = n_truth - len(result.unmatched_truth)
        n_matched_detected = n_detected - len(result.unmatched_detected)
        # With nothing to find, not reporting anything is a perfect
        # score; the conventions below make the empty cases total.
        precision = n_matched_detected / n_detected if n_detected else 1.0
        recall = n_matched_truth / n_truth if n_truth else 1.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(
            n_truth=n_truth,
            n_detected=n_detected,
            n_matched_truth=n_matched_truth,
            n_matched_detected=n_matched_detected,
            precision=precision,
            recall=recall,
            f1=f1,
            pairs=result.pairs,
        )

    def text_block(self) -> str:
        lines = [
            f"truth events:    {self.n_truth}",
            f"detected events: {self.n_detected}",
            f"matched:         {self.n_matched_truth} truth / "
            f"{self.n_matched_detected} detected",
            f"precision:       {self.precision:.4f}",
            f"recall:          {self.recall:.4f}",
            f"f1:              {self.f1:.4f}",
        ]
        for t_id, d_id, score in self.pairs:
            lines.append(f"  {t_id} <- event {d_id} (jaccard {score:.3f})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "n_truth": self.n_truth,
            "n_detected": self.n_detected,
            "n_matched_truth": self.n_matched_truth,
            "n_matched_detected": self.n_matched_detected,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pairs": [
                {"truth_id": t, "detected_id": d, "jaccard": s}
                for t, d, s in self.pairs
            ],
        }


def detection_report(
    detected: Sequence[Event],
    truth: GroundTruth,
    policy: MatchPolicy | None = None,
) -> DetectionReport:
    """Match and score in one step."""
    result = match_events(detected, truth, policy)
    return DetectionReport.from_match(result, n_truth=len(truth), n_detected=len(detected))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean, 0 when both inputs are 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# -- clustering objective -------------------------------------------------


def objective_score(
    clusters: Sequence[Cluster],
    spec: CompressorSpec,
    cache: SizeCache | None = None,
    log_base: float = 2.0,
) -> float:
    """Separation-plus-diversity value of a set of clusters.

    Each cluster contributes its summed complete-linkage distance to
    every other cluster plus its author entropy.  Bigger is better:
    the ideal selection holds mutually distant, many-author clusters.
    """
    total = 0.0
    for i, a in enumerate(clusters):
        for j, b in enumerate(clusters):
            if i != j:
                total += cluster_pair_distance(a, b, spec, cache)
        total += user_diversity(a.user_counts, log_base)
    return total


def iter_partitions(items: Sequence, n_parts: int) -> Iterator[tuple[tuple, ...]]:
    """All set partitions of *items* into exactly *n_parts* blocks.

    Deterministic order; blocks keep item order and are emitted in
    first-element order.  Intended for small oracle searches only; the
    count grows as the Stirling numbers of the second kind.
    """
    items = tuple(items)
    if n_parts < 1 or n_parts > len(items):
        return

    def rec(idx: int, blocks: list[list]):
        if idx == len(items):
            if len(blocks) == n_parts:
                yield tuple(tuple(b) for b in blocks)
            return
        remaining = len(items) - idx
        for b in blocks:
            # Prune: the open blocks plus what is left must still be
            # able to reach exactly n_parts.
            if len(blocks) + remaining - 1 >= n_parts:
                b.append(items[idx])
                yield from rec(idx + 1, blocks)
                b.pop()
        if len(blocks) < n_parts:
            blocks.append([items[idx]])
            yield from rec(idx + 1, blocks)
            blocks.pop()

    yield from rec(0, [])


def best_partition_score(
    tweets: Sequence,
    n_parts: int,
    spec: CompressorSpec,
    cache: SizeCache | None = None,
    log_base: float = 2.0,
    tweet_limit: int = 1000,
) -> tuple[float, tuple[tuple, ...]]:
    """Exhaustively best objective over all partitions of *tweets*.

    Returns the maximal score and the first partition achieving it.
    This is the reference answer the streaming engine's greedy
    assignment is compared against on tiny inputs.
    """
    best: tuple[float, tuple[tuple, ...]] | None = None
    for partition in iter_partitions(tuple(tweets), n_parts):
        clusters = []
        for k, block in enumerate(partition):
            cluster = Cluster(k, block[0], tweet_limit)
            for tweet in block[1:]:
                cluster.add(tweet)
            clusters.append(cluster)
        score = objective_score(clusters, spec, cache, log_base)
        if best is None or score > best[0]:
            best = (score, partition)
    if best is None:
        raise ValueError(
            f"no partition of {len(tuple(tweets))} items into {n_parts} blocks"
        )
    return best


# -- throughput -----------------------------------------------------------


@dataclass(frozen=True)
class ThroughputReport:
    """Processing-rate summary of one engine run.

    The columns are the classic efficiency-table layout: stream label,
    message count, processing time in minutes, the rate at which the
    stream itself arrived (when the stream span is known) and the rate
    at which the engine chewed through it.
    """

    label: str
    n_tweets: int
    elapsed_sec: float
    collection_rate: float | None

    @property
    def elapsed_min(self) -> float:
        return self.elapsed_sec / 60.0

    @property
    def tweets_per_sec(self) -> float:
        return self.n_tweets / self.elapsed_sec

    @property
    def tweets_per_min(self) -> float:
        return self.tweets_per_sec * 60.0

    def text_block(self) -> str:
        header = (
            f"{'stream':<12} {'#tweets':>8} {'time_min':>9} "
            f"{'collect_rate':>13} {'process_rate':>13}"
        )
        collect = "-" if self.collection_rate is None else f"{self.collection_rate:.2f}"
        row = (
            f"{self.label:<12} {self.n_tweets:>8d} {self.elapsed_min:>9.3f} "
            f"{collect:>13} {self.tweets_per_min:>13.2f}"
        )
        return header + "\n" + row

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n_tweets": self.n_tweets,
            "elapsed_sec": self.elapsed_sec,
            "elapsed_min": self.elapsed_min,
            "collection_rate": self.collection_rate,
            "tweets_per_sec": self.tweets_per_sec,
            "tweets_per_min": self.tweets_per_min,
        }


def throughput_report(
    n_tweets: int,
    elapsed_sec: float,
    label: str = "stream",
    stream_span_sec: float | None = None,
) -> ThroughputReport:
    """Rate summary; pass the stream's time span for the arrival rate."""
    if n_tweets < 0:
        raise ValueError(f"n_tweets must be >= 0, got {n_tweets}")
    if elapsed_sec <= 0:
        raise ValueError(f"elapsed_sec must be positive, got {elapsed_sec}")
    collection = None
    if stream_span_sec is not None:
        if stream_span_sec <= 0:
            raise ValueError(
                f"stream_span_sec must be positive, got {stream_span_sec}"
            )
        collection = n_tweets / (stream_span_sec / 60.0)
    return ThroughputReport(
        label=label,
        n_tweets=n_tweets,
        elapsed_sec=elapsed_sec,
        collection_rate=collection,
    )
