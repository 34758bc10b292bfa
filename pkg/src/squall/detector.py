"""Single-pass streaming engine that clusters messages into events.

Each arriving message is compared, by compression distance, against a
bounded set of candidate clusters chosen through a token inverted
index.  It joins the closest cluster within the distance threshold or
starts a new one.  Clusters whose silence outlasts their fitted mean
arrival gap are dropped; clusters whose author entropy crosses the
diversity threshold are promoted to events.  One message in, bounded
work out: no second pass, no global reclustering.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from squall.compression import CompressorSpec, SizeCache
from squall.model import (
    Cluster,
    EngineConfig,
    Event,
    Tweet,
    expiry_deadline,
    tweet_cluster_distance,
)

NOISE_LABEL = -1


class StreamOrderError(ValueError):
    """Raised when a message arrives earlier than the tolerated disorder."""


@dataclass(frozen=True, slots=True)
class CandidateScore:
    """Ranking entry for one candidate cluster.

    ``overlap`` counts index tokens shared with the incoming message
    (optionally weighted by how widespread each token is inside the
    cluster window).  Ranking prefers higher overlap, then more recent
    activity, then the lower cluster id, so the ordering is total.
    """

    cid: int
    overlap: float
    last_updated: float

    @property
    def sort_key(self) -> tuple[float, float, int]:
        return (-self.overlap, -self.last_updated, self.cid)


@dataclass(frozen=True, slots=True)
class ProcessOutcome:
    """What happened to a single processed message."""

    tweet_id: str
    ts: float
    cluster_id: int
    created: bool
    distance: float | None
    n_candidates: int
    promotion: Event | None
    evicted: tuple[int, ...]


@dataclass(slots=True)
class Counters:
    """Lifetime tallies of engine activity.

    ``pair_comparisons`` counts window positions eligible for distance
    checks, an upper bound on executed pairs since the scan stops early
    once a candidate is already disqualified.
    """

    processed: int = 0
    created: int = 0
    assigned: int = 0
    promotions: int = 0
    evictions: int = 0
    closed_events: int = 0
    candidates_considered: int = 0
    pair_comparisons: int = 0

    def to_dict(self) -> dict[str, int]:
        return {
            "processed": self.processed,
            "created": self.created,
            "assigned": self.assigned,
            "promotions": self.promotions,
            "evictions": self.evictions,
            "closed_events": self.closed_events,
            "candidates_considered": self.candidates_considered,
            "pair_comparisons": self.pair_comparisons,
        }


def _coerce_tweet(obj: Tweet | Mapping) -> Tweet:
    if isinstance(obj, Tweet):
        return obj
    try:
        return Tweet(
            id=str(obj["id"]),
            user=str(obj["user"]),
            ts=float(obj["ts"]),
            text=str(obj["text"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(
            f"cannot interpret {type(obj).__name__} as a stream message"
        ) from exc


class EventDetector(ClusterMixin, BaseEstimator):
    """Streaming event detector with a scikit-learn estimator surface.

    ``fit`` consumes a finite stream and leaves the final engine state
    on the instance; ``partial_fit`` feeds batches incrementally and
    ``process`` feeds one message at a time, which is the natural mode
    for a live feed.  ``predict`` answers which existing cluster a
    message would join without mutating anything.

    Parameters
    ----------
    cluster_limit : int
        Candidate clusters ranked per message (the comparison budget).
    tweet_limit : int
        Recent messages kept per cluster for distance checks.
    distance_threshold : float
        Largest complete-linkage compression distance that still joins.
    diversity_threshold : float
        Author entropy (in ``entropy_log_base`` units) that promotes a
        cluster to an event.
    default_timeout : float
        Silence allowance, in stream time units, for clusters whose
        arrival rate is not yet estimable.
    timeout_multiplier : float
        Scale on the fitted mean gap before a cluster counts as quiet.
    algorithm, compression_level : str, int
        Compression backend used for distances.
    cache_size : int
        Entries in the per-text compressed-size cache.
    entropy_log_base : float
        Base of the diversity entropy logarithm (2 means bits).
    allowed_disorder : float
        How far behind the stream clock a message may arrive before it
        is rejected as out of order.
    weighted_overlap : bool
        Weight candidate overlap by within-cluster token spread instead
        of counting distinct shared tokens.
    sweep_interval : int
        Messages between full expiry sweeps (expired candidates are
        additionally dropped lazily whenever they are touched).
    n_jobs : int
        Worker threads for per-candidate distance evaluation.  Results
        are combined in rank order, so the outcome does not depend on
        thread scheduling.

    Attributes
    ----------
    clusters_ : dict[int, Cluster]
        Active clusters by id.
    events_ : list[Event]
        Closed events, in closing order.
    labels_ : numpy.ndarray
        Cluster id per message of the last ``fit`` input.
    clock_ : float
        Largest timestamp seen so far.
    counters_ : Counters
        Lifetime activity tallies.
    """

    def __init__(
        self,
        cluster_limit: int = 100,
        tweet_limit: int = 1000,
        distance_threshold: float = 0.8,
        diversity_threshold: float = 5.0,
        default_timeout: float = 3600.0,
        timeout_multiplier: float = 1.0,
        algorithm: str = "deflate",
        compression_level: int = 9,
        cache_size: int = 4096,
        entropy_log_base: float = 2.0,
        allowed_disorder: float = 0.0,
        weighted_overlap: bool = False,
        sweep_interval: int = 10000,
        n_jobs: int = 1,
    ) -> None:
        self.cluster_limit = cluster_limit
        self.tweet_limit = tweet_limit
        self.distance_threshold = distance_threshold
        self.diversity_threshold = diversity_threshold
        self.default_timeout = default_timeout
        self.timeout_multiplier = timeout_multiplier
        self.algorithm = algorithm
        self.compression_level = compression_level
        self.cache_size = cache_size
        self.entropy_log_base = entropy_log_base
        self.allowed_disorder = allowed_disorder
        self.weighted_overlap = weighted_overlap
        self.sweep_interval = sweep_interval
        self.n_jobs = n_jobs

    # -- state management -------------------------------------------------

    def _make_config(self) -> EngineConfig:
        compressor = CompressorSpec(self.algorithm, self.compression_level)
        return EngineConfig(
            cluster_limit=self.cluster_limit,
            tweet_limit=self.tweet_limit,
            distance_threshold=self.distance_threshold,
            diversity_threshold=self.diversity_threshold,
            default_timeout=self.default_timeout,
            timeout_multiplier=self.timeout_multiplier,
            compressor=compressor,
            cache_size=self.cache_size,
            entropy_log_base=self.entropy_log_base,
            allowed_disorder=self.allowed_disorder,
            weighted_overlap=self.weighted_overlap,
            sweep_interval=self.sweep_interval,
            n_jobs=self.n_jobs,
        )

    def reset(self) -> "EventDetector":
        """(Re)initialize engine state from the current parameters."""
        self.config_ = self._make_config()
        self.cache_ = SizeCache(self.config_.compressor, self.config_.cache_size)
        self.clusters_: dict[int, Cluster] = {}
        self.index_: dict[str, set[int]] = {}
        self.events_: list[Event] = []
        self.clock_ = float("-inf")
        self.counters_ = Counters()
        self._next_cid = 0
        self._closed_pending: list[Event] = []
        self._shutdown_executor()
        return self

    def _shutdown_executor(self) -> None:
        pool = getattr(self, "_pool", None)
        if pool is not None:
            pool.shutdown(wait=True)
        self._pool = None

    def _ensure_state(self) -> None:
        if not hasattr(self, "config_"):
            self.reset()

    def _check_fitted(self) -> None:
        if not hasattr(self, "config_"):
            raise NotFittedError(
                "this EventDetector has processed no data yet; "
                "call fit or partial_fit first"
            )

    @property
    def n_active(self) -> int:
        self._check_fitted()
        return len(self.clusters_)

    # -- candidate selection ----------------------------------------------

    def _rank_candidates(
        self, tweet: Tweet, now: float, evicted: list[int] | None
    ) -> list[CandidateScore]:
        """Top candidate clusters by token overlap with *tweet*.

        Expired clusters touched along the way are dropped on the spot
        when *evicted* is a list (the live path) and merely skipped when
        it is None (the read-only path used by :meth:`predict`).
        """
        overlap: dict[int, float] = {}
        for token in dict.fromkeys(tweet.tokens):
            cids = self.index_.get(token)
            if not cids:
                continue
            for cid in cids:
                weight = 1.0
                if self.config_.weighted_overlap:
                    weight = float(self.clusters_[cid].token_counts.get(token, 1))
                overlap[cid] = overlap.get(cid, 0.0) + weight
        cfg = self.config_
        scored: list[CandidateScore] = []
        for cid in sorted(overlap):
            cluster = self.clusters_[cid]
            deadline = expiry_deadline(
                cluster.stats, cfg.default_timeout, cfg.timeout_multiplier
            )
            if deadline < now:
                if evicted is not None:
                    self._evict_cluster(cluster, closed_ts=now)
                    evicted.append(cid)
                continue
            scored.append(
                CandidateScore(
                    cid=cid, overlap=overlap[cid], last_updated=cluster.last_updated
                )
            )
        return heapq.nsmallest(cfg.cluster_limit, scored, key=lambda s: s.sort_key)

    def _candidate_distances(
        self, tweet: Tweet, candidates: list[CandidateScore]
    ) -> list[float]:
        cfg = self.config_
        cutoff = cfg.distance_threshold

        def one(score: CandidateScore) -> float:
            return tweet_cluster_distance(
                tweet,
                self.clusters_[score.cid],
                cfg.compressor,
                self.cache_,
                cutoff=cutoff,
            )

        if cfg.n_jobs > 1 and len(candidates) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=cfg.n_jobs)
            # map() yields in submission order, so parallel evaluation
            # cannot reorder the argmin tie-break.
            return list(self._pool.map(one, candidates))
        return [one(score) for score in candidates]

    # -- eviction ----------------------------------------------------------

    def _evict_cluster(self, cluster: Cluster, closed_ts: float | None) -> None:
        del self.clusters_[cluster.cid]
        for token in cluster.token_counts:
            cids = self.index_.get(token)
            if cids is not None:
                cids.discard(cluster.cid)
                if not cids:
                    del self.index_[token]
        self.counters_.evictions += 1
        if cluster.is_event:
            event = Event.from_cluster(
                cluster, closed_ts=closed_ts, log_base=self.config_.entropy_log_base
            )
            self.events_.append(event)
            self._closed_pending.append(event)
            self.counters_.closed_events += 1

    def evict(self, now: float | None = None) -> tuple[int, ...]:
        """Sweep out every cluster whose deadline strictly precedes *now*.

        Defaults to the engine clock.  Returns the evicted cluster ids.
        """
        self._check_fitted()
        if now is None:
            now = self.clock_
        cfg = self.config_
        expired = [
            cluster
            for cluster in self.clusters_.values()
            if expiry_deadline(cluster.stats, cfg.default_timeout, cfg.timeout_multiplier)
            < now
        ]
        for cluster in expired:
            self._evict_cluster(cluster, closed_ts=now)
        return tuple(cluster.cid for cluster in expired)

    def drain_closed(self) -> list[Event]:
        """Return events closed since the previous drain."""
        self._check_fitted()
        drained = self._closed_pending
        self._closed_pending = []
        return drained

    def finalize(self) -> list[Event]:
        """Flush all remaining clusters and return every event seen.

        Promoted clusters still open become events with ``closed_ts``
        left unset, marking them as alive when the stream ended.  The
        engine state is cleared apart from counters and the event log.
        """
        self._check_fitted()
        for cluster in list(self.clusters_.values()):
            self._evict_cluster(cluster, closed_ts=None)
        self.index_.clear()
        self._shutdown_executor()
        return list(self.events_)

    # -- the single-pass step ---------------------------------------------

    def process(self, item: Tweet | Mapping) -> ProcessOutcome:
        """Run one message through the engine and report what happened."""
        self._ensure_state()
        tweet = _coerce_tweet(item)
        cfg = self.config_
        if self.clock_ != float("-inf") and tweet.ts < self.clock_ - cfg.allowed_disorder:
            raise StreamOrderError(
                f"tweet {tweet.id} at ts {tweet.ts} is older than the stream "
                f"clock {self.clock_} minus the allowed disorder "
                f"{cfg.allowed_disorder}"
            )
        now = max(self.clock_, tweet.ts)
        self.clock_ = now
        self.counters_.processed += 1

        evicted: list[int] = []
        candidates = self._rank_candidates(tweet, now, evicted)
        self.counters_.candidates_considered += len(candidates)
        distances = self._candidate_distances(tweet, candidates)
        for score in candidates:
            self.counters_.pair_comparisons += len(self.clusters_[score.cid].window)

        best_cid = None
        best_distance = float("inf")
        for score, distance in zip(candidates, distances):
            if distance < best_distance:
                best_distance = distance
                best_cid = score.cid

        if best_cid is not None and best_distance <= cfg.distance_threshold:
            cluster = self.clusters_[best_cid]
            arrival = max(tweet.ts, cluster.stats.last_arrival)
            added, removed = cluster.add(tweet, arrival_ts=arrival)
            for token in added:
                self.index_.setdefault(token, set()).add(cluster.cid)
            for token in removed:
                cids = self.index_.get(token)
                if cids is not None:
                    cids.discard(cluster.cid)
                    if not cids:
                        del self.index_[token]
            self.counters_.assigned += 1
            created = False
            distance_out: float | None = best_distance
        else:
            cluster = Cluster(self._next_cid, tweet, cfg.tweet_limit)
            self._next_cid += 1
            self.clusters_[cluster.cid] = cluster
            for token in cluster.token_counts:
                self.index_.setdefault(token, set()).add(cluster.cid)
            self.counters_.created += 1
            created = True
            distance_out = None

        promotion: Event | None = None
        if (
            not cluster.is_event
            and cluster.diversity(cfg.entropy_log_base) >= cfg.diversity_threshold
        ):
            cluster.promote(now)
            self.counters_.promotions += 1
            promotion = Event.from_cluster(cluster, log_base=cfg.entropy_log_base)

        if self.counters_.processed % cfg.sweep_interval == 0:
            evicted.extend(self.evict(now))

        return ProcessOutcome(
            tweet_id=tweet.id,
            ts=tweet.ts,
            cluster_id=cluster.cid,
            created=created,
            distance=distance_out,
            n_candidates=len(candidates),
            promotion=promotion,
            evicted=tuple(evicted),
        )

    def process_stream(self, stream: Iterable[Tweet | Mapping]) -> Iterator[ProcessOutcome]:
        """Yield one outcome per message of *stream*, lazily."""
        for item in stream:
            yield self.process(item)

    # -- estimator surface -------------------------------------------------

    def fit(self, X: Iterable[Tweet | Mapping], y=None) -> "EventDetector":
        """Consume a finite stream from scratch and keep the end state.

        Also records ``labels_``, the cluster id each message landed in.
        The stream is not finalized: still-open clusters stay queryable,
        and :meth:`finalize` closes them when wanted.
        """
        self.reset()
        labels = [outcome.cluster_id for outcome in self.process_stream(X)]
        self.labels_ = np.asarray(labels, dtype=np.int64)
        return self

    def partial_fit(self, X: Iterable[Tweet | Mapping], y=None) -> "EventDetector":
        """Feed a batch without resetting accumulated state."""
        self._ensure_state()
        for outcome in self.process_stream(X):
            pass
        return self

    def predict(self, X: Iterable[Tweet | Mapping]) -> np.ndarray:
        """Cluster id each message would join right now, without joining.

        Messages no active cluster would accept map to ``-1``.  State is
        left untouched: no clock advance, no eviction, no insertion.
        """
        self._check_fitted()
        cfg = self.config_
        labels = []
        for item in X:
            tweet = _coerce_tweet(item)
            candidates = self._rank_candidates(tweet, self.clock_, evicted=None)
            distances = self._candidate_distances(tweet, candidates)
            best_cid = NOISE_LABEL
            best_distance = float("inf")
            for score, distance in zip(candidates, distances):
                if distance < best_distance:
                    best_distance = distance
                    best_cid = score.cid
            if best_distance > cfg.distance_threshold:
                best_cid = NOISE_LABEL
            labels.append(best_cid)
        return np.asarray(labels, dtype=np.int64)

    def open_events(self) -> list[Event]:
        """Snapshots of promoted clusters that are still active."""
        self._check_fitted()
        return [
            Event.from_cluster(c, log_base=self.config_.entropy_log_base)
            for c in self.clusters_.values()
            if c.is_event
        ]

    def all_events(self) -> list[Event]:
        """Closed events followed by snapshots of still-open ones."""
        return list(self.events_) + self.open_events()
