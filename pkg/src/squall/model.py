"""Domain model: tweets, clusters, events and their statistics.

Everything here is engine-agnostic.  The streaming engine in
:mod:`squall.detector` owns the control flow; this module owns the
arithmetic (author entropy, exponential inter-arrival fitting,
complete-linkage distances) and the mutable cluster bookkeeping.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from squall.compression import (
    CompressorSpec,
    EmptyTextError,
    SizeCache,
    pair_distance,
)

# Word-ish runs, optionally led by a hashtag or mention sigil.  The
# underscore is excluded so snake_case handles split into words.
_TOKEN_RE = re.compile(r"[#@]?[^\W_]+", re.UNICODE)

_WS_RE = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Canonicalize a message for byte-level comparison.

    Applies Unicode NFC, trims the ends and collapses internal runs of
    whitespace, so cosmetic spacing differences do not leak into
    compressed sizes.  Case is kept; the compressor copes with it.
    """
    return _WS_RE.sub(" ", unicodedata.normalize("NFC", text)).strip()


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercased word tokens of *text*, single characters dropped."""
    lowered = unicodedata.normalize("NFC", text).lower()
    return tuple(t for t in _TOKEN_RE.findall(lowered) if len(t) > 1)


@lru_cache(maxsize=1)
def load_stopwords() -> frozenset[str]:
    """Built-in multilingual stoplist used for keyword extraction."""
    raw = resources.files("squall.data").joinpath("stopwords.txt").read_text("utf-8")
    words = set()
    for line in raw.splitlines():
        word = line.strip()
        if word and not word.startswith("#"):
            words.add(word)
    return frozenset(words)


@dataclass(frozen=True, slots=True)
class Tweet:
    """One message of a stream, with derived comparison material.

    ``payload`` is the normalized UTF-8 encoding used by the distance
    function; ``tokens`` feed the candidate index and keywords.  Both
    are computed once at construction.
    """

    id: str
    user: str
    ts: float
    text: str
    payload: bytes = field(init=False, repr=False, compare=False)
    tokens: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("tweet id must be non-empty")
        if not self.user:
            raise ValueError("tweet user must be non-empty")
        if not isinstance(self.ts, (int, float)) or not math.isfinite(self.ts):
            raise ValueError(f"tweet ts must be a finite number, got {self.ts!r}")
        normalized = normalize_text(self.text)
        if not normalized:
            raise EmptyTextError(f"tweet {self.id}: text is empty after normalization")
        object.__setattr__(self, "payload", normalized.encode("utf-8"))
        object.__setattr__(self, "tokens", tokenize(normalized))


def user_diversity(user_counts: Mapping[str, int], log_base: float = 2.0) -> float:
    """Shannon entropy of the per-author contribution distribution.

    A cluster fed by one author scores 0; a cluster with ``n`` equally
    active authors scores ``log(n)`` in the chosen base (bits by
    default).  High values indicate many independent voices, the signal
    used to separate events from one account's chatter.
    """
    total = sum(user_counts.values())
    if total <= 0:
        return 0.0
    # log2 is correctly rounded, so power-of-two distributions come out
    # exact (32 equal authors give exactly 5 bits); the generic base
    # goes through natural logs.
    if log_base == 2.0:
        log_fn, scale = math.log2, 1.0
    else:
        log_fn, scale = math.log, 1.0 / math.log(log_base)
    h = 0.0
    for count in user_counts.values():
        if count > 0:
            p = count / total
            h -= p * log_fn(p)
    return h * scale


def exponential_mle_rate(gaps: Sequence[float]) -> float:
    """Maximum-likelihood rate of an exponential fit to *gaps* (1/mean)."""
    if not gaps:
        raise ValueError("need at least one gap to fit a rate")
    mean = sum(gaps) / len(gaps)
    if mean <= 0:
        return math.inf
    return 1.0 / mean


def exponential_log_likelihood(gaps: Sequence[float], rate: float) -> float:
    """Log-likelihood of *gaps* under an exponential law with *rate*."""
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    log_rate = math.log(rate)
    return sum(log_rate - rate * gap for gap in gaps)


@dataclass(frozen=True, slots=True)
class InterArrivalStats:
    """Running exponential model of one cluster's arrival gaps.

    Tracks the number of observed gaps, their running mean, and the
    last arrival time.  The maximum-likelihood rate of the exponential
    fit is the reciprocal of the mean gap, so the mean is all the state
    the model needs.
    """

    n_gaps: int
    mean_gap: float
    last_arrival: float

    @classmethod
    def initial(cls, ts: float) -> InterArrivalStats:
        """Stats for a cluster that has seen exactly one arrival."""
        return cls(n_gaps=0, mean_gap=0.0, last_arrival=ts)

    @property
    def has_rate(self) -> bool:
        """Whether enough arrivals were seen to estimate a rate."""
        return self.n_gaps > 0 and self.mean_gap > 0.0

    @property
    def rate(self) -> float:
        """Maximum-likelihood arrival rate; infinite before two arrivals."""
        if not self.has_rate:
            return math.inf
        return 1.0 / self.mean_gap

    def observe_arrival(self, ts: float) -> InterArrivalStats:
        """Return updated stats after an arrival at *ts*.

        *ts* must not precede the last arrival; the engine clamps
        slightly out-of-order input before calling.
        """
        gap = ts - self.last_arrival
        if gap < 0:
            raise ValueError(
                f"arrival at {ts} precedes last arrival at {self.last_arrival}"
            )
        n = self.n_gaps + 1
        mean = self.mean_gap + (gap - self.mean_gap) / n
        return InterArrivalStats(n_gaps=n, mean_gap=mean, last_arrival=ts)


def expiry_deadline(
    stats: InterArrivalStats,
    default_timeout: float,
    timeout_multiplier: float = 1.0,
) -> float:
    """Instant after which a cluster with these stats counts as quiet.

    Once a mean gap is known the allowance is that mean scaled by
    *timeout_multiplier*: a cluster is expected to receive its next
    message within roughly one mean gap, so silence much longer than
    that means the conversation ended.  Before a rate exists (a single
    arrival, or identical timestamps) the flat *default_timeout*
    applies instead.
    """
    if stats.has_rate:
        return stats.last_arrival + timeout_multiplier * stats.mean_gap
    return stats.last_arrival + default_timeout


class Cluster:
    """A mutable group of similar messages under construction.

    Distance comparisons and keywords run over a bounded window of the
    most recent messages; author counts and membership cover the whole
    lifetime, since promotion is about how many people ever spoke.
    """

    __slots__ = (
        "cid",
        "created_ts",
        "tweet_limit",
        "window",
        "first_tweet",
        "size",
        "user_counts",
        "token_counts",
        "member_ids",
        "stats",
        "is_event",
        "promoted_ts",
    )

    def __init__(self, cid: int, first: Tweet, tweet_limit: int = 1000) -> None:
        if tweet_limit < 1:
            raise ValueError(f"tweet_limit must be positive, got {tweet_limit}")
        self.cid = cid
        self.created_ts = first.ts
        self.tweet_limit = tweet_limit
        self.window: deque[Tweet] = deque()
        self.first_tweet = first
        self.size = 0
        self.user_counts: dict[str, int] = {}
        self.token_counts: dict[str, int] = {}
        self.member_ids: list[str] = []
        self.stats = InterArrivalStats.initial(first.ts)
        self.is_event = False
        self.promoted_ts: float | None = None
        self._append(first)

    def _append(self, tweet: Tweet) -> tuple[str, ...]:
        self.window.append(tweet)
        self.size += 1
        self.member_ids.append(tweet.id)
        self.user_counts[tweet.user] = self.user_counts.get(tweet.user, 0) + 1
        added = []
        # dict.fromkeys instead of set: preserves first-seen order, so
        # downstream iteration does not depend on the hash seed.
        for token in dict.fromkeys(tweet.tokens):
            count = self.token_counts.get(token, 0)
            if count == 0:
                added.append(token)
            self.token_counts[token] = count + 1
        return tuple(added)

    def _evict_oldest(self) -> tuple[str, ...]:
        old = self.window.popleft()
        removed = []
        for token in dict.fromkeys(old.tokens):
            count = self.token_counts[token] - 1
            if count == 0:
                del self.token_counts[token]
                removed.append(token)
            else:
                self.token_counts[token] = count
        return tuple(removed)

    def add(
        self, tweet: Tweet, arrival_ts: float | None = None
    ) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Add *tweet*; return window token churn as (added, removed).

        The caller forwards the churn to its inverted index.  The
        arrival statistics observe *arrival_ts* (default ``tweet.ts``),
        which must not precede the cluster's last arrival; an engine
        tolerating slight disorder passes a clamped value here.
        """
        self.stats = self.stats.observe_arrival(
            tweet.ts if arrival_ts is None else arrival_ts
        )
        added = self._append(tweet)
        removed: tuple[str, ...] = ()
        if len(self.window) > self.tweet_limit:
            removed = self._evict_oldest()
        # A token both gained and dropped in one step stays present.
        if removed:
            added_set = dict.fromkeys(added)
            removed = tuple(t for t in removed if t not in added_set)
        return added, removed

    @property
    def last_updated(self) -> float:
        return self.stats.last_arrival

    @property
    def n_users(self) -> int:
        return len(self.user_counts)

    def diversity(self, log_base: float = 2.0) -> float:
        """Author entropy of everything this cluster has absorbed."""
        return user_diversity(self.user_counts, log_base)

    def promote(self, ts: float) -> None:
        """Mark the cluster as an event; promotion is one-way."""
        if not self.is_event:
            self.is_event = True
            self.promoted_ts = ts

    def __repr__(self) -> str:
        return (
            f"Cluster(cid={self.cid}, size={self.size}, "
            f"users={self.n_users}, window={len(self.window)}, "
            f"event={self.is_event})"
        )


def tweet_cluster_distance(
    tweet: Tweet,
    cluster: Cluster,
    spec: CompressorSpec,
    cache: SizeCache | None = None,
    cutoff: float | None = None,
) -> float:
    """Complete-linkage distance from a message to a cluster.

    The maximum pairwise compression distance between *tweet* and the
    cluster's window members.  With *cutoff* set, scanning stops as
    soon as the running maximum exceeds it; the early value is already
    disqualifying, so the assignment decision is unchanged.
    """
    worst = 0.0
    for member in cluster.window:
        d = pair_distance(tweet.payload, member.payload, spec, cache)
        if d > worst:
            worst = d
            if cutoff is not None and worst > cutoff:
                break
    return worst


def cluster_pair_distance(
    a: Cluster,
    b: Cluster,
    spec: CompressorSpec,
    cache: SizeCache | None = None,
) -> float:
    """Complete-linkage distance between two clusters' windows."""
    worst = 0.0
    for left in a.window:
        for right in b.window:
            d = pair_distance(left.payload, right.payload, spec, cache)
            if d > worst:
                worst = d
    return worst


def top_keywords(
    cluster: Cluster,
    n: int = 5,
    stopwords: frozenset[str] | None = None,
) -> tuple[str, ...]:
    """Most widespread window tokens, stoplist and sigils filtered out.

    Counts measure in how many window messages a token appears, not raw
    repetition.  Ties break alphabetically so the result is stable.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    scored = []
    for token, count in cluster.token_counts.items():
        bare = token.lstrip("#@")
        if len(bare) < 2 or bare in stopwords or bare.isdigit():
            continue
        scored.append((-count, token))
    scored.sort()
    return tuple(token for _, token in scored[:n])


@dataclass(frozen=True, slots=True)
class Event:
    """Frozen snapshot of a promoted cluster.

    Emitted when a cluster crosses the author-diversity bar and again
    (with ``closed_ts`` set) when it finally expires.
    """

    event_id: int
    created_ts: float
    promoted_ts: float
    closed_ts: float | None
    size: int
    n_users: int
    diversity: float
    keywords: tuple[str, ...]
    member_ids: tuple[str, ...]
    sample_text: str

    @classmethod
    def from_cluster(
        cls,
        cluster: Cluster,
        closed_ts: float | None = None,
        log_base: float = 2.0,
        n_keywords: int = 5,
    ) -> Event:
        if cluster.promoted_ts is None:
            raise ValueError(f"cluster {cluster.cid} was never promoted")
        return cls(
            event_id=cluster.cid,
            created_ts=cluster.created_ts,
            promoted_ts=cluster.promoted_ts,
            closed_ts=closed_ts,
            size=cluster.size,
            n_users=cluster.n_users,
            diversity=cluster.diversity(log_base),
            keywords=top_keywords(cluster, n_keywords),
            member_ids=tuple(cluster.member_ids),
            sample_text=cluster.first_tweet.text,
        )


@dataclass(frozen=True)
class EngineConfig:
    """Tunable parameters of the streaming engine.

    Defaults follow the operating point that worked on live streams:
    at most 100 active clusters ranked for comparison, a 1000-message
    window per cluster, assignment below distance 0.8, and promotion at
    author entropy 5 bits (about 32 equally active authors).
    """

    cluster_limit: int = 100
    tweet_limit: int = 1000
    distance_threshold: float = 0.8
    diversity_threshold: float = 5.0
    default_timeout: float = 3600.0
    timeout_multiplier: float = 1.0
    compressor: CompressorSpec = CompressorSpec("deflate", 9)
    cache_size: int = 4096
    entropy_log_base: float = 2.0
    allowed_disorder: float = 0.0
    weighted_overlap: bool = False
    sweep_interval: int = 10000
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.cluster_limit < 1:
            raise ValueError(f"cluster_limit must be >= 1, got {self.cluster_limit}")
        if self.tweet_limit < 1:
            raise ValueError(f"tweet_limit must be >= 1, got {self.tweet_limit}")
        if not 0.0 < self.distance_threshold <= 2.0:
            raise ValueError(
                f"distance_threshold must be in (0, 2], got {self.distance_threshold}"
            )
        if self.diversity_threshold < 0.0:
            raise ValueError(
                f"diversity_threshold must be >= 0, got {self.diversity_threshold}"
            )
        if self.default_timeout <= 0.0:
            raise ValueError(
                f"default_timeout must be positive, got {self.default_timeout}"
            )
        if self.timeout_multiplier <= 0.0:
            raise ValueError(
                f"timeout_multiplier must be positive, got {self.timeout_multiplier}"
            )
        if not isinstance(self.compressor, CompressorSpec):
            raise ValueError("compressor must be a CompressorSpec")
        if not self.compressor.deterministic:
            raise ValueError("engine needs a deterministic compressor")
        if self.cache_size < 1:
            raise ValueError(f"cache_size must be >= 1, got {self.cache_size}")
        if self.entropy_log_base <= 1.0:
            raise ValueError(
                f"entropy_log_base must exceed 1, got {self.entropy_log_base}"
            )
        if self.allowed_disorder < 0.0:
            raise ValueError(
                f"allowed_disorder must be >= 0, got {self.allowed_disorder}"
            )
        if self.sweep_interval < 1:
            raise ValueError(
                f"sweep_interval must be >= 1, got {self.sweep_interval}"
            )
        if self.n_jobs < 1:
            raise ValueError(f"n_jobs must be >= 1, got {self.n_jobs}")
