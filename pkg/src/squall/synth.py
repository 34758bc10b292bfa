"""Synthetic streams with planted events and known ground truth.

The generator plants three populations.  Event bursts are many-author
message groups sharing a long core phrase, arriving on a schedule of
non-increasing gaps: each gap is then at most the running mean gap, so
a correctly tuned engine never retires the cluster mid-burst.  Fan
bursts look identical in shape but come from one author, which is
exactly what the diversity bar must reject.  Background chatter is
word salad from a wide vocabulary; messages land in throwaway
singleton clusters and age out.

Everything is driven by one seeded generator, so a spec plus a seed
reproduces the stream byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from squall.model import Tweet
from squall.streamio import GroundTruth, TruthEvent

_CONSONANTS = "bcdfglmnprstvz"
_VOWELS = "aeiou"

# Template shape shared by all planted events.  The long fixed core
# keeps every within-burst pair well inside the joining threshold; the
# few sampled extras keep messages from being literal duplicates.
_CORE_WORDS = 10
_POOL_WORDS = 16
_EXTRA_WORDS = (2, 3)

_BACKGROUND_WORDS = (10, 14)


def _make_word(rng: np.random.Generator, min_syllables: int = 2, max_syllables: int = 4) -> str:
    n = int(rng.integers(min_syllables, max_syllables + 1))
    parts = []
    for _ in range(n):
        c = _CONSONANTS[int(rng.integers(0, len(_CONSONANTS)))]
        v = _VOWELS[int(rng.integers(0, len(_VOWELS)))]
        parts.append(c + v)
    return "".join(parts)


def _make_vocab(rng: np.random.Generator, size: int) -> list[str]:
    return [_make_word(rng) for _ in range(size)]


def gap_schedule(n_gaps: int, first_gap: float, decay: float, min_gap: float) -> list[float]:
    """Non-increasing arrival gaps: geometric decay with a floor.

    Because the sequence never increases, every gap is bounded by the
    mean of the gaps before it.  A cluster whose silence allowance is
    that running mean therefore survives the whole burst.
    """
    if n_gaps < 0:
        raise ValueError(f"n_gaps must be >= 0, got {n_gaps}")
    if first_gap <= 0 or min_gap <= 0:
        raise ValueError("gaps must be positive")
    if not 0 < decay <= 1.0:
        raise ValueError(f"decay must be in (0, 1], got {decay}")
    gaps = []
    gap = first_gap
    for _ in range(n_gaps):
        gaps.append(max(gap, min_gap))
        gap *= decay
    return gaps


@dataclass(frozen=True)
class PlantedEvent:
    """One many-author burst the engine is expected to report.

    ``paraphrase_rate`` is the fraction of messages that rewrite part
    of the shared core instead of repeating it verbatim, mimicking
    people describing the same thing in their own words.
    """

    name: str
    start_ts: float
    n_tweets: int = 48
    n_users: int = 64
    first_gap: float = 30.0
    gap_decay: float = 0.9
    min_gap: float = 2.0
    paraphrase_rate: float = 0.1

    def __post_init__(self) -> None:
        if self.n_tweets < 2:
            raise ValueError(f"event {self.name}: needs at least 2 tweets")
        if self.n_users < 2:
            raise ValueError(f"event {self.name}: needs at least 2 users")
        if not 0.0 <= self.paraphrase_rate <= 1.0:
            raise ValueError(
                f"event {self.name}: paraphrase_rate must be in [0, 1]"
            )


@dataclass(frozen=True)
class FanSpec:
    """A single-author burst that must stay below the diversity bar."""

    name: str
    start_ts: float
    n_tweets: int = 60
    first_gap: float = 20.0
    gap_decay: float = 0.92
    min_gap: float = 2.0

    def __post_init__(self) -> None:
        if self.n_tweets < 2:
            raise ValueError(f"fan {self.name}: needs at least 2 tweets")


@dataclass(frozen=True)
class BackgroundSpec:
    """Unrelated chatter spread uniformly over a time span."""

    n_tweets: int
    start_ts: float = 0.0
    end_ts: float = 3600.0
    n_users: int = 1000
    vocab_size: int = 4000

    def __post_init__(self) -> None:
        if self.n_tweets < 0:
            raise ValueError(f"background n_tweets must be >= 0, got {self.n_tweets}")
        if self.end_ts < self.start_ts:
            raise ValueError("background end_ts precedes start_ts")
        if self.n_users < 1 or self.vocab_size < 50:
            raise ValueError("background needs users and a non-trivial vocabulary")


@dataclass(frozen=True)
class SyntheticSpec:
    """Complete recipe for one reproducible stream."""

    name: str
    seed: int
    events: tuple[PlantedEvent, ...] = ()
    fans: tuple[FanSpec, ...] = ()
    background: BackgroundSpec | None = None

    def total_tweets(self) -> int:
        n = sum(e.n_tweets for e in self.events)
        n += sum(f.n_tweets for f in self.fans)
        if self.background is not None:
            n += self.background.n_tweets
        return n

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "events": [vars(e) for e in self.events],
            "fans": [vars(f) for f in self.fans],
            "background": None if self.background is None else vars(self.background),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticSpec":
        return cls(
            name=str(obj["name"]),
            seed=int(obj["seed"]),
            events=tuple(PlantedEvent(**e) for e in obj.get("events", ())),
            fans=tuple(FanSpec(**f) for f in obj.get("fans", ())),
            background=(
                None
                if obj.get("background") is None
                else BackgroundSpec(**obj["background"])
            ),
        )


@dataclass
class _Draft:
    ts: float
    seq: int
    user: str
    text: str
    label: str | None


def _event_drafts(
    event: PlantedEvent, rng: np.random.Generator, seq_start: int
) -> list[_Draft]:
    core = [_make_word(rng, 2, 4) for _ in range(_CORE_WORDS)]
    pool = [_make_word(rng, 2, 4) for _ in range(_POOL_WORDS)]
    tag = "#" + _make_word(rng, 2, 3)
    users = [f"{event.name}.u{j}" for j in range(event.n_users)]
    order = rng.permutation(event.n_users)
    gaps = gap_schedule(event.n_tweets - 1, event.first_gap, event.gap_decay, event.min_gap)
    drafts = []
    ts = event.start_ts
    for i in range(event.n_tweets):
        if i > 0:
            ts += gaps[i - 1]
        words = list(core)
        if rng.random() < event.paraphrase_rate:
            # A paraphrase swaps two core words for pool words; pairs of
            # paraphrases still share most of the core, so they stay
            # within the joining threshold of the whole cluster.
            slots = rng.choice(_CORE_WORDS, size=2, replace=False)
            subs = rng.choice(len(pool), size=2, replace=False)
            for slot, sub in zip(slots, subs):
                words[int(slot)] = pool[int(sub)]
        lo, hi = _EXTRA_WORDS
        n_extra = int(rng.integers(lo, hi + 1))
        extra_idx = rng.choice(len(pool), size=n_extra, replace=False)
        words.extend(pool[int(j)] for j in extra_idx)
        words.append(tag)
        drafts.append(
            _Draft(
                ts=ts,
                seq=seq_start + i,
                user=users[int(order[i % event.n_users])],
                text=" ".join(words),
                label=event.name,
            )
        )
    return drafts


def _fan_drafts(fan: FanSpec, rng: np.random.Generator, seq_start: int) -> list[_Draft]:
    core = " ".join(_make_word(rng, 2, 4) for _ in range(_CORE_WORDS))
    tag = "#" + _make_word(rng, 2, 3)
    user = f"{fan.name}.solo"
    gaps = gap_schedule(fan.n_tweets - 1, fan.first_gap, fan.gap_decay, fan.min_gap)
    drafts = []
    ts = fan.start_ts
    for i in range(fan.n_tweets):
        if i > 0:
            ts += gaps[i - 1]
        drafts.append(
            _Draft(
                ts=ts,
                seq=seq_start + i,
                user=user,
                text=f"{core} {tag} round {i + 1}",
                label=None,
            )
        )
    return drafts


def _background_drafts(
    background: BackgroundSpec, rng: np.random.Generator, seq_start: int
) -> list[_Draft]:
    vocab = _make_vocab(rng, background.vocab_size)
    times = np.sort(
        rng.uniform(background.start_ts, background.end_ts, background.n_tweets)
    )
    user_ids = rng.integers(0, background.n_users, background.n_tweets)
    lo, hi = _BACKGROUND_WORDS
    lengths = rng.integers(lo, hi + 1, background.n_tweets)
    drafts = []
    for i in range(background.n_tweets):
        word_idx = rng.integers(0, background.vocab_size, int(lengths[i]))
        text = " ".join(vocab[int(j)] for j in word_idx)
        drafts.append(
            _Draft(
                ts=float(times[i]),
                seq=seq_start + i,
                user=f"bg.u{int(user_ids[i])}",
                text=text,
                label=None,
            )
        )
    return drafts


def generate_stream(spec: SyntheticSpec) -> tuple[list[Tweet], GroundTruth]:
    """Materialize *spec*: time-ordered messages plus their annotation.

    Ground truth covers planted events only; fans and background are
    deliberately unannotated, since reporting them would be a mistake.
    """
    rng = np.random.default_rng(spec.seed)
    drafts: list[_Draft] = []
    # Population order is part of the recipe: changing it would shift
    # the generator stream and produce a different (still valid) fixture.
    if spec.background is not None:
        drafts.extend(_background_drafts(spec.background, rng, len(drafts)))
    for event in spec.events:
        drafts.extend(_event_drafts(event, rng, len(drafts)))
    for fan in spec.fans:
        drafts.extend(_fan_drafts(fan, rng, len(drafts)))

    drafts.sort(key=lambda d: (d.ts, d.seq))
    width = max(5, len(str(len(drafts))))
    tweets = []
    members: dict[str, list[str]] = {}
    spans: dict[str, tuple[float, float]] = {}
    for i, draft in enumerate(drafts):
        tweet = Tweet(
            id=f"t{i + 1:0{width}d}",
            user=draft.user,
            ts=round(draft.ts, 3),
            text=draft.text,
        )
        tweets.append(tweet)
        if draft.label is not None:
            members.setdefault(draft.label, []).append(tweet.id)
            lo, hi = spans.get(draft.label, (tweet.ts, tweet.ts))
            spans[draft.label] = (min(lo, tweet.ts), max(hi, tweet.ts))

    truth_events = []
    for event in spec.events:
        ids = members.get(event.name, [])
        if not ids:
            continue
        lo, hi = spans[event.name]
        truth_events.append(
            TruthEvent(
                event_id=event.name,
                start_ts=lo,
                end_ts=hi,
                member_ids=tuple(ids),
            )
        )
    truth_events.sort(key=lambda e: (e.start_ts, e.event_id))
    return tweets, GroundTruth(events=tuple(truth_events))


# -- fixture registry -----------------------------------------------------


def _easy_1(seed: int) -> SyntheticSpec:
    return SyntheticSpec(
        name="easy-1",
        seed=seed,
        events=(PlantedEvent("ev1", start_ts=300.0, n_tweets=40, n_users=40),),
        background=BackgroundSpec(
            n_tweets=150, start_ts=0.0, end_ts=1800.0, n_users=120, vocab_size=2000
        ),
    )


def _easy(seed: int) -> SyntheticSpec:
    # Five bursts with 40-60 distinct authors each, a tenth of the
    # messages paraphrased, and ten times as much background chatter.
    events = (
        PlantedEvent("ev1", start_ts=600.0, n_tweets=54, n_users=45),
        PlantedEvent("ev2", start_ts=7000.0, n_tweets=60, n_users=50),
        PlantedEvent("ev3", start_ts=13000.0, n_tweets=48, n_users=40),
        PlantedEvent("ev4", start_ts=19000.0, n_tweets=66, n_users=55),
        PlantedEvent("ev5", start_ts=26000.0, n_tweets=72, n_users=60),
    )
    n_event_tweets = sum(e.n_tweets for e in events)
    return SyntheticSpec(
        name="easy",
        seed=seed,
        events=events,
        background=BackgroundSpec(
            n_tweets=10 * n_event_tweets,
            start_ts=0.0,
            end_ts=30000.0,
            n_users=1500,
            vocab_size=4000,
        ),
    )


def _fan(seed: int) -> SyntheticSpec:
    return SyntheticSpec(
        name="fan",
        seed=seed,
        fans=(FanSpec("fan1", start_ts=300.0, n_tweets=50),),
        background=BackgroundSpec(
            n_tweets=240, start_ts=0.0, end_ts=3600.0, n_users=180, vocab_size=2000
        ),
    )


def _mixed_10k(seed: int) -> SyntheticSpec:
    events = tuple(
        PlantedEvent(f"ev{i + 1}", start_ts=1800.0 + i * 10500.0, n_tweets=80)
        for i in range(8)
    )
    fans = (
        FanSpec("fan1", start_ts=9000.0),
        FanSpec("fan2", start_ts=52000.0),
    )
    used = sum(e.n_tweets for e in events) + sum(f.n_tweets for f in fans)
    return SyntheticSpec(
        name="mixed-10k",
        seed=seed,
        events=events,
        fans=fans,
        background=BackgroundSpec(
            n_tweets=10000 - used,
            start_ts=0.0,
            end_ts=86400.0,
            n_users=2500,
            vocab_size=4000,
        ),
    )


def _bench_100k(seed: int) -> SyntheticSpec:
    events = tuple(
        PlantedEvent(f"ev{i + 1}", start_ts=2000.0 + i * 4200.0, n_tweets=100)
        for i in range(20)
    )
    used = sum(e.n_tweets for e in events)
    return SyntheticSpec(
        name="bench-100k",
        seed=seed,
        events=events,
        background=BackgroundSpec(
            n_tweets=100000 - used,
            start_ts=0.0,
            end_ts=86400.0,
            n_users=5000,
            vocab_size=8000,
        ),
    )


_FIXTURES = {
    "easy-1": (_easy_1, 11),
    "easy": (_easy, 7),
    "fan": (_fan, 13),
    "mixed-10k": (_mixed_10k, 23),
    "bench-100k": (_bench_100k, 42),
}


def fixture_names() -> tuple[str, ...]:
    return tuple(_FIXTURES)


def fixture_spec(name: str, seed: int | None = None) -> SyntheticSpec:
    """Named fixture recipe, optionally reseeded."""
    try:
        builder, default_seed = _FIXTURES[name]
    except KeyError:
        known = ", ".join(sorted(_FIXTURES))
        raise ValueError(f"unknown fixture {name!r}; known fixtures: {known}") from None
    return builder(default_seed if seed is None else seed)
