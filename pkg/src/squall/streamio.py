"""Reading and writing the line formats the tools speak.

Three formats live here: message streams (one JSON object per line
with exactly the keys ``id``, ``user``, ``ts``, ``text``), ground
truth (whitespace-separated columns with a comma-joined member list),
and event logs (one JSON record per promotion or closed event).  All
three treat ``#`` lines as comments and blank lines as padding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from squall.model import Event, Tweet

_RECORD_KEYS = frozenset({"id", "user", "ts", "text"})

# Rejected-line messages kept verbatim before collapsing into a count.
_MAX_REJECT_DETAILS = 20


class RecordParseError(ValueError):
    """A stream line that does not decode into a valid message."""

    def __init__(self, reason: str, lineno: int | None = None) -> None:
        self.reason = reason
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + reason)


@dataclass
class StreamStats:
    """Tallies accumulated while iterating a stream source."""

    lines: int = 0
    parsed: int = 0
    comments: int = 0
    blanks: int = 0
    rejected: int = 0
    reject_details: list[str] = field(default_factory=list)

    def note_reject(self, error: RecordParseError) -> None:
        self.rejected += 1
        if len(self.reject_details) < _MAX_REJECT_DETAILS:
            self.reject_details.append(str(error))

    def to_dict(self) -> dict:
        return {
            "lines": self.lines,
            "parsed": self.parsed,
            "comments": self.comments,
            "blanks": self.blanks,
            "rejected": self.rejected,
            "reject_details": list(self.reject_details),
        }


def parse_record(line: str, lineno: int | None = None) -> Tweet:
    """Decode one stream line into a message.

    The object must carry exactly the four stream keys.  ``id`` and
    ``user`` may arrive as strings or integers and are kept as strings;
    ``ts`` must be a number and ``text`` a non-empty string.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"invalid JSON ({exc.msg})", lineno) from exc
    if not isinstance(obj, dict):
        raise RecordParseError(
            f"expected a JSON object, got {type(obj).__name__}", lineno
        )
    keys = set(obj)
    if keys != _RECORD_KEYS:
        missing = sorted(_RECORD_KEYS - keys)
        extra = sorted(keys - _RECORD_KEYS)
        parts = []
        if missing:
            parts.append(f"missing keys {missing}")
        if extra:
            parts.append(f"unexpected keys {extra}")
        raise RecordParseError("; ".join(parts), lineno)
    if not isinstance(obj["id"], (str, int)) or isinstance(obj["id"], bool):
        raise RecordParseError("'id' must be a string or integer", lineno)
    if not isinstance(obj["user"], (str, int)) or isinstance(obj["user"], bool):
        raise RecordParseError("'user' must be a string or integer", lineno)
    if not isinstance(obj["ts"], (int, float)) or isinstance(obj["ts"], bool):
        raise RecordParseError("'ts' must be a number", lineno)
    if not isinstance(obj["text"], str):
        raise RecordParseError("'text' must be a string", lineno)
    try:
        return Tweet(
            id=str(obj["id"]),
            user=str(obj["user"]),
            ts=float(obj["ts"]),
            text=obj["text"],
        )
    except ValueError as exc:
        raise RecordParseError(str(exc), lineno) from exc


def serialize_record(tweet: Tweet) -> str:
    """One stream line for *tweet* (no trailing newline)."""
    ts: float | int = tweet.ts
    if float(ts).is_integer():
        ts = int(ts)
    return json.dumps(
        {"id": tweet.id, "user": tweet.user, "ts": ts, "text": tweet.text},
        ensure_ascii=False,
        separators=(", ", ": "),
    )


def iter_tweets(
    source: Iterable[str] | IO[str],
    on_error: str = "raise",
    stats: StreamStats | None = None,
) -> Iterator[Tweet]:
    """Yield messages from a line source, skipping comments and blanks.

    ``on_error="raise"`` propagates the first bad line as a
    :class:`RecordParseError`; ``"skip"`` records it in *stats* (when
    given) and moves on.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    for lineno, raw in enumerate(source, start=1):
        if stats is not None:
            stats.lines += 1
        stripped = raw.strip()
        if not stripped:
            if stats is not None:
                stats.blanks += 1
            continue
        if stripped.startswith("#"):
            if stats is not None:
                stats.comments += 1
            continue
        try:
            tweet = parse_record(stripped, lineno)
        except RecordParseError as exc:
            if on_error == "raise" or stats is None:
                raise
            stats.note_reject(exc)
            continue
        if stats is not None:
            stats.parsed += 1
        yield tweet


def read_stream(path: str | Path, on_error: str = "raise") -> tuple[list[Tweet], StreamStats]:
    """Read a whole stream file; returns the messages and the tallies."""
    stats = StreamStats()
    with open(path, "r", encoding="utf-8") as fp:
        tweets = list(iter_tweets(fp, on_error=on_error, stats=stats))
    return tweets, stats


def write_stream(path: str | Path, tweets: Iterable[Tweet], header: str | None = None) -> int:
    """Write messages as stream lines; returns how many were written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fp:
        if header:
            for line in header.splitlines():
                fp.write(f"# {line}\n")
        for tweet in tweets:
            fp.write(serialize_record(tweet) + "\n")
            count += 1
    return count


# -- ground truth ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TruthEvent:
    """One annotated event: an id, an active span and its message ids."""

    event_id: str
    start_ts: float
    end_ts: float
    member_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.event_id:
            raise ValueError("truth event id must be non-empty")
        if self.end_ts < self.start_ts:
            raise ValueError(
                f"truth event {self.event_id}: end {self.end_ts} precedes "
                f"start {self.start_ts}"
            )
        if not self.member_ids:
            raise ValueError(f"truth event {self.event_id} has no members")


@dataclass(frozen=True)
class GroundTruth:
    """The full annotation for one stream."""

    events: tuple[TruthEvent, ...]

    def __post_init__(self) -> None:
        seen = set()
        for event in self.events:
            if event.event_id in seen:
                raise ValueError(f"duplicate truth event id {event.event_id!r}")
            seen.add(event.event_id)

    def __len__(self) -> int:
        return len(self.events)

    @classmethod
    def from_lines(cls, source: Iterable[str]) -> "GroundTruth":
        events = []
        for lineno, raw in enumerate(source, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 4:
                raise RecordParseError(
                    f"expected 4 columns (event_id start_ts end_ts members), "
                    f"got {len(parts)}",
                    lineno,
                )
            event_id, start_raw, end_raw, members_raw = parts
            try:
                start_ts = float(start_raw)
                end_ts = float(end_raw)
            except ValueError as exc:
                raise RecordParseError(f"bad timestamp: {exc}", lineno) from exc
            member_ids = tuple(m for m in members_raw.split(",") if m)
            try:
                events.append(
                    TruthEvent(
                        event_id=event_id,
                        start_ts=start_ts,
                        end_ts=end_ts,
                        member_ids=member_ids,
                    )
                )
            except ValueError as exc:
                raise RecordParseError(str(exc), lineno) from exc
        return cls(events=tuple(events))

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        with open(path, "r", encoding="utf-8") as fp:
            return cls.from_lines(fp)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write("# event_id start_ts end_ts member_ids\n")
            for event in self.events:
                start = _fmt_ts(event.start_ts)
                end = _fmt_ts(event.end_ts)
                members = ",".join(event.member_ids)
                fp.write(f"{event.event_id} {start} {end} {members}\n")


def _fmt_ts(ts: float) -> str:
    if float(ts).is_integer():
        return str(int(ts))
    return repr(ts)


# -- event logs -----------------------------------------------------------


def event_record(event: Event, kind: str = "event") -> dict:
    """JSON-ready record for *event*.

    ``kind="promotion"`` marks the moment a cluster crossed the
    diversity bar and omits the member list; ``kind="event"`` is the
    full closing record.
    """
    if kind not in ("event", "promotion"):
        raise ValueError(f"kind must be 'event' or 'promotion', got {kind!r}")
    record = {
        "type": kind,
        "event_id": event.event_id,
        "created_ts": event.created_ts,
        "promoted_ts": event.promoted_ts,
        "closed_ts": event.closed_ts,
        "size": event.size,
        "n_users": event.n_users,
        "diversity": round(event.diversity, 6),
        "keywords": list(event.keywords),
        "sample_text": event.sample_text,
    }
    if kind == "event":
        record["member_ids"] = list(event.member_ids)
    return record


def format_event_line(event: Event, kind: str = "event") -> str:
    return json.dumps(event_record(event, kind), ensure_ascii=False)


def event_from_record(record: dict) -> Event:
    """Rebuild an event from a log record (promotions lack members)."""
    try:
        return Event(
            event_id=int(record["event_id"]),
            created_ts=float(record["created_ts"]),
            promoted_ts=float(record["promoted_ts"]),
            closed_ts=(
                None if record.get("closed_ts") is None else float(record["closed_ts"])
            ),
            size=int(record["size"]),
            n_users=int(record["n_users"]),
            diversity=float(record["diversity"]),
            keywords=tuple(record.get("keywords", ())),
            member_ids=tuple(record.get("member_ids", ())),
            sample_text=str(record.get("sample_text", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordParseError(f"bad event record: {exc}") from exc


def read_events(
    source: Iterable[str] | IO[str], kinds: tuple[str, ...] = ("event",)
) -> list[Event]:
    """Parse an event log, keeping records of the requested kinds."""
    events = []
    for lineno, raw in enumerate(source, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise RecordParseError(f"invalid JSON ({exc.msg})", lineno) from exc
        if not isinstance(record, dict) or "type" not in record:
            raise RecordParseError("event record needs a 'type' field", lineno)
        if record["type"] in kinds:
            events.append(event_from_record(record))
    return events


def load_events(path: str | Path, kinds: tuple[str, ...] = ("event",)) -> list[Event]:
    with open(path, "r", encoding="utf-8") as fp:
        return read_events(fp, kinds)


# -- run manifests --------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every tool output."""

    command: str
    params: dict
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    counters: dict
    elapsed_sec: float
    version: str
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": dict(self.params),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "counters": dict(self.counters),
            "elapsed_sec": self.elapsed_sec,
            "version": self.version,
            "seed": self.seed,
        }

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fp:
            json.dump(self.to_dict(), fp, ensure_ascii=False, indent=2)
            fp.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as fp:
            obj = json.load(fp)
        return cls(
            command=obj["command"],
            params=obj["params"],
            inputs=tuple(obj["inputs"]),
            outputs=tuple(obj["outputs"]),
            counters=obj["counters"],
            elapsed_sec=float(obj["elapsed_sec"]),
            version=obj["version"],
            seed=obj.get("seed"),
        )
