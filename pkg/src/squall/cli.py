"""Command-line tools: detect, synth, eval, bench.

Exit codes are part of the contract: 0 for success, 1 for usage or
configuration problems, 2 for I/O and data errors, and 3 when a detect
run finished but had to reject malformed stream lines.  Every command
writes a run manifest recording parameters, inputs, outputs and
counters next to its primary output.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import click

from squall import __version__
from squall.compression import (
    CompressorUnavailableError,
    compressor_benchmark,
)
from squall.detector import EventDetector, StreamOrderError
from squall.evaluation import MatchPolicy, detection_report, throughput_report
from squall.model import EngineConfig
from squall.streamio import (
    GroundTruth,
    RecordParseError,
    RunManifest,
    StreamStats,
    format_event_line,
    iter_tweets,
    load_events,
    write_stream,
)
from squall.synth import SyntheticSpec, fixture_names, fixture_spec, generate_stream

_DEFAULTS = EngineConfig()


def _manifest_path(explicit: str | None, anchor: str) -> Path:
    if explicit:
        return Path(explicit)
    return Path(f"{anchor}.manifest.json")


def _write_manifest(
    path: Path,
    command: str,
    params: dict,
    inputs: tuple[str, ...],
    outputs: tuple[str, ...],
    counters: dict,
    elapsed: float,
    seed: int | None = None,
) -> None:
    manifest = RunManifest(
        command=command,
        params=params,
        inputs=inputs,
        outputs=outputs,
        counters=counters,
        elapsed_sec=round(elapsed, 6),
        version=__version__,
        seed=seed,
    )
    manifest.dump(path)


@click.group()
@click.version_option(version=__version__, prog_name="squall")
def cli() -> None:
    """Event detection in short-text streams by compression distance."""


@cli.command()
@click.argument("stream", type=click.Path(dir_okay=False, allow_dash=True))
@click.option(
    "--events-out",
    default="events.jsonl",
    show_default=True,
    help="Event log destination (promotion and closing records).",
)
@click.option(
    "--manifest-out",
    default=None,
    help="Run manifest destination [default: <events-out>.manifest.json].",
)
@click.option(
    "--cluster-limit",
    default=_DEFAULTS.cluster_limit,
    show_default=True,
    help="Candidate clusters ranked per message.",
)
@click.option(
    "--tweet-limit",
    default=_DEFAULTS.tweet_limit,
    show_default=True,
    help="Recent messages kept per cluster for distance checks.",
)
@click.option(
    "--distance-threshold",
    default=_DEFAULTS.distance_threshold,
    show_default=True,
    help="Largest compression distance that still joins a cluster.",
)
@click.option(
    "--diversity-threshold",
    default=_DEFAULTS.diversity_threshold,
    show_default=True,
    help="Author entropy (bits) that promotes a cluster to an event.",
)
@click.option(
    "--default-timeout",
    default=_DEFAULTS.default_timeout,
    show_default=True,
    help="Silence allowance before a rate estimate exists.",
)
@click.option(
    "--timeout-multiplier",
    default=_DEFAULTS.timeout_multiplier,
    show_default=True,
    help="Scale on the fitted mean gap before a cluster is retired.",
)
@click.option(
    "--algorithm",
    type=click.Choice(["deflate", "gzip", "lz-fast"]),
    default="deflate",
    show_default=True,
    help="Compression backend for distances.",
)
@click.option(
    "--compression-level",
    default=_DEFAULTS.compressor.level,
    show_default=True,
    help="Backend effort setting.",
)
@click.option(
    "--allowed-disorder",
    default=_DEFAULTS.allowed_disorder,
    show_default=True,
    help="How far behind the stream clock a message may arrive.",
)
@click.option(
    "--jobs",
    default=1,
    show_default=True,
    help="Worker threads for candidate distance evaluation.",
)
@click.option(
    "--strict/--no-strict",
    default=False,
    show_default=True,
    help="Abort on the first malformed line instead of skipping it.",
)
@click.option(
    "--promotions/--no-promotions",
    "log_promotions",
    default=True,
    show_default=True,
    help="Also log a record the moment each cluster is promoted.",
)
def detect(
    stream: str,
    events_out: str,
    manifest_out: str | None,
    cluster_limit: int,
    tweet_limit: int,
    distance_threshold: float,
    diversity_threshold: float,
    default_timeout: float,
    timeout_multiplier: float,
    algorithm: str,
    compression_level: int,
    allowed_disorder: float,
    jobs: int,
    strict: bool,
    log_promotions: bool,
) -> int:
    """Run the engine over STREAM (a JSON-lines file, or - for stdin)."""
    detector = EventDetector(
        cluster_limit=cluster_limit,
        tweet_limit=tweet_limit,
        distance_threshold=distance_threshold,
        diversity_threshold=diversity_threshold,
        default_timeout=default_timeout,
        timeout_multiplier=timeout_multiplier,
        algorithm=algorithm,
        compression_level=compression_level,
        allowed_disorder=allowed_disorder,
        n_jobs=jobs,
    )
    detector.reset()
    stats = StreamStats()
    on_error = "raise" if strict else "skip"
    n_records = 0
    first_ts: float | None = None
    start = time.perf_counter()
    with click.open_file(stream, "r", encoding="utf-8") as source, open(
        events_out, "w", encoding="utf-8"
    ) as sink:
        for tweet in iter_tweets(source, on_error=on_error, stats=stats):
            if first_ts is None:
                first_ts = tweet.ts
            outcome = detector.process(tweet)
            if outcome.promotion is not None and log_promotions:
                sink.write(format_event_line(outcome.promotion, "promotion") + "\n")
            for event in detector.drain_closed():
                sink.write(format_event_line(event, "event") + "\n")
                n_records += 1
        detector.finalize()
        for event in detector.drain_closed():
            sink.write(format_event_line(event, "event") + "\n")
            n_records += 1
    elapsed = time.perf_counter() - start

    counters = detector.counters_.to_dict()
    counters["stream"] = stats.to_dict()
    span = None
    if first_ts is not None and detector.clock_ > first_ts:
        span = detector.clock_ - first_ts
    rate = throughput_report(
        counters["processed"], max(elapsed, 1e-9), label=Path(stream).name, stream_span_sec=span
    )
    counters["throughput"] = rate.to_dict()
    manifest = _manifest_path(manifest_out, events_out)
    _write_manifest(
        manifest,
        command="detect",
        params=detector.get_params(),
        inputs=(stream,),
        outputs=(events_out,),
        counters=counters,
        elapsed=elapsed,
    )
    click.echo(
        f"processed {counters['processed']} messages: "
        f"{counters['created']} clusters, {counters['promotions']} promotions, "
        f"{n_records} events written to {events_out}"
    )
    if stats.rejected:
        click.echo(f"warning: rejected {stats.rejected} malformed lines", err=True)
        return 3
    return 0


@cli.command()
@click.argument("fixture", required=False)
@click.option(
    "--spec-file",
    type=click.Path(dir_okay=False),
    default=None,
    help="JSON recipe to generate instead of a named fixture.",
)
@click.option("--seed", type=int, default=None, help="Override the recipe seed.")
@click.option("--out", default=None, help="Stream destination (JSON lines).")
@click.option("--truth-out", default=None, help="Ground-truth destination.")
@click.option(
    "--manifest-out",
    default=None,
    help="Run manifest destination [default: <out>.manifest.json].",
)
@click.option("--list", "list_fixtures", is_flag=True, help="List known fixtures.")
def synth(
    fixture: str | None,
    spec_file: str | None,
    seed: int | None,
    out: str | None,
    truth_out: str | None,
    manifest_out: str | None,
    list_fixtures: bool,
) -> int:
    """Generate a synthetic stream from FIXTURE or a spec file."""
    if list_fixtures:
        for name in fixture_names():
            click.echo(name)
        return 0
    if (fixture is None) == (spec_file is None):
        raise click.UsageError("give exactly one of FIXTURE or --spec-file")
    if out is None:
        raise click.UsageError("--out is required")
    start = time.perf_counter()
    if spec_file is not None:
        with open(spec_file, "r", encoding="utf-8") as fp:
            spec = SyntheticSpec.from_dict(json.load(fp))
        if seed is not None:
            spec = SyntheticSpec.from_dict({**spec.to_dict(), "seed": seed})
    else:
        spec = fixture_spec(fixture, seed)
    tweets, truth = generate_stream(spec)
    header = f"synthetic stream '{spec.name}' seed={spec.seed} tweets={len(tweets)}"
    write_stream(out, tweets, header=header)
    outputs = [out]
    if truth_out:
        truth.dump(truth_out)
        outputs.append(truth_out)
    elapsed = time.perf_counter() - start
    manifest = _manifest_path(manifest_out, out)
    _write_manifest(
        manifest,
        command="synth",
        params={"spec": spec.to_dict()},
        inputs=() if spec_file is None else (spec_file,),
        outputs=tuple(outputs),
        counters={"tweets": len(tweets), "truth_events": len(truth)},
        elapsed=elapsed,
        seed=spec.seed,
    )
    click.echo(f"wrote {len(tweets)} messages to {out} ({len(truth)} truth events)")
    return 0


@cli.command("eval")
@click.option(
    "--events",
    "events_path",
    required=True,
    type=click.Path(dir_okay=False),
    help="Event log produced by detect.",
)
@click.option(
    "--truth",
    "truth_path",
    required=True,
    type=click.Path(dir_okay=False),
    help="Ground-truth file.",
)
@click.option(
    "--min-jaccard",
    default=0.5,
    show_default=True,
    help="Member-overlap floor for a valid match.",
)
@click.option(
    "--time-overlap/--no-time-overlap",
    default=True,
    show_default=True,
    help="Require the detected lifespan to touch the annotated span.",
)
@click.option(
    "--allow-many-to-one",
    is_flag=True,
    help="Let several detected fragments match one truth event.",
)
@click.option("--report-out", default=None, help="Write the report as JSON here.")
@click.option(
    "--manifest-out",
    default=None,
    help="Run manifest destination [default: squall-eval.manifest.json].",
)
def eval_cmd(
    events_path: str,
    truth_path: str,
    min_jaccard: float,
    time_overlap: bool,
    allow_many_to_one: bool,
    report_out: str | None,
    manifest_out: str | None,
) -> int:
    """Score an event log against ground truth."""
    start = time.perf_counter()
    detected = load_events(events_path, kinds=("event",))
    truth = GroundTruth.load(truth_path)
    policy = MatchPolicy(
        min_jaccard=min_jaccard,
        require_time_overlap=time_overlap,
        allow_many_to_one=allow_many_to_one,
    )
    report = detection_report(detected, truth, policy)
    click.echo(report.text_block())
    outputs = []
    if report_out:
        with open(report_out, "w", encoding="utf-8") as fp:
            json.dump(report.to_dict(), fp, ensure_ascii=False, indent=2)
            fp.write("\n")
        outputs.append(report_out)
    elapsed = time.perf_counter() - start
    anchor = report_out if report_out else "squall-eval"
    manifest = _manifest_path(manifest_out, anchor)
    counters = report.to_dict()
    counters.pop("pairs")
    _write_manifest(
        manifest,
        command="eval",
        params={
            "min_jaccard": min_jaccard,
            "require_time_overlap": time_overlap,
            "allow_many_to_one": allow_many_to_one,
        },
        inputs=(events_path, truth_path),
        outputs=tuple(outputs),
        counters=counters,
        elapsed=elapsed,
    )
    return 0


@cli.command()
@click.argument("stream", type=click.Path(dir_okay=False, allow_dash=True))
@click.option(
    "--max-texts",
    default=20000,
    show_default=True,
    help="Cap on how many messages are benchmarked.",
)
@click.option("--report-out", default=None, help="Write the table as JSON here.")
@click.option(
    "--manifest-out",
    default=None,
    help="Run manifest destination [default: squall-bench.manifest.json].",
)
def bench(
    stream: str,
    max_texts: int,
    report_out: str | None,
    manifest_out: str | None,
) -> int:
    """Compare compression backends on the texts of STREAM."""
    if max_texts < 1:
        raise click.UsageError("--max-texts must be positive")
    start = time.perf_counter()
    texts: list[bytes] = []
    with click.open_file(stream, "r", encoding="utf-8") as source:
        for tweet in iter_tweets(source, on_error="raise"):
            texts.append(tweet.payload)
            if len(texts) >= max_texts:
                break
    if not texts:
        raise click.UsageError(f"no messages found in {stream}")
    report = compressor_benchmark(texts)
    click.echo(report.text_block())
    outputs = []
    if report_out:
        with open(report_out, "w", encoding="utf-8") as fp:
            json.dump(report.to_dict(), fp, ensure_ascii=False, indent=2)
            fp.write("\n")
        outputs.append(report_out)
    elapsed = time.perf_counter() - start
    anchor = report_out if report_out else "squall-bench"
    manifest = _manifest_path(manifest_out, anchor)
    _write_manifest(
        manifest,
        command="bench",
        params={"max_texts": max_texts},
        inputs=(stream,),
        outputs=tuple(outputs),
        counters={"n_texts": report.n_texts},
        elapsed=elapsed,
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping failures onto the documented exit codes."""
    try:
        result = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (RecordParseError, StreamOrderError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (CompressorUnavailableError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    if result is None:
        return 0
    return int(result)


if __name__ == "__main__":
    raise SystemExit(main())
