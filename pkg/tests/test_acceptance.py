"""Acceptance gate: nine checks, one [PASS]/[FAIL] verdict line each.

Every check here is an end-to-end promise: oracles recompute answers
by an independent route, quality and throughput run on generated
streams with known truth, and the timing limits are part of the
assertion.  Run with ``pytest tests/test_acceptance.py``.
"""

import math
import string
import time

import numpy as np
import pytest

from squall.cli import main
from squall.compression import CompressorSpec, SizeCache, pair_distance
from squall.detector import EventDetector
from squall.evaluation import (
    MatchPolicy,
    best_partition_score,
    detection_report,
    objective_score,
    throughput_report,
)
from squall.model import (
    EngineConfig,
    InterArrivalStats,
    Tweet,
    exponential_mle_rate,
    user_diversity,
)
from squall.synth import fixture_spec, generate_stream

_DEFLATE = CompressorSpec("deflate", 9)


def _verdict(ok: bool, label: str, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


@pytest.fixture(scope="module")
def mixed_file(tmp_path_factory):
    """The 10,000-message fixture written to disk via the CLI."""
    root = tmp_path_factory.mktemp("acceptance-mixed")
    path = root / "mixed.jsonl"
    assert main(["synth", "mixed-10k", "--out", str(path)]) == 0
    return path


def test_1_author_entropy_matches_direct_summation():
    rng = np.random.default_rng(910)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n_users = int(rng.integers(1, 65))
        counts = rng.integers(1, 201, size=n_users)
        mapping = {f"u{i}": int(c) for i, c in enumerate(counts)}
        got = user_diversity(mapping)
        # Independent route: vectorized probabilities, plain log2 sum.
        p = counts / counts.sum()
        want = float(-(p * np.log2(p)).sum())
        worst = max(worst, abs(got - want))
    exact = user_diversity({f"u{i}": 3 for i in range(32)})
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and exact == 5.0 and elapsed < 1.0
    _verdict(
        ok,
        "1/9 author-entropy oracle",
        f"max |delta| {worst:.3e} over 1000 random count maps; "
        f"32 uniform users -> {exact!r} (exact) [{elapsed:.2f}s]",
    )
    assert ok


def test_2_rate_estimate_dominates_a_likelihood_grid():
    rng = np.random.default_rng(911)
    grid = np.logspace(-4, 3, 10000)
    log_grid = np.log(grid)
    start = time.perf_counter()
    worst_margin = math.inf
    worst_mean_gap = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 61))
        gaps = rng.uniform(0.05, 50.0, size=n)
        rate = exponential_mle_rate(list(gaps))
        total = gaps.sum()
        ll_grid = n * log_grid - grid * total
        ll_hat = n * math.log(rate) - rate * total
        worst_margin = min(worst_margin, ll_hat - float(ll_grid.max()))
        # The streaming update must agree with the batch mean.
        arrivals = np.concatenate(([0.0], np.cumsum(gaps)))
        stats = InterArrivalStats.initial(arrivals[0])
        for ts in arrivals[1:]:
            stats = stats.observe_arrival(float(ts))
        worst_mean_gap = max(worst_mean_gap, abs(stats.mean_gap - float(gaps.mean())))
    elapsed = time.perf_counter() - start
    ok = worst_margin >= -1e-12 and worst_mean_gap <= 1e-9 and elapsed < 5.0
    _verdict(
        ok,
        "2/9 inter-arrival rate oracle",
        f"1/mean beat a 10,000-point grid on 200 sequences "
        f"(worst margin {worst_margin:.3e}); running vs batch mean "
        f"|delta| {worst_mean_gap:.3e} [{elapsed:.2f}s]",
    )
    assert ok


def test_3_distance_bands_on_random_texts():
    rng = np.random.default_rng(2024)
    alphabet = string.ascii_letters + string.digits + string.punctuation + " "
    payloads = []
    for _ in range(100):
        idx = rng.integers(0, len(alphabet), size=140)
        payloads.append("".join(alphabet[int(i)] for i in idx).encode())
    cache = SizeCache(_DEFLATE, capacity=30000)
    start = time.perf_counter()
    selfs = [pair_distance(p, p, _DEFLATE, cache) for p in payloads]
    cross_min = math.inf
    asym_max = 0.0
    sane = True
    for i in range(100):
        for j in range(i + 1, 100):
            dij = pair_distance(payloads[i], payloads[j], _DEFLATE, cache)
            dji = pair_distance(payloads[j], payloads[i], _DEFLATE, cache)
            cross_min = min(cross_min, dij, dji)
            asym_max = max(asym_max, abs(dij - dji))
            sane = sane and all(
                not math.isnan(v) and 0.0 < v <= 1.5 for v in (dij, dji)
            )
    elapsed = time.perf_counter() - start
    self_ok = all(0.45 <= v <= 0.70 for v in selfs)
    sane = sane and all(not math.isnan(v) and 0.0 < v <= 1.5 for v in selfs)
    ok = self_ok and cross_min >= 0.90 and asym_max <= 0.05 and sane and elapsed < 10.0
    _verdict(
        ok,
        "3/9 distance bands",
        f"self [{min(selfs):.3f}, {max(selfs):.3f}] in [0.45, 0.70]; "
        f"cross min {cross_min:.3f} >= 0.90; asymmetry max {asym_max:.4f}; "
        f"all values finite in (0, 1.5] [{elapsed:.2f}s]",
    )
    assert ok


def test_4_per_message_work_stays_under_the_candidate_budget(mixed_stream):
    tweets, _ = mixed_stream
    cfg = EngineConfig()
    budget = cfg.cluster_limit * cfg.tweet_limit
    det = EventDetector()
    det.reset()
    start = time.perf_counter()
    per_tweet = []
    before = 0
    for tweet in tweets:
        det.process(tweet)
        after = det.counters_.pair_comparisons
        per_tweet.append(after - before)
        before = after
    elapsed = time.perf_counter() - start
    worst = max(per_tweet)
    mean = sum(per_tweet) / len(per_tweet)
    ok = len(tweets) == 10000 and worst <= budget and elapsed < 300.0
    _verdict(
        ok,
        "4/9 per-message work bound",
        f"window positions examined per message: max {worst}, mean {mean:.1f} "
        f"(budget {budget} = candidates x window) over {len(tweets)} messages "
        f"[{elapsed:.1f}s]",
    )
    assert ok


def test_5_reruns_are_byte_identical_even_with_threads(mixed_file, tmp_path):
    serial_a = tmp_path / "serial-a.jsonl"
    serial_b = tmp_path / "serial-b.jsonl"
    threaded = tmp_path / "threaded.jsonl"
    start = time.perf_counter()
    codes = [
        main(["detect", str(mixed_file), "--events-out", str(serial_a)]),
        main(["detect", str(mixed_file), "--events-out", str(serial_b)]),
        main(["detect", str(mixed_file), "--events-out", str(threaded), "--jobs", "4"]),
    ]
    elapsed = time.perf_counter() - start
    bytes_a = serial_a.read_bytes()
    identical = bytes_a == serial_b.read_bytes() and bytes_a == threaded.read_bytes()
    ok = codes == [0, 0, 0] and identical and len(bytes_a) > 0
    _verdict(
        ok,
        "5/9 byte-identical reruns",
        f"three runs (two serial, one with 4 worker threads) wrote "
        f"{len(bytes_a)} identical bytes [{elapsed:.1f}s]",
    )
    assert ok


def test_6_planted_events_found_and_fan_rejected(easy_stream, fan_stream):
    start = time.perf_counter()
    tweets, truth = easy_stream
    det = EventDetector()
    events = det.fit(tweets).finalize()
    report = detection_report(events, truth, MatchPolicy(min_jaccard=0.5))
    fan_tweets, _ = fan_stream
    fan_det = EventDetector()
    fan_det.fit(fan_tweets).finalize()
    elapsed = time.perf_counter() - start
    ok = (
        report.f1 >= 0.9
        and fan_det.counters_.promotions == 0
        and len(fan_det.events_) == 0
        and elapsed < 120.0
    )
    _verdict(
        ok,
        "6/9 planted-event quality",
        f"easy fixture F1 {report.f1:.3f} "
        f"({report.n_matched_truth}/{report.n_truth} truth matched, "
        f"{report.n_detected} detected); fan fixture promotions "
        f"{fan_det.counters_.promotions} [{elapsed:.1f}s]",
    )
    assert ok


def test_7_throughput_floor_on_a_large_stream():
    tweets, _ = generate_stream(fixture_spec("bench-100k"))
    span = tweets[-1].ts - tweets[0].ts
    det = EventDetector()
    det.reset()
    start = time.perf_counter()
    for _ in det.process_stream(tweets):
        pass
    det.finalize()
    elapsed = time.perf_counter() - start
    report = throughput_report(
        len(tweets), elapsed, label="bench-100k", stream_span_sec=span
    )
    header = report.text_block().splitlines()[0].split()
    columns_ok = header == ["stream", "#tweets", "time_min", "collect_rate", "process_rate"]
    floor = 2656.06
    target = 10000.0
    rate = report.tweets_per_min
    ok = len(tweets) == 100000 and rate >= floor and columns_ok
    target_note = "met" if rate >= target else "missed"
    _verdict(
        ok,
        "7/9 throughput floor",
        f"{rate:.0f} messages/min >= floor {floor:.2f} "
        f"(target {target:.0f}: {target_note}) [{elapsed:.1f}s]",
    )
    print(report.text_block())
    assert ok


def test_8_greedy_score_never_beats_exhaustive_search():
    rng = np.random.default_rng(808)
    start = time.perf_counter()
    ratios = []
    for _ in range(50):
        vocab = ["".join(rng.choice(list(string.ascii_lowercase), size=6)) for _ in range(10)]
        n = int(rng.integers(2, 7))
        tweets = []
        for i in range(n):
            words = [vocab[int(k)] for k in rng.integers(0, len(vocab), size=7)]
            tweets.append(
                Tweet(
                    id=f"m{i}",
                    user=f"u{int(rng.integers(0, 4))}",
                    ts=float(i),
                    text=" ".join(words),
                )
            )
        det = EventDetector(default_timeout=1e9)
        det.fit(tweets)
        clusters = list(det.clusters_.values())
        cache = SizeCache(_DEFLATE, capacity=4096)
        engine = objective_score(clusters, _DEFLATE, cache)
        optimal, _ = best_partition_score(tweets, len(clusters), _DEFLATE, cache)
        assert engine <= optimal + 1e-9
        ratios.append(1.0 if optimal == 0 else engine / optimal)
    elapsed = time.perf_counter() - start
    mean_ratio = sum(ratios) / len(ratios)
    ok = all(r <= 1.0 + 1e-9 for r in ratios) and elapsed < 60.0
    _verdict(
        ok,
        "8/9 objective vs exhaustive",
        f"engine score <= optimum on 50 instances of <= 6 messages; "
        f"mean ratio {mean_ratio:.3f}, worst {min(ratios):.3f} "
        f"(no lower bound asserted) [{elapsed:.1f}s]",
    )
    assert ok


def test_9_expiry_closes_once_and_retires_singletons():
    start = time.perf_counter()
    det = EventDetector(default_timeout=1000.0)
    for i in range(33):
        det.process(
            Tweet(
                id=f"s{i}",
                user=f"u{i}",
                ts=4.0 * i,
                text=f"harbor bridge closed by the storm surge update {i}",
            )
        )
    promoted = det.counters_.promotions == 1
    last_ts = 4.0 * 32
    # One shared token makes the cluster a candidate; the rest keeps
    # the probe itself far outside the joining threshold.
    det.process(
        Tweet(
            id="probe",
            user="later",
            ts=last_ts + 4.5,
            text="storm qoxuv jemkal wubroz fyther dacplum",
        )
    )
    closed = det.drain_closed()
    emitted_once = (
        len(closed) == 1
        and closed[0].closed_ts == last_ts + 4.5
        and det.drain_closed() == []
        and len(det.events_) == 1
    )

    lone = EventDetector(default_timeout=10.0)
    lone.process(Tweet(id="x1", user="solo", ts=0.0, text="vumat serolo quiv nabem"))
    lone.evict(now=10.0)
    survived_at_deadline = len(lone.clusters_) == 1
    lone.evict(now=10.000001)
    singleton_expired = len(lone.clusters_) == 0 and len(lone.events_) == 0
    elapsed = time.perf_counter() - start
    ok = (
        promoted
        and emitted_once
        and survived_at_deadline
        and singleton_expired
        and elapsed < 1.0
    )
    _verdict(
        ok,
        "9/9 expiry semantics",
        f"4s-gap event closed exactly once at silence > mean gap; "
        f"singleton survived at its deadline and expired just past it, "
        f"unreported [{elapsed:.2f}s]",
    )
    assert ok
