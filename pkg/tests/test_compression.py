"""Compressor specs, the size cache and the pairwise distance."""

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squall.compression import (
    BenchReport,
    CompressorSpec,
    CompressorUnavailableError,
    EmptyTextError,
    SizeCache,
    algorithm_available,
    compressor_benchmark,
    default_bench_specs,
    pair_distance,
)

TWEET = "earthquake reported downtown, buildings shaking, stay safe everyone"


class TestCompressorSpec:
    def test_compressed_size_matches_compress(self, deflate):
        blob = deflate.compress(TWEET)
        assert isinstance(blob, bytes)
        assert deflate.compressed_size(TWEET) == len(blob)

    def test_output_is_deterministic(self, deflate):
        assert deflate.compress(TWEET) == deflate.compress(TWEET)
        assert deflate.deterministic

    def test_gzip_is_deflate_plus_container(self):
        # The gzip container adds a 10-byte header and 8-byte trailer
        # around the identical DEFLATE stream.
        raw = CompressorSpec("deflate", 9)
        boxed = CompressorSpec("gzip", 9)
        for text in (TWEET, "a", "x" * 500):
            assert boxed.compressed_size(text) == raw.compressed_size(text) + 18

    def test_gzip_header_is_stable_across_calls(self):
        boxed = CompressorSpec("gzip", 6)
        assert boxed.compress(TWEET) == boxed.compress(TWEET)

    def test_str_and_bytes_agree(self, deflate):
        assert deflate.compress(TWEET) == deflate.compress(TWEET.encode("utf-8"))

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            CompressorSpec("brotli", 9)

    @pytest.mark.parametrize("level", [0, 10, -1])
    def test_level_out_of_range(self, level):
        with pytest.raises(ValueError, match="level"):
            CompressorSpec("deflate", level)

    def test_empty_text_rejected(self, deflate):
        with pytest.raises(EmptyTextError):
            deflate.compress("")
        with pytest.raises(EmptyTextError):
            deflate.compressed_size(b"")

    @pytest.mark.skipif(
        algorithm_available("lz-fast"), reason="lz4 backend is installed here"
    )
    def test_missing_optional_backend_is_config_error(self):
        with pytest.raises(CompressorUnavailableError, match="lz4"):
            CompressorSpec("lz-fast", 1)

    def test_compression_actually_compresses_repetition(self, deflate):
        assert deflate.compressed_size("ab" * 128) < 16

    @given(data=st.binary(min_size=1, max_size=280))
    @settings(max_examples=60, deadline=None)
    def test_sizes_positive_and_repeatable(self, data):
        spec = CompressorSpec("deflate", 9)
        size = spec.compressed_size(data)
        assert size > 0
        assert spec.compressed_size(data) == size


class TestSizeCache:
    def test_hits_and_misses_counted(self, cache):
        assert cache.size(b"one two three") == cache.size(b"one two three")
        assert cache.misses == 1
        assert cache.hits == 1
        assert len(cache) == 1

    def test_capacity_bound_with_lru_eviction(self, deflate):
        small = SizeCache(deflate, capacity=2)
        small.size(b"aaa")
        small.size(b"bbb")
        small.size(b"aaa")  # refresh 'aaa'; 'bbb' is now oldest
        small.size(b"ccc")  # evicts 'bbb'
        assert len(small) == 2
        small.size(b"aaa")
        assert small.hits == 2
        small.size(b"bbb")
        assert small.misses == 4

    def test_cached_value_matches_spec(self, deflate, cache):
        data = TWEET.encode("utf-8")
        assert cache.size(data) == deflate.compressed_size(data)

    def test_clear_resets_everything(self, cache):
        cache.size(b"abc")
        cache.clear()
        assert len(cache) == 0
        assert cache.hits == 0 and cache.misses == 0

    def test_capacity_must_be_positive(self, deflate):
        with pytest.raises(ValueError):
            SizeCache(deflate, capacity=0)

    def test_concurrent_use_stays_consistent(self, deflate):
        shared = SizeCache(deflate, capacity=64)
        payloads = [f"text number {i}".encode() for i in range(32)]
        errors = []

        def worker():
            try:
                for payload in payloads * 5:
                    assert shared.size(payload) == deflate.compressed_size(payload)
            except AssertionError as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert len(shared) <= 64


class TestPairDistance:
    def test_near_duplicates_score_low(self, deflate):
        a = "severe flooding on main street, road closed till morning"
        b = "severe flooding on main street, road closed until morning"
        assert pair_distance(a, b, deflate) < 0.7

    def test_unrelated_texts_score_higher_than_related(self, deflate):
        base = "severe flooding on main street, road closed till morning"
        related = "main street closed: severe flooding, reopening in the morning"
        unrelated = "quarterly earnings beat expectations, shares jump in late trading"
        assert pair_distance(base, related, deflate) < pair_distance(
            base, unrelated, deflate
        )

    def test_self_distance_well_below_one(self, deflate):
        d = pair_distance(TWEET, TWEET, deflate)
        assert 0.0 < d < 0.7

    def test_empty_side_rejected(self, deflate):
        with pytest.raises(EmptyTextError):
            pair_distance("", TWEET, deflate)
        with pytest.raises(EmptyTextError):
            pair_distance(TWEET, b"", deflate)

    def test_cache_serves_repeat_lookups(self, deflate, cache):
        pair_distance(TWEET, "other text entirely", deflate, cache)
        pair_distance(TWEET, "third text entirely", deflate, cache)
        assert cache.hits >= 1  # TWEET's size was reused

    def test_default_spec_is_deflate(self):
        assert pair_distance(TWEET, TWEET) == pair_distance(
            TWEET, TWEET, CompressorSpec("deflate", 9)
        )

    @given(
        x=st.text(min_size=1, max_size=140),
        y=st.text(min_size=1, max_size=140),
    )
    @settings(max_examples=60, deadline=None)
    def test_distance_is_finite_positive_and_bounded(self, x, y):
        d = pair_distance(x, y)
        assert 0.0 < d <= 1.5
        assert d == d  # not NaN


class TestBenchmark:
    def test_table_header_names_the_columns(self, deflate):
        report = compressor_benchmark([TWEET, TWEET * 2], specs=[deflate])
        header = report.text_block().splitlines()[0].split()
        assert header == ["algorithm", "level", "mean_ratio", "texts_per_sec"]

    def test_default_specs_cover_installed_backends(self):
        specs = default_bench_specs()
        names = {(s.algorithm, s.level) for s in specs}
        assert ("deflate", 9) in names
        assert ("gzip", 9) in names

    def test_ratio_and_rate_are_sane(self):
        texts = [f"repeated message body number {i} " * 3 for i in range(40)]
        report = compressor_benchmark(texts)
        assert report.n_texts == 40
        for row in report.rows:
            assert 0.0 < row.mean_ratio < 1.2
            assert row.texts_per_sec > 0

    def test_deflate_beats_gzip_on_short_texts(self):
        texts = [f"short update number {i}" for i in range(30)]
        report = compressor_benchmark(
            texts, specs=[CompressorSpec("deflate", 9), CompressorSpec("gzip", 9)]
        )
        by_algo = {row.algorithm: row.mean_ratio for row in report.rows}
        assert by_algo["deflate"] < by_algo["gzip"]

    def test_fake_timer_gives_exact_rate(self, deflate):
        # The clock is read once before and once after the timed loop.
        ticks = iter([0.0, 2.0])

        def timer():
            return next(ticks, 2.0)

        report = compressor_benchmark([TWEET] * 10, specs=[deflate], timer=timer)
        assert report.rows[0].texts_per_sec == pytest.approx(5.0)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            compressor_benchmark([])
        with pytest.raises(EmptyTextError):
            compressor_benchmark(["fine", ""])

    def test_to_dict_shape(self, deflate):
        report = compressor_benchmark([TWEET], specs=[deflate])
        obj = report.to_dict()
        assert obj["n_texts"] == 1
        assert obj["rows"][0]["algorithm"] == "deflate"
        assert isinstance(report, BenchReport)
