"""Shared fixtures: compressors, caches and pre-generated streams."""

import pytest

from squall.compression import CompressorSpec, SizeCache
from squall.model import Tweet
from squall.synth import fixture_spec, generate_stream


@pytest.fixture(scope="session")
def deflate():
    return CompressorSpec("deflate", 9)


@pytest.fixture()
def cache(deflate):
    return SizeCache(deflate, capacity=4096)


@pytest.fixture(scope="session")
def easy_stream():
    """The five-event quality fixture: (tweets, truth)."""
    return generate_stream(fixture_spec("easy"))


@pytest.fixture(scope="session")
def fan_stream():
    """The single-author storm fixture: (tweets, truth)."""
    return generate_stream(fixture_spec("fan"))


@pytest.fixture(scope="session")
def mixed_stream():
    """The 10,000-message mixed fixture: (tweets, truth)."""
    return generate_stream(fixture_spec("mixed-10k"))


def make_tweet(id="t1", user="u1", ts=0.0, text="hello streaming world"):
    return Tweet(id=id, user=user, ts=ts, text=text)


@pytest.fixture()
def tweet_factory():
    return make_tweet
