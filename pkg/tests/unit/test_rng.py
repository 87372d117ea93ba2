# -*- coding: utf-8 -*-
"""
随机流: 只由 (seed, path_index, substream) 决定
"""
import numpy as np
import pytest

from app.core.rng import CHAIN, JUMPS, NOISE, path_streams, stream


class TestStreams:

    def test_reproducible(self):
        a = stream(7, 3, NOISE).standard_normal(16)
        b = stream(7, 3, NOISE).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_independent_keys(self):
        base = stream(7, 3, NOISE).random(8)
        assert not np.array_equal(base, stream(7, 4, NOISE).random(8))
        assert not np.array_equal(base, stream(8, 3, NOISE).random(8))
        assert not np.array_equal(base, stream(7, 3, JUMPS).random(8))
        assert not np.array_equal(base, stream(7, 3, CHAIN).random(8))

    def test_path_streams_pair(self):
        noise, jumps = path_streams(1, 2)
        np.testing.assert_array_equal(noise.random(4), stream(1, 2, NOISE).random(4))
        np.testing.assert_array_equal(jumps.random(4), stream(1, 2, JUMPS).random(4))

    def test_negative_keys(self):
        with pytest.raises(ValueError):
            stream(-1, 0, NOISE)
        with pytest.raises(ValueError):
            stream(0, -1, NOISE)
