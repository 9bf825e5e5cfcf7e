import numpy as np
import pytest

from eablock.streams import generator, stream_key


def test_same_stream_repeats():
    a = generator(3, "x", 2).random(5)
    b = generator(3, "x", 2).random(5)
    assert np.array_equal(a, b)


def test_purpose_and_index_separate_streams():
    base = generator(3, "x").random(4)
    assert not np.array_equal(base, generator(3, "y").random(4))
    assert not np.array_equal(base, generator(3, "x", 1).random(4))
    assert not np.array_equal(base, generator(4, "x").random(4))


def test_keys_are_distinct():
    keys = {stream_key(s, p, i) for s in range(4) for p in ("a", "b", "c") for i in range(4)}
    assert len(keys) == 48


def test_bad_arguments():
    with pytest.raises(ValueError):
        stream_key(-1, "x")
    with pytest.raises(ValueError):
        stream_key(0, "x", 1 << 32)
