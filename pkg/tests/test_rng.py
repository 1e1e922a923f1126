import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relwealth.rng import path_normals, philox4x32, seed_key


def _words(out):
    return [f"{int(np.asarray(w)):08x}" for w in out]


@pytest.mark.parametrize(
    "counter, key, expected",
    [
        # Random123 known-answer vectors for Philox4x32-10
        ((0, 0, 0, 0), (0, 0), ["6627e8d5", "e169c58d", "bc57ac4c", "9b00dbd8"]),
        (
            (0xFFFFFFFF,) * 4,
            (0xFFFFFFFF, 0xFFFFFFFF),
            ["408f276d", "41c83b0e", "a20bc7c6", "6d5451fd"],
        ),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            ["d16cfe09", "94fdcceb", "5001e420", "24126ea1"],
        ),
    ],
)
def test_known_answers(counter, key, expected):
    assert _words(philox4x32(counter, key)) == expected


def test_vectorized_matches_scalar():
    ctrs = np.arange(5, dtype=np.uint64)
    vec = philox4x32((ctrs, 0, 7, 1), (123, 456))
    for i in range(5):
        scalar = philox4x32((i, 0, 7, 1), (123, 456))
        assert [int(v[i]) for v in vec] == [int(s) for s in scalar]


def test_seed_key():
    assert seed_key(0) == (0, 0)
    assert seed_key(2**32 + 5) == (5, 1)
    with pytest.raises(ValueError):
        seed_key(-1)
    with pytest.raises(ValueError):
        seed_key(2**64)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 500), st.integers(1, 300), st.integers(1, 9))
def test_partition_invariance(seed, start, length, count):
    # draws for a path depend only on (seed, path index)
    whole = path_normals(seed, start, start + length, count)
    cut = start + length // 3
    parts = np.vstack([path_normals(seed, start, cut, count), path_normals(seed, cut, start + length, count)])
    assert whole.tobytes() == parts.tobytes()


def test_count_prefix_stable():
    # an odd count is the prefix of the next even one
    a = path_normals(1, 0, 10, 3)
    b = path_normals(1, 0, 10, 4)
    assert a.tobytes() == np.ascontiguousarray(b[:, :3]).tobytes()


def test_streams_and_seeds_differ():
    a = path_normals(1, 0, 100, 2)
    assert not np.array_equal(a, path_normals(2, 0, 100, 2))
    assert not np.array_equal(a, path_normals(1, 0, 100, 2, stream=1))


def test_moments():
    z = path_normals(2024, 0, 200_000, 2).ravel()
    se = 1 / np.sqrt(z.size)
    assert abs(z.mean()) < 5 * se
    assert abs(z.var() - 1) < 5 * np.sqrt(2) * se
    assert abs(np.mean(z**3)) < 5 * np.sqrt(15) * se
    assert np.all(np.isfinite(z))


def test_pairs_uncorrelated():
    z = path_normals(9, 0, 100_000, 2)
    assert abs(np.corrcoef(z[:, 0], z[:, 1])[0, 1]) < 5 / np.sqrt(z.shape[0])
