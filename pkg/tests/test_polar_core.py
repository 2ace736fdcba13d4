from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest

from polar_encoder_autogen.errors import ParameterError
from polar_encoder_autogen.polar_core import (
    CodeParams,
    bitrev_index,
    bitrev_permute,
    encode_reference,
    encode_via_matrix,
    generator_matrix,
)


def test_bitrev_index_examples():
    assert bitrev_index(1, 3) == 4
    assert bitrev_index(6, 3) == 3
    assert bitrev_index(0, 0) == 0
    with pytest.raises(ParameterError):
        bitrev_index(8, 3)


@given(n=st.integers(min_value=0, max_value=16), data=st.data())
def test_bitrev_index_is_involution(n, data):
    i = data.draw(st.integers(min_value=0, max_value=(1 << n) - 1))
    assert bitrev_index(bitrev_index(i, n), n) == i


def test_bitrev_permute_is_involution():
    v = np.arange(64)
    assert np.array_equal(bitrev_permute(bitrev_permute(v)), v)
    assert list(bitrev_permute(np.arange(8))) == [0, 4, 2, 6, 1, 5, 3, 7]
    with pytest.raises(ParameterError):
        bitrev_permute(np.arange(6))


def test_code_params_bounds():
    assert CodeParams(8).n == 3
    with pytest.raises(ParameterError, match="power of two"):
        CodeParams(12)
    with pytest.raises(ParameterError, match="at least 8"):
        CodeParams(4)


def test_encode_known_words():
    N = 8
    ones = np.ones(N, dtype=np.uint8)
    expected = np.zeros(N, dtype=np.uint8)
    expected[N - 1] = 1
    assert np.array_equal(encode_reference(ones, CodeParams(N)), expected)

    last = np.zeros(N, dtype=np.uint8)
    last[N - 1] = 1
    assert np.array_equal(encode_reference(last, CodeParams(N)), ones)
    assert encode_reference(np.zeros(N, dtype=np.uint8), N).sum() == 0


def test_encode_rejects_bad_words():
    with pytest.raises(ParameterError):
        encode_reference([0, 1, 2, 0, 0, 0, 0, 0], 8)
    with pytest.raises(ParameterError):
        encode_reference([0, 1, 0], 8)


def test_generator_matrix_small_cases():
    assert np.array_equal(generator_matrix(2), np.array([[1, 0], [1, 1]]))
    e1 = np.array([0, 1, 0, 0])
    assert np.array_equal(encode_via_matrix(e1, 4), generator_matrix(4)[1])
    G = generator_matrix(8)
    assert int(G[-1].sum()) == 8
    assert np.array_equal((G.astype(int) @ G.astype(int)) % 2, np.eye(8, dtype=int))


def test_generator_matrix_refused_when_large():
    with pytest.raises(ParameterError, match="refused"):
        generator_matrix(128)


def test_butterfly_matches_matrix_exhaustively_at_8():
    for value in range(256):
        u = np.array([(value >> i) & 1 for i in range(8)], dtype=np.uint8)
        assert np.array_equal(encode_reference(u, 8), encode_via_matrix(u, 8))


@pytest.mark.parametrize("N", [16, 32, 64])
def test_butterfly_matches_matrix_random(N):
    rng = np.random.default_rng(N)
    for u in rng.integers(0, 2, size=(100, N), dtype=np.uint8):
        assert np.array_equal(encode_reference(u, N), encode_via_matrix(u, N))


@pytest.mark.parametrize("N", [8, 64, 1024, 4096])
def test_encode_involution_and_linearity(N):
    rng = np.random.default_rng(7 + N)
    words = rng.integers(0, 2, size=(250, N), dtype=np.uint8)
    for a, b in zip(words[::2], words[1::2]):
        assert np.array_equal(encode_reference(encode_reference(a, N), N), a)
        assert np.array_equal(
            encode_reference(a ^ b, N), encode_reference(a, N) ^ encode_reference(b, N)
        )


@settings(max_examples=50, deadline=None)
@given(n=st.integers(min_value=3, max_value=12), seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_encode_involution_property(n, seed):
    N = 1 << n
    u = np.random.default_rng(seed).integers(0, 2, size=N, dtype=np.uint8)
    assert np.array_equal(encode_reference(encode_reference(u, N), N), u)
