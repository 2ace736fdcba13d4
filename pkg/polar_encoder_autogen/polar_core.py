"""
Golden-model polar encoding and bit-index helpers.

A polar codeword is x = u · G_N over GF(2), with G_N = B_N · F^{⊗n},
F = [[1, 0], [1, 1]] and B_N the bit-reversal permutation. Everything the
hardware produces is checked against ``encode_reference``; the explicit
matrix product in ``encode_via_matrix`` is a second, independent oracle
kept for small N.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Union

from loguru import logger
import numpy as np

from polar_encoder_autogen.errors import ParameterError

# 2x2 polarisation kernel
KERNEL = np.array([[1, 0], [1, 1]], dtype=np.uint8)

# Dense generator matrices beyond this size are refused
MATRIX_ORACLE_MAX_N = 64

# Smallest code length the hardware generator accepts
MIN_CODE_LENGTH = 8


def is_power_of_two(value) -> bool:
    """True for 1, 2, 4, ... (bools and non-integers are rejected)."""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        return False
    return value > 0 and (int(value) & (int(value) - 1)) == 0


def log2_exact(value: int) -> int:
    """Exact base-2 logarithm of a power of two."""
    if not is_power_of_two(value):
        raise ParameterError(f"{value} is not a power of two")
    return int(value).bit_length() - 1


@dataclass(frozen=True)
class CodeParams:
    """Code length N of a polar code (power of two, N >= 8)."""

    N: int

    def __post_init__(self):
        if not is_power_of_two(self.N):
            raise ParameterError(f"N must be a power of two (got {self.N})")
        if self.N < MIN_CODE_LENGTH:
            raise ParameterError(f"N must be at least {MIN_CODE_LENGTH} (got {self.N})")

    @property
    def n(self) -> int:
        return log2_exact(self.N)


CodeLength = Union[CodeParams, int]


def _code_length(params: CodeLength) -> int:
    # Plain ints are accepted so the oracles also cover N = 2 and N = 4
    if isinstance(params, CodeParams):
        return params.N
    if not is_power_of_two(params) or params < 2:
        raise ParameterError(f"N must be a power of two of at least 2 (got {params})")
    return int(params)


def as_bits(values, length: int = None) -> np.ndarray:
    """
    Convert a sequence of 0/1 values into a 1-D uint8 bit vector.

    Args:
        values: Any array-like of integers restricted to {0, 1}
        length: Expected length, checked when given

    Returns:
        numpy uint8 array
    """
    bits = np.asarray(values)
    if bits.ndim != 1:
        raise ParameterError(f"Bit vector must be one-dimensional (got shape {bits.shape})")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ParameterError("Bit vector entries must be 0 or 1")
    if length is not None and bits.size != length:
        raise ParameterError(f"Bit vector has length {bits.size}, expected {length}")
    return bits.astype(np.uint8)


def bitrev_index(i: int, n: int) -> int:
    """Reverse the low n bits of i."""
    if n < 0:
        raise ParameterError(f"Bit width must be non-negative (got {n})")
    if not 0 <= i < (1 << n):
        raise ParameterError(f"Index {i} does not fit in {n} bits")
    reversed_index = 0
    for _ in range(n):
        reversed_index = (reversed_index << 1) | (i & 1)
        i >>= 1
    return reversed_index


def bitrev_permutation(n: int) -> np.ndarray:
    """Index table p with p[i] = bitrev_index(i, n), for all i < 2**n."""
    if n < 0:
        raise ParameterError(f"Bit width must be non-negative (got {n})")
    indices = np.arange(1 << n, dtype=np.int64)
    table = np.zeros_like(indices)
    for bit in range(n):
        table |= ((indices >> bit) & 1) << (n - 1 - bit)
    return table


def bitrev_permute(v) -> np.ndarray:
    """Return w with w[i] = v[bitrev(i)]; len(v) must be a power of two."""
    v = np.asarray(v)
    if v.ndim != 1 or not is_power_of_two(v.size):
        raise ParameterError(f"Length must be a power of two (got {v.size})")
    return v[bitrev_permutation(log2_exact(v.size))]


def encode_reference(u, params: CodeLength) -> np.ndarray:
    """
    Compute x = u · B_N · F^{⊗n} with butterfly passes.

    The bit reversal is applied first; each pass then folds the upper half
    of every block of size 2·half onto its lower half.

    Args:
        u: Source word, N bits
        params: CodeParams or a plain power-of-two length

    Returns:
        Codeword x as a uint8 array
    """
    N = _code_length(params)
    x = bitrev_permute(as_bits(u, N)).copy()
    half = N // 2
    while half >= 1:
        blocks = x.reshape(-1, 2, half)
        blocks[:, 0, :] ^= blocks[:, 1, :]
        half //= 2
    return x


def generator_matrix(params: CodeLength) -> np.ndarray:
    """Dense G_N = B_N · F^{⊗n}, refused above MATRIX_ORACLE_MAX_N."""
    N = _code_length(params)
    if N > MATRIX_ORACLE_MAX_N:
        raise ParameterError(
            f"Dense generator matrix refused for N={N} (limit {MATRIX_ORACLE_MAX_N})"
        )
    n = log2_exact(N)
    kron = reduce(np.kron, [KERNEL] * n, np.ones((1, 1), dtype=np.uint8)) % 2
    # B_N · A permutes the rows of A
    return kron[bitrev_permutation(n), :].astype(np.uint8)


def encode_via_matrix(u, params: CodeLength) -> np.ndarray:
    """x = u · G_N mod 2 using the dense generator matrix."""
    N = _code_length(params)
    G = generator_matrix(N)
    u = as_bits(u, N).astype(np.int64)
    logger.debug(f"Matrix oracle encode, N={N}")
    return ((u @ G.astype(np.int64)) % 2).astype(np.uint8)
