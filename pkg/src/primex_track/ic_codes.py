"""Information codes stored as binary prime-exponent vectors.

An information code records which information sources (the shared prior and
every sensor measurement) a density has absorbed. Each source owns one prime
number; instead of multiplying primes we keep the exponent vector, so GCD and
LCM become element-wise minimum and maximum and nothing ever overflows.

Index layout is global and deterministic: position 0 is the shared prior,
and the measurement of the sensor with rank ``s`` at time ``k >= 1`` owns
global index ``1 + (k - 1) * S + s`` where ``S`` is the number of sensors.
Live codes always end at the newest allocated index; a sliding window drops
the oldest positions from the front.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import BoundExceededError, DimensionError, SequencingError

MAX_ALTERNATING_INPUTS = 8


class InformationCode:
    """Immutable binary vector, one flag per allocated prime index."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] | np.ndarray):
        arr = np.array(bits, dtype=np.int64)
        if arr.ndim != 1:
            raise DimensionError(f"information code must be 1-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise ValueError("information code entries must be 0 or 1")
        self._bits = _freeze(arr.astype(np.uint8))

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "InformationCode":
        # trusted constructor: arr is already a 0/1 uint8 vector
        code = cls.__new__(cls)
        code._bits = _freeze(arr)
        return code

    @classmethod
    def zeros(cls, length: int) -> "InformationCode":
        return cls._wrap(np.zeros(length, dtype=np.uint8))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def length(self) -> int:
        return int(self._bits.size)

    def __len__(self) -> int:
        return self.length

    def popcount(self) -> int:
        return int(self._bits.sum())

    def tolist(self) -> list[int]:
        return self._bits.tolist()

    def with_bit(self, position: int) -> "InformationCode":
        """Return a copy with ``position`` set to 1."""
        arr = self._bits.copy()
        arr[position] = 1
        return InformationCode._wrap(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InformationCode):
            return NotImplemented
        return self.length == other.length and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __repr__(self) -> str:
        return f"InformationCode({self.tolist()})"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_same_length(a: InformationCode, b: InformationCode) -> None:
    if a.length != b.length:
        raise DimensionError(f"information code lengths differ: {a.length} vs {b.length}")


def ic_gcd(a: InformationCode, b: InformationCode) -> InformationCode:
    """Shared pedigree of two codes (element-wise minimum)."""
    _check_same_length(a, b)
    return InformationCode._wrap(np.minimum(a.bits, b.bits))


def ic_lcm(a: InformationCode, b: InformationCode) -> InformationCode:
    """Union of two pedigrees (element-wise maximum)."""
    _check_same_length(a, b)
    return InformationCode._wrap(np.maximum(a.bits, b.bits))


def ic_multi_fuse_alternating(
    codes: Sequence[InformationCode], max_inputs: int = MAX_ALTERNATING_INPUTS
) -> InformationCode:
    """Fuse ``n`` codes by alternating products of r-wise GCDs.

    Works in exponent arithmetic: the r-wise term contributes, with sign
    ``(-1)**(r-1)``, the sum over every r-subset of the subset's element-wise
    minimum. This is the inclusion-exclusion form and is exponential in
    ``n``, hence the input bound. For binary codes the result equals the
    folded LCM; the function exists to check that claim.
    """
    n = len(codes)
    if n < 1:
        raise ValueError("at least one code is required")
    if n > max_inputs:
        raise BoundExceededError(f"{n} codes exceed the alternating-product bound {max_inputs}")
    for c in codes[1:]:
        _check_same_length(codes[0], c)

    stack = np.stack([c.bits for c in codes]).astype(np.int64)
    exponents = np.zeros(stack.shape[1], dtype=np.int64)
    for r in range(1, n + 1):
        sign = 1 if r % 2 == 1 else -1
        for subset in combinations(range(n), r):
            exponents += sign * stack[list(subset)].min(axis=0)
    if exponents.size and (exponents.min() < 0 or exponents.max() > 1):
        raise ArithmeticError("alternating product left the binary exponent range")
    return InformationCode._wrap(exponents.astype(np.uint8))


def ic_increment(from_j: InformationCode, at_i: InformationCode) -> InformationCode:
    """Bits that ``from_j`` holds and ``at_i`` lacks, i.e. ``(j - i)_+``."""
    _check_same_length(from_j, at_i)
    return InformationCode._wrap((from_j.bits > at_i.bits).astype(np.uint8))


def ic_score(delta: InformationCode) -> int:
    """Number of fresh bits in an increment."""
    return delta.popcount()


def has_new_bits(current: InformationCode, reference: InformationCode) -> bool:
    """True iff some bit went from 0 in ``reference`` to 1 in ``current``."""
    _check_same_length(current, reference)
    return bool(np.any(current.bits > reference.bits))


def extend(code: InformationCode, count: int) -> InformationCode:
    """Append ``count`` zero positions (newly allocated, not yet absorbed)."""
    if count == 0:
        return code
    return InformationCode._wrap(np.concatenate([code.bits, np.zeros(count, dtype=np.uint8)]))


@dataclass(frozen=True)
class PrimeIndexAllocator:
    """Deterministic global index layout for priors and measurements.

    ``window_length=None`` means unbounded (no truncation).
    """

    sensor_count: int
    window_length: int | None = None
    current_time: int = 0

    def __post_init__(self) -> None:
        if self.sensor_count < 1:
            raise ValueError("sensor_count must be positive")
        if self.window_length is not None and self.window_length < 1:
            raise ValueError("window_length must be positive or None")
        if self.current_time < 0:
            raise ValueError("current_time must be nonnegative")

    def index(self, rank: int, k: int) -> int:
        """Global index of sensor ``rank``'s measurement at time ``k``."""
        if not 0 <= rank < self.sensor_count:
            raise ValueError(f"sensor rank {rank} outside 0..{self.sensor_count - 1}")
        if k < 1:
            raise ValueError("measurement times start at 1")
        return 1 + (k - 1) * self.sensor_count + rank

    @property
    def end_index(self) -> int:
        """One past the newest allocated global index."""
        return 1 + self.current_time * self.sensor_count

    @property
    def window_start(self) -> int:
        """Smallest global index retained by the sliding window."""
        if self.window_length is None:
            return 0
        first_time = self.current_time - self.window_length + 1
        if first_time <= 0:
            return 0
        return 1 + (first_time - 1) * self.sensor_count

    @property
    def live_length(self) -> int:
        return self.end_index - self.window_start

    def position(self, global_index: int, code_length: int) -> int:
        """Array position of ``global_index`` inside a live code of ``code_length``."""
        pos = global_index - (self.end_index - code_length)
        if not 0 <= pos < code_length:
            raise IndexError(f"global index {global_index} is not held by a code of length {code_length}")
        return pos


def allocate_indices(
    allocator: PrimeIndexAllocator, k: int
) -> tuple[PrimeIndexAllocator, dict[int, int]]:
    """Advance to time ``k`` and return the sensor-rank -> global-index map.

    Every live code must then be grown with ``extend(code, sensor_count)``.
    """
    if k != allocator.current_time + 1:
        raise SequencingError(
            f"expected time step {allocator.current_time + 1}, got {k}"
        )
    advanced = replace(allocator, current_time=k)
    return advanced, {s: advanced.index(s, k) for s in range(allocator.sensor_count)}


def window_truncate(code: InformationCode, allocator: PrimeIndexAllocator) -> InformationCode:
    """Drop positions older than the allocator's sliding window.

    The prior (time 0) follows the same rule as every measurement time.
    """
    if allocator.window_length is None:
        return code
    keep = allocator.live_length
    if code.length <= keep:
        return code
    return InformationCode._wrap(code.bits[code.length - keep:].copy())
