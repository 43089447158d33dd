"""k-permutations: counting and lexicographic enumeration."""
from __future__ import annotations

from itertools import permutations
from typing import Iterator, Sequence, TypeVar

T = TypeVar("T")

MAX_N = 64
_U64_MAX = 2**64 - 1


class PermutationOverflow(OverflowError):
    pass


def count_permutations(n: int, k: int) -> int:
    """n! / (n - k)! as the falling product n (n-1) ... (n-k+1).

    Raises PermutationOverflow if the count does not fit in 64 unsigned bits.
    """
    if n < 0 or k < 0:
        raise ValueError(f"n and k must be >= 0, got n={n}, k={k}")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds the supported maximum {MAX_N}")
    total = 1
    for factor in range(n, n - k, -1):
        total *= factor
        if total > _U64_MAX:
            raise PermutationOverflow(f"{n}P{k} exceeds 64 bits")
    return total


def k_permutations(items: Sequence[T], k: int) -> Iterator[tuple[T, ...]]:
    """Ordered k-sequences without repetition, in lexicographic index order.

    Lazily generated; items are distinguished by position, not value.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > len(items):
        raise ValueError(f"k={k} exceeds the number of items ({len(items)})")
    return permutations(items, k)
