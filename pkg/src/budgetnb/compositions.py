"""Integer compositions: the outcome states of repeated purchases of one action."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np


def composition_count(total: int, parts: int) -> int:
    """Number of ways to split `total` purchases over `parts` outcome values."""
    return math.comb(total + parts - 1, total)


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield every nonnegative integer vector of length `parts` summing to `total`.

    Colexicographic order (last coordinate varies slowest), fixed so seeded
    runs visit outcome states reproducibly.
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")

    def lex(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in lex(total - first, parts - 1):
                yield (first,) + rest

    for c in lex(total, parts):
        yield c[::-1]


def composition_matrix(total: int, parts: int) -> np.ndarray:
    """All compositions stacked as an int array of shape (count, parts)."""
    out = np.fromiter(
        (v for c in compositions(total, parts) for v in c),
        dtype=np.int64,
        count=composition_count(total, parts) * parts,
    )
    return out.reshape(-1, parts)
