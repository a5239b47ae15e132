"""
Combination Sets

The sorted (n-2)-subsets {i_1 < ... < i_{n-2}} of {1, ..., n} that index
the component projections F_I tested by the aggregator.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple


class CoverageError(ValueError):
    """Reports do not cover the combinations a verdict needs."""
    pass


@dataclass(frozen=True)
class CombinationSet:
    """All C(n, n-2) combinations in lexicographic order (1-based indices)."""
    n: int
    subsets: Tuple[Tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self) -> Iterator[Tuple[int, ...]]:
        return iter(self.subsets)

    def __contains__(self, subset) -> bool:
        return tuple(subset) in self.subsets

    def filtered(self, keep: Optional[Iterable[Sequence[int]]]) -> "CombinationSet":
        """Restrict to the given subsets; unknown subsets are rejected."""
        if keep is None:
            return self
        wanted = {tuple(sorted(int(i) for i in subset)) for subset in keep}
        unknown = wanted - set(self.subsets)
        if unknown:
            raise CoverageError(f"Not (n-2)-subsets of 1..{self.n}: {sorted(unknown)}")
        return CombinationSet(self.n, tuple(s for s in self.subsets if s in wanted))


def enumerate_combinations(n: int) -> CombinationSet:
    if n < 3:
        raise ValueError(f"Combinations need n >= 3, got {n}")
    subsets = tuple(itertools.combinations(range(1, n + 1), n - 2))
    assert len(subsets) == math.comb(n, n - 2)
    return CombinationSet(n, subsets)


def combination_label(subset: Sequence[int]) -> str:
    """'1,3' style label used on the command line and in reports."""
    return ",".join(str(i) for i in subset)


def parse_combination(text: str) -> Tuple[int, ...]:
    try:
        subset = tuple(sorted(int(part) for part in text.split(",") if part.strip()))
    except ValueError:
        raise ValueError(f"Invalid combination {text!r}: expected comma-separated integers")
    if not subset:
        raise ValueError("Empty combination")
    if len(set(subset)) != len(subset):
        raise ValueError(f"Combination {text!r} repeats an index")
    return subset
