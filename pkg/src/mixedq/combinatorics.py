"""Set partitions of [d] = {1, ..., d} and their crossing statistics.

All indices are 1-based.  Pair partitions list their pairs ``(e, z)`` with
``e < z``, sorted by the opener ``e``; crossings are reported as pairs of
1-based positions in that list.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

# Enumeration caps; module-level so callers can raise them deliberately.
MAX_PAIRING_SIZE = 16
MAX_BIPARTITE_SIZE = 8
MAX_PARTITION_SIZE = 12


class CapExceededError(ValueError):
    """Requested enumeration is larger than the configured cap."""


def _check_cap(value: int, cap: int, what: str) -> None:
    if value > cap:
        raise CapExceededError(f"{what}={value} exceeds the enumeration cap {cap}")


@dataclass(frozen=True)
class Partition:
    """A set partition of [d] in normal form (sorted blocks, sorted by least element)."""

    blocks: tuple[tuple[int, ...], ...]
    d: int

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = [x for b in blocks for x in b]
        if sorted(flat) != list(range(1, self.d + 1)):
            raise ValueError(f"blocks {blocks} do not partition [1..{self.d}]")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]], d: int | None = None) -> "Partition":
        blocks = [tuple(b) for b in blocks]
        if d is None:
            d = sum(len(b) for b in blocks)
        return cls(tuple(blocks), d)

    def block_of(self) -> dict[int, int]:
        """Map each point to the (0-based) index of its block."""
        return {x: n for n, b in enumerate(self.blocks) for x in b}

    def __len__(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


@dataclass(frozen=True)
class PairPartition:
    """Element of P_2(d): pairs ``(e_k, z_k)`` with ``e_k < z_k``, sorted by ``e_k``."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted((min(p), max(p)) for p in self.pairs))
        flat = [x for p in pairs for x in p]
        if sorted(flat) != list(range(1, len(flat) + 1)) or any(e == z for e, z in pairs):
            raise ValueError(f"{self.pairs} is not a pair partition")
        object.__setattr__(self, "pairs", pairs)

    @property
    def d(self) -> int:
        return 2 * len(self.pairs)

    def to_partition(self) -> Partition:
        return Partition(self.pairs, self.d)


@dataclass(frozen=True)
class SingletonPairPartition:
    """Element of P_{1,2}(d): singletons plus pair blocks."""

    singletons: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        singletons = tuple(sorted(self.singletons))
        pairs = tuple(sorted((min(p), max(p)) for p in self.pairs))
        flat = list(singletons) + [x for p in pairs for x in p]
        if sorted(flat) != list(range(1, len(flat) + 1)) or any(e == z for e, z in pairs):
            raise ValueError(f"singletons {singletons} and pairs {pairs} do not partition [d]")
        object.__setattr__(self, "singletons", singletons)
        object.__setattr__(self, "pairs", pairs)

    @property
    def d(self) -> int:
        return len(self.singletons) + 2 * len(self.pairs)

    @classmethod
    def from_partition(cls, sigma: Partition) -> "SingletonPairPartition":
        if any(len(b) > 2 for b in sigma.blocks):
            raise ValueError(f"{sigma} has a block with more than two elements")
        return cls(
            tuple(b[0] for b in sigma.blocks if len(b) == 1),
            tuple(b for b in sigma.blocks if len(b) == 2),
        )

    def to_partition(self) -> Partition:
        return Partition(tuple((s,) for s in self.singletons) + self.pairs, self.d)


@dataclass(frozen=True)
class BipartitePairing:
    """Bijection k -> matching[k-1] from the left copy [s] to the right copy [s~]."""

    matching: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.matching) != list(range(1, len(self.matching) + 1)):
            raise ValueError(f"{self.matching} is not a permutation of [1..{len(self.matching)}]")

    @property
    def s(self) -> int:
        return len(self.matching)


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _pairings(points: tuple[int, ...]) -> Iterator[list[tuple[int, int]]]:
    if not points:
        yield []
        return
    first, rest = points[0], points[1:]
    for n, partner in enumerate(rest):
        remaining = rest[:n] + rest[n + 1 :]
        for tail in _pairings(remaining):
            yield [(first, partner)] + tail


def enumerate_pair_partitions(d: int, cap: int | None = None) -> list[PairPartition]:
    """All (d-1)!! pair partitions of [d]."""
    if d < 0 or d % 2:
        raise ValueError("no pair partitions of odd ground set")
    _check_cap(d, MAX_PAIRING_SIZE if cap is None else cap, "d")
    return [PairPartition(tuple(p)) for p in _pairings(tuple(range(1, d + 1)))]


def _singleton_pairings(points: tuple[int, ...]) -> Iterator[tuple[list[int], list[tuple[int, int]]]]:
    if not points:
        yield [], []
        return
    first, rest = points[0], points[1:]
    for singles, pairs in _singleton_pairings(rest):
        yield [first] + singles, pairs
    for n, partner in enumerate(rest):
        remaining = rest[:n] + rest[n + 1 :]
        for singles, pairs in _singleton_pairings(remaining):
            yield singles, [(first, partner)] + pairs


def enumerate_singleton_pair_partitions(d: int, cap: int | None = None) -> list[SingletonPairPartition]:
    """All of P_{1,2}(d); there are as many as involutions of [d]."""
    if d < 0:
        raise ValueError("d must be non-negative")
    _check_cap(d, MAX_PAIRING_SIZE if cap is None else cap, "d")
    return [
        SingletonPairPartition(tuple(s), tuple(p))
        for s, p in _singleton_pairings(tuple(range(1, d + 1)))
    ]


def _restricted_growth(d: int) -> Iterator[list[int]]:
    if d == 0:
        yield []
        return
    word = [0] * d

    def rec(pos: int, nblocks: int):
        if pos == d:
            yield list(word)
            return
        for b in range(nblocks + 1):
            word[pos] = b
            yield from rec(pos + 1, max(nblocks, b + 1))

    yield from rec(1, 1)


def enumerate_partitions(d: int, cap: int | None = None) -> list[Partition]:
    """All Bell(d) set partitions of [d], ordered by restricted growth string."""
    if d < 0:
        raise ValueError("d must be non-negative")
    _check_cap(d, MAX_PARTITION_SIZE if cap is None else cap, "d")
    out = []
    for rgs in _restricted_growth(d):
        blocks: dict[int, list[int]] = {}
        for pos, b in enumerate(rgs, start=1):
            blocks.setdefault(b, []).append(pos)
        out.append(Partition(tuple(tuple(v) for v in blocks.values()), d))
    return out


def partition_of_vector(i: Sequence[int]) -> Partition:
    """sigma(i): positions k, l share a block iff i_k == i_l."""
    if len(i) == 0:
        raise ValueError("index vector must be nonempty")
    blocks: dict[int, list[int]] = {}
    for pos, label in enumerate(i, start=1):
        blocks.setdefault(label, []).append(pos)
    return Partition(tuple(tuple(v) for v in blocks.values()), len(i))


def refines(sigma: Partition, pi: Partition) -> bool:
    """True iff sigma <= pi, i.e. each block of sigma lies inside a block of pi."""
    if sigma.d != pi.d:
        raise ValueError(f"ground sets differ: {sigma.d} != {pi.d}")
    owner = pi.block_of()
    return all(len({owner[x] for x in b}) == 1 for b in sigma.blocks)


def _pair_crossings(pairs: Sequence[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    out = set()
    for k, (ek, zk) in enumerate(pairs, start=1):
        for l, (el, zl) in enumerate(pairs, start=1):
            if ek < el < zk < zl:
                out.add((k, l))
    return frozenset(out)


def crossings(sigma: PairPartition) -> frozenset[tuple[int, int]]:
    """I(sigma) = {(k, l) : e_k < e_l < z_k < z_l}, as 1-based pair positions."""
    return _pair_crossings(sigma.pairs)


def crossing_sets_12(
    sigma: SingletonPairPartition,
) -> tuple[frozenset[tuple[int, int]], frozenset[tuple[int, int]]]:
    """Return (I_p, I_sp).

    I_p holds crossing pair positions ``(k, l)`` among ``sigma.pairs``.  I_sp holds
    ``(k, t)`` where singleton ``t`` sits strictly inside pair ``k``.
    """
    i_p = _pair_crossings(sigma.pairs)
    i_sp = frozenset(
        (k, t)
        for k, (e, z) in enumerate(sigma.pairs, start=1)
        for t in sigma.singletons
        if e < t < z
    )
    return i_p, i_sp


def enumerate_bipartite_pairings(s: int, cap: int | None = None) -> list[BipartitePairing]:
    if s < 0:
        raise ValueError("s must be non-negative")
    _check_cap(s, MAX_BIPARTITE_SIZE if cap is None else cap, "s")
    return [BipartitePairing(p) for p in itertools.permutations(range(1, s + 1))]


def bipartite_crossings(sigma_b: BipartitePairing) -> frozenset[tuple[int, int]]:
    """Crossings of a left/right matching: the inversions of its permutation.

    Orientation is fixed so that the identity matching has no crossings.
    """
    m = sigma_b.matching
    return frozenset(
        (k + 1, l + 1)
        for k in range(len(m))
        for l in range(k + 1, len(m))
        if m[k] > m[l]
    )
