"""
Non-crossing partitions: enumeration, block-size counts, Kreweras
complement and the moment / free-cumulant transform.
"""

from __future__ import annotations

import math
from collections import Counter
from functools import lru_cache
from itertools import combinations
from typing import Sequence

__all__ = [
    "Partition", "is_noncrossing", "enumerate_nc", "count_nc_by_sizes",
    "kreweras", "moments_from_free_cumulants", "free_cumulants_from_moments",
    "set_partitions", "MAX_M",
]

MAX_M = 14


class Partition:
    """
    Set partition of {1..m}, stored canonically: blocks sorted internally
    and ordered by least element.
    """

    __slots__ = ("blocks", "m")

    def __init__(self, blocks, m: int | None = None):
        blocks = [tuple(sorted(int(i) for i in b)) for b in blocks]
        if any(len(b) == 0 for b in blocks):
            raise ValueError("blocks must be nonempty")
        blocks.sort(key=lambda b: b[0])
        flat = [i for b in blocks for i in b]
        m = len(flat) if m is None else int(m)
        if sorted(flat) != list(range(1, m + 1)):
            raise ValueError("blocks must partition {1..m}")
        self.blocks = tuple(blocks)
        self.m = m

    def __eq__(self, other):
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(self.blocks)

    def __len__(self):
        return len(self.blocks)

    def __repr__(self):
        return str(self)

    def __str__(self):
        return "{" + ",".join("(" + ",".join(map(str, b)) + ")" for b in self.blocks) + "}"

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Inverse of ``str``: ``"{(1,2),(3)}"``."""
        body = text.strip()[1:-1]
        blocks = [[int(v) for v in chunk.strip("()").split(",") if v]
                  for chunk in body.split("),") if chunk]
        return cls(blocks)

    def sizes(self):
        return sorted(len(b) for b in self.blocks)

    def block_of(self):
        """Map element -> block index."""
        return {i: k for k, b in enumerate(self.blocks) for i in b}


def is_noncrossing(p: Partition) -> bool:
    """True if no i1 < i2 < i3 < i4 with i1, i3 in one block and i2, i4 in another."""
    lab = p.block_of()
    # O(m^2) over consecutive pairs within blocks: a crossing exists iff two
    # arcs (a, b), (c, d) between consecutive block elements interleave
    arcs = [(b[i], b[i + 1]) for b in p.blocks for i in range(len(b) - 1)]
    for (a, b), (c, d) in combinations(arcs, 2):
        if lab[a] != lab[c] and (a < c < b < d or c < a < d < b):
            return False
    return True


def _nc_blocks(elems: tuple):
    # first-block placement: the block of elems[0] splits the rest into
    # intervals that are partitioned independently
    if not elems:
        yield ()
        return
    first, rest = elems[0], elems[1:]
    n = len(rest)
    for k in range(n + 1):
        for pick in combinations(range(n), k):
            block = (first,) + tuple(rest[i] for i in pick)
            gaps, prev = [], -1
            for i in list(pick) + [n]:
                gaps.append(rest[prev + 1:i])
                prev = i
            yield from _combine(block, gaps)


def _combine(block, gaps):
    if not gaps:
        yield (block,)
        return
    head, tail = gaps[0], gaps[1:]
    for sub in _nc_blocks(head):
        for more in _combine(block, tail):
            yield more + sub


def enumerate_nc(m: int) -> list:
    """All non-crossing partitions of {1..m}, in canonical order."""
    if int(m) != m or not 1 <= m <= MAX_M:
        raise ValueError(f"m must be an integer in [1, {MAX_M}]")
    out = {Partition(bl, m) for bl in _nc_blocks(tuple(range(1, m + 1)))}
    return sorted(out, key=lambda p: p.blocks)


def set_partitions(m: int):
    """All set partitions of {1..m} (restricted growth strings); test oracle."""
    def rec(i, labels, k):
        if i == m:
            blocks = [[j + 1 for j in range(m) if labels[j] == c] for c in range(k)]
            yield Partition(blocks, m)
            return
        for c in range(k + 1):
            labels.append(c)
            yield from rec(i + 1, labels, max(k, c + 1))
            labels.pop()
    yield from rec(0, [], 0)


def count_nc_by_sizes(sizes: Sequence[int]) -> int:
    """
    Number of non-crossing partitions of {1..m} with the given multiset of
    block sizes: m! / ((m - k + 1)! prod_j r_j!), with r_j the multiplicity
    of size j and k the number of blocks.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive integers")
    m, k = sum(sizes), len(sizes)
    f = math.prod(math.factorial(r) for r in Counter(sizes).values())
    num = math.factorial(m)
    den = math.factorial(m - k + 1) * f
    if num % den:
        raise ArithmeticError("non-integral count")
    return num // den


def kreweras(p: Partition) -> Partition:
    """
    Kreweras complement: the coarsest partition sigma of the barred points
    1', .., m' (interleaved as 1 < 1' < 2 < 2' ...) such that p with sigma
    is non-crossing.  Returned on {1..m}.
    """
    if not is_noncrossing(p):
        raise ValueError("Kreweras complement requires a non-crossing partition")
    m = p.m
    # i' and j' (i < j) share a block iff no block of p separates them,
    # i.e. every block meeting {i+1..j} lies inside {i+1..j}; union-find
    # over the admissible pairs gives the coarsest sigma
    lab = p.block_of()
    parent = list(range(m + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            inside = set(range(i + 1, j + 1))
            ok = all(set(p.blocks[lab[t]]) <= inside for t in inside)
            if ok:
                parent[find(j)] = find(i)
    groups: dict = {}
    for i in range(1, m + 1):
        groups.setdefault(find(i), []).append(i)
    return Partition(groups.values(), m)


def _check_len(n):
    if n > MAX_M:
        raise ValueError(f"at most {MAX_M} terms supported")


def _int_partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _int_partitions(n - k, k):
            yield (k,) + rest


@lru_cache(maxsize=None)
def _nc_size_table(n: int):
    """Block-size multiset -> number of NC(n) partitions with those sizes."""
    return {tuple(sorted(sz)): count_nc_by_sizes(sz) for sz in _int_partitions(n)}


def moments_from_free_cumulants(kappa: Sequence) -> list:
    """m_n = sum over NC(n) of prod kappa_|V|; exact for Fraction/int input."""
    kappa = list(kappa)
    _check_len(len(kappa))
    out = []
    for n in range(1, len(kappa) + 1):
        tot = 0
        for sizes, cnt in _nc_size_table(n).items():
            term = cnt
            for s in sizes:
                term = term * kappa[s - 1]
            tot = tot + term
        out.append(tot)
    return out


def free_cumulants_from_moments(moments: Sequence) -> list:
    """
    Inverse of :func:`moments_from_free_cumulants` by triangular solve:
    kappa_n = m_n minus the NC(n) terms without the single full block.
    """
    moments = list(moments)
    _check_len(len(moments))
    kappa = []
    for n in range(1, len(moments) + 1):
        rest = 0
        for sizes, cnt in _nc_size_table(n).items():
            if sizes == (n,):
                continue
            term = cnt
            for s in sizes:
                term = term * kappa[s - 1]
            rest = rest + term
        kappa.append(moments[n - 1] - rest)
    return kappa
