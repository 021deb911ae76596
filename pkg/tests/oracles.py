"""Independent brute-force oracles for the small-instance law checks.

Everything here is deliberately naive: matchings are enumerated recursively,
components come from a dict-based flood fill, and percolation laws sum over
edge subsets.  Nothing is shared with the simulation code paths.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def enumerate_matchings(ell: int):
    """All perfect matchings of half-edges 0..ell-1 as tuples of pairs."""
    if ell % 2 != 0:
        raise ValueError("odd number of half-edges")
    halves = list(range(ell))

    def rec(remaining):
        if not remaining:
            yield ()
            return
        a = remaining[0]
        for i in range(1, len(remaining)):
            b = remaining[i]
            rest = remaining[1:i] + remaining[i + 1 :]
            for tail in rec(rest):
                yield ((a, b),) + tail

    return list(rec(halves))


def owners_of(degrees) -> list[int]:
    out = []
    for v, d in enumerate(degrees):
        out.extend([v] * d)
    return out


def graph_outcome(degrees, pairs) -> tuple:
    """Sorted (size, surplus) tuple of the multigraph given edge pairs."""
    owner = owners_of(degrees)
    n = len(degrees)
    adj = {v: set() for v in range(n)}
    edge_count = {v: 0 for v in range(n)}
    for a, b in pairs:
        va, vb = owner[a], owner[b]
        adj[va].add(vb)
        adj[vb].add(va)
    comps = []
    seen = set()
    for v in range(n):
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        edges = sum(1 for a, b in pairs if owner[a] in comp)
        comps.append((len(comp), edges - len(comp) + 1))
    return tuple(sorted(comps, reverse=True))


def encode_outcome(pairs_sorted) -> int:
    """Mirror of the kernel u64 encoding: 8 bits per (size, surplus)."""
    code = 0
    for size, surplus in pairs_sorted:
        code = code * 256 + size * 16 + surplus
    return code


def outcome_law(degrees) -> dict[int, float]:
    """Exact law of the (size, surplus) outcome code under a uniform matching."""
    ell = sum(degrees)
    matchings = enumerate_matchings(ell)
    law: dict[int, Fraction] = {}
    w = Fraction(1, len(matchings))
    for m in matchings:
        code = encode_outcome(graph_outcome(degrees, m))
        law[code] = law.get(code, Fraction(0)) + w
    return {k: float(v) for k, v in law.items()}


def percolated_outcome_law(degrees, p: float) -> dict[int, float]:
    """Exact outcome law after keeping each edge independently w.p. p."""
    ell = sum(degrees)
    matchings = enumerate_matchings(ell)
    law: dict[int, float] = {}
    w = 1.0 / len(matchings)
    m_edges = ell // 2
    for m in matchings:
        for mask in range(2**m_edges):
            kept = tuple(m[i] for i in range(m_edges) if mask >> i & 1)
            k = len(kept)
            prob = w * p**k * (1 - p) ** (m_edges - k)
            code = encode_outcome(graph_outcome(degrees, kept))
            law[code] = law.get(code, 0.0) + prob
    return law


def matching_code(pairs) -> int:
    """Mirror of the kernel matching encoding (uniformity checks)."""
    code = 0
    for a, b in sorted((min(a, b), max(a, b)) for a, b in pairs):
        code = code * 64 + a * 8 + b
    return code


def small_degree_families(max_ell: int = 8):
    """Every positive-degree multiset with even total <= max_ell."""
    out = []
    for ell in range(2, max_ell + 1, 2):
        for parts in partitions(ell):
            out.append(tuple(sorted(parts, reverse=True)))
    return out


def partitions(total: int, maximum: int | None = None):
    if maximum is None:
        maximum = total
    if total == 0:
        yield ()
        return
    for first in range(min(total, maximum), 0, -1):
        for rest in partitions(total - first, first):
            yield (first,) + rest


def fraction_moments(support, probs, r):
    """Exact distribution moments with Fractions (independent moment route)."""
    return sum(Fraction(p).limit_denominator(10**12) * k**r
               for k, p in zip(support, probs))
