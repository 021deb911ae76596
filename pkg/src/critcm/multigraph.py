"""Half-edge multigraph: uniform matching and component extraction.

A graph is a pair of arrays over half-edges: owner (vertex index) and mate
(paired half-edge, or OPEN for an unpaired stub).  Self-loops count one edge,
multi-edges keep multiplicity; surplus = edges - size + 1 per component.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from critcm import _kernels
from critcm._kernels import OPEN
from critcm.degrees import DegreeSequence, _rng


def _kernel_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**32 - 1))


@dataclass
class HalfEdgeGraph:
    """Half-edge ownership plus a (possibly partial) involutive pairing."""

    owner: np.ndarray
    mate: np.ndarray
    n: int

    @property
    def ell(self) -> int:
        return self.owner.size

    def degrees(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.n).astype(np.int64)

    def is_fully_matched(self) -> bool:
        return not (self.mate == OPEN).any()

    def validate(self) -> None:
        """Check the pairing is an involution without fixed points and the
        ownership matches the degree counts."""
        h = np.arange(self.ell)
        paired = self.mate != OPEN
        if (self.mate[paired] == h[paired]).any():
            raise ValueError("half-edge paired with itself")
        if not (self.mate[self.mate[paired]] == h[paired]).all():
            raise ValueError("mate is not an involution")
        if self.owner.size and (self.owner.min() < 0 or self.owner.max() >= self.n):
            raise ValueError("owner out of range")

    def edge_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Half-edge pairs (h, mate[h]) with h < mate[h]."""
        hs = np.flatnonzero(self.mate > np.arange(self.ell))
        return hs, self.mate[hs]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["halfedge", "owner", "mate"])
            for h in range(self.ell):
                w.writerow([h, int(self.owner[h]), int(self.mate[h])])


@dataclass(frozen=True)
class ComponentSummary:
    """Per-component tallies; surplus = edge_count - vertex_count + 1."""

    vertex_count: int
    edge_count: int
    surplus: int
    open_halfedges: int
    min_vertex: int
    degree_hist: dict[int, int] = field(default_factory=dict, compare=False)


class ComponentSet:
    """Vectorized component tables behaving as a sequence of summaries.

    Arrays are ordered by component discovery of the underlying union-find
    roots (ascending minimal vertex index).
    """

    def __init__(self, graph: HalfEdgeGraph, labels, sizes, edges, open_halves, min_vertex):
        self._graph = graph
        self.labels = labels          # component index per vertex
        self.sizes = sizes
        self.edges = edges
        self.open_halfedges = open_halves
        self.min_vertex = min_vertex

    @property
    def surplus(self) -> np.ndarray:
        return self.edges - self.sizes + 1

    def __len__(self) -> int:
        return self.sizes.size

    def __getitem__(self, i: int) -> ComponentSummary:
        if not 0 <= i < len(self):
            raise IndexError(i)
        members = np.flatnonzero(self.labels == i)
        degs = self._graph.degrees()[members]
        hist = {int(k): int(c) for k, c in zip(*np.unique(degs, return_counts=True))}
        return ComponentSummary(
            vertex_count=int(self.sizes[i]),
            edge_count=int(self.edges[i]),
            surplus=int(self.surplus[i]),
            open_halfedges=int(self.open_halfedges[i]),
            min_vertex=int(self.min_vertex[i]),
            degree_hist=hist,
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class ComponentVector:
    """Rescaled (size, surplus) pairs: sizes non-increasing, surplus
    non-increasing among equal sizes, remaining ties by minimal vertex."""

    rescaled_sizes: np.ndarray
    surpluses: np.ndarray
    n: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "size", "rescaled_size", "surplus"])
            scale = self.n ** (2 / 3)
            for r, (s, sp) in enumerate(zip(self.rescaled_sizes, self.surpluses), 1):
                w.writerow([r, int(round(s * scale)), f"{s:.9g}", int(sp)])


def uniform_match(ds: DegreeSequence, seed) -> HalfEdgeGraph:
    """Uniform perfect matching of the half-edges prescribed by ds."""
    if ds.ell % 2 != 0:
        raise ValueError("total degree must be even")
    rng = _rng(seed)
    mate = _kernels.match_kernel(ds.ell, _kernel_seed(rng))
    return HalfEdgeGraph(owner=ds.owners(), mate=mate, n=ds.n)


def components(g: HalfEdgeGraph) -> ComponentSet:
    """Connected components via union-find; partial pairings contribute their
    unpaired stubs to open_halfedges."""
    roots = _kernels.components_kernel(g.owner, g.mate, g.n)
    return _tally(g, roots)


def _tally(g: HalfEdgeGraph, roots: np.ndarray) -> ComponentSet:
    n = g.n
    counts = np.bincount(roots, minlength=n)
    comp_roots = np.flatnonzero(counts)
    remap = np.zeros(n, dtype=np.int64)
    remap[comp_roots] = np.arange(comp_roots.size)
    labels = remap[roots]
    sizes = counts[comp_roots].astype(np.int64)
    k = comp_roots.size

    hs, ms = g.edge_pairs()
    edges = np.bincount(labels[g.owner[hs]], minlength=k).astype(np.int64)
    open_idx = np.flatnonzero(g.mate == OPEN)
    open_halves = np.bincount(labels[g.owner[open_idx]], minlength=k).astype(np.int64)
    min_vertex = np.full(k, n, dtype=np.int64)
    np.minimum.at(min_vertex, labels, np.arange(n))
    return ComponentSet(g, labels, sizes, edges, open_halves, min_vertex)


def component_order(sizes, surpluses, min_vertex) -> np.ndarray:
    """Sort order: size desc, then surplus desc, then minimal vertex asc."""
    return np.lexsort((min_vertex, -np.asarray(surpluses), -np.asarray(sizes)))


def to_component_vector(comps: ComponentSet, n: int) -> ComponentVector:
    order = component_order(comps.sizes, comps.surplus, comps.min_vertex)
    return ComponentVector(
        rescaled_sizes=comps.sizes[order] * n ** (-2 / 3),
        surpluses=comps.surplus[order].astype(np.int64),
        n=n,
    )


def components_to_csv(comps: ComponentSet, path) -> None:
    order = component_order(comps.sizes, comps.surplus, comps.min_vertex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "size", "edges", "surplus", "open_halfedges"])
        for r, i in enumerate(order, 1):
            w.writerow(
                [
                    r,
                    int(comps.sizes[i]),
                    int(comps.edges[i]),
                    int(comps.surplus[i]),
                    int(comps.open_halfedges[i]),
                ]
            )
