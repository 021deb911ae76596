"""Bond percolation on the configuration model.

Three constructions with the same law: direct edge deletion, the half-edge
detachment ("explosion") construction with degree-one cleanup, and the
edge-label coupling that realizes all retention levels of a lambda grid on
shared randomness.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from critcm import _kernels
from critcm._kernels import OPEN
from critcm.degrees import DegreeSequence, _rng, stats
from critcm.multigraph import (
    ComponentSet,
    HalfEdgeGraph,
    _kernel_seed,
    _tally,
    component_order,
    components,
)


@dataclass(frozen=True)
class PercolationParams:
    """Retention probability p inside the window at location lambda."""

    p: float
    lam: float
    nu_n: float


def p_critical(nu_n: float, n: int, lam: float) -> float:
    """p = (1 + lambda n^(-1/3)) / nu_n, the window parameterization."""
    if nu_n <= 1.0:
        raise ValueError("base sequence must be supercritical (nu_n > 1)")
    p = (1.0 + lam * n ** (-1 / 3)) / nu_n
    if not 0.0 < p <= 1.0:
        raise ValueError(f"retention p = {p:.6g} outside (0, 1]; lambda too extreme")
    return p


@dataclass(frozen=True)
class ExplodedSequence:
    """Detachment output: degrees on [n_tilde], with n_plus new degree-one
    vertices appended after the n originals.  Total degree is conserved."""

    tilde_degrees: np.ndarray
    n: int
    n_plus: int

    @property
    def n_tilde(self) -> int:
        return self.n + self.n_plus

    def as_degree_sequence(self) -> DegreeSequence:
        return DegreeSequence(self.tilde_degrees)


def explode(ds: DegreeSequence, p: float, seed) -> ExplodedSequence:
    """Detach each half-edge independently with probability 1 - sqrt(p).

    Detached half-edges move to fresh degree-one vertices, so the kept count
    per vertex is Bin(d_i, sqrt(p)) and sum(d_i - kept_i) = n_plus pathwise.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    rng = _rng(seed)
    keep = rng.random(ds.ell) < np.sqrt(p)
    starts = np.minimum(ds.offsets()[:-1], ds.ell - 1)
    kept = np.add.reduceat(keep, starts).astype(np.int64)
    kept[ds.degrees == 0] = 0  # reduceat misreads empty slices; zero them
    n_plus = int(ds.ell - kept.sum())
    tilde = np.concatenate([kept, np.ones(n_plus, dtype=np.int64)])
    return ExplodedSequence(tilde_degrees=tilde, n=ds.n, n_plus=n_plus)


@dataclass
class ExplosionResult:
    """Percolated graph on the n surviving vertices plus cleanup bookkeeping
    on the pre-deletion components."""

    graph: HalfEdgeGraph
    exploded: ExplodedSequence
    pre_components: ComponentSet
    deleted_per_component: np.ndarray
    survivor_index: np.ndarray  # exploded-vertex id per surviving vertex


def percolate_via_explosion(ds: DegreeSequence, p: float, seed) -> ExplosionResult:
    """Build the exploded model, match uniformly, then delete n_plus uniformly
    chosen degree-one vertices.

    Deletion never splits a component and never touches surplus; per
    component, the deleted count tracks (1 - sqrt(p)) times its size.
    """
    rng = _rng(seed)
    exploded = explode(ds, p, rng)
    tilde_ds = exploded.as_degree_sequence()
    g = HalfEdgeGraph(
        owner=tilde_ds.owners(),
        mate=_kernels.match_kernel(tilde_ds.ell, _kernel_seed(rng)),
        n=tilde_ds.n,
    )
    pre = components(g)

    deg_one = np.flatnonzero(tilde_ds.degrees == 1)
    if deg_one.size < exploded.n_plus:
        raise AssertionError("fewer degree-one vertices than detachments")
    doomed = rng.choice(deg_one, size=exploded.n_plus, replace=False)
    deleted = np.zeros(exploded.n_tilde, dtype=bool)
    deleted[doomed] = True
    deleted_per_comp = np.bincount(pre.labels[doomed], minlength=len(pre)).astype(
        np.int64
    )

    # open the partners of deleted halves, drop edges internal to the doomed
    mate = g.mate.copy()
    owner = g.owner
    doomed_halves = np.flatnonzero(deleted[owner])
    partners = mate[doomed_halves]
    live_partner = partners[~deleted[owner[partners]]]
    mate[live_partner] = OPEN

    survivors = np.flatnonzero(~deleted)
    new_id = np.full(exploded.n_tilde, -1, dtype=np.int64)
    new_id[survivors] = np.arange(survivors.size)
    keep_half = ~deleted[owner]
    half_map = np.full(g.ell, -1, dtype=np.int64)
    half_map[np.flatnonzero(keep_half)] = np.arange(int(keep_half.sum()))
    new_mate = mate[keep_half]
    paired = new_mate != OPEN
    new_mate[paired] = half_map[new_mate[paired]]
    out = HalfEdgeGraph(
        owner=new_id[owner[keep_half]], mate=new_mate, n=survivors.size
    )
    return ExplosionResult(
        graph=out,
        exploded=exploded,
        pre_components=pre,
        deleted_per_component=deleted_per_comp,
        survivor_index=survivors,
    )


def percolate_direct(g: HalfEdgeGraph, p: float, seed) -> HalfEdgeGraph:
    """Retain each matched pair independently with probability p; deleted
    pairs leave both half-edges OPEN."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    rng = _rng(seed)
    hs, ms = g.edge_pairs()
    drop = rng.random(hs.size) > p
    mate = g.mate.copy()
    mate[hs[drop]] = OPEN
    mate[ms[drop]] = OPEN
    return HalfEdgeGraph(owner=g.owner, mate=mate, n=g.n)


@dataclass
class GridSnapshot:
    """Component partition and tallies at one lambda."""

    lam: float
    p: float
    labels: np.ndarray
    sizes: np.ndarray
    edges: np.ndarray
    open_halfedges: np.ndarray
    min_vertex: np.ndarray

    @property
    def surplus(self) -> np.ndarray:
        return self.edges - self.sizes + 1


@dataclass
class CouplingGrid:
    """Coupled percolation snapshots over a sorted lambda grid.

    A single stream of edge labels and a single sequential pairing drive all
    levels, so partitions refine as lambda increases.
    """

    lambdas: np.ndarray
    snapshots: list[GridSnapshot]
    n: int
    ell: int

    def refines(self) -> bool:
        """Every component at lambda_i is inside one component at lambda_j>i."""
        for a, b in zip(self.snapshots[:-1], self.snapshots[1:]):
            seen = {}
            for la, lb in zip(a.labels, b.labels):
                if la in seen:
                    if seen[la] != lb:
                        return False
                else:
                    seen[la] = lb
        return True

    def to_csv(self, path) -> None:
        scale = self.n ** (-2 / 3)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "rank", "size", "rescaled_size", "surplus",
                        "open_halfedges"])
            for snap in self.snapshots:
                order = component_order(snap.sizes, snap.surplus, snap.min_vertex)
                for r, i in enumerate(order, 1):
                    w.writerow(
                        [
                            f"{snap.lam:.9g}",
                            r,
                            int(snap.sizes[i]),
                            f"{snap.sizes[i] * scale:.9g}",
                            int(snap.surplus[i]),
                            int(snap.open_halfedges[i]),
                        ]
                    )


def coupled_grid(ds: DegreeSequence, lambdas, seed) -> CouplingGrid:
    """Snapshot CM_n(d, p_n(lambda)) across a sorted lambda grid on shared
    randomness: ell/2 edge labels decide how many pairs exist at each level,
    and pairs are revealed sequentially from one uniform ordering."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.size == 0:
        raise ValueError("lambda grid is empty")
    if (np.diff(lambdas) < 0).any():
        raise ValueError("lambda grid must be sorted ascending")
    st = stats(ds)
    ps = np.array([p_critical(st.nu_n, ds.n, lam) for lam in lambdas])
    rng = _rng(seed)

    labels_u = rng.random(ds.ell // 2)
    cuts = np.array([int(np.count_nonzero(labels_u <= p)) for p in ps], dtype=np.int64)
    perm = rng.permutation(ds.ell)
    pairs_a = perm[0::2]
    pairs_b = perm[1::2]
    owner = ds.owners()
    label_snaps = _kernels.incremental_labels_kernel(
        owner, pairs_a, pairs_b, cuts, ds.n
    )

    degrees = ds.degrees
    snapshots = []
    for i, lam in enumerate(lambdas):
        roots = label_snaps[i]
        counts = np.bincount(roots, minlength=ds.n)
        comp_roots = np.flatnonzero(counts)
        remap = np.zeros(ds.n, dtype=np.int64)
        remap[comp_roots] = np.arange(comp_roots.size)
        labels = remap[roots]
        sizes = counts[comp_roots].astype(np.int64)
        k = cuts[i]
        edges = np.bincount(
            labels[owner[pairs_a[:k]]], minlength=comp_roots.size
        ).astype(np.int64)
        degsum = np.zeros(comp_roots.size, dtype=np.int64)
        np.add.at(degsum, labels, degrees)
        open_halves = degsum - 2 * edges
        min_vertex = np.full(comp_roots.size, ds.n, dtype=np.int64)
        np.minimum.at(min_vertex, labels, np.arange(ds.n))
        snapshots.append(
            GridSnapshot(
                lam=float(lam),
                p=float(ps[i]),
                labels=labels,
                sizes=sizes,
                edges=edges,
                open_halfedges=open_halves,
                min_vertex=min_vertex,
            )
        )
    return CouplingGrid(lambdas=lambdas, snapshots=snapshots, n=ds.n, ell=ds.ell)
