"""Depth-first exploration walk over the configuration model.

One vertex is discovered per stage.  Stage j records the degree d_(j) and the
cycle-pair count c_(j) (half the back-edge and self-loop half-edges killed at
discovery); the walk S_n(j) = sum(d_(i) - 2 - 2 c_(i)) encodes component
sizes as the stretches between successive hits of -2k.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from critcm import _kernels
from critcm.degrees import DegreeSequence, _rng
from critcm.multigraph import HalfEdgeGraph, _kernel_seed


@dataclass
class ExplorationTrace:
    """Per-stage record of the walk (1-based stages, index 0 = stage 1)."""

    vertex: np.ndarray
    degree: np.ndarray
    c: np.ndarray
    n: int
    ell: int
    graph: HalfEdgeGraph | None = field(default=None, repr=False)

    def __post_init__(self):
        self.S = np.cumsum(self.degree - 2 - 2 * self.c)
        self.s = np.cumsum(self.degree - 2)
        run_min = np.minimum.accumulate(np.minimum(self.S, 0))
        self.A = self.S - run_min

    @property
    def surplus_marks(self) -> np.ndarray:
        """Cycle pairs found at each stage (surplus-edge mark counts)."""
        return self.c

    def num_components(self) -> int:
        return -int(self.S[-1]) // 2

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stage", "vertex", "degree", "c", "S", "s", "A"])
            for j in range(self.n):
                w.writerow(
                    [
                        j + 1,
                        int(self.vertex[j]),
                        int(self.degree[j]),
                        int(self.c[j]),
                        int(self.S[j]),
                        int(self.s[j]),
                        int(self.A[j]),
                    ]
                )


@dataclass(frozen=True)
class HittingTimes:
    """Stages tau_k at which the walk first hits -2k; tau_0 = 0."""

    tau: np.ndarray

    def sizes(self) -> np.ndarray:
        return np.diff(self.tau)


def explore(ds: DegreeSequence, seed) -> ExplorationTrace:
    """Explore a fresh uniform pairing, revealing mates on demand.

    The realized matching is attached as trace.graph; its law is the same as
    uniform_match's.
    """
    if ds.ell % 2 != 0:
        raise ValueError("total degree must be even")
    rng = _rng(seed)
    owner = ds.owners()
    order, deg, c, mate = _kernels.explore_kernel(
        ds.degrees, ds.offsets(), owner, _kernel_seed(rng)
    )
    graph = HalfEdgeGraph(owner=owner, mate=mate, n=ds.n)
    return ExplorationTrace(vertex=order, degree=deg, c=c, n=ds.n, ell=ds.ell, graph=graph)


def replay(g: HalfEdgeGraph, seed) -> ExplorationTrace:
    """Run the same walk on a fixed full pairing (restarts still seeded)."""
    if not g.is_fully_matched():
        raise ValueError("replay requires a fully matched graph")
    rng = _rng(seed)
    degrees = g.degrees()
    offsets = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(degrees, out=offsets[1:])
    order, deg, c = _kernels.replay_kernel(
        degrees, offsets, g.owner, g.mate, _kernel_seed(rng)
    )
    return ExplorationTrace(vertex=order, degree=deg, c=c, n=g.n, ell=g.ell, graph=g)


def hitting_times(trace: ExplorationTrace) -> HittingTimes:
    """tau_k = inf{i : S_n(i) = -2k}, as 1-based stage indices."""
    S = trace.S
    prev_min = np.minimum.accumulate(np.concatenate(([0], S)))[:-1]
    hits = np.flatnonzero((S < prev_min) & (S % 2 == 0))
    expected = -int(S[-1]) // 2 if trace.n else 0
    if S[-1] % 2 != 0 or hits.size != expected:
        raise ValueError("walk does not hit -2k once per component; trace corrupt")
    return HittingTimes(tau=np.concatenate(([0], hits + 1)))


def surplus_per_component(trace: ExplorationTrace, hitting: HittingTimes) -> np.ndarray:
    """Component k's surplus: cycle pairs found during (tau_{k-1}, tau_k]."""
    if hitting.tau.size <= 1:
        return np.zeros(0, dtype=np.int64)
    csum = np.concatenate(([0], np.cumsum(trace.c)))
    return np.diff(csum[hitting.tau])


def degree_discovery_counts(trace: ExplorationTrace, k: int) -> np.ndarray:
    """N_k(t) = number of degree-k vertices discovered up to stage t.

    Returned as an array of length n+1 with N_k(0) = 0; index by stage.
    """
    return np.concatenate(
        ([0], np.cumsum((trace.degree == k).astype(np.int64)))
    )
