"""Exponential-clock dynamic construction and its kept-alive modification.

The standard process pairs two uniform open half-edges at each event of an
inhomogeneous Poisson process with rate equal to the current open count; the
graph at time infinity is the configuration model.  The modified process
freezes the pool at a window location and keeps selected half-edges alive, so
component masses merge exactly as a multiplicative coalescent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from critcm import _kernels
from critcm.degrees import DegreeSequence, _rng
from critcm.multigraph import HalfEdgeGraph, component_order


def t_map(nu_n: float, n: int, lam: float) -> float:
    """Time at which the dynamic construction matches percolation at
    p_n(lambda): (1/2) log(nu/(nu-1)) + lambda / (2 (nu-1) n^(1/3))."""
    if nu_n <= 1.0:
        raise ValueError("nu_n must exceed 1")
    return 0.5 * np.log(nu_n / (nu_n - 1.0)) + 0.5 * lam / ((nu_n - 1.0) * n ** (1 / 3))


def lambda_time_scale(nu_n: float, n: int) -> float:
    """dt/dlambda of t_map: one lambda unit is this many time units."""
    return 0.5 / ((nu_n - 1.0) * n ** (1 / 3))


@dataclass
class PoolSnapshot:
    """State of the open pool at a snapshot time.

    comp_of_half maps each open half-edge (pool order) to a component id;
    masses[i] is component i's open count O_i, sizes[i] its vertex count.
    """

    t: float
    events: int
    labels: np.ndarray
    comp_of_half: np.ndarray
    masses: np.ndarray
    sizes: np.ndarray
    edges: np.ndarray
    min_vertex: np.ndarray
    open_halves: np.ndarray  # half-edge ids, aligned with comp_of_half

    @property
    def surplus(self) -> np.ndarray:
        return self.edges - self.sizes + 1

    @property
    def s1(self) -> int:
        return self.comp_of_half.size


@dataclass
class DynamicResult:
    """Event times, the realized pairing order, and requested snapshots."""

    times: np.ndarray          # event times, cumulative
    pairs_a: np.ndarray        # half-edge pairs in event order (full run)
    pairs_b: np.ndarray
    events_run: int            # events with time <= t_end
    ell: int
    n: int
    snapshots: list[PoolSnapshot] = field(default_factory=list)
    graph: HalfEdgeGraph | None = None

    def s1_at(self, t: float) -> int:
        return self.ell - 2 * int(np.searchsorted(self.times[: self.events_run], t, side="right"))

    def s1_sup_error(self, horizon: float) -> float:
        """sup_{t <= horizon} |s1(t)/ell - exp(-2t)| over the step curve."""
        ts = self.times[: self.events_run]
        ts = ts[ts <= horizon]
        ks = np.arange(ts.size)
        before = np.abs((self.ell - 2 * ks) / self.ell - np.exp(-2 * ts))
        after = np.abs((self.ell - 2 * (ks + 1)) / self.ell - np.exp(-2 * ts))
        s1_h = self.ell - 2 * ts.size
        edge = abs(s1_h / self.ell - np.exp(-2 * horizon))
        err = max(edge, abs(1.0 - 1.0))
        if ts.size:
            err = max(err, float(before.max()), float(after.max()))
        return err


def run_dynamic(ds: DegreeSequence, t_end: float, seed, snapshot_times=()) -> DynamicResult:
    """Event-driven simulation: waits are Exp(1)/s1 at the current open count
    s1, each event pairs two uniform open half-edges.

    The full pairing order is drawn up front (sequential uniform pairs are the
    consecutive entries of one uniform shuffle), so the run is O(ell) plus the
    union-find work for snapshots.
    """
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    rng = _rng(seed)
    ell = ds.ell
    n_events = ell // 2
    rates = ell - 2 * np.arange(n_events, dtype=np.float64)
    times = np.cumsum(rng.exponential(size=n_events) / rates)
    perm = rng.permutation(ell)
    pairs_a = perm[0::2]
    pairs_b = perm[1::2]
    events_run = int(np.searchsorted(times, t_end, side="right"))

    owner = ds.owners()
    snapshot_times = sorted(snapshot_times)
    cuts = np.array(
        [int(np.searchsorted(times, t, side="right")) for t in snapshot_times],
        dtype=np.int64,
    )
    snapshots = []
    if cuts.size:
        label_snaps = _kernels.incremental_labels_kernel(
            owner, pairs_a, pairs_b, cuts, ds.n
        )
        degrees = ds.degrees
        for i, t in enumerate(snapshot_times):
            k = int(cuts[i])
            roots = label_snaps[i]
            counts = np.bincount(roots, minlength=ds.n)
            comp_roots = np.flatnonzero(counts)
            remap = np.zeros(ds.n, dtype=np.int64)
            remap[comp_roots] = np.arange(comp_roots.size)
            labels = remap[roots]
            sizes = counts[comp_roots].astype(np.int64)
            edges = np.bincount(
                labels[owner[pairs_a[:k]]], minlength=comp_roots.size
            ).astype(np.int64)
            degsum = np.zeros(comp_roots.size, dtype=np.int64)
            np.add.at(degsum, labels, degrees)
            masses = degsum - 2 * edges
            min_vertex = np.full(comp_roots.size, ds.n, dtype=np.int64)
            np.minimum.at(min_vertex, labels, np.arange(ds.n))
            closed = np.zeros(ell, dtype=bool)
            closed[pairs_a[:k]] = True
            closed[pairs_b[:k]] = True
            open_halves = np.flatnonzero(~closed)
            snapshots.append(
                PoolSnapshot(
                    t=float(t),
                    events=k,
                    labels=labels,
                    comp_of_half=labels[owner[open_halves]],
                    masses=masses,
                    sizes=sizes,
                    edges=edges,
                    min_vertex=min_vertex,
                    open_halves=open_halves,
                )
            )

    mate = np.full(ell, _kernels.OPEN, dtype=np.int64)
    a = pairs_a[:events_run]
    b = pairs_b[:events_run]
    mate[a] = b
    mate[b] = a
    graph = HalfEdgeGraph(owner=owner, mate=mate, n=ds.n)
    return DynamicResult(
        times=times,
        pairs_a=pairs_a,
        pairs_b=pairs_b,
        events_run=events_run,
        ell=ell,
        n=ds.n,
        snapshots=snapshots,
        graph=graph,
    )


@dataclass
class ModifiedSnapshot:
    lam: float
    masses: np.ndarray           # kept-alive mass per live component, sorted desc
    standard_sizes: np.ndarray   # coupled standard-process component sizes
    bad_edges: int


@dataclass
class ModifiedResult:
    """Trajectory of the kept-alive process started from a pool snapshot.

    The frozen pool never depletes: events select two distinct half-edges
    uniformly (kept alive afterwards), masses add exactly on merges.  The
    coupled standard process applies only those events whose half-edges are
    both still open, so its edge set is contained in the modified one.
    """

    s1_bar: int
    beta_n: float
    lambda_star: float
    snapshots: list[ModifiedSnapshot]
    bad_edges: int
    event_lambdas: np.ndarray
    merge_log: list = field(default_factory=list)
    modified_edges: list = field(default_factory=list)
    standard_edges: list = field(default_factory=list)


def run_modified(base: PoolSnapshot, nu_n: float, n: int, lambda_star: float,
                 lambda_end: float, seed, lambda_grid=(), keep_logs: bool = False) -> ModifiedResult:
    """Kept-alive pairing at constant rate s1_bar on the frozen pool.

    Rescaled masses (by beta_n = sqrt(s1_bar (nu_n - 1) n^(1/3))) merge as a
    multiplicative coalescent in lambda.  The standard process is coupled on
    the same event stream; events touching an already-closed half-edge are its
    bad edges.
    """
    rng = _rng(seed)
    comp_of_half = base.comp_of_half.copy()
    s1_bar = comp_of_half.size
    if s1_bar < 2:
        raise ValueError("frozen pool needs at least two open half-edges")
    scale = lambda_time_scale(nu_n, n)
    duration_t = (lambda_end - lambda_star) * scale
    if duration_t < 0:
        raise ValueError("lambda_end must be >= lambda_star")

    # event times: homogeneous Poisson, rate s1_bar in t units
    waits = []
    total = 0.0
    chunk = max(16, int(s1_bar * duration_t * 1.2) + 16)
    event_ts = []
    while True:
        w = rng.exponential(scale=1.0 / s1_bar, size=chunk)
        t = total + np.cumsum(w)
        inside = t[t <= duration_t]
        event_ts.append(inside)
        if inside.size < t.size:
            break
        total = t[-1]
    event_ts = np.concatenate(event_ts)
    k_events = event_ts.size
    event_lambdas = lambda_star + event_ts / scale

    m = int(base.masses.size)
    parent = np.arange(m)
    masses = base.masses.astype(np.int64).copy()
    std_sizes = base.sizes.astype(np.int64).copy()
    std_open = np.ones(s1_bar, dtype=bool)
    std_parent = np.arange(m)

    def find(par, x):
        while par[x] != x:
            par[x] = par[par[x]]
            x = par[x]
        return x

    i_sel = rng.integers(0, s1_bar, size=k_events)
    j_sel = rng.integers(0, s1_bar - 1, size=k_events)
    j_sel = j_sel + (j_sel >= i_sel)

    grid = sorted(lambda_grid)
    snaps: list[ModifiedSnapshot] = []
    gi = 0
    bad = 0
    merge_log = []
    mod_edges = []
    std_edges = []

    def take_snapshot(lam):
        live = np.array([find(parent, c) == c for c in range(m)])
        mm = np.sort(masses[live])[::-1]
        live_s = np.array([find(std_parent, c) == c for c in range(m)])
        ss = np.sort(std_sizes[live_s])[::-1]
        snaps.append(
            ModifiedSnapshot(lam=float(lam), masses=mm, standard_sizes=ss, bad_edges=bad)
        )

    for e in range(k_events):
        lam_e = event_lambdas[e]
        while gi < len(grid) and grid[gi] < lam_e:
            take_snapshot(grid[gi])
            gi += 1
        h1, h2 = int(i_sel[e]), int(j_sel[e])
        c1 = find(parent, int(comp_of_half[h1]))
        c2 = find(parent, int(comp_of_half[h2]))
        if keep_logs:
            mod_edges.append((h1, h2))
        if c1 != c2:
            parent[c2] = c1
            masses[c1] += masses[c2]
            if keep_logs:
                merge_log.append((float(lam_e), c1, c2, int(masses[c1])))
        # coupled standard process: only if both halves still open
        if std_open[h1] and std_open[h2]:
            std_open[h1] = False
            std_open[h2] = False
            s1c = find(std_parent, int(comp_of_half[h1]))
            s2c = find(std_parent, int(comp_of_half[h2]))
            if s1c != s2c:
                std_parent[s2c] = s1c
                std_sizes[s1c] += std_sizes[s2c]
            if keep_logs:
                std_edges.append((h1, h2))
        else:
            bad += 1
    while gi < len(grid):
        take_snapshot(grid[gi])
        gi += 1

    beta_n = float(np.sqrt(s1_bar * (nu_n - 1.0) * n ** (1 / 3)))
    return ModifiedResult(
        s1_bar=s1_bar,
        beta_n=beta_n,
        lambda_star=lambda_star,
        snapshots=snaps,
        bad_edges=bad,
        event_lambdas=event_lambdas,
        merge_log=merge_log,
        modified_edges=mod_edges,
        standard_edges=std_edges,
    )


def synthetic_snapshot(masses, nu_n: float = 1.5) -> PoolSnapshot:
    """Hand-built pool snapshot with the given component masses (for tests
    and the coalescent comparisons)."""
    masses = np.asarray(masses, dtype=np.int64)
    comp_of_half = np.repeat(np.arange(masses.size), masses)
    return PoolSnapshot(
        t=0.0,
        events=0,
        labels=np.arange(masses.size),
        comp_of_half=comp_of_half,
        masses=masses.copy(),
        sizes=masses.copy(),
        edges=np.zeros(masses.size, dtype=np.int64),
        min_vertex=np.arange(masses.size),
        open_halves=np.arange(int(masses.sum())),
    )


def trajectory_to_csv(result: ModifiedResult, n: int, path) -> None:
    scale = n ** (-2 / 3)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "rank", "rescaled_size", "rescaled_mass",
                    "surplus", "bad_edges_so_far"])
        for snap in result.snapshots:
            k = max(snap.masses.size, snap.standard_sizes.size)
            for r in range(k):
                size = snap.standard_sizes[r] if r < snap.standard_sizes.size else 0
                mass = snap.masses[r] if r < snap.masses.size else 0
                w.writerow(
                    [
                        f"{snap.lam:.9g}",
                        r + 1,
                        f"{size * scale:.9g}",
                        f"{mass / result.beta_n:.9g}",
                        "",
                        snap.bad_edges,
                    ]
                )
