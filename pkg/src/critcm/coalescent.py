"""Event-driven multiplicative coalescent, with passive weights.

Particles i and j merge at rate x_i * x_j; masses and weights add.  The total
merge rate ((sum x)^2 - sum x^2)/2 is maintained incrementally and pairs are
drawn by two mass-proportional picks with rejection of i == j, which is the
exact pair law proportional to x_i * x_j.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from critcm.degrees import _rng


class _MassTree:
    """Flat binary-indexed tree over particle masses for O(log k) sampling."""

    def __init__(self, masses: np.ndarray):
        self.size = 1
        while self.size < masses.size:
            self.size *= 2
        self.tree = np.zeros(2 * self.size, dtype=np.float64)
        self.tree[self.size : self.size + masses.size] = masses
        for i in range(self.size - 1, 0, -1):
            self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1]

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def set(self, i: int, value: float) -> None:
        j = self.size + i
        self.tree[j] = value
        j //= 2
        while j:
            self.tree[j] = self.tree[2 * j] + self.tree[2 * j + 1]
            j //= 2

    def get(self, i: int) -> float:
        return float(self.tree[self.size + i])

    def sample(self, u: float) -> int:
        """Index with cumulative-mass inverse at u * total."""
        target = u * self.tree[1]
        j = 1
        while j < self.size:
            left = self.tree[2 * j]
            if target < left:
                j = 2 * j
            else:
                target -= left
                j = 2 * j + 1
        return j - self.size


@dataclass
class CoalescentState:
    """Particle system (mass, weight) at a time point.

    Zero-mass particles are legal and inert; weights never affect rates.
    """

    masses: np.ndarray
    weights: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.masses = np.ascontiguousarray(self.masses, dtype=np.float64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.masses.shape != self.weights.shape:
            raise ValueError("masses and weights must align")
        if (self.masses < 0).any() or (self.weights < 0).any():
            raise ValueError("masses and weights must be non-negative")

    @staticmethod
    def from_masses(masses, time: float = 0.0) -> "CoalescentState":
        masses = np.asarray(masses, dtype=np.float64)
        return CoalescentState(masses=masses, weights=masses.copy(), time=time)

    def total_rate(self) -> float:
        s = float(self.masses.sum())
        return 0.5 * (s * s - float(np.dot(self.masses, self.masses)))


def simulate(state: CoalescentState, t_end: float, seed,
             log: list | None = None) -> CoalescentState:
    """Run the coalescent from state.time to t_end.

    Appends (time, i, j, new_mass, new_weight) to log when given.  Returns a
    new state; particle j's slot is zeroed into particle i on each merge.
    """
    if t_end < state.time:
        raise ValueError("t_end precedes state.time")
    rng = _rng(seed)
    masses = state.masses.copy()
    weights = state.weights.copy()
    t = state.time
    if masses.size < 2:
        return CoalescentState(masses=masses, weights=weights, time=t_end)

    tree = _MassTree(masses)
    total = tree.total
    sumsq = float(np.dot(masses, masses))
    alive = masses > 0

    while True:
        rate = 0.5 * (total * total - sumsq)
        if rate <= 1e-300:
            t = t_end
            break
        t += rng.exponential(1.0 / rate)
        if t > t_end:
            t = t_end
            break
        while True:  # mass-proportional ordered pair, reject i == j
            i = tree.sample(rng.random())
            j = tree.sample(rng.random())
            if i != j:
                break
        xi, xj = masses[i], masses[j]
        sumsq += 2.0 * xi * xj  # (xi+xj)^2 = xi^2 + xj^2 + 2 xi xj
        masses[i] = xi + xj
        masses[j] = 0.0
        weights[i] += weights[j]
        weights[j] = 0.0
        alive[j] = False
        tree.set(i, masses[i])
        tree.set(j, 0.0)
        if log is not None:
            log.append((t, i, j, float(masses[i]), float(weights[i])))
    return CoalescentState(masses=masses, weights=weights, time=t)


def merge_log_to_csv(log, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "i", "j", "new_mass", "new_weight"])
        for t, i, j, m, z in log:
            w.writerow([f"{t:.9g}", i, j, f"{m:.9g}", f"{z:.9g}"])


@dataclass
class CoupledTrajectories:
    """Graphical construction of two coalescents on shared pair clocks."""

    times_minus: np.ndarray   # pairwise first-connection times, upper triangle
    times_plus: np.ndarray
    masses_minus: np.ndarray
    masses_plus: np.ndarray

    def partition_at(self, t: float, which: str) -> np.ndarray:
        times = self.times_minus if which == "minus" else self.times_plus
        masses = self.masses_minus if which == "minus" else self.masses_plus
        k = masses.size
        parent = np.arange(k)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ii, jj = np.triu_indices(k, 1)
        for a, b, tt in zip(ii, jj, times):
            if tt <= t:
                parent[find(a)] = find(b)
        return np.array([find(v) for v in range(k)])

    def refines(self, t: float) -> bool:
        """The minus-partition refines the plus-partition at time t."""
        pm = self.partition_at(t, "minus")
        pp = self.partition_at(t, "plus")
        seen = {}
        for a, b in zip(pm, pp):
            if a in seen and seen[a] != b:
                return False
            seen[a] = b
        return True


def subgraph_couple(x_minus, x_plus, t_end: float, seed) -> CoupledTrajectories:
    """Couple two coalescents with componentwise-dominated initial masses.

    Pair {i, j} connects at time xi_ij / (x_i x_j) with shared unit
    exponentials xi_ij, so every connection of the smaller system is present
    in the larger one and its partition refines the larger system's at all
    times.
    """
    xm = np.asarray(x_minus, dtype=np.float64)
    xp = np.asarray(x_plus, dtype=np.float64)
    if xm.shape != xp.shape:
        raise ValueError("initial vectors must have equal length (pad with zeros)")
    if (xm > xp).any():
        raise ValueError("x_minus must be componentwise <= x_plus")
    rng = _rng(seed)
    k = xm.size
    ii, jj = np.triu_indices(k, 1)
    xi = rng.exponential(size=ii.size)
    with np.errstate(divide="ignore"):
        tm = xi / (xm[ii] * xm[jj])
        tp = xi / (xp[ii] * xp[jj])
    return CoupledTrajectories(
        times_minus=tm, times_plus=tp, masses_minus=xm, masses_plus=xp
    )


def masses_at(traj: CoupledTrajectories, t: float, which: str) -> np.ndarray:
    """Sorted block masses of a coupled trajectory at time t."""
    part = traj.partition_at(t, which)
    masses = traj.masses_minus if which == "minus" else traj.masses_plus
    sums: dict[int, float] = {}
    for root, m in zip(part, masses):
        sums[root] = sums.get(root, 0.0) + float(m)
    return np.sort(np.array(list(sums.values())))[::-1]
