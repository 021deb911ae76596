"""Degree sequences: construction, criticality statistics, and tuning.

A degree sequence is valid for matching when its total degree is even; the
criticality parameter nu_n = sum d_i(d_i-1) / sum d_i locates the sequence
relative to the critical window nu_n = 1 + lambda * n^(-1/3).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _rng(seed) -> np.random.Generator:
    """Accept an int seed or a Generator; ints give a fresh PCG64 stream."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class DegreeSequence:
    """Vertex degrees d_1..d_n with even total, at least one positive."""

    degrees: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.degrees, dtype=np.int64)
        object.__setattr__(self, "degrees", d)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("degree sequence must be a non-empty 1-d array")
        if (d < 0).any():
            raise ValueError("degrees must be non-negative")
        if not (d > 0).any():
            raise ValueError("at least one vertex must have positive degree")
        if int(d.sum()) % 2 != 0:
            raise ValueError("total degree must be even")

    @property
    def n(self) -> int:
        return self.degrees.size

    @property
    def ell(self) -> int:
        return int(self.degrees.sum())

    def offsets(self) -> np.ndarray:
        """Half-edge offsets: vertex v owns half-edges offsets[v]..offsets[v+1]-1."""
        out = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=out[1:])
        return out

    def owners(self) -> np.ndarray:
        """Owner vertex of every half-edge, in offset order."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            counts = np.bincount(self.degrees)
            payload = {
                "n": self.n,
                "counts": {str(k): int(c) for k, c in enumerate(counts) if c > 0},
            }
            path.write_text(json.dumps(payload))
        else:
            np.savetxt(path, self.degrees, fmt="%d")

    @staticmethod
    def load(path) -> "DegreeSequence":
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".json" or text.lstrip().startswith("{"):
            payload = json.loads(text)
            counts = {int(k): int(v) for k, v in payload["counts"].items()}
            degrees = np.repeat(
                np.array(sorted(counts), dtype=np.int64),
                [counts[k] for k in sorted(counts)],
            )
            if degrees.size != payload["n"]:
                raise ValueError("counts do not sum to n")
            return DegreeSequence(degrees)
        return DegreeSequence(np.loadtxt(path, dtype=np.int64, ndmin=1))


@dataclass(frozen=True)
class DegreeStats:
    """Moment summary of a degree sequence."""

    ell_n: int
    mu_n: float
    sigma2_n: float
    sigma3_n: float
    nu_n: float
    d_max: int


@dataclass(frozen=True)
class ProbabilityVector:
    """Finite degree distribution: support degrees with probabilities."""

    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        k = np.ascontiguousarray(self.support, dtype=np.int64)
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        order = np.argsort(k)
        k, p = k[order], p[order]
        object.__setattr__(self, "support", k)
        object.__setattr__(self, "probs", p)
        if k.size != p.size or k.size == 0:
            raise ValueError("support and probs must be non-empty and aligned")
        if (np.diff(k) == 0).any():
            raise ValueError("support degrees must be distinct")
        if (k < 0).any():
            raise ValueError("degrees must be non-negative")
        if (p < 0).any():
            raise ValueError("probabilities must be non-negative")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")

    @staticmethod
    def from_mapping(mapping) -> "ProbabilityVector":
        items = sorted((int(k), float(v)) for k, v in mapping.items())
        return ProbabilityVector(
            np.array([k for k, _ in items]), np.array([v for _, v in items])
        )

    @staticmethod
    def load(path) -> "ProbabilityVector":
        return ProbabilityVector.from_mapping(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps({str(k): p for k, p in zip(self.support, self.probs)})
        )

    def moment(self, r: int) -> float:
        return math.fsum(p * k**r for k, p in zip(self.support, self.probs))

    def nu(self) -> float:
        """E[D(D-1)] / E[D] of the distribution."""
        num = math.fsum(p * k * (k - 1) for k, p in zip(self.support, self.probs))
        return num / self.moment(1)


def stats(ds: DegreeSequence) -> DegreeStats:
    """Moments and the criticality parameter nu_n of a degree sequence."""
    d = ds.degrees.astype(np.float64)
    ell = ds.ell
    if ell == 0:
        raise ValueError("total degree is zero")
    n = ds.n
    num = float(np.dot(ds.degrees, ds.degrees - 1))
    return DegreeStats(
        ell_n=ell,
        mu_n=ell / n,
        sigma2_n=float(np.dot(d, d)) / n,
        sigma3_n=float(np.dot(d * d, d)) / n,
        nu_n=num / ell,
        d_max=int(ds.degrees.max()),
    )


def _fix_parity(degrees: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """If the total is odd, bump one uniformly chosen vertex's degree by 1."""
    if int(degrees.sum()) % 2 != 0:
        degrees = degrees.copy()
        degrees[rng.integers(degrees.size)] += 1
    return degrees


def sample_iid(dist: ProbabilityVector, n: int, seed) -> DegreeSequence:
    """Draw n i.i.d. degrees from dist, with the parity fix applied."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = _rng(seed)
    degrees = rng.choice(dist.support, size=n, p=dist.probs)
    return DegreeSequence(_fix_parity(degrees, rng))


def _largest_remainder_counts(probs: np.ndarray, n: int) -> np.ndarray:
    """Integer counts summing to n, nearest to n*probs (largest remainder)."""
    raw = probs * n
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _nu_of_counts(support: np.ndarray, counts: np.ndarray) -> float:
    ell = int(np.dot(support, counts))
    num = int(np.dot(support * (support - 1), counts))
    return num / ell if ell > 0 else 0.0


def tune_to_critical(dist: ProbabilityVector, n: int, lam: float, seed) -> DegreeSequence:
    """Materialize n degrees from dist with nu_n tuned to 1 + lam * n^(-1/3).

    The degree-1 mass is the tuning knob: bisection over w places mass w on
    degree 1 and rescales the rest of the distribution by (1-w).  Counts are
    materialized by largest-remainder rounding, parity is fixed, and then
    single vertices are moved between degree 1 and the next degree class
    (in parity-preserving steps) until |nu_n - target| <= n^(-1/3)/10.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if 0 in dist.support:
        raise ValueError("tuning does not support degree-0 mass in the input law")
    rng = _rng(seed)
    target = 1.0 + lam * n ** (-1 / 3)
    tol = n ** (-1 / 3) / 10.0

    has_one = dist.support[0] == 1
    hi_support = dist.support[1:] if has_one else dist.support
    hi_probs = dist.probs[1:] if has_one else dist.probs
    hi_mass = float(hi_probs.sum())
    if hi_mass <= 0.0:
        raise ValueError("distribution has no mass above degree 1; nu is stuck at 0")
    hi_probs = hi_probs / hi_mass
    # nu(w) of the blended law {1: w, k: (1-w) hi_probs[k]} is strictly
    # decreasing in w, from A/B at w=0 down to 0 at w=1.
    A = math.fsum(p * k * (k - 1) for k, p in zip(hi_support, hi_probs))
    B = math.fsum(p * k for k, p in zip(hi_support, hi_probs))
    nu_max = A / B

    def nu_of_w(w: float) -> float:
        return (1.0 - w) * A / (w + (1.0 - w) * B)

    if not (0.0 < target < nu_max):
        raise ValueError(
            f"target nu = {target:.6g} is outside the achievable range "
            f"(0, {nu_max:.6g}) for this distribution (P(D=1) > 0 required)"
        )
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if nu_of_w(mid) > target:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)

    support = np.concatenate(([1], hi_support)).astype(np.int64)
    probs = np.concatenate(([w], (1.0 - w) * hi_probs))
    count_map = {
        int(k): int(c) for k, c in zip(support, _largest_remainder_counts(probs, n))
    }

    # Parity fix on the counts: bump one uniformly chosen vertex's degree by 1.
    ell = sum(k * c for k, c in count_map.items())
    if ell % 2 != 0:
        pick = int(rng.integers(n))
        acc = 0
        for k in sorted(count_map):
            acc += count_map[k]
            if pick < acc:
                count_map[k] -= 1
                count_map[k + 1] = count_map.get(k + 1, 0) + 1
                break

    # Exact repair: move vertices between degree 1 and k2, in steps that keep
    # the total degree even (k2-1 odd forces two moves at a time).
    k2 = int(hi_support[0])
    step = 1 if (k2 - 1) % 2 == 0 else 2

    def totals():
        keys = np.array(sorted(count_map), dtype=np.int64)
        cnts = np.array([count_map[k] for k in keys], dtype=np.int64)
        return keys, cnts

    for _ in range(2 * n + 4):
        keys, cnts = totals()
        nu_now = _nu_of_counts(keys, cnts)
        if abs(nu_now - target) <= tol:
            break
        if nu_now > target:
            if count_map.get(k2, 0) < step:
                break
            count_map[k2] -= step
            count_map[1] = count_map.get(1, 0) + step
        else:
            if count_map.get(1, 0) < step + 1:  # keep P(d=1) > 0
                break
            count_map[1] -= step
            count_map[k2] = count_map.get(k2, 0) + step

    keys, cnts = totals()
    nu_now = _nu_of_counts(keys, cnts)
    if abs(nu_now - target) > tol or count_map.get(1, 0) <= 0:
        raise ValueError(
            f"could not tune nu_n to {target:.6g} +/- {tol:.2g}; achieved {nu_now:.6g}"
        )
    return DegreeSequence(np.repeat(keys, cnts))
