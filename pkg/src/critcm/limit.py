"""Scaling-limit samplers: drifted Brownian paths, excursions, Poisson marks.

The driving process has diffusion coefficient sqrt(eta)/mu and drift
lambda - eta s / mu^3; its reflection above past minima is decomposed into
excursions whose lengths (with mark counts) are the limit of rescaled
component sizes (with surpluses).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from critcm.degrees import ProbabilityVector, _rng


@dataclass(frozen=True)
class LimitParams:
    """Moment parameters: mu = E[D], eta = E[D^3] mu - E[D^2]^2, beta = 1/mu."""

    mu: float
    eta: float
    beta: float
    lam: float

    def time_scale(self) -> float:
        """Brownian rescaling constant c: excursions are c times standard ones."""
        return self.mu ** (4 / 3) / self.eta ** (1 / 3)

    def lambda_rate(self) -> float:
        """Effective drift multiplier: location lambda maps to standard
        location lambda * mu^(5/3) / eta^(2/3)."""
        return self.mu ** (5 / 3) / self.eta ** (2 / 3)


def limit_params(dist: ProbabilityVector, lam: float) -> LimitParams:
    """Exact moment arithmetic from a finite-support law; eta must be > 0."""
    mu = dist.moment(1)
    sigma2 = dist.moment(2)
    sigma3 = dist.moment(3)
    eta = sigma3 * mu - sigma2 * sigma2
    if eta <= 0:
        raise ValueError(f"degenerate distribution: eta = {eta:.6g} <= 0")
    if mu <= 0:
        raise ValueError("mean degree must be positive")
    return LimitParams(mu=mu, eta=eta, beta=1.0 / mu, lam=lam)


def _binom_pmf(l: int, j: int, q: float) -> float:
    return math.comb(l, j) * q**j * (1.0 - q) ** (l - j)


def exploded_law(dist: ProbabilityVector, p: float) -> ProbabilityVector:
    """Limit law of the detachment construction's degrees at retention p.

    Original vertices thin to Bin(l, sqrt(p)); the detached mass adds
    mu (1 - sqrt(p)) fresh degree-one vertices per original vertex, and the
    whole law renormalizes by zeta = 1 + mu (1 - sqrt(p)).
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must be in (0, 1]")
    sq = math.sqrt(p)
    mu = dist.moment(1)
    zeta = 1.0 + mu * (1.0 - sq)
    max_deg = int(dist.support.max())
    raw = np.zeros(max_deg + 1, dtype=np.float64)
    for l, r in zip(dist.support, dist.probs):
        for j in range(0, int(l) + 1):
            raw[j] += r * _binom_pmf(int(l), j, sq)
    raw[1] += mu * (1.0 - sq)
    raw /= zeta
    support = np.flatnonzero(raw > 0)
    return ProbabilityVector(support=support, probs=raw[support] / raw[support].sum())


def percolation_limit_params(dist: ProbabilityVector, nu: float, lam: float = 0.0):
    """Parameters of the percolation limit: the exploded law's moment
    parameters, the vertex-blowup factor zeta, and sqrt(nu).

    Returns (LimitParams, zeta, sqrt_nu); sizes in the limit are
    sqrt(nu) * zeta^(2/3) times the excursion lengths.
    """
    if nu <= 1.0:
        raise ValueError("percolation limit requires nu > 1")
    p = 1.0 / nu
    mu = dist.moment(1)
    zeta = 1.0 + mu * (1.0 - math.sqrt(p))
    tilde = exploded_law(dist, p)
    params = limit_params(tilde, lam)
    return params, zeta, math.sqrt(nu)


@dataclass
class Excursion:
    start: int        # first grid index with W > 0
    end: int          # terminating zero index (or last index if truncated)
    length: float
    truncated: bool
    marks: int = -1   # -1 until marked


@dataclass
class ExcursionSample:
    """Discretized reflected path with its excursion decomposition."""

    dt: float
    horizon: float
    B: np.ndarray
    W: np.ndarray
    params: LimitParams
    excursions: list[Excursion] = field(default_factory=list)


def sample_reflected(params: LimitParams, T: float, dt: float, seed) -> ExcursionSample:
    """Euler path of the drifted Brownian motion and its reflection.

    Drift is integrated exactly over each step (midpoint value of the
    parabola); W(k) = B(k) - min_{j<=k} B(j) exactly on the grid, so W has
    exact zeros at running minima.
    """
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    steps = T / dt
    n_steps = int(round(steps))
    if abs(steps - n_steps) > 1e-9 or n_steps < 1:
        raise ValueError("T/dt must be a positive integer")
    rng = _rng(seed)
    k = np.arange(1, n_steps + 1, dtype=np.float64)
    drift = (params.lam - params.eta * (k - 0.5) * dt / params.mu**3) * dt
    noise = rng.standard_normal(n_steps) * (math.sqrt(params.eta) / params.mu * math.sqrt(dt))
    B = np.empty(n_steps + 1, dtype=np.float64)
    B[0] = 0.0
    np.cumsum(drift + noise, out=B[1:])
    W = B - np.minimum.accumulate(B)
    sample = ExcursionSample(dt=dt, horizon=T, B=B, W=W, params=params)
    return sample


def extract_excursions(sample: ExcursionSample) -> np.ndarray:
    """Maximal positive stretches of W, bracketed by its grid zeros.

    An excursion's length is dt times its positive grid-point count (the
    terminating zero is the right endpoint); a stretch still positive at the
    horizon is truncated and flagged.  Returns lengths sorted non-increasing
    and records intervals on the sample.
    """
    W = sample.W
    pos = W > 0
    flat = pos.astype(np.int8)
    d = np.diff(flat)
    starts = np.flatnonzero(d == 1) + 1
    stops = np.flatnonzero(d == -1) + 1  # index of the terminating zero
    sample.excursions = []
    for i, s in enumerate(starts):
        if i < stops.size:
            e = int(stops[i])
            length = (e - s) * sample.dt
            sample.excursions.append(
                Excursion(start=int(s), end=e, length=length, truncated=False)
            )
        else:
            e = W.size - 1
            length = (e - s + 1) * sample.dt
            sample.excursions.append(
                Excursion(start=int(s), end=e, length=length, truncated=True)
            )
    lengths = np.array([x.length for x in sample.excursions], dtype=np.float64)
    return np.sort(lengths)[::-1]


def mark_excursions(sample: ExcursionSample, beta: float, seed) -> np.ndarray:
    """Poisson(beta * integral of W over the excursion) marks per excursion.

    The integral is the trapezoid rule on the grid (endpoints are zeros for
    complete excursions).  Returns the counts in the sample's interval order.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    rng = _rng(seed)
    W = sample.W
    counts = np.empty(len(sample.excursions), dtype=np.int64)
    for i, exc in enumerate(sample.excursions):
        lo = exc.start - 1  # bracketing zero (W[start-1] == 0)
        hi = exc.end
        seg = W[lo : hi + 1]
        integral = float(np.trapezoid(seg, dx=sample.dt))
        counts[i] = rng.poisson(beta * integral) if integral > 0 else 0
        exc.marks = int(counts[i])
    return counts


def order_size_surplus(sizes, marks) -> tuple[np.ndarray, np.ndarray]:
    """Sort (size, marks) pairs: size descending, marks descending on ties."""
    sizes = np.asarray(sizes, dtype=np.float64)
    marks = np.asarray(marks, dtype=np.int64)
    order = np.lexsort((-marks, -sizes))
    return sizes[order], marks[order]


@dataclass(frozen=True)
class LimitVector:
    """Ordered (size, marks) limit sample, with a truncation flag."""

    sizes: np.ndarray
    marks: np.ndarray
    truncated: bool


def sample_limit_vector(params: LimitParams, T: float, dt: float, seed,
                        top_k: int = 0, zeta: float = 1.0,
                        sqrt_nu: float = 1.0) -> LimitVector:
    """One replica of the ordered (size, marks) limit ensemble.

    Sizes are excursion lengths scaled by zeta^(2/3) and then sqrt_nu (both 1
    outside percolation mode); marks come from the unscaled path with rate
    params.beta.
    """
    rng = _rng(seed)
    sample = sample_reflected(params, T, dt, rng)
    extract_excursions(sample)
    marks = mark_excursions(sample, params.beta, rng)
    lengths = np.array([x.length for x in sample.excursions])
    scale = zeta ** (2 / 3) * sqrt_nu
    sizes, marks = order_size_surplus(lengths * scale, marks)
    truncated = any(x.truncated for x in sample.excursions)
    if top_k:
        sizes, marks = sizes[:top_k], marks[:top_k]
    return LimitVector(sizes=sizes, marks=marks, truncated=truncated)


def sample_ensemble(params: LimitParams, T: float, dt: float, replicas: int,
                    seed, top_k: int = 8, zeta: float = 1.0,
                    sqrt_nu: float = 1.0) -> list[LimitVector]:
    root = np.random.SeedSequence(seed)
    out = []
    for child in root.spawn(replicas):
        out.append(
            sample_limit_vector(
                params, T, dt, np.random.default_rng(child),
                top_k=top_k, zeta=zeta, sqrt_nu=sqrt_nu,
            )
        )
    return out


def ensemble_to_csv(vectors: list[LimitVector], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replica", "rank", "length", "marks", "truncated_flag"])
        for i, vec in enumerate(vectors):
            for r, (s, m) in enumerate(zip(vec.sizes, vec.marks), 1):
                w.writerow([i, r, f"{s:.9g}", int(m), int(vec.truncated)])


def auto_horizon(params: LimitParams, seed, pilot: int = 64) -> float:
    """Smallest horizon (in path time) with pilot median top excursion < T/4.

    Starts from 8 natural time units and doubles while the pilot median of
    the largest excursion exceeds a quarter of the horizon.
    """
    c = params.time_scale()
    lam_std = params.lam * params.lambda_rate()
    T = 8.0 * c * max(1.0, 1.0 + 0.75 * lam_std)
    rng = _rng(seed)
    for _ in range(8):
        dt = T / 2**14
        tops = []
        for _ in range(pilot):
            s = sample_reflected(params, T, dt, rng)
            lengths = extract_excursions(s)
            tops.append(lengths[0] if lengths.size else 0.0)
        if np.median(tops) < T / 4:
            return T
        T *= 2.0
    return T


def refinement_study(params: LimitParams, T: float, dt: float, replicas: int,
                     seed) -> dict:
    """Common-driver dt-refinement: the same Brownian increments at dt/2 are
    pair-summed to build the dt path; reports the relative drift of the
    median top-excursion length and the per-replica top-3 length shifts."""
    rng = _rng(seed)
    n_steps = int(round(T / dt))
    tops_coarse, tops_fine, shifts = [], [], []
    sq_eta_mu = math.sqrt(params.eta) / params.mu
    for _ in range(replicas):
        fine_noise = rng.standard_normal(2 * n_steps) * (sq_eta_mu * math.sqrt(dt / 2))
        for step, noise in ((dt / 2, fine_noise), (dt, fine_noise[0::2] + fine_noise[1::2])):
            m = noise.size
            k = np.arange(1, m + 1, dtype=np.float64)
            drift = (params.lam - params.eta * (k - 0.5) * step / params.mu**3) * step
            B = np.concatenate(([0.0], np.cumsum(drift + noise)))
            W = B - np.minimum.accumulate(B)
            sample = ExcursionSample(dt=step, horizon=T, B=B, W=W, params=params)
            lengths = extract_excursions(sample)
            top3 = np.sort(np.concatenate([lengths[:3], np.zeros(3)]))[::-1][:3]
            if step == dt:
                tops_coarse.append(top3)
            else:
                tops_fine.append(top3)
        shifts.append(np.abs(tops_coarse[-1] - tops_fine[-1]))
    med_c = float(np.median([t[0] for t in tops_coarse]))
    med_f = float(np.median([t[0] for t in tops_fine]))
    return {
        "median_top_coarse": med_c,
        "median_top_fine": med_f,
        "median_rel_drift": abs(med_c - med_f) / med_f if med_f else 0.0,
        "max_top3_shift": float(np.max(shifts)) if shifts else 0.0,
    }
