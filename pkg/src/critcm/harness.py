"""Monte Carlo experiment orchestration and statistics.

Finite-n ensembles are compared against simulated limit ensembles with
two-sample statistics; thresholds come from null calibration on
limit-vs-limit splits because the limit laws have no closed form.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from critcm import coalescent, dynamic, limit, multigraph, percolation
from critcm.degrees import DegreeSequence, ProbabilityVector, _rng, stats, tune_to_critical
from critcm.degrees import _largest_remainder_counts, _fix_parity


def child_seed(base: int, *keys) -> int:
    """Deterministic per-task integer seed from a base seed and index keys."""
    ss = np.random.SeedSequence([int(base)] + [int(k) & 0x7FFFFFFF for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def ks_distance(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov sup-distance of empirical CDFs."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(fa - fb).max())


def ks_pivotal(sample_a, sample_b) -> float:
    """D * sqrt(n m / (n + m)): sample-size-free scale for thresholding."""
    n, m = len(sample_a), len(sample_b)
    return ks_distance(sample_a, sample_b) * np.sqrt(n * m / (n + m))


def ks_null_quantile(sample, q: float, n_splits: int, seed) -> float:
    """q-quantile of the pivotal KS statistic over random half-splits."""
    rng = _rng(seed)
    x = np.asarray(sample, dtype=np.float64)
    vals = np.empty(n_splits)
    half = x.size // 2
    for i in range(n_splits):
        perm = rng.permutation(x.size)
        vals[i] = ks_pivotal(x[perm[:half]], x[perm[half : 2 * half]])
    return float(np.quantile(vals, q))


def ks_bootstrap_ci(sample_a, sample_b, n_boot: int, seed, level: float = 0.95):
    rng = _rng(seed)
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    vals = np.empty(n_boot)
    for i in range(n_boot):
        vals[i] = ks_distance(
            a[rng.integers(0, a.size, a.size)], b[rng.integers(0, b.size, b.size)]
        )
    lo, hi = np.quantile(vals, [(1 - level) / 2, 1 - (1 - level) / 2])
    return float(lo), float(hi)


def chi_square_counts(observed_a, observed_b, min_expected: float = 5.0):
    """Chi-square p-value that two integer samples share one law.

    Bins are pooled from the high end until every pooled expected count under
    the combined law reaches min_expected.
    """
    from scipy import stats as sps

    a = np.asarray(observed_a, dtype=np.int64)
    b = np.asarray(observed_b, dtype=np.int64)
    top = int(max(a.max(), b.max())) + 1
    ca = np.bincount(a, minlength=top).astype(np.float64)
    cb = np.bincount(b, minlength=top).astype(np.float64)
    total = ca + cb
    nz = total > 0
    ca, cb = ca[nz], cb[nz]
    na, nb = ca.sum(), cb.sum()

    def expectations(ca, cb):
        tot = ca + cb
        return tot * na / (na + nb), tot * nb / (na + nb)

    expected_a, expected_b = expectations(ca, cb)
    # pool the thinnest cell into its neighbor until all expectations clear
    while expected_a.size > 1 and min(expected_a.min(), expected_b.min()) < min_expected:
        i = int(np.argmin(expected_a + expected_b))
        j = i - 1 if i > 0 else i + 1
        ca[j] += ca[i]
        cb[j] += cb[i]
        ca, cb = np.delete(ca, i), np.delete(cb, i)
        expected_a, expected_b = expectations(ca, cb)
    stat = float(
        ((ca - expected_a) ** 2 / expected_a).sum()
        + ((cb - expected_b) ** 2 / expected_b).sum()
    )
    dof = max(ca.size - 1, 1)
    return float(sps.chi2.sf(stat, dof))


def chi_square_vs_law(codes, law: dict, min_expected: float = 5.0) -> float:
    """Chi-square p-value of observed outcome codes against exact
    probabilities; low-expectation outcomes are pooled."""
    from scipy import stats as sps

    codes = np.asarray(codes)
    n = codes.size
    keys = sorted(law)
    probs = np.array([law[k] for k in keys], dtype=np.float64)
    counts = np.array([(codes == k).sum() for k in keys], dtype=np.float64)
    other = n - counts.sum()
    if other:
        raise ValueError("observed an outcome with zero probability under the law")
    order = np.argsort(-probs)
    probs, counts = probs[order], counts[order]
    exp = probs * n
    while exp.size > 1 and exp[-1] < min_expected:
        exp[-2] += exp[-1]
        counts[-2] += counts[-1]
        probs[-2] += probs[-1]
        exp, counts, probs = exp[:-1], counts[:-1], probs[:-1]
    stat = float(((counts - exp) ** 2 / exp).sum())
    return float(sps.chi2.sf(stat, max(exp.size - 1, 1)))


# ---------------------------------------------------------------------------
# energy distance (2-d joint comparison)
# ---------------------------------------------------------------------------


def energy_permutation_test(x: np.ndarray, y: np.ndarray, n_perms: int, seed):
    """Two-sample energy-distance test with a permutation p-value.

    x, y: (n, d) and (m, d) point sets.  Returns (statistic, p_value).
    """
    rng = _rng(seed)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = x.shape[0], y.shape[0]
    pts = np.vstack([x, y])
    dif = pts[:, None, :] - pts[None, :, :]
    dmat = np.sqrt((dif * dif).sum(axis=2))
    row_sums = dmat.sum(axis=1)
    total = row_sums.sum()

    def estat(idx_x):
        sub = dmat[np.ix_(idx_x, idx_x)]
        s_xx = sub.sum()
        r_x = row_sums[idx_x].sum()
        s_xy = r_x - s_xx
        s_yy = total - 2 * r_x + s_xx
        return 2 * s_xy / (n * m) - s_xx / (n * n) - s_yy / (m * m)

    obs = estat(np.arange(n))
    count = 0
    for _ in range(n_perms):
        perm = rng.permutation(n + m)
        if estat(perm[:n]) >= obs:
            count += 1
    return float(obs), (count + 1) / (n_perms + 1)


# ---------------------------------------------------------------------------
# limit-side joint ensemble via the coalescent
# ---------------------------------------------------------------------------


def evolve_limit_pair(params: limit.LimitParams, lam0: float, lam1: float,
                      T: float, dt: float, seed, zeta: float = 1.0,
                      sqrt_nu: float = 1.0, max_particles: int = 256):
    """One joint limit replica: largest size at lam0 and at lam1.

    The excursion lengths at lam0, divided by the Brownian time-scale c, are
    a multiplicative-coalescent state; running it for (lam1 - lam0) times the
    effective rate gives the lam1 ensemble on the same probability space.
    """
    rng = _rng(seed)
    p0 = limit.LimitParams(mu=params.mu, eta=params.eta, beta=params.beta, lam=lam0)
    sample = limit.sample_reflected(p0, T, dt, rng)
    lengths = limit.extract_excursions(sample)
    if lengths.size == 0:
        return 0.0, 0.0
    c = params.time_scale()
    chi = params.lambda_rate()
    size_scale = zeta ** (2 / 3) * sqrt_nu
    top0 = lengths[0] * size_scale
    masses = lengths[:max_particles] / c
    state = coalescent.CoalescentState.from_masses(masses)
    out = coalescent.simulate(state, (lam1 - lam0) * chi, rng)
    top1 = float(out.masses.max()) * c * size_scale
    return float(top0), float(top1)


def joint_limit_ensemble(params, lam0, lam1, T, dt, replicas, seed,
                         zeta=1.0, sqrt_nu=1.0) -> np.ndarray:
    root = np.random.SeedSequence(seed)
    out = np.empty((replicas, 2))
    for i, child in enumerate(root.spawn(replicas)):
        out[i] = evolve_limit_pair(
            params, lam0, lam1, T, dt, np.random.default_rng(child),
            zeta=zeta, sqrt_nu=sqrt_nu,
        )
    return out


# ---------------------------------------------------------------------------
# experiment orchestration
# ---------------------------------------------------------------------------

_COLUMNS = ["pipeline", "n", "lambda", "replica", "rank", "size",
            "rescaled_size", "surplus", "seed"]


@dataclass
class ExperimentConfig:
    dist: dict
    n_grid: list
    lambda_grid: list
    replicas: int
    seed: int
    pipeline: str = "cm"       # cm | percolation | grid | dynamic
    top_k: int = 3
    out: str = "ensemble.csv"
    jobs: int = 1

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("replica count must be >= 2")
        if self.pipeline not in ("cm", "percolation", "grid", "dynamic"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if not self.n_grid or not self.lambda_grid:
            raise ValueError("n_grid and lambda_grid must be non-empty")

    @staticmethod
    def load(path) -> "ExperimentConfig":
        cfg = json.loads(Path(path).read_text())
        return ExperimentConfig(**cfg)

    def dist_vector(self) -> ProbabilityVector:
        return ProbabilityVector.from_mapping(self.dist)


def materialize(dist: ProbabilityVector, n: int, seed) -> DegreeSequence:
    """Deterministic counts (largest remainder) with the parity fix."""
    counts = _largest_remainder_counts(dist.probs, n)
    degrees = np.repeat(dist.support, counts)
    return DegreeSequence(_fix_parity(degrees, _rng(seed)))


def _replica_rows(cfg: ExperimentConfig, n: int, i_n: int, replica: int) -> list:
    seed = child_seed(cfg.seed, i_n, replica)
    rng = np.random.default_rng(seed)
    dist = cfg.dist_vector()
    rows = []
    scale = n ** (-2 / 3)

    def emit(lam, sizes, surps):
        order = np.lexsort((-np.asarray(surps), -np.asarray(sizes)))[: cfg.top_k]
        for r, idx in enumerate(order, 1):
            rows.append(
                dict(
                    pipeline=cfg.pipeline, n=n, **{"lambda": float(lam)},
                    replica=replica, rank=r, size=int(sizes[idx]),
                    rescaled_size=float(sizes[idx] * scale),
                    surplus=int(surps[idx]), seed=seed,
                )
            )

    if cfg.pipeline == "cm":
        for lam in cfg.lambda_grid:
            ds = tune_to_critical(dist, n, lam, child_seed(cfg.seed, i_n, 0xD5))
            g = multigraph.uniform_match(ds, rng)
            comps = multigraph.components(g)
            emit(lam, comps.sizes, comps.surplus)
    elif cfg.pipeline == "percolation":
        ds = materialize(dist, n, child_seed(cfg.seed, i_n, 0xD5))
        nu_n = stats(ds).nu_n
        for lam in cfg.lambda_grid:
            p = percolation.p_critical(nu_n, n, lam)
            res = percolation.percolate_via_explosion(ds, p, rng)
            comps = multigraph.components(res.graph)
            emit(lam, comps.sizes, comps.surplus)
    elif cfg.pipeline == "grid":
        ds = materialize(dist, n, child_seed(cfg.seed, i_n, 0xD5))
        grid = percolation.coupled_grid(ds, cfg.lambda_grid, rng)
        for snap in grid.snapshots:
            emit(snap.lam, snap.sizes, snap.surplus)
    elif cfg.pipeline == "dynamic":
        ds = materialize(dist, n, child_seed(cfg.seed, i_n, 0xD5))
        nu_n = stats(ds).nu_n
        ts = [dynamic.t_map(nu_n, n, lam) for lam in cfg.lambda_grid]
        res = dynamic.run_dynamic(ds, max(ts), rng, snapshot_times=ts)
        for lam, snap in zip(cfg.lambda_grid, res.snapshots):
            emit(lam, snap.sizes, snap.surplus)
    return rows


def _replica_task(args):
    return _replica_rows(*args)


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """Run (or resume) the configured sweep; rows go to cfg.out atomically.

    Completed (n, replica) pairs found in an existing partial file are not
    recomputed; every row embeds its replica seed.
    """
    out_path = Path(cfg.out)
    partial = out_path.with_suffix(out_path.suffix + ".partial")
    done = set()
    rows: list[dict] = []
    if partial.exists():
        rows = read_table(partial)
        done = {(r["n"], r["replica"]) for r in rows}

    tasks = [
        (cfg, n, i_n, rep)
        for i_n, n in enumerate(cfg.n_grid)
        for rep in range(cfg.replicas)
        if (n, rep) not in done
    ]
    mode = "a" if partial.exists() else "w"
    with open(partial, mode, newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_COLUMNS)
        if mode == "w":
            writer.writeheader()
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                for new_rows in pool.map(_replica_task, tasks, chunksize=4):
                    for row in new_rows:
                        writer.writerow(row)
                    fh.flush()
                    rows.extend(new_rows)
        else:
            for task in tasks:
                new_rows = _replica_task(task)
                for row in new_rows:
                    writer.writerow(row)
                fh.flush()
                rows.extend(new_rows)
    os.replace(partial, out_path)
    return rows


def read_table(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                dict(
                    pipeline=rec["pipeline"],
                    n=int(rec["n"]),
                    **{"lambda": float(rec["lambda"])},
                    replica=int(rec["replica"]),
                    rank=int(rec["rank"]),
                    size=int(rec["size"]),
                    rescaled_size=float(rec["rescaled_size"]),
                    surplus=int(rec["surplus"]),
                    seed=int(rec["seed"]),
                )
            )
    return rows


def rank_sample(rows, n: int, lam: float, rank: int) -> np.ndarray:
    """Rescaled sizes of one rank across replicas."""
    return np.array(
        [
            r["rescaled_size"]
            for r in rows
            if r["n"] == n and abs(r["lambda"] - lam) < 1e-12 and r["rank"] == rank
        ]
    )


def rank_surplus(rows, n: int, lam: float, rank: int) -> np.ndarray:
    return np.array(
        [
            r["surplus"]
            for r in rows
            if r["n"] == n and abs(r["lambda"] - lam) < 1e-12 and r["rank"] == rank
        ],
        dtype=np.int64,
    )


def limit_rank_samples(vectors, rank: int, drop_truncated: bool = True):
    sizes, marks = [], []
    for v in vectors:
        if drop_truncated and v.truncated:
            continue
        if v.sizes.size >= rank:
            sizes.append(v.sizes[rank - 1])
            marks.append(v.marks[rank - 1])
    return np.array(sizes), np.array(marks, dtype=np.int64)


def compare_to_limit(rows, vectors, n: int, lam: float, ranks: int, seed,
                     null_splits: int = 200, quantile: float = 0.99) -> dict:
    """Per-rank KS against the limit ensemble with null-calibrated thresholds
    and a chi-square on the rank-1 surplus marginal."""
    report = {"n": n, "lambda": lam, "ranks": {}}
    rng = _rng(seed)
    for rank in range(1, ranks + 1):
        finite = rank_sample(rows, n, lam, rank)
        lim, _ = limit_rank_samples(vectors, rank)
        if finite.size == 0 or lim.size == 0:
            raise ValueError(f"no data at rank {rank} (metadata mismatch?)")
        kpiv = ks_pivotal(finite, lim)
        thr = ks_null_quantile(lim, quantile, null_splits, rng)
        lo, hi = ks_bootstrap_ci(finite, lim, 200, rng)
        report["ranks"][rank] = {
            "ks": ks_distance(finite, lim),
            "ks_pivotal": kpiv,
            "threshold_pivotal": thr,
            "ci95": [lo, hi],
            "pass": bool(kpiv <= thr),
        }
    finite_sp = rank_surplus(rows, n, lam, 1)
    _, lim_marks = limit_rank_samples(vectors, 1)
    p_sp = chi_square_counts(finite_sp, lim_marks)
    report["surplus_rank1_chi2_p"] = p_sp
    report["surplus_pass"] = bool(p_sp >= 1 - quantile)
    report["pass"] = bool(
        all(v["pass"] for v in report["ranks"].values()) and report["surplus_pass"]
    )
    return report


def joint_lambda_check(grid_rows, joint_limit: np.ndarray, n: int, lam0: float,
                       lam1: float, seed, n_perms: int = 1999) -> dict:
    """Pathwise refinement plus the 2-d energy-distance permutation test
    between finite-n (rank-1 at lam0, rank-1 at lam1) and the limit pairs."""
    reps = sorted({r["replica"] for r in grid_rows})
    finite = np.empty((len(reps), 2))
    ok_refine = 0
    by_rep = {}
    for r in grid_rows:
        by_rep.setdefault(r["replica"], {}).setdefault(r["lambda"], {})[r["rank"]] = r
    for i, rep in enumerate(reps):
        s0 = by_rep[rep][lam0][1]["rescaled_size"]
        s1 = by_rep[rep][lam1][1]["rescaled_size"]
        finite[i] = (s0, s1)
        if s1 >= s0 - 1e-12:
            ok_refine += 1
    stat, pval = energy_permutation_test(finite, joint_limit, n_perms, seed)
    return {
        "n": n,
        "lambda0": lam0,
        "lambda1": lam1,
        "refinement_fraction": ok_refine / len(reps),
        "energy_stat": stat,
        "energy_p": pval,
        "pass": bool(ok_refine == len(reps) and pval >= 0.001),
    }


def write_summary(report: dict, path) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(report, indent=2, default=float))
    os.replace(tmp, path)
