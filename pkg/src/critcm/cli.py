"""Command-line front end: one binary, reproducible runs.

Column orders are stable and documented per subcommand in --help.  CM_SEED is
the fallback seed when --seed is omitted.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from critcm import (
    coalescent,
    dynamic as dyn,
    exploration,
    harness,
    limit as lim,
    multigraph,
    percolation,
)
from critcm.degrees import DegreeSequence, ProbabilityVector, stats, sample_iid, tune_to_critical


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise click.BadParameter(f"malformed grid {text!r}; expected comma-separated reals")


def _load_degrees(path: str) -> DegreeSequence:
    try:
        return DegreeSequence.load(path)
    except OSError as exc:
        raise click.ClickException(f"cannot read degree file {path}: {exc}")


seed_option = click.option(
    "--seed", type=int, required=True, envvar="CM_SEED",
    help="RNG seed (falls back to CM_SEED).",
)
dry_run_option = click.option(
    "--dry-run", is_flag=True, help="Validate the configuration and exit."
)


@click.group()
def main():
    """Critical-window configuration model toolkit."""


@main.command()
@click.option("--dist", "dist_path", required=True, type=click.Path(exists=True),
              help="JSON degree law, e.g. {\"1\": 0.5, \"3\": 0.5}.")
@click.option("--n", type=int, required=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True,
              help="Window location for criticality tuning.")
@click.option("--iid", is_flag=True, help="Sample i.i.d. instead of tuning.")
@seed_option
@click.option("--out", required=True, type=click.Path())
@dry_run_option
def gen(dist_path, n, lam, iid, seed, out, dry_run):
    """Generate a degree sequence (newline ints, or JSON for .json outputs)."""
    dist = ProbabilityVector.load(dist_path)
    if dry_run:
        click.echo("config ok")
        return
    ds = sample_iid(dist, n, seed) if iid else tune_to_critical(dist, n, lam, seed)
    ds.save(out)
    st = stats(ds)
    click.echo(f"wrote {out}: n={ds.n} ell={st.ell_n} nu_n={st.nu_n:.6f}")


@main.command()
@click.option("--deg", "deg_path", required=True, type=click.Path(exists=True))
@seed_option
@click.option("--out", required=True, type=click.Path(),
              help="Component CSV: rank,size,rescaled_size,surplus.")
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Optional per-stage walk CSV: stage,vertex,degree,c,S,s,A.")
@dry_run_option
def explore(deg_path, seed, out, trace_path, dry_run):
    """Explore a fresh uniform pairing; write the ordered component vector."""
    ds = _load_degrees(deg_path)
    if dry_run:
        click.echo("config ok")
        return
    trace = exploration.explore(ds, seed)
    ht = exploration.hitting_times(trace)
    sizes = ht.sizes()
    surps = exploration.surplus_per_component(trace, ht)
    starts = trace.vertex[ht.tau[:-1]]
    order = np.lexsort((starts, -surps, -sizes))
    scale = ds.n ** (-2 / 3)
    with open(out, "w", newline="") as fh:
        fh.write("rank,size,rescaled_size,surplus\n")
        for r, i in enumerate(order, 1):
            fh.write(f"{r},{sizes[i]},{sizes[i] * scale:.9g},{surps[i]}\n")
    if trace_path:
        trace.to_csv(trace_path)
    click.echo(f"wrote {out}: {sizes.size} components")


@main.command()
@click.option("--deg", "deg_path", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lam", type=float, default=None,
              help="Single window location (sets p via the window map).")
@click.option("--p", "p_flat", type=float, default=None, help="Explicit retention p.")
@click.option("--grid", default=None, help="Comma-separated lambda grid (coupled).")
@click.option("--method", type=click.Choice(["explosion", "direct"]),
              default="explosion", show_default=True)
@seed_option
@click.option("--out", required=True, type=click.Path())
@dry_run_option
def percolate(deg_path, lam, p_flat, grid, method, seed, out, dry_run):
    """Percolate: single level (explosion or direct) or a coupled grid.

    Grid CSV: lambda,rank,size,rescaled_size,surplus,open_halfedges.
    """
    ds = _load_degrees(deg_path)
    nu_n = stats(ds).nu_n
    if grid is not None:
        lambdas = _parse_grid(grid)
        if dry_run:
            for g_lam in lambdas:
                percolation.p_critical(nu_n, ds.n, g_lam)
            click.echo("config ok")
            return
        result = percolation.coupled_grid(ds, lambdas, seed)
        result.to_csv(out)
        click.echo(f"wrote {out}: {len(lambdas)} lambda levels, refines={result.refines()}")
        return
    if (lam is None) == (p_flat is None):
        raise click.UsageError("exactly one of --lambda/--p is required without --grid")
    p = p_flat if p_flat is not None else percolation.p_critical(nu_n, ds.n, lam)
    if dry_run:
        click.echo("config ok")
        return
    if method == "explosion":
        res = percolation.percolate_via_explosion(ds, p, seed)
        g = res.graph
    else:
        g = percolation.percolate_direct(multigraph.uniform_match(ds, seed), p, seed)
    comps = multigraph.components(g)
    multigraph.components_to_csv(comps, out)
    click.echo(f"wrote {out}: p={p:.6f} components={len(comps)}")


@main.command()
@click.option("--deg", "deg_path", required=True, type=click.Path(exists=True))
@click.option("--lambda-grid", "lambda_grid", required=True,
              help="Comma-separated window locations for snapshots.")
@seed_option
@click.option("--out", required=True, type=click.Path(),
              help="CSV: lambda,rank,rescaled_size,rescaled_mass,surplus,bad_edges_so_far.")
@dry_run_option
def dynamic(deg_path, lambda_grid, seed, out, dry_run):
    """Exponential-clock construction with snapshots at t(lambda)."""
    ds = _load_degrees(deg_path)
    lambdas = _parse_grid(lambda_grid)
    nu_n = stats(ds).nu_n
    if nu_n <= 1:
        raise click.ClickException("dynamic snapshots need a supercritical sequence")
    if dry_run:
        click.echo("config ok")
        return
    ts = [dyn.t_map(nu_n, ds.n, g_lam) for g_lam in lambdas]
    res = dyn.run_dynamic(ds, max(ts), seed, snapshot_times=ts)
    scale = ds.n ** (-2 / 3)
    beta_ref = None
    with open(out, "w", newline="") as fh:
        fh.write("lambda,rank,rescaled_size,rescaled_mass,surplus,bad_edges_so_far\n")
        for g_lam, snap in zip(lambdas, res.snapshots):
            if beta_ref is None:
                beta_ref = float(np.sqrt(max(snap.s1, 1) * (nu_n - 1.0) * ds.n ** (1 / 3)))
            order = np.lexsort((-snap.surplus, -snap.sizes))
            for r, i in enumerate(order[:64], 1):
                fh.write(
                    f"{g_lam:.9g},{r},{snap.sizes[i] * scale:.9g},"
                    f"{snap.masses[i] / beta_ref:.9g},{snap.surplus[i]},0\n"
                )
    click.echo(f"wrote {out}: {len(res.snapshots)} snapshots")


@main.command()
@click.option("--masses", "masses_path", required=True, type=click.Path(exists=True),
              help="JSON list of initial masses (weights default to masses).")
@click.option("--t-end", type=float, required=True)
@seed_option
@click.option("--out", required=True, type=click.Path(),
              help="Merge log CSV: time,i,j,new_mass,new_weight.")
@dry_run_option
def coalescent_cmd(masses_path, t_end, seed, out, dry_run):
    """Simulate the multiplicative coalescent from the given masses."""
    masses = json.loads(Path(masses_path).read_text())
    if dry_run:
        click.echo("config ok")
        return
    state = coalescent.CoalescentState.from_masses(np.asarray(masses, dtype=float))
    log: list = []
    final = coalescent.simulate(state, t_end, seed, log=log)
    coalescent.merge_log_to_csv(log, out)
    click.echo(f"wrote {out}: {len(log)} merges, {int((final.masses > 0).sum())} live particles")


main.add_command(coalescent_cmd, name="coalescent")


@main.command(name="limit")
@click.option("--dist", "dist_path", required=True, type=click.Path(exists=True))
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--horizon", "T", type=float, default=None,
              help="Path horizon (auto-calibrated when omitted).")
@click.option("--dt", type=float, default=None, help="Grid step (default T/2^20).")
@click.option("--replicas", type=int, default=100, show_default=True)
@click.option("--top-k", type=int, default=8, show_default=True)
@click.option("--percolation-nu", "nu", type=float, default=None,
              help="Percolation mode: supercritical nu of the base law.")
@seed_option
@click.option("--out", required=True, type=click.Path(),
              help="Ensemble CSV: replica,rank,length,marks,truncated_flag.")
@dry_run_option
def limit_cmd(dist_path, lam, T, dt, replicas, top_k, nu, seed, out, dry_run):
    """Sample the ordered excursion-length/mark ensemble of the limit."""
    dist = ProbabilityVector.load(dist_path)
    zeta = sqrt_nu = 1.0
    if nu is not None:
        params, zeta, sqrt_nu = lim.percolation_limit_params(dist, nu, lam)
    else:
        params = lim.limit_params(dist, lam)
    if dry_run:
        click.echo("config ok")
        return
    if T is None:
        T = lim.auto_horizon(params, seed)
    if dt is None:
        dt = T / 2**20
    vectors = lim.sample_ensemble(params, T, dt, replicas, seed, top_k=top_k,
                                  zeta=zeta, sqrt_nu=sqrt_nu)
    lim.ensemble_to_csv(vectors, out)
    click.echo(f"wrote {out}: {replicas} replicas, T={T:.4g}, dt={dt:.4g}")


@main.command()
@click.option("--finite", "finite_path", required=True, type=click.Path(exists=True),
              help="Sweep ensemble CSV (from `cm sweep`).")
@click.option("--limit", "limit_path", required=True, type=click.Path(exists=True),
              help="Limit ensemble CSV (from `cm limit`).")
@click.option("--n", type=int, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--ranks", type=int, default=3, show_default=True)
@seed_option
@click.option("--out", required=True, type=click.Path(), help="Summary JSON.")
@click.option("--format", "fmt", type=click.Choice(["json"]), default="json")
def compare(finite_path, limit_path, n, lam, ranks, seed, out, fmt):
    """Per-rank KS comparison; exit code 1 if any threshold fails."""
    rows = harness.read_table(finite_path)
    vectors = _read_limit_csv(limit_path)
    report = harness.compare_to_limit(rows, vectors, n, lam, ranks, seed)
    harness.write_summary(report, out)
    click.echo(json.dumps(report, indent=2, default=float))
    if not report["pass"]:
        sys.exit(1)


def _read_limit_csv(path):
    import csv as _csv

    by_rep: dict[int, dict] = {}
    with open(path, newline="") as fh:
        for rec in _csv.DictReader(fh):
            rep = int(rec["replica"])
            entry = by_rep.setdefault(rep, {"sizes": [], "marks": [], "trunc": False})
            entry["sizes"].append(float(rec["length"]))
            entry["marks"].append(int(rec["marks"]))
            entry["trunc"] = entry["trunc"] or bool(int(rec["truncated_flag"]))
    out = []
    for rep in sorted(by_rep):
        e = by_rep[rep]
        out.append(
            lim.LimitVector(
                sizes=np.array(e["sizes"]),
                marks=np.array(e["marks"], dtype=np.int64),
                truncated=e["trunc"],
            )
        )
    return out


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="JSON ExperimentConfig.")
@click.option("--jobs", type=int, default=None, help="Parallel replica workers.")
@dry_run_option
def sweep(config_path, jobs, dry_run):
    """Run (or resume) a replica sweep defined by a JSON config."""
    cfg = harness.ExperimentConfig.load(config_path)
    if jobs is not None:
        cfg.jobs = jobs
    if dry_run:
        click.echo("config ok")
        return
    rows = harness.run_experiment(cfg)
    click.echo(f"wrote {cfg.out}: {len(rows)} rows")


if __name__ == "__main__":
    main()
