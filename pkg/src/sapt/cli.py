"""Experiment harness: evolve repertoires, run transfer experiments, report.

Exit codes: 0 success, 2 config/validation error, 3 runtime failure. The
SAPT_WORKERS environment variable caps how many replicate adaptations run in
parallel (default 1; outputs are byte-identical either way since every
replicate derives its own seed and writes its own file).
"""

from __future__ import annotations

import csv
import functools
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .adapt import adapt_loop
from .baselines import run_cbo, run_no_gp_safety
from .config import METHODS, ExperimentConfig, load_config
from .envs import make_env, make_real_env
from .errors import ConfigError, SaptError
from .evolve import map_elites
from .repertoire import Repertoire

CBO_SAFETY_SCALE = {"asteroid": 100.0, "arm": 10.0}


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except SaptError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except Exception:
            traceback.print_exc()
            sys.exit(3)

    return wrapper


def _n_workers(replicates: int) -> int:
    cap = int(os.environ.get("SAPT_WORKERS", "1"))
    return max(1, min(replicates, cap))


@click.group()
def main():
    """Safe sim-to-real policy transfer experiments."""


# ---------------------------------------------------------------- evolve


@main.command("evolve")
@click.option("--config", "config_path", required=True, help="TOML file or preset name.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override config seed.")
@click.option("--budget", type=int, default=None, help="Override evolve.budget.")
@click.option("--n-dynamics", type=int, default=None, help="Override evolve.n_dynamics.")
@_guarded
def cmd_evolve(config_path, out_dir, seed, budget, n_dynamics):
    """Generate the safety repertoire and write it with progress records."""
    cfg = load_config(
        config_path,
        {"seed": seed, "evolve.budget": budget, "evolve.n_dynamics": n_dynamics},
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = make_env(cfg.env_id, **cfg.env_overrides)

    rows = []

    def progress(evals, rep):
        safeties = rep.safety_priors()
        rows.append(
            [evals, len(rep), repr(float(safeties.max())), repr(float(safeties.mean()))]
        )

    rep = map_elites(env, cfg.evolve, grid=cfg.grid, progress=progress)
    rep.save(out / "repertoire.jsonl")

    with open(out / "progress.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["evaluations", "cells_filled", "best_safety", "mean_safety"])
        writer.writerows(rows)

    safeties = rep.safety_priors()
    summary = {
        "env_id": cfg.env_id,
        "n_dynamics": cfg.evolve.n_dynamics,
        "budget": cfg.evolve.budget,
        "seed": cfg.evolve.seed,
        "cells_filled": len(rep),
        "coverage_fraction": len(rep) / rep.grid.n_cells,
        "safety_min": float(safeties.min()),
        "safety_mean": float(safeties.mean()),
        "safety_max": float(safeties.max()),
    }
    with open(out / "evolve_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    click.echo(
        f"evolved {len(rep)} cells ({summary['coverage_fraction']:.1%} coverage) "
        f"-> {out / 'repertoire.jsonl'}"
    )


# ----------------------------------------------------------------- adapt


def _run_replicate(args) -> dict:
    index, cfg, method, rep, out_dir = args
    seed_i = cfg.seed + index
    psi_ss, env_ss = np.random.SeedSequence(seed_i).spawn(2)
    if cfg.psi_real is not None:
        psi_real = cfg.psi_real
    else:
        bounds = make_env(cfg.env_id, **cfg.env_overrides).dynamics_bounds
        psi_real = np.random.default_rng(psi_ss).uniform(bounds[:, 0], bounds[:, 1])

    env = make_env(cfg.env_id, **cfg.env_overrides)
    real_env = make_real_env(env, psi_real, process_noise=cfg.process_noise, seed=env_ss)
    adapt_cfg = replace(cfg.adapt, seed=seed_i)

    if method == "cbo":
        log = run_cbo(
            real_env,
            env.policy_bounds,
            adapt_cfg,
            safety_scale=CBO_SAFETY_SCALE.get(cfg.env_id, 100.0),
        )
    elif method == "no-gp-safety":
        log = run_no_gp_safety(
            rep, real_env, adapt_cfg,
            reward_hyper=cfg.gp_reward, safety_hyper=cfg.gp_safety,
        )
    else:
        # "sapt" and "single-dynamics" share the full loop; the latter just
        # runs on a repertoire evolved under one condition.
        log = adapt_loop(
            rep, real_env, adapt_cfg,
            reward_hyper=cfg.gp_reward, safety_hyper=cfg.gp_safety, method=method,
        )

    log.to_csv(Path(out_dir) / f"replicate_{index:02d}.csv")
    summary = log.summary()
    summary["replicate"] = index
    summary["seed"] = seed_i
    summary["psi_real"] = [float(v) for v in np.atleast_1d(psi_real)]
    summary["rewards"] = [e.observed_reward for e in log.episodes]
    summary["safeties"] = [e.observed_safety for e in log.episodes]
    return summary


def _aggregate(summaries: list[dict], max_trials: int) -> dict:
    n = len(summaries)
    rewards = np.full((n, max_trials), np.nan)
    for i, s in enumerate(summaries):
        r = s["rewards"]
        rewards[i, : len(r)] = r
    with np.errstate(all="ignore"):
        med = np.nanmedian(rewards, axis=0)
        q25 = np.nanquantile(rewards, 0.25, axis=0)
        q75 = np.nanquantile(rewards, 0.75, axis=0)
    violations = np.array([s["violations"] for s in summaries], dtype=float)
    return {
        "reward_median": [float(v) for v in med],
        "reward_q25": [float(v) for v in q25],
        "reward_q75": [float(v) for v in q75],
        "violations_mean": float(violations.mean()),
        "violations_std": float(violations.std(ddof=1)) if n > 1 else 0.0,
    }


@main.command("adapt")
@click.option("--config", "config_path", required=True, help="TOML file or preset name.")
@click.option("--repertoire", "repertoire_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Repertoire file (unused by --method cbo).")
@click.option("--method", type=click.Choice(METHODS), default="sapt", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override config seed.")
@click.option("--replicates", type=int, default=None, help="Override adapt.replicates.")
@click.option("--max-trials", type=int, default=None, help="Override adapt.max_trials.")
@click.option("--kappa", type=float, default=None, help="Override adapt.kappa.")
@_guarded
def cmd_adapt(config_path, repertoire_path, method, out_dir, seed, replicates, max_trials, kappa):
    """Run replicated transfer experiments against held-out dynamics."""
    cfg = load_config(
        config_path,
        {
            "seed": seed,
            "adapt.replicates": replicates,
            "adapt.max_trials": max_trials,
            "adapt.kappa": kappa,
        },
    )
    rep = None
    if method != "cbo":
        if repertoire_path is None:
            raise ConfigError(f"--repertoire is required for method {method!r}")
        rep = Repertoire.load(repertoire_path)
        if rep.env_id != cfg.env_id:
            raise ConfigError(
                f"repertoire env_id {rep.env_id!r} does not match config env_id {cfg.env_id!r}"
            )
        if method == "single-dynamics" and len(rep.dynamics_conditions) != 1:
            raise ConfigError(
                f"method 'single-dynamics' needs a repertoire evolved with one dynamics "
                f"condition, this one has {len(rep.dynamics_conditions)}"
            )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(i, cfg, method, rep, str(out)) for i in range(cfg.replicates)]
    workers = _n_workers(cfg.replicates)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_replicate, jobs))
    else:
        summaries = [_run_replicate(j) for j in jobs]

    agg = {
        "method": method,
        "env_id": cfg.env_id,
        "replicates": cfg.replicates,
        "max_trials": cfg.adapt.max_trials,
        "seed": cfg.seed,
        **_aggregate(summaries, cfg.adapt.max_trials),
        "replicate_summaries": [
            {k: s[k] for k in ("replicate", "seed", "best_reward", "violations", "episodes", "psi_real")}
            for s in summaries
        ],
    }
    with open(out / "adapt_summary.json", "w", encoding="utf-8") as fh:
        json.dump(agg, fh, indent=2)
        fh.write("\n")
    click.echo(
        f"{method}: {cfg.replicates} replicates, violations "
        f"{agg['violations_mean']:.2f} +- {agg['violations_std']:.2f}, "
        f"median final reward {agg['reward_median'][-1]:.3f}"
    )


# ---------------------------------------------------------------- report


def _read_run_dir(run_dir: Path):
    """Collect per-episode reward/safety/violation columns from one run dir.
    Returns (method, rewards, safeties, violations_per_replicate) or None."""
    files = sorted(run_dir.glob("replicate_*.csv"))
    if not files:
        return None
    method = None
    rewards, safeties, violations = [], [], []
    for f in files:
        with open(f, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            return None
        method = rows[0]["method"]
        rewards.append([float(r["reward"]) for r in rows])
        safeties.append([float(r["safety"]) for r in rows])
        violations.append(sum(int(r["violated"]) for r in rows))
    return method, rewards, safeties, violations


@main.command("report")
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def cmd_report(run_dirs, out_path):
    """Merge run directories into plot-ready comparison CSVs."""
    runs = []
    for d in run_dirs:
        run_dir = Path(d)
        parsed = _read_run_dir(run_dir) if run_dir.is_dir() else None
        if parsed is None:
            click.echo(f"warning: skipping {d} (missing or partial run)", err=True)
            continue
        runs.append(parsed)
    if not runs:
        raise ConfigError("report: no usable run directories")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "episode", "reward_median", "reward_q25", "reward_q75",
             "safety_median", "safety_q25", "safety_q75"]
        )
        for method, rewards, safeties, _ in runs:
            n_ep = max(len(r) for r in rewards)
            rmat = np.full((len(rewards), n_ep), np.nan)
            smat = np.full((len(safeties), n_ep), np.nan)
            for i, (r, s) in enumerate(zip(rewards, safeties)):
                rmat[i, : len(r)] = r
                smat[i, : len(s)] = s
            with np.errstate(all="ignore"):
                for ep in range(n_ep):
                    writer.writerow(
                        [method, ep]
                        + [repr(float(v)) for v in (
                            np.nanmedian(rmat[:, ep]),
                            np.nanquantile(rmat[:, ep], 0.25),
                            np.nanquantile(rmat[:, ep], 0.75),
                            np.nanmedian(smat[:, ep]),
                            np.nanquantile(smat[:, ep], 0.25),
                            np.nanquantile(smat[:, ep], 0.75),
                        )]
                    )

    violations_path = out_path.with_name(out_path.stem + "_violations" + out_path.suffix)
    with open(violations_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "mean", "std"])
        for method, _, _, violations in runs:
            v = np.asarray(violations, dtype=float)
            std = float(v.std(ddof=1)) if len(v) > 1 else 0.0
            writer.writerow([method, repr(float(v.mean())), repr(std)])
    click.echo(f"wrote {out_path} and {violations_path}")


if __name__ == "__main__":
    main()
