#!/usr/bin/env python3
"""Grid-search GP kernel presets (and kappa) on sim-to-sim transfer.

For each environment: evolve one repertoire, measure the variance of the
prior residuals (real score minus archived score across held-out dynamics),
then sweep lengthscale x signal variance x noise variance x kappa, scoring
each combo by (mean violations, -mean final best reward) over a bank of
held-out conditions. Prints the measured residual variances and the best
combos; the winners get frozen into sapt/presets/*.toml and gp.GP_PRESETS.
"""

import argparse
import itertools

import numpy as np

from sapt.adapt import AdaptConfig, adapt_loop
from sapt.envs import make_env, make_real_env
from sapt.evolve import EvolveConfig, map_elites
from sapt.gp import GPHyper

LENGTHSCALES = (0.05, 0.1, 0.2, 0.4)
SIGNAL_FACTORS = (0.25, 1.0, 4.0)
NOISE_VARS = (1e-4, 1e-2)
KAPPAS = (1.0, 2.0, 3.0)

SETUPS = {
    "asteroid": dict(
        evolve=EvolveConfig(n_dynamics=4, n_init=500, budget=20_000, seed=7),
        goal=np.array([100.0]),
        safety_limit=40.0,
        process_noise=0.1,
        n_scenarios=10,
    ),
    "arm": dict(
        evolve=EvolveConfig(n_dynamics=4, n_init=1000, budget=30_000, seed=7),
        goal=np.array([0.6428571428571429, 0.6071428571428571]),
        safety_limit=1.0,
        process_noise=0.002,
        n_scenarios=10,
    ),
}


def residual_variances(env, rep, goal, psis):
    """Variance of (real - prior) for safety and reward over cells x psis."""
    rep.assign_rewards(goal, env.reward)
    res_c, res_r = [], []
    for psi in psis:
        for entry in rep.entries():
            traj = env.rollout(entry.policy, psi)
            res_c.append(env.safety(traj) - entry.safety_prior)
            res_r.append(env.reward(traj, goal) - entry.reward_prior)
    return float(np.var(res_c)), float(np.var(res_r))


def run_combo(env_id, rep, setup, hyper_c, hyper_r, kappa, psis):
    violations, finals = [], []
    for j, psi in enumerate(psis):
        real = make_real_env(make_env(env_id), psi, setup["process_noise"], seed=900 + j)
        cfg = AdaptConfig(
            goal=setup["goal"], safety_limit=setup["safety_limit"],
            kappa=kappa, max_trials=20, seed=900 + j,
        )
        log = adapt_loop(rep, real, cfg, reward_hyper=hyper_r, safety_hyper=hyper_c)
        violations.append(log.violations())
        finals.append(log.best_reward())
    return float(np.mean(violations)), float(np.mean(finals))


def tune(env_id):
    setup = SETUPS[env_id]
    env = make_env(env_id)
    rep = map_elites(env, setup["evolve"])
    print(f"[{env_id}] archive: {len(rep)} cells")

    rng = np.random.default_rng(17)
    bounds = env.dynamics_bounds
    psis = rng.uniform(bounds[:, 0], bounds[:, 1], size=(setup["n_scenarios"], len(bounds)))

    var_c, var_r = residual_variances(env, rep, setup["goal"], psis)
    print(f"[{env_id}] residual variance: safety {var_c:.4g}, reward {var_r:.4g}")

    d = env.descriptor_dim
    results = []
    for ell, fc, fr, nv, kappa in itertools.product(
        LENGTHSCALES, SIGNAL_FACTORS, SIGNAL_FACTORS, NOISE_VARS, KAPPAS
    ):
        hyper_c = GPHyper((ell,) * d, fc * var_c, nv)
        hyper_r = GPHyper((ell,) * d, fr * var_r, nv)
        mv, mr = run_combo(env_id, rep, setup, hyper_c, hyper_r, kappa, psis)
        results.append((mv, -mr, ell, fc, fr, nv, kappa))
    results.sort()
    print(f"[{env_id}] top combos (mean_violations, mean_final_reward, ell, f_sig_c, f_sig_r, noise, kappa):")
    for mv, nr, ell, fc, fr, nv, kappa in results[:8]:
        print(f"  viol={mv:.2f} reward={-nr:.3f} ell={ell} sv_c={fc}*{var_c:.3g} "
              f"sv_r={fr}*{var_r:.3g} noise={nv} kappa={kappa}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("env", choices=list(SETUPS) + ["all"], default="all", nargs="?")
    args = ap.parse_args()
    for env_id in SETUPS if args.env == "all" else [args.env]:
        tune(env_id)
