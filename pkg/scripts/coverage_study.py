#!/usr/bin/env python3
"""Repeated-seed study of the kink statistic and the LHV fit.

For each seed a quantum dataset and an LHV dataset are generated on the
(alice grid) x (45, 90) Bob angles, the 90 deg scan is analysed, and the
script reports how often nu exceeds k sigma, how often the 1-sigma V and eta
intervals cover the truth, and the spread of the fitted eta.
"""

import argparse
import time

import numpy as np

from bellfit.lhv import LhvParams
from bellfit.model import derived_params, realistic_config
from bellfit.simulate import SimulationPlan, angle_grid, simulate_grid, simulate_lhv_grid
from bellfit.stats import compute_nu, f_series, fit_lhv, fit_qm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n-quantum", type=float, default=1e6, help="pairs per setting")
    ap.add_argument("--r0-lhv", type=float, default=1e8, help="LHV mean pairs per setting")
    ap.add_argument("--v", type=float, default=0.976)
    ap.add_argument("--eta", type=float, default=0.225)
    ap.add_argument("--k", type=float, default=3.0, help="significance threshold in sigma")
    ap.add_argument("--no-fit", action="store_true", help="skip the LHV fits (faster)")
    args = ap.parse_args()

    cfg = realistic_config()
    grid, bob = angle_grid(0, 180, 5), (45.0, 90.0)
    lhv = LhvParams.from_visibility(args.v, args.eta)
    v_true = derived_params(cfg).visibility
    q_nu, l_nu, v_cover, eta_fit, eta_cover = [], [], 0, [], 0
    t0 = time.time()
    for seed in range(args.seeds):
        q = simulate_grid(SimulationPlan(cfg, grid, bob, int(args.n_quantum), seed=seed,
                                         method="staged"))
        sq = f_series(q, 90.0)
        q_nu.append(compute_nu(sq))
        qm = fit_qm(sq)
        v_cover += abs(qm.params["v"] - v_true) <= qm.sigmas["v"]

        d = simulate_lhv_grid(SimulationPlan(cfg, grid, bob, int(args.r0_lhv), seed=seed), lhv)
        sl = f_series(d, 90.0)
        l_nu.append(compute_nu(sl))
        if not args.no_fit:
            fit = fit_lhv(sl)
            lo, hi = fit.eta_interval
            eta_fit.append(fit.params["eta"])
            eta_cover += lo <= args.eta <= hi

    n = args.seeds
    z_q = np.array([r.sigma_deviation_from_qm for r in q_nu])
    z_l = np.array([r.sigma_deviation_from_qm for r in l_nu])
    print(f"{n} seeds in {time.time() - t0:.1f} s")
    print(f"quantum: |nu| > {args.k} sigma in {np.sum(np.abs(z_q) > args.k)} seeds; "
          f"mean z {z_q.mean():+.3f}, sd {z_q.std(ddof=1):.3f}")
    print(f"quantum: 1-sigma V interval covers the truth in {v_cover}/{n}")
    print(f"LHV    : nu > {args.k} sigma in {np.sum(z_l > args.k)} seeds; "
          f"mean nu {np.mean([r.nu for r in l_nu]):.6f}, "
          f"mean sigma {np.mean([r.sigma_nu for r in l_nu]):.6f}")
    lhv1 = sum(r.lhv1_compatible for r in l_nu)
    lhv2 = sum(r.lhv2_compatible for r in l_nu)
    print(f"LHV    : LHV1-compatible {lhv1}/{n}, LHV2-compatible {lhv2}/{n}")
    if eta_fit:
        print(f"LHV fit: eta mean {np.mean(eta_fit):.5f}, sd {np.std(eta_fit, ddof=1):.5f}; "
              f"1-sigma interval covers {args.eta} in {eta_cover}/{n}")


if __name__ == "__main__":
    main()
