#!/usr/bin/env python3
"""Print the formula-layer numbers of the LHV family at the reference point.

Reference point: V' = 0.976, eta = 0.225 (the Bob = 90 deg analysis).  Also
tabulates how far the small-epsilon approximation is from the exact root.
"""

import argparse

import numpy as np

from bellfit.lhv import (
    clamp_boundary,
    epsilon_approx,
    invert_eta_for_nu,
    nu_from_curve,
    nu_of_eta,
    nu_prediction,
    solve_epsilon,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--v", type=float, default=0.976)
    ap.add_argument("--eta", type=float, default=0.225)
    ap.add_argument("--nu", type=float, default=0.00149, help="measured kink statistic")
    args = ap.parse_args()

    eps_a = epsilon_approx(args.v, args.eta)
    eps_x = solve_epsilon(args.v, args.eta)
    print(f"epsilon (small-eps form)     {eps_a:.6f}")
    print(f"epsilon (exact bisection)    {eps_x:.6f}   rel gap {abs(eps_x - eps_a) / eps_x:.3f}")
    print(f"nu_prediction(eta, 0.092)    {nu_prediction(args.eta, 0.092):.6f}")
    print(f"nu with approx epsilon       {nu_prediction(args.eta, eps_a):.6f}")
    print(f"nu with exact epsilon        {nu_from_curve(args.v, args.eta, eps_x):.6f}")
    print(f"eta for nu={args.nu} (approx) {invert_eta_for_nu(args.nu, args.v):.5f}")
    print(f"eta for nu={args.nu} (exact)  {invert_eta_for_nu(args.nu, args.v, exact=True):.5f}")
    print(f"clamp boundary (nu = 0)      {clamp_boundary(args.v):.5f}")

    print("\nnu(eta) along the LHV family at this visibility")
    print("  eta     nu_approx   nu_exact")
    for eta in (0.18, 0.2, 0.225, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8):
        try:
            exact = f"{nu_of_eta(eta, args.v, exact=True):.6f}"
        except Exception as exc:  # exact root leaves the bracket at large eta
            exact = type(exc).__name__
        print(f"  {eta:5.3f}   {nu_of_eta(eta, args.v):.6f}    {exact}")

    print("\nworst relative gap of the small-eps form, v in [0.9, 1], eta <= 0.5")
    worst = (0.0, None, None)
    for v in np.linspace(0.9, 1.0, 51):
        for eta in np.linspace(0.01, 0.5, 99):
            x = solve_epsilon(v, eta)
            if x > 1e-3:
                gap = abs(x - epsilon_approx(v, eta)) / x
                worst = max(worst, (gap, v, eta))
    print(f"  {worst[0]:.3f} at v={worst[1]:.3f}, eta={worst[2]:.3f}")


if __name__ == "__main__":
    main()
