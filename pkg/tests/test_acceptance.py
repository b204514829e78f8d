"""Acceptance criteria 1-8, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""

import contextlib
import csv
import io
import math
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

from bellfit.cli import main as _cli_main
from bellfit.io import format_dataset, parse_dataset, write_dataset
from bellfit.lhv import (
    LhvParams,
    epsilon_approx,
    invert_eta_for_nu,
    lhv_curve,
    nu_prediction,
    solve_epsilon,
)
from bellfit.model import (
    coincidence_probs,
    derived_params,
    ideal_coincidence_probs,
    mixture_weights,
    realistic_config,
    singles_probs,
)
from bellfit.simulate import (
    SimulationPlan,
    angle_grid,
    setting_rng,
    simulate_grid,
    simulate_lhv_grid,
    simulate_setting,
)
from bellfit.stats import FSeries, compute_nu, f_series, fit_lhv, fit_qm, joint_series

GRID = angle_grid(0, 180, 5)
LHV = dict(v_prime=0.976, eta=0.225)
LHV_PAIRS = 10 ** 8
SEEDS = range(100)


def cli_main(argv):
    with contextlib.redirect_stdout(io.StringIO()):
        return _cli_main(argv)


def _line(number, ok, detail):
    return f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} | {detail}"


# ---------------------------------------------------------------- criteria

def criterion_1():
    eps = epsilon_approx(0.976, 0.225)
    nu = nu_prediction(0.225, 0.092)
    eta = invert_eta_for_nu(0.00149, 0.976)
    checks = [abs(eps - 0.092) <= 0.001, abs(nu - 0.00147) <= 0.0002,
              abs(nu - 0.00149) <= 0.00032, abs(eta - 0.225) <= 0.01]
    return all(checks), (f"epsilon_approx={eps:.6f} nu_prediction={nu:.6f} "
                         f"invert_eta_for_nu={eta:.5f}")


def _clamp_v(solver, eta):
    """Smallest v giving a positive epsilon, by bisection on v."""
    lo, hi = 1e-6, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if solver(mid, eta) > 0 else (mid, hi)
    return hi


def criterion_2():
    exact = solve_epsilon(0.976, 0.225)
    approx = epsilon_approx(0.976, 0.225)
    in_window = 0.090 <= exact <= 0.097
    close = abs(exact - approx) <= 0.05 * exact
    gaps = [abs(_clamp_v(solve_epsilon, e) - _clamp_v(epsilon_approx, e))
            for e in (0.1, 0.225, 0.4, 0.7)]
    clamp_ok = max(gaps) <= 1e-6
    return in_window and close and clamp_ok, (
        f"solve_epsilon={exact:.6f} in [0.090,0.097]: {in_window}; "
        f"rel gap to approx {abs(exact - approx) / exact:.3f} <= 0.05: {close}; "
        f"clamp boundary gap {max(gaps):.1e}")


def criterion_3():
    cfg = realistic_config(gamma=0.1, T=0.97, t=0.01, mu=0.36, zeta=0.55)
    grid = angle_grid(0, 180, 36)
    n = 10 ** 6
    worst = 0.0
    for j, b in enumerate(grid):
        for i, a in enumerate(grid):
            ar, br = math.radians(a), math.radians(b)
            coinc, singles = simulate_setting(cfg, ar, br, n, setting_rng(2024, i, j), "event")
            p = np.array([*coincidence_probs(cfg, ar, br), *singles_probs(cfg, ar, br)])
            obs = np.concatenate([coinc, singles])
            allowed = 5 * np.sqrt(n * p * (1 - p)) + 0.003 * n * p
            worst = max(worst, float(np.max(np.abs(obs - n * p) / allowed)))
    return worst <= 1.0, f"5x5 grid, n=1e6, event sampler: max |obs-exp|/tolerance = {worst:.3f}"


def _lhv_dataset(seed=0, bob=GRID):
    plan = SimulationPlan(realistic_config(), GRID, bob, LHV_PAIRS, seed=seed)
    return simulate_lhv_grid(plan, LhvParams.from_visibility(**LHV))


def criterion_4():
    cfg = realistic_config()
    q = simulate_grid(SimulationPlan(cfg, GRID, GRID, 10 ** 6, seed=0, method="staged"))
    qm = fit_qm(f_series(q, 90.0))
    v_true = derived_params(cfg).visibility
    v_ok = abs(qm.params["v"] - v_true) <= 3 * qm.sigmas["v"]

    data = _lhv_dataset(seed=0)
    lhv = fit_lhv(f_series(data, 90.0))
    lo, hi = lhv.eta_interval
    eta_ok = lo <= LHV["eta"] <= hi
    eps_ok = abs(lhv.params["epsilon"] - 0.0937) <= 0.01
    joint = fit_lhv(joint_series(data))
    return v_ok and eta_ok and eps_ok, (
        f"V={qm.params['v']:.5f}+-{qm.sigmas['v']:.5f} vs {v_true:.5f}; "
        f"beta=90 scan: eta={lhv.params['eta']:.5f} in [{lo:.5f},{hi:.5f}]: {eta_ok}, "
        f"epsilon={lhv.params['epsilon']:.4f}; "
        f"(all scans pooled: eta={joint.params['eta']:.5f} in "
        f"[{joint.eta_interval[0]:.5f},{joint.eta_interval[1]:.5f}])")


def criterion_5():
    cfg = realistic_config()
    bob = (45.0, 90.0)
    q_false, lhv_hits = 0, 0
    for seed in SEEDS:
        q = simulate_grid(SimulationPlan(cfg, GRID, bob, 10 ** 6, seed=seed, method="staged"))
        nq = compute_nu(f_series(q, 90.0))
        q_false += abs(nq.nu) > 3 * nq.sigma_nu
        nl = compute_nu(f_series(_lhv_dataset(seed, bob), 90.0))
        lhv_hits += nl.nu > 3 * nl.sigma_nu
    return q_false <= 1 and lhv_hits >= 95, (
        f"quantum |nu|>3sigma in {q_false}/100 seeds (<=1); "
        f"LHV nu>3sigma in {lhv_hits}/100 seeds (>=95), R0={LHV_PAIRS:.0e}")


def criterion_6():
    rng = np.random.default_rng(6)
    g = rng.uniform(-0.95, 0.95, 1000)
    a, b = rng.uniform(-2 * np.pi, 2 * np.pi, (2, 1000))
    sum_err = float(np.max(np.abs(ideal_coincidence_probs(g, a, b).total() - 1)))
    mix_err = max(abs(sum(mixture_weights(*row)) - 1)
                  for row in zip(g, *rng.uniform(0, 1, (2, 1000))))

    nu_err = 0.0
    phi = np.radians(np.arange(-90.0, 90.0, 5.0))
    for eta, eps in zip(rng.uniform(0.02, 0.5, 200), rng.uniform(0, 0.3, 200)):
        f = lhv_curve(phi, 0.97, eta, eps)
        nu = compute_nu(FSeries(0.0, phi, f, np.ones_like(f))).nu
        nu_err = max(nu_err, abs(nu - nu_prediction(eta, eps)))

    nested, tested = True, 0
    q = simulate_grid(SimulationPlan(realistic_config(), GRID, GRID, 10 ** 6, seed=3,
                                     method="staged"))
    for ds in (q, _lhv_dataset(seed=3)):
        for beta in ds.beta_values():
            s = f_series(ds, beta)
            nested &= fit_lhv(s).chi2 <= fit_qm(s).chi2 + 1e-9
            tested += 1
    ok = nested and sum_err <= 1e-12 and mix_err <= 1e-12 and nu_err <= 1e-12
    return ok, (f"chi2_lhv<=chi2_qm on {tested} series: {nested}; sum rule err {sum_err:.1e}; "
                f"mixture err {mix_err:.1e}; nu identity err {nu_err:.1e}")


def criterion_7():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data = tmp / "lhv.csv"
        write_dataset(_lhv_dataset(seed=0), data)
        assert cli_main(["analyze", str(data), "-o", str(tmp / "rep"),
                         "--lhv1-eta", "0.17", "--lhv2-eta", "0.55"]) == 0
        with open(tmp / "rep" / "scans.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
    lhv1 = sum(r["lhv1_compatible"] == "true" for r in rows)
    lhv2 = sum(r["lhv2_compatible"] == "false" for r in rows)
    ok = len(rows) > 0 and lhv1 == len(rows) and lhv2 == len(rows)
    return ok, f"{lhv1}/{len(rows)} scans LHV1-compatible, {lhv2}/{len(rows)} LHV2-refuted"


def criterion_8():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        outputs = []
        for run, workers in enumerate(("1", "1", "4")):
            path = tmp / f"d{run}.csv"
            cli_main(["simulate", "-n", "100000", "--seed", "8", "--workers", workers,
                      "-o", str(path)])
            cli_main(["analyze", str(path), "-o", str(tmp / f"r{run}"), "--workers", workers])
            report = {p.name: p.read_bytes() for p in sorted((tmp / f"r{run}").iterdir())}
            outputs.append((path.read_bytes(), report))
        same_data = all(o[0] == outputs[0][0] for o in outputs)
        same_report = all(o[1] == outputs[0][1] for o in outputs)

        grid = angle_grid(0, 180, 4)
        big = simulate_grid(SimulationPlan(realistic_config(), grid, grid, 10 ** 5, seed=8,
                                           method="staged"))
        write_dataset(big, tmp / "big.csv")
        back = parse_dataset(tmp / "big.csv")
        lossless = len(back) == 2025 and back == big and format_dataset(back) == format_dataset(big)
    ok = same_data and same_report and lossless
    return ok, (f"datasets identical across runs/workers: {same_data}; reports: {same_report}; "
                f"2025-row round trip lossless: {lossless}")


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance(number, capsys):
    ok, detail = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + _line(number, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, check in CRITERIA.items():
        ok, detail = check()
        failed += not ok
        print(_line(number, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
