import math

import numpy as np
import pytest
from scipy import stats as sps

from bellfit.errors import CapacityError, ParameterDomainError
from bellfit.lhv import LhvParams
from bellfit.model import SetupConfig, coincidence_probs, derived_params, realistic_config, singles_probs
from bellfit.simulate import (
    SimulationPlan,
    angle_grid,
    setting_rng,
    simulate_grid,
    simulate_lhv_grid,
    simulate_setting,
)
from bellfit.stats import f_series, nosignalling_check


def oracle_ok(counts, probs, n, floor=0.003):
    p = np.asarray(probs, dtype=float)
    sigma = np.sqrt(n * p * (1 - p))
    return np.abs(counts - n * p) <= 5 * sigma + floor * n * p


@pytest.mark.parametrize("method", ["event", "staged"])
def test_perfect_anticorrelation(method):
    coinc, singles = simulate_setting(SetupConfig(), 0.3, 0.3, 10 ** 4,
                                      setting_rng(0, 0, 0), method)
    assert coinc[0] == 0 and coinc[3] == 0
    assert coinc.sum() == 10 ** 4


@pytest.mark.parametrize("method", ["event", "staged"])
def test_nothing_collected(method):
    cfg = SetupConfig(mu_a=0.0, mu_b=0.0)
    coinc, singles = simulate_setting(cfg, 0.3, 0.1, 10 ** 4, setting_rng(0, 0, 0), method)
    assert coinc.sum() == 0 and singles.sum() == 0


@pytest.mark.parametrize("method", ["event", "staged"])
def test_single_setting_oracle(method):
    cfg = realistic_config()
    a, b = math.radians(30), math.radians(10)
    n = 10 ** 7
    coinc, singles = simulate_setting(cfg, a, b, n, setting_rng(7, 0, 0), method)
    assert np.all(oracle_ok(coinc, coincidence_probs(cfg, a, b), n))
    assert np.all(oracle_ok(singles, singles_probs(cfg, a, b), n))


def test_determinism_and_parallelism():
    plan = SimulationPlan(realistic_config(), (0.0, 45.0), (10.0, 20.0), 100, seed=5)
    first = simulate_grid(plan)
    assert first == simulate_grid(plan)
    assert first == simulate_grid(plan, workers=2)
    other = simulate_grid(SimulationPlan(realistic_config(), (0.0, 45.0), (10.0, 20.0), 100, seed=6))
    assert first != other


def test_grid_point_independent_of_grid():
    # a record depends only on (seed, its own indices)
    small = simulate_grid(SimulationPlan(realistic_config(), (0.0,), (0.0,), 1000, seed=3))
    big = simulate_grid(SimulationPlan(realistic_config(), (0.0, 5.0), (0.0, 5.0), 1000, seed=3))
    assert small.records[0] == big.get(0.0, 0.0)


def test_full_experiment_grid_shape():
    grid = angle_grid(0, 180, 4)
    assert len(grid) == 45
    ds = simulate_grid(SimulationPlan(realistic_config(), grid, grid, 1000, method="staged"))
    assert len(ds) == 2025
    assert ds.metadata["seed"] == "0" and ds.metadata["kind"] == "quantum"


def test_coincidences_bounded_by_singles(quantum_ds, lhv_ds):
    for ds in (quantum_ds, lhv_ds):
        for r in ds.records:
            assert r.c_pp <= min(r.s_ap, r.s_bp) and r.c_pm <= min(r.s_ap, r.s_bm)
            assert r.c_mp <= min(r.s_am, r.s_bp) and r.c_mm <= min(r.s_am, r.s_bm)
            assert min(r.coincidences.min(), r.singles.min()) >= 0


def test_singles_scale_linearly():
    grid = angle_grid(0, 180, 30)
    base = simulate_grid(SimulationPlan(realistic_config(), grid, grid, 10 ** 5, seed=1,
                                        method="staged"))
    four = simulate_grid(SimulationPlan(realistic_config(), grid, grid, 4 * 10 ** 5, seed=2,
                                        method="staged"))
    m1 = np.mean([r.singles for r in base.records], axis=0)
    m4 = np.mean([r.singles for r in four.records], axis=0)
    sigma = np.sqrt(16 * m1 / len(base) + m4 / len(four))
    assert np.all(np.abs(m4 - 4 * m1) < 5 * sigma)


def test_staged_matches_event_in_distribution():
    cfg = realistic_config()
    a, b = 0.4, 1.1
    n, reps = 20000, 40
    ev = np.array([np.concatenate(simulate_setting(cfg, a, b, n, setting_rng(1, k, 0)))
                   for k in range(reps)])
    st = np.array([np.concatenate(simulate_setting(cfg, a, b, n, setting_rng(2, k, 0), "staged"))
                   for k in range(reps)])
    for col in range(8):
        assert sps.ttest_ind(ev[:, col], st[:, col]).pvalue > 1e-3


def test_nosignalling_of_simulation(quantum_ds):
    report = nosignalling_check(quantum_ds)
    assert not report.flagged
    # slope of Alice singles against Bob's angle at one Alice setting
    for alpha in (0.0, 45.0, 90.0):
        recs = [quantum_ds.get(alpha, b) for b in quantum_ds.beta_values()]
        beta = np.array([r.beta_deg for r in recs])
        y = np.array([r.s_ap for r in recs], dtype=float)
        fit = sps.linregress(beta, y)
        assert abs(fit.slope) < 3 * fit.stderr + 1e-12


def test_windows_mode():
    plan = SimulationPlan(realistic_config(), (0.0, 30.0), (0.0,), 50, seed=4, windows=100,
                          method="staged")
    ds = simulate_grid(plan)
    assert ds.metadata["windows"] == "100"
    assert len({r.n_pairs for r in ds.records}) == 2


def test_lhv_records_and_metadata(lhv_ds, lhv_params):
    assert all(r.n_pairs is None for r in lhv_ds.records)
    assert float(lhv_ds.metadata["lhv_epsilon"]) == lhv_params.epsilon


def test_lhv_quantum_limit_matches_quantum_data():
    grid = angle_grid(0, 180, 5)
    bob = (45.0, 90.0)
    cfg = realistic_config(gamma=0.0)
    v = derived_params(cfg).visibility
    n = 10 ** 6
    q = simulate_grid(SimulationPlan(cfg, grid, bob, n, seed=11, method="staged"))
    lhv = LhvParams(1.0, v, 0.3, 0.0)
    l = simulate_lhv_grid(SimulationPlan(cfg, grid, bob, n, seed=12), lhv)
    sq, sl = f_series(q, 90.0), f_series(l, 90.0)
    chi2 = np.sum((sq.f - sl.f) ** 2 / (sq.sigma ** 2 + sl.sigma ** 2))
    assert sps.chi2.sf(chi2, len(sq)) > 0.01


@pytest.mark.parametrize("kwargs, error", [
    (dict(pairs_per_setting=0), ParameterDomainError),
    (dict(pairs_per_setting=2 ** 63), CapacityError),
    (dict(seed=-1), ParameterDomainError),
    (dict(method="exact"), ParameterDomainError),
    (dict(alice_angles=()), ParameterDomainError),
])
def test_plan_validation(kwargs, error):
    base = dict(config=realistic_config(), alice_angles=(0.0,), bob_angles=(0.0,),
                pairs_per_setting=10)
    base.update(kwargs)
    with pytest.raises(error):
        SimulationPlan(**base)


def test_simulate_setting_capacity():
    with pytest.raises(CapacityError):
        simulate_setting(realistic_config(), 0.0, 0.0, 2 ** 63, setting_rng(0, 0, 0))


def test_angle_grid():
    assert angle_grid(0, 180, 45) == (0.0, 45.0, 90.0, 135.0)
    assert len(angle_grid(0, 180, 5)) == 36
    with pytest.raises(ParameterDomainError):
        angle_grid(0, 10, 0)
