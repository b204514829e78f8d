"""Monte Carlo generation of synthetic coincidence/singles datasets.

The quantum generator works photon by photon and never evaluates the
closed-form non-ideal probabilities of :mod:`bellfit.model`, so comparing the
two is a genuine cross-check.  Each emission event

1. picks a component of the post-collection mixture (pair, one photon on
   either side with H or V polarization, vacuum);
2. projects pair photons jointly on the analyzers' nominal axes, single
   photons individually;
3. routes every photon out of its nominal port with probability ``T`` of that
   port, into the opposite port with probability ``t`` of the opposite port,
   or absorbs it;
4. fires the detector behind the port with probability ``zeta``.

Randomness is counter based: every grid point owns a Philox stream keyed by
``SeedSequence(seed, spawn_key=(i_alpha, i_beta))``, so a record does not
depend on the order or the process in which the grid is evaluated.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dataset import CountRecord, Dataset
from .errors import CapacityError, ParameterDomainError
from .lhv import LhvParams, lhv_probability
from .model import SetupConfig, derived_params, ideal_coincidence_probs, mixture_weights

MAX_PAIRS = np.iinfo(np.int64).max
EVENT_CHUNK = 1 << 20
METHODS = ("event", "staged")

# outcome codes of one photon after routing and detection
_FIRE_PLUS, _FIRE_MINUS, _SILENT = 0, 1, 2


@dataclass(frozen=True)
class SimulationPlan:
    """Grid of analyzer settings to simulate.

    ``pairs_per_setting`` is the number of emitted pairs per setting, or the
    mean number of pairs per window when ``windows`` is given, in which case
    each setting draws its pair number from Poisson(pairs_per_setting*windows).
    """

    config: SetupConfig
    alice_angles: tuple
    bob_angles: tuple
    pairs_per_setting: int
    seed: int = 0
    method: str = "event"
    windows: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alice_angles", tuple(float(a) for a in self.alice_angles))
        object.__setattr__(self, "bob_angles", tuple(float(b) for b in self.bob_angles))
        if not self.alice_angles or not self.bob_angles:
            raise ParameterDomainError("angles", (self.alice_angles, self.bob_angles),
                                       "non-empty angle lists")
        if int(self.pairs_per_setting) != self.pairs_per_setting or self.pairs_per_setting < 1:
            raise ParameterDomainError("pairs_per_setting", self.pairs_per_setting,
                                       "integer >= 1")
        if self.pairs_per_setting > MAX_PAIRS:
            raise CapacityError(f"pairs_per_setting={self.pairs_per_setting} exceeds int64")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterDomainError("seed", self.seed, "0 <= seed < 2**64")
        if self.method not in METHODS:
            raise ParameterDomainError("method", self.method, f"one of {METHODS}")
        if self.windows is not None and self.windows < 1:
            raise ParameterDomainError("windows", self.windows, "windows >= 1")

    def settings(self):
        """(i_alpha, i_beta, alpha_deg, beta_deg), Bob-major."""
        return [(i, j, a, b)
                for j, b in enumerate(self.bob_angles)
                for i, a in enumerate(self.alice_angles)]


def setting_rng(seed, i_alpha, i_beta):
    """Counter-based generator owned by one grid point."""
    seq = np.random.SeedSequence(seed, spawn_key=(i_alpha, i_beta))
    return np.random.Generator(np.random.Philox(seq))


def _routing(arm, zeta_p, zeta_m):
    """2x3 table: nominal port (+, -) -> (fire +, fire -, silent)."""
    from_plus = (arm.T_plus * zeta_p, arm.t_minus * zeta_m)
    from_minus = (arm.t_plus * zeta_p, arm.T_minus * zeta_m)
    return np.array([
        [from_plus[0], from_plus[1], 1.0 - sum(from_plus)],
        [from_minus[0], from_minus[1], 1.0 - sum(from_minus)],
    ])


def _ports_for_polarization(theta):
    """Nominal-port probabilities of a photon polarized at ``theta`` from the + axis."""
    c2 = math.cos(theta) ** 2
    return np.array([c2, 1.0 - c2])


@dataclass
class _SettingModel:
    """Per-setting event probabilities assembled from physical ingredients."""

    weights: np.ndarray           # pair, aH, aV, bH, bV, vac
    joint: np.ndarray             # nominal-port pair outcomes ++, +-, -+, --
    route_a: np.ndarray
    route_b: np.ndarray
    single_ports: dict = field(default_factory=dict)

    @classmethod
    def build(cls, config, alpha, beta):
        w = np.array(mixture_weights(config.gamma, config.mu_a, config.mu_b), dtype=float)
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        joint = np.array(ideal_coincidence_probs(config.gamma, alpha, beta), dtype=float)
        joint = np.clip(joint, 0.0, None)
        joint /= joint.sum()
        d = config.det
        ports = {
            "aH": _ports_for_polarization(alpha),
            "aV": _ports_for_polarization(alpha - math.pi / 2),
            "bH": _ports_for_polarization(beta),
            "bV": _ports_for_polarization(beta - math.pi / 2),
        }
        return cls(w, joint, _routing(config.arm_a, d.zeta_ap, d.zeta_am),
                   _routing(config.arm_b, d.zeta_bp, d.zeta_bm), ports)


def _tally(out_a, out_b):
    """Coincidence and singles counts from per-event outcome codes."""
    fa_p, fa_m = out_a == _FIRE_PLUS, out_a == _FIRE_MINUS
    fb_p, fb_m = out_b == _FIRE_PLUS, out_b == _FIRE_MINUS
    coinc = [np.count_nonzero(fa_p & fb_p), np.count_nonzero(fa_p & fb_m),
             np.count_nonzero(fa_m & fb_p), np.count_nonzero(fa_m & fb_m)]
    singles = [np.count_nonzero(fa_p), np.count_nonzero(fa_m),
               np.count_nonzero(fb_p), np.count_nonzero(fb_m)]
    return np.array(coinc, dtype=np.int64), np.array(singles, dtype=np.int64)


def _events_chunk(model, n, rng):
    u = rng.random((4, n))
    comp = np.minimum(np.searchsorted(np.cumsum(model.weights), u[0], side="right"), 5)
    # nominal port per arm: 0 '+', 1 '-', -1 no photon
    port_a = np.full(n, -1, dtype=np.int64)
    port_b = np.full(n, -1, dtype=np.int64)

    pair = comp == 0
    outcome = np.minimum(np.searchsorted(np.cumsum(model.joint), u[1][pair], side="right"), 3)
    port_a[pair] = outcome // 2
    port_b[pair] = outcome % 2
    for code, key, port in ((1, "aH", port_a), (2, "aV", port_a),
                            (3, "bH", port_b), (4, "bV", port_b)):
        sel = comp == code
        port[sel] = (u[1][sel] >= model.single_ports[key][0]).astype(np.int64)

    out_a = np.full(n, _SILENT, dtype=np.int64)
    out_b = np.full(n, _SILENT, dtype=np.int64)
    for port, route, uu, out in ((port_a, model.route_a, u[2], out_a),
                                 (port_b, model.route_b, u[3], out_b)):
        for nominal in (0, 1):
            sel = port == nominal
            cdf = np.cumsum(route[nominal])
            out[sel] = np.minimum(np.searchsorted(cdf, uu[sel], side="right"), 2)
    return _tally(out_a, out_b)


def _simulate_events(model, n, rng):
    coinc = np.zeros(4, dtype=np.int64)
    singles = np.zeros(4, dtype=np.int64)
    done = 0
    while done < n:
        m = min(EVENT_CHUNK, n - done)
        c, s = _events_chunk(model, m, rng)
        coinc += c
        singles += s
        done += m
    return coinc, singles


def _simulate_staged(model, n, rng):
    """Same process as the event sampler, sampled stage by stage with multinomials."""
    comp = rng.multinomial(n, model.weights)
    coinc = np.zeros(4, dtype=np.int64)
    singles = np.zeros(4, dtype=np.int64)
    joint = rng.multinomial(comp[0], model.joint)
    for k, n_k in enumerate(joint):
        a_out = rng.multinomial(n_k, model.route_a[k // 2])
        singles[0:2] += a_out[:2]
        for ia, n_a in enumerate(a_out):
            b_out = rng.multinomial(n_a, model.route_b[k % 2])
            singles[2:4] += b_out[:2]
            if ia < 2:
                coinc[2 * ia:2 * ia + 2] += b_out[:2]
    for idx, key, route, offset in ((1, "aH", model.route_a, 0), (2, "aV", model.route_a, 0),
                                    (3, "bH", model.route_b, 2), (4, "bV", model.route_b, 2)):
        ports = rng.multinomial(comp[idx], model.single_ports[key])
        for nominal, n_p in enumerate(ports):
            singles[offset:offset + 2] += rng.multinomial(n_p, route[nominal])[:2]
    return coinc, singles


def simulate_setting(config: SetupConfig, alpha, beta, n_pairs, rng, method="event"):
    """Counts at one setting (angles in radians) from ``n_pairs`` emitted pairs.

    ``rng`` is a numpy Generator or an integer seed.
    """
    if int(n_pairs) != n_pairs or n_pairs < 0:
        raise ParameterDomainError("n_pairs", n_pairs, "non-negative integer")
    if n_pairs > MAX_PAIRS:
        raise CapacityError(f"n_pairs={n_pairs} overflows the int64 count representation")
    if method not in METHODS:
        raise ParameterDomainError("method", method, f"one of {METHODS}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng)))
    model = _SettingModel.build(config, alpha, beta)
    sampler = _simulate_events if method == "event" else _simulate_staged
    return sampler(model, int(n_pairs), rng)


def _record(alpha_deg, beta_deg, coinc, singles, n_pairs):
    return CountRecord(alpha_deg, beta_deg, *(int(c) for c in coinc),
                       *(int(s) for s in singles),
                       n_pairs=None if n_pairs is None else int(n_pairs))


def _grid_point(args):
    plan, i, j, a_deg, b_deg = args
    rng = setting_rng(plan.seed, i, j)
    n = plan.pairs_per_setting
    if plan.windows is not None:
        n = int(rng.poisson(plan.pairs_per_setting * plan.windows))
    coinc, singles = simulate_setting(plan.config, math.radians(a_deg), math.radians(b_deg),
                                      n, rng, plan.method)
    return _record(a_deg, b_deg, coinc, singles, n)


def _run(plan, worker, workers):
    jobs = [(plan, i, j, a, b) for i, j, a, b in plan.settings()]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(worker, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [worker(job) for job in jobs]


def _plan_metadata(plan, kind):
    meta = {
        "generator": f"bellfit {__version__}",
        "kind": kind,
        "seed": str(plan.seed),
        "method": plan.method,
        "pairs_per_setting": str(plan.pairs_per_setting),
        "seed_scheme": "philox(SeedSequence(seed, spawn_key=(i_alpha, i_beta)))",
    }
    if plan.windows is not None:
        meta["windows"] = str(plan.windows)
    return meta


def simulate_grid(plan: SimulationPlan, workers=None) -> Dataset:
    """Quantum synthetic dataset over the plan's full angle grid."""
    records = _run(plan, _grid_point, workers)
    return Dataset(records, _plan_metadata(plan, "quantum"))


def lhv_channel_means(plan, lhv, alpha_deg, beta_deg, r0):
    """Mean coincidence and singles counts of the LHV generator at one setting.

    The '+-' and '-+' channels follow P(phi) directly, '++' and '--' follow it
    at phi - pi/2, so that the four-term f combination reproduces 16 P(phi).
    """
    d = derived_params(plan.config)
    phi = math.radians(alpha_deg - beta_deg)
    direct = 4.0 * float(lhv_probability(phi, lhv))
    shifted = 4.0 * float(lhv_probability(phi - math.pi / 2, lhv))
    coinc = 0.25 * r0 * np.array([
        d.eta_ap * d.eta_bp * shifted, d.eta_ap * d.eta_bm * direct,
        d.eta_am * d.eta_bp * direct, d.eta_am * d.eta_bm * shifted,
    ])
    singles = 0.5 * r0 * np.array([d.eta_ap, d.eta_am, d.eta_bp, d.eta_bm])
    return coinc, singles


def _lhv_point(args):
    plan, lhv, i, j, a_deg, b_deg = args
    rng = setting_rng(plan.seed, i, j)
    r0 = plan.pairs_per_setting
    if plan.windows is not None:
        r0 = int(rng.poisson(plan.pairs_per_setting * plan.windows))
    mean_c, mean_s = lhv_channel_means(plan, lhv, a_deg, b_deg, r0)
    coinc = rng.poisson(mean_c)
    # singles = coincidences + independent unpaired detections keeps c <= s exactly
    paired = np.array([mean_c[0] + mean_c[1], mean_c[2] + mean_c[3],
                       mean_c[0] + mean_c[2], mean_c[1] + mean_c[3]])
    extra = rng.poisson(np.maximum(mean_s - paired, 0.0))
    singles = np.array([coinc[0] + coinc[1], coinc[2] + coinc[3],
                        coinc[0] + coinc[2], coinc[1] + coinc[3]]) + extra
    return _record(a_deg, b_deg, coinc, singles, None)


def simulate_lhv_grid(plan: SimulationPlan, lhv: LhvParams, workers=None) -> Dataset:
    """Poisson dataset whose f statistic follows the LHV curve of ``lhv``."""
    if not isinstance(lhv, LhvParams):
        raise ParameterDomainError("lhv", lhv, "an LhvParams")
    jobs = [(plan, lhv, i, j, a, b) for i, j, a, b in plan.settings()]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_lhv_point, jobs,
                                    chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [_lhv_point(job) for job in jobs]
    meta = _plan_metadata(plan, "lhv")
    meta.update(lhv_v_prime=repr(lhv.v_prime), lhv_eta=repr(lhv.eta),
                lhv_epsilon=repr(lhv.epsilon))
    return Dataset(records, meta)


def angle_grid(start, stop, step):
    """Half-open angle grid in degrees, e.g. ``angle_grid(0, 180, 5)``."""
    if step <= 0:
        raise ParameterDomainError("step", step, "step > 0")
    values = []
    while start + len(values) * step < stop - 1e-9:
        values.append(round(start + len(values) * step, 9))
    return tuple(values)
