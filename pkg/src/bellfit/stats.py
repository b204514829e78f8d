"""Estimators, fits and verdicts for counted polarization-correlation data.

Conventions
-----------
* ``f`` at a setting (alpha, beta) sums the '+-' and '-+' coincidences there
  and the '++' and '--' coincidences at the companion setting
  (alpha + 45, beta - 45), each divided by the product of the two grid-averaged
  singles rates of its detectors.  Quantum mechanics predicts
  ``f = (4 / r0) (1 + V cos 2phi)``.
* Count uncertainties are Poisson; channels at one setting are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats as sps
from scipy.optimize import bisect, minimize_scalar

from .dataset import AngleScan, CountRecord, Dataset, angle_key
from .errors import (
    ConvergenceError,
    DegenerateDataError,
    MissingDataError,
    NoSolutionError,
    ParameterDomainError,
    RankError,
    SolverError,
)
from .lhv import clamp_boundary, hinge_amplitude, invert_eta_for_nu, solve_epsilon
from .model import reduce_phi

COMPANION_SHIFT = 45.0
EXACT_ANGLE_TOL = 1e-6  # degrees


@dataclass(frozen=True)
class Thresholds:
    lhv1_eta: float = 0.17
    lhv2_eta: float = 0.55
    qm_sigma: float = 3.0

    def __post_init__(self):
        for name in ("lhv1_eta", "lhv2_eta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 < value <= 1.0):
                raise ParameterDomainError(name, value, "0 < eta <= 1")
        if not (math.isfinite(self.qm_sigma) and self.qm_sigma > 0.0):
            raise ParameterDomainError("qm_sigma", self.qm_sigma, "qm_sigma > 0")


# --------------------------------------------------------------------------
# efficiencies and the f statistic
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Efficiencies:
    eta_ap: float
    eta_am: float
    eta_bp: float
    eta_bm: float


def _records_of(data):
    if isinstance(data, (Dataset, AngleScan)):
        return data.records
    return list(data)


def singles_means(data):
    """Mean singles counts (a+, a-, b+, b-) over every record in ``data``."""
    records = _records_of(data)
    if not records:
        raise DegenerateDataError("no records to average")
    means = np.mean([r.singles for r in records], axis=0)
    for name, m in zip(("s_ap", "s_am", "s_bp", "s_bm"), means):
        if m <= 0:
            raise DegenerateDataError(f"channel {name} has zero counts")
    return means


def estimate_efficiencies(data, r0) -> Efficiencies:
    """Channel efficiencies ``eta = 2 <singles> / r0``.

    The angle average removes the ``gamma' cos 2theta`` modulation only when
    the angles cover a half turn uniformly; Bob's channels therefore need a
    dataset spanning several Bob angles, not a single scan.
    """
    if not (math.isfinite(r0) and r0 > 0):
        raise ParameterDomainError("r0", r0, "r0 > 0")
    return Efficiencies(*(2.0 * singles_means(data) / r0))


class FPoint(NamedTuple):
    phi: float
    f: float
    sigma: float


@dataclass
class FSeries:
    beta_deg: float
    phi: np.ndarray
    f: np.ndarray
    sigma: np.ndarray
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.phi.shape == self.f.shape == self.sigma.shape):
            raise DegenerateDataError("phi, f and sigma must have equal length")
        if np.any(self.sigma <= 0):
            raise DegenerateDataError("sigma_f must be positive")
        order = np.argsort(self.phi, kind="stable")
        self.phi, self.f, self.sigma = self.phi[order], self.f[order], self.sigma[order]

    def __len__(self):
        return len(self.phi)

    @property
    def phi_deg(self):
        return np.degrees(self.phi)


def _companion(dataset, alpha_deg, beta_deg):
    first = (alpha_deg + COMPANION_SHIFT, beta_deg - COMPANION_SHIFT)
    rec = dataset.get(*first)
    if rec is not None:
        return rec
    second = (alpha_deg - COMPANION_SHIFT, beta_deg + COMPANION_SHIFT)
    rec = dataset.get(*second)
    if rec is not None:
        return rec
    raise MissingDataError(
        f"companion setting alpha={angle_key(first[0])}, beta={angle_key(first[1])} "
        f"(or alpha={angle_key(second[0])}, beta={angle_key(second[1])}) is absent")


def compute_f(dataset: Dataset, alpha_deg, beta_deg, means=None) -> FPoint:
    """The f statistic at one setting with its first-order Poisson error."""
    if means is None:
        means = singles_means(dataset)
    m_ap, m_am, m_bp, m_bm = means
    here = dataset.lookup(alpha_deg, beta_deg)
    there = _companion(dataset, alpha_deg, beta_deg)
    counts = np.array([here.c_pm, here.c_mp, there.c_pp, there.c_mm], dtype=float)
    norms = np.array([m_ap * m_bm, m_am * m_bp, m_ap * m_bp, m_am * m_bm])
    f = float(np.sum(counts / norms))
    sigma = float(math.sqrt(np.sum(np.maximum(counts, 1.0) / norms ** 2)))
    phi = reduce_phi(math.radians(alpha_deg - beta_deg))
    return FPoint(phi, f, sigma)


def f_series(dataset: Dataset, beta_deg, means=None) -> FSeries:
    """f at every Alice angle of the scan at ``beta_deg`` that has a companion."""
    if means is None:
        means = singles_means(dataset)
    scan = dataset.scan(beta_deg)
    points, skipped = [], []
    for rec in scan.records:
        try:
            points.append(compute_f(dataset, rec.alpha_deg, rec.beta_deg, means))
        except MissingDataError:
            skipped.append(rec.alpha_deg)
    if not points:
        return FSeries(scan.beta_deg, [], [], [], skipped)
    phi, f, sigma = zip(*points)
    return FSeries(scan.beta_deg, phi, f, sigma, skipped)


def joint_series(dataset: Dataset, means=None) -> FSeries:
    """All scans pooled into one series (``beta_deg`` is None).

    Each count enters exactly one f value, so pooled points stay independent.
    """
    if means is None:
        means = singles_means(dataset)
    parts = [f_series(dataset, b, means) for b in dataset.beta_values()]
    skipped = [(p.beta_deg, a) for p in parts for a in p.skipped]
    return FSeries(None, np.concatenate([p.phi for p in parts]),
                   np.concatenate([p.f for p in parts]),
                   np.concatenate([p.sigma for p in parts]), skipped)


def compute_U(record: CountRecord):
    """Normalized correlation (c++ + c-- - c+- - c-+) / (sum of the four)."""
    total = record.c_pp + record.c_mm + record.c_pm + record.c_mp
    if total == 0:
        raise DegenerateDataError(
            f"no coincidences at alpha={record.alpha_deg}, beta={record.beta_deg}")
    return (record.c_pp + record.c_mm - record.c_pm - record.c_mp) / total


def compute_U_error(record: CountRecord):
    """Poisson error of :func:`compute_U`."""
    total = record.c_pp + record.c_mm + record.c_pm + record.c_mp
    same = record.c_pp + record.c_mm
    other = record.c_pm + record.c_mp
    if total == 0:
        raise DegenerateDataError("no coincidences")
    return 2.0 * math.sqrt(same * other / total) / total


# --------------------------------------------------------------------------
# cosine residual
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaResult:
    mean_rate: float
    v: float
    delta: float
    sigma_delta: float


def fit_delta(phi, rates) -> DeltaResult:
    """RMS relative residual of ``rates`` about ``m (1 + v cos 2phi)``.

    ``m`` and ``v`` come from an ordinary least-squares fit; the error uses
    Poisson variances of the rates.
    """
    phi = np.asarray(phi, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if phi.shape != rates.shape or phi.size < 3:
        raise RankError("fit_delta needs at least 3 (phi, rate) points")
    design = np.column_stack([np.ones_like(phi), np.cos(2.0 * phi)])
    if np.linalg.matrix_rank(design) < 2:
        raise RankError("all phi give the same cos 2phi; cosine fit is degenerate")
    coef, *_ = np.linalg.lstsq(design, rates, rcond=None)
    mean_rate, amp = coef
    if mean_rate <= 0:
        raise DegenerateDataError("fitted mean rate is not positive")
    resid = design @ coef - rates
    n = phi.size
    delta = float(math.sqrt(np.mean((resid / mean_rate) ** 2)))
    var = np.maximum(rates, 1.0)
    if delta > 0:
        sigma = math.sqrt(np.sum(resid ** 2 * var)) / (mean_rate ** 2 * n * delta)
    else:
        hat = design @ np.linalg.pinv(design)
        sigma = math.sqrt(np.sum((1.0 - np.diag(hat)) * var) / n) / mean_rate
    return DeltaResult(float(mean_rate), float(amp / mean_rate), delta, float(sigma))


def delta_table(scan: AngleScan):
    """:class:`DeltaResult` for each coincidence channel of one scan."""
    phi = np.array([reduce_phi(math.radians(r.alpha_deg - r.beta_deg)) for r in scan.records])
    return {name: fit_delta(phi, [getattr(r, name) for r in scan.records])
            for name in ("c_pp", "c_pm", "c_mp", "c_mm")}


# --------------------------------------------------------------------------
# kink statistic
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NuResult:
    nu: float
    sigma_nu: float
    v_prime: float
    sigma_v_prime: float
    sigma_deviation_from_qm: float
    eta_star: float
    eta_interval: tuple
    consistent_with_qm: bool
    lhv1_compatible: bool
    lhv2_compatible: bool


def value_at(series: FSeries, target_deg):
    """f and its error at ``|phi| = target_deg``, using both signs of phi.

    Exact grid points are used (and averaged) when present; otherwise the two
    straddling points are interpolated linearly (for targets midway between
    two points this is their plain average).
    """
    phi_deg = series.phi_deg
    targets = sorted({float(reduce_phi(math.radians(s * target_deg))) for s in (1, -1)})
    values, variances = [], []
    for t in np.degrees(targets):
        hit = np.flatnonzero(np.abs(phi_deg - t) < EXACT_ANGLE_TOL)
        if hit.size:
            # pooled series may hold several points at one phi
            values.append(float(np.mean(series.f[hit])))
            variances.append(float(np.sum(series.sigma[hit] ** 2)) / hit.size ** 2)
            continue
        # periodic copies so that +-90 deg can be straddled
        ext_phi = np.concatenate([phi_deg - 180.0, phi_deg, phi_deg + 180.0])
        ext_f = np.tile(series.f, 3)
        ext_s = np.tile(series.sigma, 3)
        below = np.flatnonzero(ext_phi < t)
        above = np.flatnonzero(ext_phi > t)
        if not below.size or not above.size:
            continue
        i = below[np.argmax(ext_phi[below])]
        j = above[np.argmin(ext_phi[above])]
        if ext_phi[j] - ext_phi[i] > 30.0:
            continue
        w = (t - ext_phi[i]) / (ext_phi[j] - ext_phi[i])
        values.append((1 - w) * ext_f[i] + w * ext_f[j])
        variances.append((1 - w) ** 2 * ext_s[i] ** 2 + w ** 2 * ext_s[j] ** 2)
    if not values:
        raise MissingDataError(
            f"scan beta={series.beta_deg}: no f data near |phi|={target_deg} deg")
    k = len(values)
    return float(np.mean(values)), float(math.sqrt(np.sum(variances)) / k)


def _eta_or_none(nu, v_prime):
    try:
        return invert_eta_for_nu(nu, v_prime, eta_max=1.0)
    except (NoSolutionError, ParameterDomainError):
        return None


def compute_nu(series: FSeries, thresholds: Thresholds = Thresholds()) -> NuResult:
    """Kink statistic nu, visibility V' and the LHV1/LHV2 verdicts.

    The allowed efficiency range is the set of eta on the rising branch whose
    predicted nu lies within one standard deviation of the measured one; a
    family is compatible when that range reaches its threshold.
    """
    f0, s0 = value_at(series, 0.0)
    f45, s45 = value_at(series, 45.0)
    f90, s90 = value_at(series, 90.0)
    a = f0 + f90
    den = a + 2.0 * f45
    nu = (a - 2.0 * f45) / den
    d_edge = 4.0 * f45 / den ** 2
    d_mid = -4.0 * a / den ** 2
    sigma_nu = math.sqrt(d_edge ** 2 * (s0 ** 2 + s90 ** 2) + d_mid ** 2 * s45 ** 2)
    v_prime = (f0 - f90) / a
    sigma_v = 2.0 * math.sqrt((f90 * s0) ** 2 + (f0 * s90) ** 2) / a ** 2

    v_clip = min(max(v_prime, 1e-9), 1.0)
    eta_star = _eta_or_none(max(nu, 0.0), v_clip)
    eta_lo = _eta_or_none(max(nu - sigma_nu, 0.0), v_clip)
    eta_hi = _eta_or_none(max(nu + sigma_nu, 0.0), v_clip)
    if eta_lo is not None and eta_hi is None:
        eta_hi = 1.0
    interval = (eta_lo, eta_hi) if eta_lo is not None else (None, None)

    def reaches(threshold):
        return eta_lo is not None and eta_hi >= threshold

    deviation = nu / sigma_nu
    return NuResult(
        nu=nu, sigma_nu=sigma_nu, v_prime=v_prime, sigma_v_prime=sigma_v,
        sigma_deviation_from_qm=deviation,
        eta_star=float("nan") if eta_star is None else eta_star,
        eta_interval=interval,
        consistent_with_qm=abs(deviation) <= thresholds.qm_sigma,
        lhv1_compatible=reaches(thresholds.lhv1_eta),
        lhv2_compatible=reaches(thresholds.lhv2_eta),
    )


# --------------------------------------------------------------------------
# chi-square fits
# --------------------------------------------------------------------------

@dataclass
class FitResult:
    model: str
    params: dict
    sigmas: dict
    chi2: float
    dof: int
    converged: bool = True
    warnings: list = field(default_factory=list)
    eta_interval: tuple | None = None

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")


def _wls(design, y, sigma):
    """Weighted linear least squares; returns (coef, cov, chi2)."""
    w = 1.0 / sigma
    a = design * w[:, None]
    b = y * w
    if np.linalg.matrix_rank(a) < design.shape[1]:
        raise RankError("normal equations are singular")
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    cov = np.linalg.inv(a.T @ a)
    resid = a @ coef - b
    return coef, cov, float(resid @ resid)


def _distinct(values, decimals=9):
    return len(np.unique(np.round(values, decimals)))


def fit_qm(series: FSeries) -> FitResult:
    """Weighted fit of ``f = a + b cos 2phi``; ``r0 = 4 / a`` and ``V = b / a``."""
    if _distinct(series.phi) < 3 or _distinct(np.cos(2 * series.phi)) < 2:
        raise RankError(
            f"scan beta={series.beta_deg}: quantum fit needs >= 3 distinct phi, "
            f"got {_distinct(series.phi)}")
    design = np.column_stack([np.ones_like(series.phi), np.cos(2.0 * series.phi)])
    (a, b), cov, chi2 = _wls(design, series.f, series.sigma)
    v = b / a
    grad_v = np.array([-b / a ** 2, 1.0 / a])
    sigma_v = math.sqrt(grad_v @ cov @ grad_v)
    sigma_r0 = 4.0 * math.sqrt(cov[0, 0]) / a ** 2
    return FitResult(
        model="quantum",
        params={"r0": 4.0 / a, "v": v},
        sigmas={"r0": sigma_r0, "v": sigma_v},
        chi2=chi2, dof=len(series) - 2,
    )


def _hinge(phi, eta):
    return np.maximum(np.abs(phi) - 0.5 * math.pi + 0.5 * math.pi * eta, 0.0)


@dataclass
class _InnerFit:
    eta: float
    a: float
    b: float
    epsilon: float
    cov: np.ndarray
    chi2: float
    trace: list


def _inner_fit(series, eta, v_start, max_rounds=20, tol=1e-8):
    """Fit a and b at fixed eta with epsilon tied to the current V' = b/a.

    The map V' -> epsilon -> refitted V' is iterated with Aitken
    extrapolation every third round (Steffensen's method); the plain
    iteration contracts only by about a half per round.
    """
    h = _hinge(series.phi, eta)
    c2 = np.cos(2.0 * series.phi)

    def step(v):
        eps = solve_epsilon(min(max(v, 1e-9), 1.0), eta)
        design = np.column_stack([1.0 + hinge_amplitude(eta, eps) * h, c2])
        (a, b), cov, chi2 = _wls(design, series.f, series.sigma)
        return b / a, (a, b, eps, cov, chi2)

    trace = []
    history = [v_start]
    v = v_start
    for _ in range(max_rounds):
        v_new, state = step(v)
        trace.append(v_new)
        if abs(v_new - v) < tol:
            a, b, eps, cov, chi2 = state
            return _InnerFit(eta, a, b, eps, cov, chi2, trace)
        history.append(v_new)
        v = v_new
        if len(history) == 3:
            v0, v1, v2 = history
            curvature = v2 - 2.0 * v1 + v0
            if curvature != 0.0:
                v = v0 - (v1 - v0) ** 2 / curvature
            history = [v]
    raise ConvergenceError(f"epsilon/V' fixed point did not converge at eta={eta}", trace)


def fit_lhv(series: FSeries, eta_grid=None, xtol=1e-4) -> FitResult:
    """Chi-square fit of the LHV curve with free r0', V' and eta.

    eta is scanned on a coarse grid, refined by golden-section search and
    compared against the kink-free (quantum) limit, so the result never has a
    larger chi2 than :func:`fit_qm`.  Values of eta for which the epsilon
    equation has no root are infeasible and skipped.
    """
    if _distinct(series.phi) < 4:
        raise RankError(
            f"scan beta={series.beta_deg}: LHV fit needs >= 4 distinct phi")
    qm = fit_qm(series)
    v0 = qm.params["v"]
    if eta_grid is None:
        eta_grid = np.linspace(0.01, 0.99, 99)
    eta_grid = np.asarray(eta_grid, dtype=float)

    cache = {}
    failures = []

    def inner(eta):
        if eta not in cache:
            try:
                cache[eta] = _inner_fit(series, eta, v0)
            except SolverError:
                cache[eta] = None
            except ConvergenceError as exc:
                failures.append(exc)
                cache[eta] = None
        return cache[eta]

    def chi2_of(eta):
        fit = inner(float(eta))
        return math.inf if fit is None else fit.chi2

    chi2s = np.array([chi2_of(e) for e in eta_grid])
    if not np.any(np.isfinite(chi2s)):
        if failures:
            raise failures[0]
        raise SolverError("no feasible eta on the grid")
    i = int(np.argmin(chi2s))
    best_eta = float(eta_grid[i])
    if 0 < i < len(eta_grid) - 1 and np.isfinite(chi2s[i - 1]) and np.isfinite(chi2s[i + 1]):
        res = minimize_scalar(chi2_of, bracket=(eta_grid[i - 1], eta_grid[i], eta_grid[i + 1]),
                              method="golden", options={"xtol": xtol / best_eta})
        if res.fun < chi2s[i]:
            best_eta = float(res.x)
    best = inner(best_eta)
    if best is None:
        raise failures[-1] if failures else SolverError(f"eta={best_eta} infeasible")

    warnings = []
    dof = len(series) - 3
    if best.chi2 >= qm.chi2 - 1e-12 or best.epsilon == 0.0:
        # kink-free optimum: the quantum curve at the edge of the clamped region
        eta_edge = clamp_boundary(min(max(v0, 1e-9), 1.0), eta_max=float(eta_grid[-1]))
        warnings = ["kink-free optimum"]
        if not np.any(_hinge(series.phi, max(eta_edge, 1e-9)) > 0):
            warnings.append("hinge region unsampled")
        return FitResult(
            model="lhv",
            params={"r0": qm.params["r0"], "v": v0, "eta": eta_edge, "epsilon": 0.0},
            sigmas={"r0": qm.sigmas["r0"], "v": qm.sigmas["v"],
                    "eta": float("nan"), "epsilon": 0.0},
            chi2=qm.chi2, dof=dof, warnings=warnings,
            eta_interval=(0.0, eta_edge),
        )
    if not np.any(_hinge(series.phi, best.eta) > 0):
        warnings.append("hinge region unsampled")

    lo, hi = _profile_interval(chi2_of, eta_grid, best.eta, best.chi2)
    a, b = best.a, best.b
    v = b / a
    grad_v = np.array([-b / a ** 2, 1.0 / a])
    eps_ends = [solve_epsilon(min(max(v, 1e-9), 1.0), e) for e in (lo, hi)
                if chi2_of(e) < math.inf]
    sigma_eps = max((abs(e - best.epsilon) for e in eps_ends), default=float("nan"))
    return FitResult(
        model="lhv",
        params={"r0": 4.0 / a, "v": v, "eta": best.eta, "epsilon": best.epsilon},
        sigmas={"r0": 4.0 * math.sqrt(best.cov[0, 0]) / a ** 2,
                "v": math.sqrt(grad_v @ best.cov @ grad_v),
                "eta": 0.5 * (hi - lo), "epsilon": sigma_eps},
        chi2=best.chi2, dof=dof, warnings=warnings, eta_interval=(lo, hi),
    )


def _profile_interval(chi2_of, grid, eta_best, chi2_min, level=1.0):
    """Range of eta with chi2 <= chi2_min + level (profile likelihood, 1 sigma)."""
    target = chi2_min + level

    def excess(e):
        c = chi2_of(e)
        return c - target if math.isfinite(c) else 1e300

    below = [e for e in grid if e < eta_best]
    above = [e for e in grid if e > eta_best]
    lo = grid[0]
    inside = eta_best
    for e in reversed(below):
        if excess(e) > 0:
            lo = bisect(excess, e, inside, xtol=1e-6)
            break
        inside = e
    else:
        lo = inside
    hi = grid[-1]
    inside = eta_best
    for e in above:
        if excess(e) > 0:
            hi = bisect(excess, inside, e, xtol=1e-6)
            break
        inside = e
    else:
        hi = inside
    return float(lo), float(hi)


def lhv_model_curve(phi, fit: FitResult):
    """Fitted LHV f values at ``phi``."""
    p = fit.params
    a = 4.0 / p["r0"]
    k = hinge_amplitude(p["eta"], p["epsilon"]) if p["epsilon"] > 0 else 0.0
    return a * (1.0 + p["v"] * np.cos(2.0 * phi) + k * _hinge(phi, p["eta"]))


def qm_model_curve(phi, fit: FitResult):
    p = fit.params
    return 4.0 / p["r0"] * (1.0 + p["v"] * np.cos(2.0 * phi))


# --------------------------------------------------------------------------
# no-signalling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NoSignallingReport:
    min_p: float
    n_tests: int
    adjusted_p: float
    flagged: bool
    p_values: dict


def _constancy_p(recs, name):
    counts = np.array([getattr(r, name) for r in recs], dtype=float)
    pairs = [r.n_pairs for r in recs]
    if all(n for n in pairs):
        n = np.array(pairs, dtype=float)
        rate = counts / n
        var = np.maximum(rate * (1.0 - rate), 1.0 / n) / n
        w = 1.0 / var
        mean = np.sum(w * rate) / np.sum(w)
        chi2 = float(np.sum((rate - mean) ** 2 * w))
    else:
        mean = counts.mean()
        if mean <= 0:
            return 1.0
        chi2 = float(np.sum((counts - mean) ** 2) / mean)
    return float(sps.chi2.sf(chi2, len(recs) - 1))


def nosignalling_check(dataset: Dataset, alpha=1e-3) -> NoSignallingReport:
    """Chi-square test that each arm's singles ignore the other arm's angle.

    Alice's channels are tested across Bob angles at every fixed Alice angle
    and vice versa.  ``flagged`` uses the Bonferroni-adjusted minimum p-value.
    """
    betas = dataset.beta_values()
    if len(betas) < 2:
        raise DegenerateDataError("no-signalling check needs at least 2 Bob angles")
    p_values = {}
    by_alpha, by_beta = {}, {}
    for r in dataset.records:
        by_alpha.setdefault(angle_key(r.alpha_deg), []).append(r)
        by_beta.setdefault(angle_key(r.beta_deg), []).append(r)
    for a, recs in sorted(by_alpha.items()):
        if len(recs) >= 2:
            for name in ("s_ap", "s_am"):
                p_values[(name, a)] = _constancy_p(recs, name)
    for b, recs in sorted(by_beta.items()):
        if len(recs) >= 2:
            for name in ("s_bp", "s_bm"):
                p_values[(name, b)] = _constancy_p(recs, name)
    if not p_values:
        raise DegenerateDataError("no angle has repeated partner settings")
    min_p = min(p_values.values())
    adjusted = min(1.0, min_p * len(p_values))
    return NoSignallingReport(min_p, len(p_values), adjusted, adjusted < alpha, p_values)


# --------------------------------------------------------------------------
# per-scan pipeline
# --------------------------------------------------------------------------

@dataclass
class ScanReport:
    beta_deg: float
    series: FSeries
    nu: NuResult | None
    fit_qm: FitResult | None
    fit_lhv: FitResult | None
    deltas: dict
    warnings: list


def analyze_scan(dataset: Dataset, beta_deg, thresholds: Thresholds = Thresholds(),
                 means=None) -> ScanReport:
    """Run every estimator on one Bob position; problems become warnings."""
    if means is None:
        means = singles_means(dataset)
    warnings = []
    series = f_series(dataset, beta_deg, means)
    if series.skipped:
        warnings.append(f"{len(series.skipped)} settings lack a companion")
    nu = qm = lhv = None
    try:
        nu = compute_nu(series, thresholds)
    except MissingDataError as exc:
        warnings.append(f"nu: {exc}")
    try:
        qm = fit_qm(series)
        lhv = fit_lhv(series)
        warnings.extend(f"lhv: {w}" for w in lhv.warnings if w != "kink-free optimum")
    except (RankError, SolverError, ConvergenceError) as exc:
        warnings.append(f"fit: {exc}")
    try:
        deltas = delta_table(dataset.scan(beta_deg))
    except (RankError, DegenerateDataError) as exc:
        deltas = {}
        warnings.append(f"delta: {exc}")
    return ScanReport(angle_key(beta_deg), series, nu, qm, lhv, deltas, warnings)
