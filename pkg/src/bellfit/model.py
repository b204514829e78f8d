"""Closed-form quantum model of a two-channel polarization-correlation setup.

The source emits photon pairs in the non-maximally entangled state

    |psi> = (|H>|V> - (1 + gamma) |V>|H>) / sqrt(1 + (1 + gamma)^2)

which are then subject to finite collection (``mu``), leaky two-channel
analyzers (transmittances ``T`` on the nominal port and ``t`` on the opposite
one) and inefficient detectors (``zeta``).  All angles are in radians here;
degrees only appear in data files and on the command line.

Every function is pure and broadcasts over numpy arrays of angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParameterDomainError

__all__ = [
    "AnalyzerArm",
    "DetectorBank",
    "SetupConfig",
    "DerivedParams",
    "AngleSetting",
    "CoincidenceProbs",
    "SinglesProbs",
    "MixtureWeights",
    "ExpectedCounts",
    "reduce_phi",
    "derived_params",
    "mixture_weights",
    "analyzer_intensities",
    "ideal_coincidence_probs",
    "coincidence_probs",
    "singles_probs",
    "expected_counts",
    "realistic_config",
]


def _check(cond, field_name, value, requirement):
    if not cond:
        raise ParameterDomainError(field_name, value, requirement)


def _check_finite(field_name, value):
    _check(math.isfinite(value), field_name, value, "finite value")


@dataclass(frozen=True)
class AnalyzerArm:
    """Transmittances of one two-channel polarizer.

    ``T_plus`` is the probability that a photon polarized along the transmit
    axis leaves through the transmit (+) port; ``t_plus`` the probability that
    an orthogonally polarized photon leaks into it.  Likewise for the reflect
    (-) port.
    """

    T_plus: float = 1.0
    t_plus: float = 0.0
    T_minus: float = 1.0
    t_minus: float = 0.0

    def __post_init__(self):
        for name in ("T_plus", "t_plus", "T_minus", "t_minus"):
            _check_finite(name, getattr(self, name))
        for sign in ("plus", "minus"):
            T = getattr(self, f"T_{sign}")
            t = getattr(self, f"t_{sign}")
            _check(0.0 < T <= 1.0, f"T_{sign}", T, "0 < T <= 1")
            # t == T would make the port blind to polarization
            _check(0.0 <= t < T, f"t_{sign}", t, f"0 <= t < T_{sign}={T}")
            _check(T + t <= 1.0, f"t_{sign}", t, f"T_{sign} + t_{sign} <= 1")
        # a photon leaving through either port is a disjoint event
        _check(self.T_plus + self.t_minus <= 1.0, "t_minus", self.t_minus,
               "T_plus + t_minus <= 1")
        _check(self.T_minus + self.t_plus <= 1.0, "t_plus", self.t_plus,
               "T_minus + t_plus <= 1")

    def channel(self, sign):
        """(T, t) pair of the '+' or '-' port."""
        if sign == "+":
            return self.T_plus, self.t_plus
        if sign == "-":
            return self.T_minus, self.t_minus
        raise ParameterDomainError("channel", sign, "'+' or '-'")


@dataclass(frozen=True)
class DetectorBank:
    zeta_ap: float = 1.0
    zeta_am: float = 1.0
    zeta_bp: float = 1.0
    zeta_bm: float = 1.0

    def __post_init__(self):
        for name in ("zeta_ap", "zeta_am", "zeta_bp", "zeta_bm"):
            value = getattr(self, name)
            _check_finite(name, value)
            _check(0.0 < value <= 1.0, name, value, "0 < zeta <= 1")


@dataclass(frozen=True)
class SetupConfig:
    """Full physical description of source, optics and detectors.

    ``r0`` is the mean number of pairs produced per counting window; the
    window length itself is dataset metadata and never enters the model.
    """

    gamma: float = 0.0
    mu_a: float = 1.0
    mu_b: float = 1.0
    arm_a: AnalyzerArm = field(default_factory=AnalyzerArm)
    arm_b: AnalyzerArm = field(default_factory=AnalyzerArm)
    det: DetectorBank = field(default_factory=DetectorBank)
    r0: float = 1.0

    def __post_init__(self):
        _check_finite("gamma", self.gamma)
        _check(abs(self.gamma) < 1.0, "gamma", self.gamma, "|gamma| < 1")
        for name in ("mu_a", "mu_b"):
            value = getattr(self, name)
            _check_finite(name, value)
            _check(0.0 <= value <= 1.0, name, value, "0 <= mu <= 1")
        _check_finite("r0", self.r0)
        _check(self.r0 > 0.0, "r0", self.r0, "r0 > 0")
        for name, cls in (("arm_a", AnalyzerArm), ("arm_b", AnalyzerArm),
                          ("det", DetectorBank)):
            _check(isinstance(getattr(self, name), cls), name,
                   getattr(self, name), f"instance of {cls.__name__}")


def realistic_config(gamma=0.1, T=0.97, t=0.01, mu=0.36, zeta=0.55, r0=1.0):
    """Symmetric setup with realistic analyzers and detectors."""
    arm = AnalyzerArm(T, t, T, t)
    return SetupConfig(
        gamma=gamma, mu_a=mu, mu_b=mu, arm_a=arm, arm_b=arm,
        det=DetectorBank(zeta, zeta, zeta, zeta), r0=r0,
    )


class DerivedParams(NamedTuple):
    gamma_prime: float
    gamma_dprime: float
    eta_ap: float
    eta_am: float
    eta_bp: float
    eta_bm: float
    v_pp: float
    v_pm: float
    v_mp: float
    v_mm: float

    @property
    def visibility(self):
        """Channel-averaged visibility of the f statistic."""
        return 0.25 * (self.v_pp + self.v_pm + self.v_mp + self.v_mm
                       - 2.0 * self.gamma_dprime)


class AngleSetting(NamedTuple):
    alpha: float
    beta: float

    @property
    def phi(self):
        return reduce_phi(self.alpha - self.beta)


class CoincidenceProbs(NamedTuple):
    p_pp: np.ndarray
    p_pm: np.ndarray
    p_mp: np.ndarray
    p_mm: np.ndarray

    def total(self):
        return self.p_pp + self.p_pm + self.p_mp + self.p_mm


class SinglesProbs(NamedTuple):
    p_ap: np.ndarray
    p_am: np.ndarray
    p_bp: np.ndarray
    p_bm: np.ndarray


class MixtureWeights(NamedTuple):
    w_pair: float
    w_aH: float
    w_aV: float
    w_bH: float
    w_bV: float
    w_vac: float


class ExpectedCounts(NamedTuple):
    c_pp: np.ndarray
    c_pm: np.ndarray
    c_mp: np.ndarray
    c_mm: np.ndarray
    s_ap: np.ndarray
    s_am: np.ndarray
    s_bp: np.ndarray
    s_bm: np.ndarray


def reduce_phi(phi):
    """Map an angle difference onto [-pi/2, pi/2) (the formulas have period pi)."""
    reduced = np.mod(np.asarray(phi, dtype=float) + 0.5 * np.pi, np.pi) - 0.5 * np.pi
    return reduced if reduced.ndim else float(reduced)


def _asymmetry(gamma):
    norm = 2.0 + 2.0 * gamma + gamma * gamma
    return (2.0 * gamma + gamma * gamma) / norm, gamma * gamma / norm


def derived_params(config: SetupConfig) -> DerivedParams:
    """Effective efficiencies, visibilities and asymmetry terms of ``config``.

    The overall efficiency of a channel is ``mu * (T + t) * zeta``: the
    prefactor a port collects from an unpolarized photon stream.
    """
    if not isinstance(config, SetupConfig):
        raise ParameterDomainError("config", config, "a SetupConfig")
    g1, g2 = _asymmetry(config.gamma)
    a, b, d = config.arm_a, config.arm_b, config.det
    eta_ap = config.mu_a * (a.T_plus + a.t_plus) * d.zeta_ap
    eta_am = config.mu_a * (a.T_minus + a.t_minus) * d.zeta_am
    eta_bp = config.mu_b * (b.T_plus + b.t_plus) * d.zeta_bp
    eta_bm = config.mu_b * (b.T_minus + b.t_minus) * d.zeta_bm

    def contrast(T, t):
        return (T - t) / (T + t)

    ka = {"+": contrast(a.T_plus, a.t_plus), "-": contrast(a.T_minus, a.t_minus)}
    kb = {"+": contrast(b.T_plus, b.t_plus), "-": contrast(b.T_minus, b.t_minus)}
    return DerivedParams(
        gamma_prime=g1, gamma_dprime=g2,
        eta_ap=eta_ap, eta_am=eta_am, eta_bp=eta_bp, eta_bm=eta_bm,
        v_pp=ka["+"] * kb["+"], v_pm=ka["+"] * kb["-"],
        v_mp=ka["-"] * kb["+"], v_mm=ka["-"] * kb["-"],
    )


def mixture_weights(gamma, mu_a, mu_b) -> MixtureWeights:
    """Weights of pair, one-sided and vacuum components after collection losses."""
    for name, value in (("gamma", gamma), ("mu_a", mu_a), ("mu_b", mu_b)):
        _check_finite(name, value)
    _check(abs(gamma) < 1.0, "gamma", gamma, "|gamma| < 1")
    _check(0.0 <= mu_a <= 1.0, "mu_a", mu_a, "0 <= mu <= 1")
    _check(0.0 <= mu_b <= 1.0, "mu_b", mu_b, "0 <= mu <= 1")
    norm = 2.0 + 2.0 * gamma + gamma * gamma
    heavy = (1.0 + gamma) ** 2
    only_a = mu_a * (1.0 - mu_b)
    only_b = mu_b * (1.0 - mu_a)
    return MixtureWeights(
        w_pair=mu_a * mu_b,
        w_aH=only_a / norm,
        w_aV=only_a * heavy / norm,
        w_bH=only_b * heavy / norm,
        w_bV=only_b / norm,
        w_vac=(1.0 - mu_a) * (1.0 - mu_b),
    )


def analyzer_intensities(arm: AnalyzerArm, channel, theta):
    """Fraction of linearly polarized light leaving ``channel`` of ``arm``.

    ``theta`` is measured from that port's own axis.
    """
    T, t = arm.channel(channel)
    return (T - t) * np.cos(theta) ** 2 + t


def ideal_coincidence_probs(gamma, alpha, beta) -> CoincidenceProbs:
    """Joint projection probabilities of the pair state on ideal analyzers."""
    _check(bool(np.all(np.abs(gamma) < 1.0)), "gamma", gamma, "|gamma| < 1")
    gamma = np.asarray(gamma, dtype=float)
    g = 1.0 + gamma
    norm = 1.0 + g * g
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    return CoincidenceProbs(
        p_pp=(g * sa * cb - ca * sb) ** 2 / norm,
        p_pm=(g * sa * sb + ca * cb) ** 2 / norm,
        p_mp=(g * ca * cb + sa * sb) ** 2 / norm,
        p_mm=(g * ca * sb - sa * cb) ** 2 / norm,
    )


def coincidence_probs(config: SetupConfig, alpha, beta) -> CoincidenceProbs:
    """Coincidence probabilities per produced pair including non-idealities.

    Finite leakage is not propagated into the gamma terms, which therefore
    differ from the exact photon-level process by O(t * gamma).
    """
    d = derived_params(config)
    g1, g2 = d.gamma_prime, d.gamma_dprime
    c2phi = np.cos(2.0 * (np.asarray(alpha) - np.asarray(beta)))
    c2a, c2b = np.cos(2.0 * np.asarray(alpha)), np.cos(2.0 * np.asarray(beta))
    ss = np.sin(2.0 * np.asarray(alpha)) * np.sin(2.0 * np.asarray(beta))
    return CoincidenceProbs(
        p_pp=0.25 * d.eta_ap * d.eta_bp * (1 - d.v_pp * c2phi + g1 * (c2b - c2a) + g2 * ss),
        p_pm=0.25 * d.eta_ap * d.eta_bm * (1 + d.v_pm * c2phi - g1 * (c2b + c2a) - g2 * ss),
        p_mp=0.25 * d.eta_am * d.eta_bp * (1 + d.v_mp * c2phi + g1 * (c2b + c2a) - g2 * ss),
        p_mm=0.25 * d.eta_am * d.eta_bm * (1 - d.v_mm * c2phi - g1 * (c2b - c2a) + g2 * ss),
    )


def singles_probs(config: SetupConfig, alpha, beta) -> SinglesProbs:
    """Single-count probabilities per produced pair.

    Alice's values never look at ``beta`` and Bob's never at ``alpha``.
    """
    d = derived_params(config)
    g1 = d.gamma_prime
    c2a = np.cos(2.0 * np.asarray(alpha, dtype=float))
    c2b = np.cos(2.0 * np.asarray(beta, dtype=float))
    return SinglesProbs(
        p_ap=0.5 * d.eta_ap * (1 - g1 * c2a),
        p_am=0.5 * d.eta_am * (1 + g1 * c2a),
        p_bp=0.5 * d.eta_bp * (1 + g1 * c2b),
        p_bm=0.5 * d.eta_bm * (1 - g1 * c2b),
    )


def expected_counts(config: SetupConfig, alpha, beta) -> ExpectedCounts:
    coinc = coincidence_probs(config, alpha, beta)
    singles = singles_probs(config, alpha, beta)
    return ExpectedCounts(*(config.r0 * np.asarray(p) for p in (*coinc, *singles)))
