"""Predictions of the restricted local hidden variable (LHV) family.

The family deviates from the quantum cosine through a small kink near
``|phi| = pi/2`` whose size is set by ``epsilon**3``; ``epsilon`` is tied to the
visibility ``v`` and the averaged detection efficiency ``eta`` by a
transcendental equation solved here by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .errors import NoSolutionError, ParameterDomainError, SolverError
from .model import reduce_phi

EPS_BRACKET = (0.0, math.pi / 4 - 1e-6)
EPS_XTOL = 1e-10


def _check_v(v):
    if not (math.isfinite(v) and 0.0 < v <= 1.0):
        raise ParameterDomainError("v", v, "0 < v <= 1")


def _check_eta(eta, upper=1.0):
    if not (math.isfinite(eta) and 0.0 < eta <= upper):
        raise ParameterDomainError("eta", eta, f"0 < eta <= {upper}")


def _check_epsilon(epsilon):
    if not (math.isfinite(epsilon) and epsilon >= 0.0):
        raise ParameterDomainError("epsilon", epsilon, "epsilon >= 0")


def sinc2(eta):
    """sin^2(x)/x^2 at x = pi*eta/2."""
    x = 0.5 * math.pi * eta
    return (math.sin(x) / x) ** 2


def epsilon_equation_lhs(epsilon):
    """Left side of the epsilon equation; rises from 1 at 0 to pi/2 at pi/4."""
    e2 = 2.0 * epsilon
    return ((math.pi - e2 + math.sin(e2) * math.cos(e2))
            / (math.cos(e2) * (math.pi - e2 + math.tan(e2))))


def solve_epsilon(v, eta):
    """Exact epsilon for visibility ``v`` and efficiency ``eta``.

    Returns 0 when the right-hand side ``v / sinc2(eta)`` does not exceed 1,
    i.e. when the equation has no positive root.
    """
    _check_v(v)
    _check_eta(eta)
    rhs = v / sinc2(eta)
    if rhs <= 1.0:
        return 0.0
    lo, hi = EPS_BRACKET
    f_lo = epsilon_equation_lhs(lo) - rhs
    f_hi = epsilon_equation_lhs(hi) - rhs
    if f_lo * f_hi > 0.0:
        raise SolverError(
            f"epsilon not bracketed for v={v}, eta={eta}: "
            f"f({lo})={f_lo:.6g}, f({hi:.9f})={f_hi:.6g}"
        )
    return bisect(lambda e: epsilon_equation_lhs(e) - rhs, lo, hi, xtol=EPS_XTOL)


def epsilon_approx(v, eta):
    """Small-eta approximation ``sqrt(max(v - sinc2(eta), 0) / 2)``."""
    _check_v(v)
    _check_eta(eta)
    return math.sqrt(max(0.5 * (v - sinc2(eta)), 0.0))


def clamp_boundary(v, eta_max=1.0):
    """Largest eta at which epsilon is still clamped to zero.

    Both the exact and the approximate epsilon vanish exactly when
    ``v <= sinc2(eta)``; sinc2 decreases on (0, 1] so the set is an interval.
    """
    _check_v(v)
    if v >= 1.0:
        return 0.0
    if sinc2(eta_max) >= v:
        return eta_max
    return bisect(lambda e: sinc2(e) - v, 1e-12, eta_max, xtol=1e-14)


def hinge_amplitude(eta, epsilon):
    """Slope of the kink term, 32 eps^3 / (3 pi^2 eta^2)."""
    return 32.0 * epsilon ** 3 / (3.0 * math.pi ** 2 * eta ** 2)


def delta_phi(phi, eta, epsilon):
    """Departure of the LHV prediction from the pure cosine."""
    _check_eta(eta)
    _check_epsilon(epsilon)
    aphi = np.abs(reduce_phi(phi))
    hinge = np.maximum(eta + 2.0 / math.pi * aphi - 1.0, 0.0)
    bracket = 2.0 * sinc2(eta) * np.cos(2.0 * aphi) - 1.0 + 2.0 / eta ** 2 * hinge
    return 8.0 * epsilon ** 3 / (3.0 * math.pi) * bracket


@dataclass(frozen=True)
class LhvParams:
    """Fit parameterization of the LHV curve; ``epsilon`` is derived."""

    r0_prime: float
    v_prime: float
    eta: float
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.r0_prime) and self.r0_prime > 0):
            raise ParameterDomainError("r0_prime", self.r0_prime, "r0_prime > 0")
        _check_v(self.v_prime)
        _check_eta(self.eta)
        _check_epsilon(self.epsilon)

    @classmethod
    def from_visibility(cls, v_prime, eta, r0_prime=1.0, exact=True):
        solver = solve_epsilon if exact else epsilon_approx
        return cls(r0_prime, v_prime, eta, solver(v_prime, eta))


def lhv_curve(phi, v_prime, eta, epsilon):
    """``1/4 [1 + v cos 2phi + A (|phi| - pi/2 + pi eta/2)_+]`` at any phi."""
    aphi = np.abs(reduce_phi(phi))
    hinge = np.maximum(aphi - 0.5 * math.pi + 0.5 * math.pi * eta, 0.0)
    return 0.25 * (1.0 + v_prime * np.cos(2.0 * aphi)
                   + hinge_amplitude(eta, epsilon) * hinge)


def lhv_probability(phi, params: LhvParams):
    return lhv_curve(phi, params.v_prime, params.eta, params.epsilon)


def nu_prediction(eta, epsilon):
    """Kink statistic of the LHV curve (valid while the pi/4 point is off the hinge)."""
    _check_eta(eta, upper=0.5)
    _check_epsilon(epsilon)
    k = 16.0 * epsilon ** 3 / (3.0 * math.pi * eta)
    return k / (4.0 + k)


def nu_from_curve(v_prime, eta, epsilon):
    """Kink statistic evaluated directly on the curve; covers eta > 1/2 too."""
    f0, f45, f90 = lhv_curve(np.array([0.0, math.pi / 4, math.pi / 2]),
                             v_prime, eta, epsilon)
    return (f0 + f90 - 2.0 * f45) / (f0 + f90 + 2.0 * f45)


def nu_of_eta(eta, v_prime, exact=False):
    """Predicted kink statistic as a function of eta at fixed visibility."""
    epsilon = (solve_epsilon if exact else epsilon_approx)(v_prime, eta)
    if eta <= 0.5:
        return nu_prediction(eta, epsilon)
    return float(nu_from_curve(v_prime, eta, epsilon))


def invert_eta_for_nu(nu_target, v_prime, eta_max=0.5, exact=False, grid=400):
    """Smallest eta whose predicted kink statistic equals ``nu_target``.

    ``nu_target == 0`` returns the clamp boundary (the largest eta still giving
    epsilon = 0).  Epsilon follows the small-eta approximation unless ``exact``.
    """
    if not (math.isfinite(nu_target) and nu_target >= 0.0):
        raise ParameterDomainError("nu_target", nu_target, "nu_target >= 0")
    _check_v(v_prime)
    _check_eta(eta_max)
    boundary = clamp_boundary(v_prime, eta_max)
    if nu_target == 0.0:
        if boundary <= 0.0:
            raise NoSolutionError(
                f"nu=0 only reached as eta -> 0 for v_prime={v_prime}")
        return boundary

    def excess(eta):
        return nu_of_eta(eta, v_prime, exact) - nu_target

    lo = max(boundary, 1e-9)
    etas = np.linspace(lo, eta_max, grid + 1)
    values = [excess(e) for e in etas]
    for i in range(grid):
        if values[i] == 0.0:
            return float(etas[i])
        if values[i] < 0.0 <= values[i + 1]:
            return bisect(excess, etas[i], etas[i + 1], xtol=1e-12)
    top = max(values) + nu_target
    raise NoSolutionError(
        f"nu={nu_target} unattainable for v_prime={v_prime}: "
        f"attainable range over (0, {eta_max}] is [0, {top:.6g}]"
    )
