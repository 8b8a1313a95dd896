"""Uplink coverage probability under channel-inversion power control.

The coverage expression couples a noise term exp(-sigma^2 theta / rho) with
two interference attenuation factors driven by the single load parameter
``activity * kappa`` (the fraction of devices contending on the class's
channel slice): a Gauss hypergeometric factor for out-of-cell interference
and a (1 + theta w / ((1+theta) c))^(-c) factor for in-cell interference,
where c = 3.575 is the Voronoi cell-area shape constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.integrate import quad

from .config import ConfigError, Strategy

#: Shape constant of the gamma approximation to the planar Voronoi cell area.
VORONOI_SHAPE = 3.575

#: Relative accuracy target for the hypergeometric evaluation.
HYP2F1_RTOL = 1e-10

_SERIES_MAX_TERMS = 200_000


class QuadratureError(RuntimeError):
    """Raised when the interference integral fails to reach tolerance."""


@dataclass(frozen=True)
class RadioParams:
    """Propagation-side parameters in linear units.

    ``noise_to_signal`` is sigma^2 / rho; only that ratio enters the coverage
    expression.  ``theta`` is the linear SINR threshold.
    """

    eta: float
    theta: float
    noise_to_signal: float

    def __post_init__(self):
        if self.eta <= 2.0:
            raise ConfigError(f"eta must exceed 2, got {self.eta}")
        if self.theta <= 0.0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        if self.noise_to_signal < 0.0:
            raise ConfigError("noise-to-signal ratio must be non-negative")


@dataclass(frozen=True)
class LoadParams:
    """Interference load: devices per BS per channel times the activity factor."""

    kappa: float
    activity: float

    def __post_init__(self):
        if self.kappa < 0.0:
            raise ConfigError(f"kappa must be non-negative, got {self.kappa}")
        if not 0.0 <= self.activity <= 1.0:
            raise ConfigError(f"activity must lie in [0, 1], got {self.activity}")

    @property
    def weight(self) -> float:
        return self.kappa * self.activity


def _series_2f1(theta: float, eta: float) -> float:
    """Power series of 2F1(1, 1 - 2/eta; 2 - 2/eta; -theta), |theta| < 1.

    With a = 1 the Pochhammer ratios collapse to b / (b + k), b = 1 - 2/eta,
    so the series is sum_k b / (b + k) (-theta)^k.
    """
    b = 1.0 - 2.0 / eta
    total = 0.0
    term = 1.0
    for k in range(_SERIES_MAX_TERMS):
        contrib = b / (b + k) * term
        total += contrib
        if abs(contrib) < HYP2F1_RTOL * abs(total) and k > 2:
            return total
        term *= -theta
    raise QuadratureError(f"series for 2F1 did not converge at theta={theta}")


def _quadrature_2f1(theta: float, eta: float) -> float:
    """Integral form, valid for all theta > 0.

    Uses (2 theta / (eta - 2)) 2F1 = 2 theta^(2/eta) * I with
    I = int_{theta^(-1/eta)}^inf y / (y^eta + 1) dy, mapped to a finite
    interval via y -> 1/u to keep the quadrature adaptive near infinity.
    """
    lower = theta ** (-1.0 / eta)

    def integrand(u: float) -> float:
        # y = 1/u, dy = -du/u^2; y/(y^eta+1) dy -> u^(eta-3)/(1+u^eta) du
        return u ** (eta - 3.0) / (1.0 + u ** eta)

    value, err = quad(integrand, 0.0, 1.0 / lower, epsabs=0.0, epsrel=1e-12, limit=200)
    if not math.isfinite(value) or (value > 0 and err / value > 1e-9):
        raise QuadratureError(
            f"interference quadrature failed at theta={theta}, eta={eta} "
            f"(estimate {value}, error {err})"
        )
    factor = 2.0 * theta ** (2.0 / eta) * value
    return factor * (eta - 2.0) / (2.0 * theta)


def gauss_2f1_interference(theta: float, eta: float) -> float:
    """Evaluate 2F1(1, 1 - 2/eta; 2 - 2/eta; -theta) for theta > 0, eta > 2.

    Series inside the unit disk, adaptive quadrature of the equivalent
    integral outside; both branches agree to 1e-9 where they overlap.
    """
    if theta <= 0.0:
        if theta == 0.0:
            return 1.0
        raise ConfigError(f"theta must be positive, got {theta}")
    if eta <= 2.0:
        raise ConfigError(f"eta must exceed 2, got {eta}")
    if theta < 1.0:
        return _series_2f1(theta, eta)
    return _quadrature_2f1(theta, eta)


def coverage_probability(radio: RadioParams, load: LoadParams) -> float:
    """Success probability of one uplink transmission attempt.

    Monotonically decreasing in theta and in the interference weight; reduces
    to the noise-only bound exp(-sigma^2 theta / rho) when the weight is zero.
    """
    theta, eta = radio.theta, radio.eta
    w = load.weight
    hyp = gauss_2f1_interference(theta, eta)
    exponent = radio.noise_to_signal * theta + (2.0 * theta * w / (eta - 2.0)) * hyp
    denom = (1.0 + theta * w / ((1.0 + theta) * VORONOI_SHAPE)) ** VORONOI_SHAPE
    return math.exp(-exponent) / denom


def channel_split(strategy: Strategy, channels: int, alphas) -> tuple[float, ...]:
    """Per-class channel budget (fractional; rounding is a simulation concern).

    Shared access exposes the full pool to every class; dedicated-EA splits it
    evenly; dedicated-WA proportionally to the arrival probabilities.
    """
    if channels < 1:
        raise ConfigError(f"channel count must be >= 1, got {channels}")
    alphas = tuple(float(a) for a in alphas)
    n = len(alphas)
    if n == 0:
        raise ConfigError("at least one class is required")
    if strategy is Strategy.SHARED or strategy is Strategy.PRIORITY_AGNOSTIC:
        return tuple(float(channels) for _ in alphas)
    if strategy is Strategy.DEDICATED_EA:
        return tuple(channels / n for _ in alphas)
    if strategy is Strategy.DEDICATED_WA:
        total = sum(alphas)
        if total <= 0.0:
            raise ConfigError("weighted allocation needs at least one alpha > 0")
        return tuple(channels * a / total for a in alphas)
    raise ConfigError(f"unsupported strategy {strategy!r}")
