"""Network and traffic configuration shared by the analytical and Monte Carlo paths.

All radio quantities are configured in dB / dBm (the dominant failure mode in
this domain is a unit bug) and converted to linear units exactly once, here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


class Strategy(str, Enum):
    """Channel allocation strategy for prioritized uplink access."""

    SHARED = "shared"
    DEDICATED_EA = "dedicated-ea"
    DEDICATED_WA = "dedicated-wa"
    PRIORITY_AGNOSTIC = "pa"  # FCFS benchmark, Monte Carlo only

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown strategy {text!r}; expected one of "
                f"{[s.value for s in cls]}"
            ) from None


def db_to_linear(value_db: float) -> float:
    """Convert a dB ratio to linear scale."""
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    """Convert a dBm power to watts."""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class TrafficClass:
    """One priority stream: per-slot arrival probability and finite queue size.

    Lower ``index`` means higher priority; indices are 1-based.
    """

    index: int
    alpha: float
    queue_size: int

    def __post_init__(self):
        if self.index < 1:
            raise ConfigError(f"class index must be >= 1, got {self.index}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.queue_size < 1:
            raise ConfigError(f"queue size must be >= 1, got {self.queue_size}")


@dataclass(frozen=True)
class SystemConfig:
    """Full parameter set for one network operating point.

    Traffic classes are ordered by priority (index 1 first).  ``epsilon`` and
    ``max_iterations`` control the coverage/queue fixed-point loop; ``damping``
    relaxes the coverage update (1.0 disables it).  ``strict_overflow_break``
    reproduces the reference behavior of aborting the fixed point as soon as
    the drift condition fails instead of merely flagging it.
    """

    classes: tuple[TrafficClass, ...]
    lambda_per_km2: float = 10.0
    mu_per_km2: float = 640.0
    eta: float = 4.0
    rho_dbm: float = -90.0
    sigma2_dbm: float = -90.0
    theta_db: float = -18.0
    channels: int = 64
    strategy: Strategy = Strategy.SHARED
    epsilon: float = 1e-8
    max_iterations: int = 500
    damping: float = 1.0
    strict_overflow_break: bool = False

    def __post_init__(self):
        if not self.classes:
            raise ConfigError("at least one traffic class is required")
        for pos, cls in enumerate(self.classes, start=1):
            if cls.index != pos:
                raise ConfigError(
                    f"class indices must be 1..N in order, got {cls.index} "
                    f"at position {pos}"
                )
        if self.eta <= 2.0:
            raise ConfigError(f"path-loss exponent must exceed 2, got {self.eta}")
        if self.lambda_per_km2 <= 0 or self.mu_per_km2 <= 0:
            raise ConfigError("lambda_per_km2 and mu_per_km2 must be positive")
        if self.channels < 1:
            raise ConfigError(f"channel count must be >= 1, got {self.channels}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(cls.alpha for cls in self.classes)

    @property
    def queue_sizes(self) -> tuple[int, ...]:
        return tuple(cls.queue_size for cls in self.classes)

    @property
    def theta(self) -> float:
        """SINR threshold in linear scale."""
        return db_to_linear(self.theta_db)

    @property
    def noise_to_signal(self) -> float:
        """The ratio sigma^2 / rho in linear scale (only the ratio matters)."""
        return db_to_linear(self.sigma2_dbm - self.rho_dbm)

    @property
    def kappa(self) -> float:
        """Average devices per base station per channel, mu / (lambda * C)."""
        return self.mu_per_km2 / (self.lambda_per_km2 * self.channels)

    def with_(self, **changes) -> "SystemConfig":
        """Return a copy with the given fields replaced."""
        return replace(self, **changes)


def make_config(alphas, queue_sizes, **kwargs) -> SystemConfig:
    """Build a SystemConfig from parallel alpha / queue-size sequences."""
    alphas = tuple(float(a) for a in alphas)
    queue_sizes = tuple(int(k) for k in queue_sizes)
    if len(alphas) != len(queue_sizes):
        raise ConfigError(
            f"alphas ({len(alphas)}) and queue_sizes ({len(queue_sizes)}) "
            "must have the same length"
        )
    classes = tuple(
        TrafficClass(index=i + 1, alpha=a, queue_size=k)
        for i, (a, k) in enumerate(zip(alphas, queue_sizes))
    )
    return SystemConfig(classes=classes, **kwargs)
