"""Eb/N0 <-> noise standard deviation for unit-energy taps and +-1 symbols."""
from __future__ import annotations

import math
from dataclasses import dataclass


def sigma_from_gamma(gamma_db: float, rate: float) -> float:
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (gamma_db / 10.0)))


def gamma_from_sigma(sigma: float, rate: float) -> float:
    return 10.0 * math.log10(1.0 / (2.0 * rate * sigma * sigma))


@dataclass(frozen=True)
class NoiseConfig:
    gamma_db: float
    rate: float

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must lie in (0, 1]")

    @property
    def sigma(self) -> float:
        return sigma_from_gamma(self.gamma_db, self.rate)

    @property
    def snr(self) -> float:
        """1 / sigma**2."""
        return 2.0 * self.rate * 10.0 ** (self.gamma_db / 10.0)

    @classmethod
    def from_sigma(cls, sigma: float, rate: float) -> "NoiseConfig":
        return cls(gamma_from_sigma(sigma, rate), rate)
