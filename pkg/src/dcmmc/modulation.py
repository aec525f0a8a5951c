"""Phase-shifted carrier modulation with level adjustment.

One symmetric triangle carrier per module, spanning [0, 1]; a module is
inserted while its reference sits at or above its carrier. Level adjustments
are applied as reference offsets (subtracting delta_j from the reference is
the counterpart of raising the carrier by delta_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

TWO_PI = 2.0 * np.pi

__all__ = [
    "GateVector",
    "CarrierSpec",
    "carrier_phases",
    "level_adjustments",
    "module_reference",
    "triangle_carrier",
    "gate_signals",
    "effective_arm_index",
]


@dataclass(frozen=True)
class GateVector:
    """Per-module insertion signals of one arm at an instant (True = inserted)."""

    s: np.ndarray  # bool, length N
    arm: str = "upper"
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=bool))
        if self.arm not in ("upper", "lower"):
            raise ConfigError(f"arm must be 'upper' or 'lower', got {self.arm!r}")

    def as_float(self) -> np.ndarray:
        return self.s.astype(float)


@dataclass(frozen=True)
class CarrierSpec:
    """Carrier bank of one arm: per-module phase shifts plus level offsets."""

    phase_shifts: np.ndarray  # rad, in [0, 2*pi)
    frequency: float  # Hz
    level_offsets: np.ndarray = None  # delta vector, defaults to zeros

    def __post_init__(self):
        ph = np.asarray(self.phase_shifts, dtype=float)
        if np.any(ph < 0.0) or np.any(ph >= TWO_PI):
            raise ConfigError("carrier phase shifts must lie in [0, 2*pi)")
        object.__setattr__(self, "phase_shifts", ph)
        offs = self.level_offsets
        offs = np.zeros_like(ph) if offs is None else np.asarray(offs, dtype=float)
        if offs.shape != ph.shape:
            raise ConfigError("level_offsets must match phase_shifts in length")
        object.__setattr__(self, "level_offsets", offs)


def carrier_phases(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mirrored carrier phase vectors (phi_upper, phi_lower) for n modules [rad].

    phi_u[j] = 2*pi*(j-1)/n and phi_l[j] = 2*pi*(n-j)/n, 1-based j.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    j = np.arange(n)
    phi_u = TWO_PI * j / n
    phi_l = TWO_PI * ((n - 1.0 - j) % n) / n
    return phi_u, phi_l


def level_adjustments(n: int, delta_a: float, sign_adaptive: bool = False,
                      arm_current_sign: int = 1) -> np.ndarray:
    """Zero-sum reference offsets delta_j = delta_a*(1/2 - (j-1)/(n-1)).

    With sign_adaptive the whole vector is multiplied by the sign of the arm
    current, so the balancing direction follows the current direction.
    """
    if delta_a < 0.0:
        raise ConfigError(f"delta_a must be >= 0, got {delta_a}")
    if n == 1:
        if delta_a > 0.0:
            raise ConfigError("level adjustment needs at least 2 modules")
        return np.zeros(1)
    j = np.arange(n)
    delta = delta_a * (0.5 - j / (n - 1.0))
    if sign_adaptive:
        delta = delta * (1.0 if arm_current_sign >= 0 else -1.0)
    return delta


def module_reference(m_a: float, omega: float, t: float, delta_j, arm: str):
    """Per-module reference: (1 -/+ m_a*sin(omega*t))/2 - delta_j (upper/lower)."""
    s = np.sin(omega * t)
    if arm == "upper":
        return (1.0 - m_a * s) / 2.0 - np.asarray(delta_j)
    if arm == "lower":
        return (1.0 + m_a * s) / 2.0 - np.asarray(delta_j)
    raise ConfigError(f"arm must be 'upper' or 'lower', got {arm!r}")


def triangle_carrier(frequency: float, phase: np.ndarray | float, t: float):
    """Symmetric triangle in [0, 1]: 0 at phase 0, peak 1 at half period."""
    x = np.mod(frequency * t + np.asarray(phase) / TWO_PI, 1.0)
    return 1.0 - np.abs(2.0 * x - 1.0)


def gate_signals(references: np.ndarray, carriers: CarrierSpec, t: float,
                 arm: str = "upper") -> GateVector:
    """Compare references against the carrier bank at time t."""
    refs = np.asarray(references, dtype=float)
    if refs.shape != carriers.phase_shifts.shape:
        raise ConfigError(
            f"got {refs.size} references for {carriers.phase_shifts.size} carriers")
    tri = triangle_carrier(carriers.frequency, carriers.phase_shifts, t)
    return GateVector(s=refs >= tri, arm=arm, time=t)


def effective_arm_index(references: np.ndarray) -> float:
    """Arithmetic mean of the per-module references (whole-arm modulation index)."""
    refs = np.asarray(references, dtype=float)
    if refs.size == 0:
        raise ConfigError("references must be nonempty")
    return float(refs.mean())
