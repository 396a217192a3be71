"""Aerodynamic load on the aileron and the spring that stands in for it."""
from __future__ import annotations

import math
from dataclasses import dataclass

from servorig.errors import DomainError

MPH = 0.44704  # m/s per statute mile per hour
SEA_LEVEL_RHO = 1.27


@dataclass(frozen=True)
class AirfoilSpec:
    width_m: float = 0.428
    height_m: float = 0.048
    area_m2: float = 0.021
    v_min_mps: float = 40 * MPH
    v_max_mps: float = 50 * MPH
    v_avg_mps: float = 45 * MPH
    theta_max_deg: float = 40.0
    rho_kg_m3: float = SEA_LEVEL_RHO

    def __post_init__(self):
        problems = []
        if self.rho_kg_m3 <= 0:
            problems.append("rho_kg_m3 must be positive")
        if not self.v_min_mps <= self.v_avg_mps <= self.v_max_mps:
            problems.append("speeds must satisfy v_min <= v_avg <= v_max")
        if not 0 < self.theta_max_deg <= 90:
            problems.append("theta_max_deg must lie in (0, 90]")
        if self.area_m2 <= 0:
            problems.append("area_m2 must be positive")
        if problems:
            raise DomainError("; ".join(problems))


@dataclass(frozen=True)
class SpringSpec:
    stiffness_n_per_m: float
    arm_length_m: float
    max_extension_m: float


def aero_force(spec, v_mps, theta_deg):
    """Normal force ``0.5 * rho * v^2 * A * cos(theta)`` in newtons."""
    if abs(theta_deg) > 90:
        raise DomainError(f"deflection {theta_deg} deg outside [-90, 90]")
    if v_mps < 0:
        raise DomainError(f"speed must be non-negative, got {v_mps}")
    return max(0.0, 0.5 * spec.rho_kg_m3 * v_mps ** 2 * spec.area_m2
               * math.cos(math.radians(theta_deg)))


def extension(arm_length_m, theta_deg):
    return arm_length_m * math.sin(math.radians(abs(theta_deg)))


def size_spring(spec, arm_length_m=0.02):
    """Stiffness that balances the load at maximum speed and deployment."""
    if arm_length_m <= 0:
        raise DomainError(f"arm length must be positive, got {arm_length_m}")
    x_max = extension(arm_length_m, spec.theta_max_deg)
    if x_max == 0:
        raise DomainError("zero maximum deployment angle gives no spring extension")
    k = aero_force(spec, spec.v_max_mps, spec.theta_max_deg) / x_max
    return SpringSpec(k, arm_length_m, x_max)


def spring_force(spring, theta_deg):
    """Restoring force of the opposed spring pair, signed against deflection."""
    if abs(theta_deg) > 90:
        raise DomainError(f"deflection {theta_deg} deg outside [-90, 90]")
    magnitude = spring.stiffness_n_per_m * extension(spring.arm_length_m, theta_deg)
    return -math.copysign(magnitude, theta_deg) if theta_deg else 0.0
