"""Rotary-wing UAV propulsion power model.

Total propulsion power is the sum of three speed-dependent terms:
blade profile power, induced power and parasite (fuselage drag) power.
The hover constants and the minimum-power speed are derived from the
physical parameters of the airframe.
"""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class UavPhysics:
    """Physical parameters of a rotary-wing UAV.

    Attributes:
        weight: aircraft weight (N)
        air_density: air density (kg/m^3)
        rotor_radius: rotor radius (m)
        disc_area: rotor disc area (m^2)
        blade_angular_velocity: blade angular velocity (rad/s)
        tip_speed: tip speed of the rotor blade (m/s)
        num_blades: number of blades
        chord: blade or aerofoil chord length (m)
        rotor_solidity: ratio of total blade area to disc area
        flat_plate_area: fuselage equivalent flat plate area (m^2)
        fuselage_drag_ratio: fuselage drag ratio
        induced_correction: incremental correction factor to induced power
        mean_induced_velocity: mean rotor induced velocity in hover (m/s)
        profile_drag: profile drag coefficient
    """

    # Weight is pinned so that sqrt(weight / (2*rho*A)) equals the quoted
    # hover induced velocity of 2.4868 m/s; the commonly quoted 4.21 N is a
    # rounded value and misses the derived hover power constants.
    weight: float = 4.2134
    air_density: float = 1.205
    rotor_radius: float = 0.3
    disc_area: float = 0.2827
    blade_angular_velocity: float = 200.0
    tip_speed: float = 60.0
    num_blades: int = 4
    chord: float = 0.0196
    rotor_solidity: float = 0.0832
    flat_plate_area: float = 0.0118
    fuselage_drag_ratio: float = 0.5017
    induced_correction: float = 0.1
    mean_induced_velocity: float = 2.4868
    profile_drag: float = 0.012

    def __post_init__(self):
        for name in (
            "weight", "air_density", "rotor_radius", "disc_area",
            "blade_angular_velocity", "tip_speed", "num_blades", "chord",
            "rotor_solidity", "flat_plate_area", "fuselage_drag_ratio",
            "induced_correction", "mean_induced_velocity", "profile_drag",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"UavPhysics.{name} must be positive")


def blade_profile_power(physics: UavPhysics) -> float:
    """Blade profile power in hover (W): delta*rho*s*A*Omega^3*R^3/8."""
    p = physics
    return (p.profile_drag * p.air_density * p.rotor_solidity * p.disc_area
            * p.blade_angular_velocity ** 3 * p.rotor_radius ** 3) / 8.0


def induced_power(physics: UavPhysics) -> float:
    """Induced power in hover (W): (1+k)*W^(3/2)/sqrt(2*rho*A)."""
    p = physics
    return ((1.0 + p.induced_correction) * p.weight ** 1.5
            / math.sqrt(2.0 * p.air_density * p.disc_area))


def propulsion_power(physics: UavPhysics, speed: float) -> float:
    """Propulsion power (W) at horizontal flying speed `speed` (m/s)."""
    if speed < 0:
        raise ValueError("speed must be nonnegative")
    p = physics
    v2 = speed * speed
    pb = blade_profile_power(p) * (1.0 + 3.0 * v2 / p.tip_speed ** 2)
    v0sq = p.mean_induced_velocity ** 2
    induced_arg = math.sqrt(1.0 + v2 * v2 / (4.0 * v0sq * v0sq)) - v2 / (2.0 * v0sq)
    pi = induced_power(p) * math.sqrt(induced_arg)
    parasite = 0.5 * p.fuselage_drag_ratio * p.air_density * p.rotor_solidity \
        * p.disc_area * speed ** 3
    return pb + pi + parasite


def hover_power(physics: UavPhysics) -> float:
    """Propulsion power when hovering (V = 0)."""
    return blade_profile_power(physics) + induced_power(physics)


def min_power_speed(physics: UavPhysics, tol: float = 1e-4) -> float:
    """Speed (m/s) minimizing propulsion power, by golden-section search.

    The power curve is unimodal on [0, tip_speed/2]; the search brackets
    the minimum to within `tol` m/s.
    """
    lo, hi = 0.0, physics.tip_speed / 2.0
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = propulsion_power(physics, c)
    fd = propulsion_power(physics, d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = propulsion_power(physics, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = propulsion_power(physics, d)
    return 0.5 * (a + b)
