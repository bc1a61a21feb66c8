"""World description: device geometry, channel model and mission limits.

A Scenario bundles the carrier-emitter (CE) and backscatter-device (BD)
layout, the large-scale channel constants, the per-BD service requirements
and the UAV mission parameters. Scenarios are immutable after construction
and safe to share across concurrent optimization runs.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import ConfigurationError
from .uav_power import UavPhysics


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts / 1e-3)


# Defaults for the full-scale profile.
FULL_DEFAULTS = dict(
    M=4, K=12, area_side=56.0, altitude=20.0, mission_time=50.0,
    num_slots=200, beta0=1e-3, noise_dbm=-144.0, eta=0.5,
    qbar=30.0, ebar=1e-4, p_max=6.0, v_max=10.0, carrier_freq=900e6,
)

# Desk-scale profile used for CI-sized runs: smaller network, shorter
# mission, and service floors rescaled so both schemes stay feasible for
# generic random layouts at T=30 s.
DESK_DEFAULTS = dict(
    M=2, K=4, area_side=56.0, altitude=20.0, mission_time=30.0,
    num_slots=50, beta0=1e-3, noise_dbm=-144.0, eta=0.5,
    qbar=20.0, ebar=2e-5, p_max=6.0, v_max=10.0, carrier_freq=900e6,
)


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one network instance.

    Positions are 2-D coordinates in meters. Per-BD vectors (association,
    eta, qbar, ebar) are indexed by the flat BD index 0..K-1.
    """

    ce_positions: np.ndarray          # (M, 2)
    bd_positions: np.ndarray          # (K, 2)
    association: np.ndarray           # (K,) CE index per BD
    altitude: float                   # m
    mission_time: float               # s
    num_slots: int
    beta0: float                      # channel gain at 1 m
    noise_power: float                # W
    eta: np.ndarray                   # (K,) harvesting efficiency
    qbar: np.ndarray                  # (K,) min throughput, bits/Hz
    ebar: np.ndarray                  # (K,) min harvested energy, J
    p_max: float                      # W
    v_max: float                      # m/s
    uav: UavPhysics = field(default_factory=UavPhysics)
    carrier_freq: float = 900e6       # Hz, descriptive only

    def __post_init__(self):
        object.__setattr__(self, "ce_positions",
                           np.asarray(self.ce_positions, dtype=float))
        object.__setattr__(self, "bd_positions",
                           np.asarray(self.bd_positions, dtype=float))
        object.__setattr__(self, "association",
                           np.asarray(self.association, dtype=int))
        for name in ("eta", "qbar", "ebar"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim == 0:
                v = np.full(self.num_bds, float(v))
            object.__setattr__(self, name, v)
        self._validate()

    def _validate(self):
        if self.ce_positions.ndim != 2 or self.ce_positions.shape[1] != 2:
            raise ConfigurationError("ce_positions must be (M, 2)")
        if self.bd_positions.ndim != 2 or self.bd_positions.shape[1] != 2:
            raise ConfigurationError("bd_positions must be (K, 2)")
        if self.num_ces < 1 or self.num_bds < 1:
            raise ConfigurationError("need at least one CE and one BD")
        if self.association.shape != (self.num_bds,):
            raise ConfigurationError("association must map every BD")
        if self.association.min() < 0 or self.association.max() >= self.num_ces:
            raise ConfigurationError("association references unknown CE")
        expected = associate_bds(self.ce_positions, self.bd_positions)
        if not np.array_equal(self.association, expected):
            raise ConfigurationError(
                "each BD must be associated to its closest CE")
        if self.altitude <= 0 or self.mission_time <= 0:
            raise ConfigurationError("altitude and mission_time must be > 0")
        if self.num_slots < 1:
            raise ConfigurationError("num_slots must be >= 1")
        if np.any(self.eta < 0) or np.any(self.eta > 1):
            raise ConfigurationError("eta must lie in [0, 1]")
        if self.p_max <= 0 or self.v_max <= 0:
            raise ConfigurationError("p_max and v_max must be > 0")
        if self.beta0 <= 0 or self.noise_power <= 0:
            raise ConfigurationError("beta0 and noise_power must be > 0")
        for m in range(self.num_ces):
            for k in np.flatnonzero(self.association == m):
                if np.allclose(self.bd_positions[k], self.ce_positions[m]):
                    raise ConfigurationError(
                        f"BD {k} co-located with CE {m}")

    @property
    def num_ces(self) -> int:
        return self.ce_positions.shape[0]

    @property
    def num_bds(self) -> int:
        return self.bd_positions.shape[0]

    @property
    def slot_length(self) -> float:
        return self.mission_time / self.num_slots

    @property
    def group_sizes(self) -> np.ndarray:
        """Number of BDs per CE."""
        return np.bincount(self.association, minlength=self.num_ces)

    @property
    def max_group_size(self) -> int:
        return int(self.group_sizes.max())

    def bds_of_ce(self, m: int) -> np.ndarray:
        return np.flatnonzero(self.association == m)

    def ce_bd_gain(self, k: int) -> float:
        """Pathloss gain of the CE-to-BD link of BD k."""
        return channel_gain_ce_bd(self, int(self.association[k]), k)

    def with_overrides(self, **kwargs) -> "Scenario":
        return replace(self, **kwargs)


def associate_bds(ce_positions, bd_positions) -> np.ndarray:
    """Map every BD to its nearest CE; ties go to the lowest CE index."""
    ce = np.asarray(ce_positions, dtype=float)
    bd = np.asarray(bd_positions, dtype=float)
    if ce.size == 0 or bd.size == 0:
        raise ConfigurationError("position lists must be nonempty")
    d2 = ((bd[:, None, :] - ce[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)   # argmin returns the first (lowest) index


def channel_gain_ce_bd(scenario: Scenario, m: int, k: int) -> float:
    """Pathloss gain between CE m and BD k: beta0 / distance^2."""
    d2 = float(((scenario.bd_positions[k] - scenario.ce_positions[m]) ** 2).sum())
    if d2 <= 0:
        raise ConfigurationError("BD co-located with CE")
    return scenario.beta0 / d2


def channel_gain_bd_uav(scenario: Scenario, m: int, k: int, q) -> float:
    """Pathloss gain between BD k and the UAV at horizontal position q."""
    q = np.asarray(q, dtype=float)
    d2 = float(((scenario.bd_positions[k] - q) ** 2).sum())
    return scenario.beta0 / (scenario.altitude ** 2 + d2)


def ce_grid(num_ces: int, area_side: float) -> np.ndarray:
    """CE positions on a regular grid at cell centers of the square area."""
    cols = int(math.ceil(math.sqrt(num_ces)))
    rows = int(math.ceil(num_ces / cols))
    pts = []
    for i in range(num_ces):
        r, c = divmod(i, cols)
        pts.append(((c + 0.5) * area_side / cols, (r + 0.5) * area_side / rows))
    return np.array(pts)


def generate_scenario(seed: int, M=None, K=None, area_side=None,
                      profile="desk", **overrides) -> Scenario:
    """Deterministic pseudo-random scenario.

    CEs sit on a regular grid; BDs are placed uniformly in the square,
    resampled so every BD keeps at least 1 m of separation from every CE.
    The same seed always yields an identical scenario.
    """
    base = dict(DESK_DEFAULTS if profile == "desk" else FULL_DEFAULTS)
    base.update(overrides)
    if M is not None:
        base["M"] = int(M)
    if K is not None:
        base["K"] = int(K)
    if area_side is not None:
        base["area_side"] = float(area_side)
    M, K, side = base["M"], base["K"], base["area_side"]
    if M < 1 or K < 1 or side <= 0:
        raise ConfigurationError("invalid scenario dimensions")

    rng = np.random.default_rng(seed)
    ce = ce_grid(M, side)
    cols = int(math.ceil(math.sqrt(M)))
    rows = int(math.ceil(M / cols))
    bd = np.empty((K, 2))
    if K % M == 0:
        # Balanced layout: K/M BDs uniform inside each CE's grid cell, so
        # every CE serves exactly K/M BDs (cell centers are the nearest CE).
        per = K // M
        k = 0
        for m in range(M):
            r, c = divmod(m, cols)
            lo = np.array([c * side / cols, r * side / rows])
            hi = np.array([(c + 1) * side / cols, (r + 1) * side / rows])
            for _ in range(per):
                while True:
                    p = rng.uniform(lo, hi)
                    if np.linalg.norm(p - ce[m]) >= 1.0:
                        bd[k] = p
                        k += 1
                        break
    else:
        for k in range(K):
            while True:
                p = rng.uniform(0.0, side, size=2)
                if np.min(np.linalg.norm(ce - p, axis=1)) >= 1.0:
                    bd[k] = p
                    break
    return Scenario(
        ce_positions=ce,
        bd_positions=bd,
        association=associate_bds(ce, bd),
        altitude=base["altitude"],
        mission_time=base["mission_time"],
        num_slots=base["num_slots"],
        beta0=base["beta0"],
        noise_power=dbm_to_watts(base["noise_dbm"]),
        eta=np.full(K, base["eta"]),
        qbar=np.full(K, base["qbar"]),
        ebar=np.full(K, base["ebar"]),
        p_max=base["p_max"],
        v_max=base["v_max"],
        uav=base.get("uav", UavPhysics()),
        carrier_freq=base["carrier_freq"],
    )
