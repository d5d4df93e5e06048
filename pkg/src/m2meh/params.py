"""System-level parameters and solver tuning knobs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from m2meh.errors import ConfigError
from m2meh.units import dbm_to_w

# Largest exponent (nats) evaluated by the rate inversions before the time is
# declared infeasible; e^700 is near the double-precision ceiling.
EXP_CAP_NATS = 700.0


@dataclass(frozen=True)
class SystemParams:
    """Radio, power and traffic parameters, all SI.

    Per-entity fields (power caps, payloads) accept a scalar applied to every
    device/gateway or a sequence with one entry each.
    """

    bandwidth_hz: float = 18e3
    noise_w: float = dbm_to_w(-104.0)
    pa_eff_device: float = 0.9         # eta, RF power radiated per watt drawn
    pa_eff_gateway: float = 0.9        # xi
    circuit_device_w: float = 0.5e-3
    circuit_gateway_w: float = 0.5
    max_power_device_w: float | Sequence[float] = 5e-3
    max_power_gateway_w: float | Sequence[float] = 1.0
    payload_bits: float | Sequence[float] = 10e3
    deadline_s: float = 5.0
    eh_a: float = 1500.0               # steepness of the harvesting logistic
    eh_b: float = 1.4e-3               # logistic midpoint, watts received
    eh_sat_w: float = 24e-3            # saturation harvest power
    eh_threshold_w: float = 0.1e-3     # receiver sensitivity: no harvest below
    exp_cap_nats: float = EXP_CAP_NATS

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.noise_w <= 0:
            raise ConfigError("bandwidth and noise power must be positive")
        for name in ("pa_eff_device", "pa_eff_gateway"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if self.circuit_device_w < 0 or self.circuit_gateway_w < 0:
            raise ConfigError("circuit powers must be non-negative")
        if self.deadline_s <= 0:
            raise ConfigError("deadline must be positive")
        for name in ("eh_a", "eh_b", "eh_sat_w", "eh_threshold_w"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_power_device_w", "max_power_gateway_w", "payload_bits"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(arr <= 0):
                raise ConfigError(f"{name} entries must be positive")

    def _vector(self, value, count: int, name: str) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size == 1:
            return np.full(count, arr[0])
        if arr.size != count:
            raise ConfigError(f"{name} has {arr.size} entries, expected {count}")
        return arr.copy()

    def payload_vector(self, n_devices: int) -> np.ndarray:
        return self._vector(self.payload_bits, n_devices, "payload_bits")

    def device_cap_vector(self, n_devices: int) -> np.ndarray:
        return self._vector(self.max_power_device_w, n_devices, "max_power_device_w")

    def gateway_cap_vector(self, n_gateways: int) -> np.ndarray:
        return self._vector(self.max_power_gateway_w, n_gateways, "max_power_gateway_w")

    def with_(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration caps for the numerical machinery."""

    # outer loop (harvest-set iteration)
    theta: float = 1e-4                # relative objective change to stop
    v_max: int = 50                    # outer iteration cap
    inner_blocks_max: int = 30         # NOMA block alternations per outer pass
    inner_theta_factor: float = 0.1    # inner loop stops at theta * this

    # log-barrier interior point
    barrier_mu0: float | None = None   # None: scaled from the start objective
    barrier_reduction: float = 0.12
    barrier_outer_max: int = 14
    newton_max: int = 60
    newton_tol: float = 1e-9
    barrier_gap_tol: float = 1e-9      # absolute duality-gap target (objective units)
    feasibility_margin: float = 1e-9   # strict-interior margin for phase-1

    # dense simplex
    lp_tol: float = 1e-9
    lp_bland: bool = True
    lp_max_pivots: int = 20000

    # 1-D root finding
    bisect_tol: float = 1e-10
    bracket_cap_s: float = 1e9

    seed: int = 0

    def __post_init__(self):
        if self.theta <= 0 or self.bisect_tol <= 0 or self.lp_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.v_max < 1 or self.inner_blocks_max < 1 or self.newton_max < 1:
            raise ConfigError("iteration caps must be at least 1")
