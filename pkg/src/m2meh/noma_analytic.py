"""Closed-form NOMA power control and per-group energy analysis.

When every device in a group must deliver exactly its payload D_j within the
group's phase time t (uplink SIC, descending-gain decoding order), the
minimal transmission powers have the closed form

    p_j = (sigma^2/|h_j|^2) [ (e^{a_j/t} - 1)
          + sum_{l>j} (e^{a_l/t} - 1)(e^{a_j/t} - 1) e^{b_jl/t} ]

with a_l = ln2 D_l / B and b_jl = ln2 (D_{j+1} + ... + D_{l-1}) / B.  Each
p_j is non-negative and strictly decreasing in t, and substituting back into
the SIC rate returns exactly D_j.

The per-device energy t (p_j(t)/eta + Pc) is convex in t: strictly
decreasing when the circuit draw Pc is zero, U-shaped otherwise, with the
minimizer at the unique zero of the analytic derivative (found by bisection
over an expanding bracket).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from m2meh.errors import InfeasibleTimeError, UnboundedTimeError
from m2meh.kernel.rootfind import bisect, expand_bracket
from m2meh.params import SolverConfig, SystemParams
from m2meh.topology import NetworkTopology

__all__ = [
    "GroupTimeProfile",
    "group_profile",
    "closed_form_powers",
    "device_energy",
    "device_energy_derivative",
    "optimal_device_time",
    "optimal_group_time",
    "min_time_for_power_caps",
]


@dataclass(frozen=True)
class GroupTimeProfile:
    """Per-group constants making every power/energy curve a function of t only."""

    gateway: int
    device_ids: tuple[int, ...]      # SIC order, strongest first
    gains: np.ndarray                # serving-link |h|^2, same order
    payloads: np.ndarray             # bits
    a: np.ndarray                    # (n,) seconds: ln2 D_l / B
    b: np.ndarray                    # (n, n) seconds: b[j, l], zero for l <= j+1
    noise_w: float
    pa_eff: float
    circuit_w: float
    exp_cap_nats: float

    @property
    def size(self) -> int:
        return len(self.device_ids)

    def max_exponent(self, t: float) -> float:
        # worst exponent used anywhere in the power formula: full payload stack
        return float(self.a.sum()) / t

    def _check_time(self, t: float) -> None:
        if t <= 0:
            raise ValueError("transmission time must be positive")
        if self.max_exponent(t) > self.exp_cap_nats:
            raise InfeasibleTimeError(
                f"time {t:.3e}s needs exponent {self.max_exponent(t):.1f} nats "
                f"(cap {self.exp_cap_nats:.0f})"
            )

    def powers(self, t: float) -> np.ndarray:
        """Minimal per-device powers delivering every payload in time t."""
        self._check_time(t)
        n = self.size
        if n == 0:
            return np.zeros(0)
        e = np.exp(self.a / t)
        p = np.empty(n)
        for j in range(n):
            tail = sum(
                (e[l] - 1.0) * (e[j] - 1.0) * math.exp(self.b[j, l] / t)
                for l in range(j + 1, n)
            )
            p[j] = (self.noise_w / self.gains[j]) * ((e[j] - 1.0) + tail)
        return p

    def device_energies(self, t: float) -> np.ndarray:
        return t * (self.powers(t) / self.pa_eff + self.circuit_w)

    def energy_derivatives(self, t: float) -> np.ndarray:
        """d/dt of each device's energy, the six-term analytic expression."""
        self._check_time(t)
        n = self.size
        e = np.exp(self.a / t)
        out = np.empty(n)
        for j in range(n):
            c = self.noise_w / (self.pa_eff * self.gains[j])
            total = (e[j] - 1.0) - (self.a[j] / t) * e[j]
            for l in range(j + 1, n):
                b_e = math.exp(self.b[j, l] / t)
                total += (e[l] - 1.0) * (e[j] - 1.0) * b_e
                total -= (self.a[l] / t) * (e[j] - 1.0) * b_e * e[l]
                total -= (self.a[j] / t) * (e[l] - 1.0) * b_e * e[j]
                total -= (self.b[j, l] / t) * (e[l] - 1.0) * (e[j] - 1.0) * b_e
            out[j] = c * total + self.circuit_w
        return out

    def group_energy(self, t: float) -> float:
        return float(self.device_energies(t).sum())

    def group_energy_derivative(self, t: float) -> float:
        return float(self.energy_derivatives(t).sum())


def group_profile(
    topology: NetworkTopology, params: SystemParams, gateway: int
) -> GroupTimeProfile:
    ids = topology.device_groups[gateway]
    payloads = params.payload_vector(topology.n_devices)[list(ids)]
    gains = topology.gain_device_to_gateway[list(ids)]
    a = math.log(2.0) * payloads / params.bandwidth_hz
    n = len(ids)
    b = np.zeros((n, n))
    for j in range(n):
        for l in range(j + 2, n):
            b[j, l] = a[j + 1 : l].sum()
    return GroupTimeProfile(
        gateway=gateway,
        device_ids=tuple(ids),
        gains=gains,
        payloads=payloads,
        a=a,
        b=b,
        noise_w=params.noise_w,
        pa_eff=params.pa_eff_device,
        circuit_w=params.circuit_device_w,
        exp_cap_nats=params.exp_cap_nats,
    )


def closed_form_powers(
    topology: NetworkTopology, params: SystemParams, gateway: int, t_s: float
) -> np.ndarray:
    """Powers for gateway's group, ordered like the stored group (SIC order)."""
    return group_profile(topology, params, gateway).powers(t_s)


def device_energy(
    topology: NetworkTopology, params: SystemParams, gateway: int, device: int, t_s: float
) -> float:
    profile = group_profile(topology, params, gateway)
    pos = profile.device_ids.index(device)
    return float(profile.device_energies(t_s)[pos])


def device_energy_derivative(
    topology: NetworkTopology, params: SystemParams, gateway: int, device: int, t_s: float
) -> float:
    profile = group_profile(topology, params, gateway)
    pos = profile.device_ids.index(device)
    return float(profile.energy_derivatives(t_s)[pos])


def _optimal_time(derivative, circuit_w: float, tol: float, cap: float) -> float:
    """Zero of an increasing derivative that is -inf near 0 and -> circuit_w."""
    if circuit_w <= 0:
        raise UnboundedTimeError("zero circuit power: energy decreases for all t")

    def f(t: float) -> float:
        try:
            return derivative(t)
        except InfeasibleTimeError:
            return -np.inf

    lo, hi = expand_bracket(f, 1e-6, 1.0, cap=cap)
    return bisect(f, lo, hi, tol=tol)


def optimal_device_time(
    topology: NetworkTopology,
    params: SystemParams,
    gateway: int,
    device: int,
    tol: float = 1e-10,
    config: SolverConfig | None = None,
) -> float:
    """Energy-minimizing phase time for one device of a group."""
    profile = group_profile(topology, params, gateway)
    pos = profile.device_ids.index(device)
    cap = (config or SolverConfig()).bracket_cap_s
    return _optimal_time(
        lambda t: float(profile.energy_derivatives(t)[pos]), profile.circuit_w, tol, cap
    )


def optimal_group_time(
    topology: NetworkTopology,
    params: SystemParams,
    gateway: int,
    tol: float = 1e-10,
    config: SolverConfig | None = None,
) -> float:
    """Phase time minimizing the summed energy of a whole group."""
    profile = group_profile(topology, params, gateway)
    if profile.size == 0:
        return 0.0
    cap = (config or SolverConfig()).bracket_cap_s
    return _optimal_time(profile.group_energy_derivative, profile.circuit_w, tol, cap)


def optimal_device_time_profile(profile: GroupTimeProfile, pos: int, tol: float = 1e-10) -> float:
    return _optimal_time(
        lambda t: float(profile.energy_derivatives(t)[pos]), profile.circuit_w, tol, 1e9
    )


def optimal_group_time_profile(profile: GroupTimeProfile, tol: float = 1e-10) -> float:
    if profile.size == 0:
        return 0.0
    return _optimal_time(profile.group_energy_derivative, profile.circuit_w, tol, 1e9)


def min_time_for_power_caps(
    profile: GroupTimeProfile, caps_w: np.ndarray, rel_tol: float = 1e-12
) -> float:
    """Smallest phase time at which every closed-form power fits its cap.

    Powers decrease strictly with time, so this is the unique root of
    max_j p_j(t)/cap_j = 1.  Returns 0 for empty groups.
    """
    if profile.size == 0:
        return 0.0
    caps = np.asarray(caps_w, float)

    def excess(t: float) -> float:
        try:
            return float(np.max(profile.powers(t) / caps)) - 1.0
        except InfeasibleTimeError:
            return np.inf

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise InfeasibleTimeError("power caps unreachable at any time")
    lo = hi / 2.0
    while excess(lo) < 0 and lo > 1e-12:
        lo /= 2.0
    if excess(lo) < 0:
        return lo
    # excess decreases in t: root between lo (positive) and hi (negative)
    return bisect(lambda t: -excess(t), lo, hi, tol=0.0, rel_x_tol=rel_tol)
