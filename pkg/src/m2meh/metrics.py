"""Rates, energy accounting and constraint residuals for a given allocation.

NOMA phase layout (N + K entries): phases 0..N-1 are the per-gateway device
uplink phases, phases N..N+K-1 the gateway-cluster relay phases.  TDMA phase
layout (M + N entries): one phase per device followed by one per gateway.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from m2meh.ehmodel import eh_harvest
from m2meh.errors import ModelError
from m2meh.params import SystemParams
from m2meh.topology import NetworkTopology

NOMA = "noma"
TDMA = "tdma"


@dataclass(frozen=True)
class Allocation:
    strategy: str
    device_powers_w: np.ndarray   # (M,)
    gateway_powers_w: np.ndarray  # (N,)
    phase_times_s: np.ndarray     # N+K for NOMA, M+N for TDMA

    def __post_init__(self):
        object.__setattr__(self, "device_powers_w", np.asarray(self.device_powers_w, float))
        object.__setattr__(self, "gateway_powers_w", np.asarray(self.gateway_powers_w, float))
        object.__setattr__(self, "phase_times_s", np.asarray(self.phase_times_s, float))
        if self.strategy not in (NOMA, TDMA):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def expected_phase_count(self, topology: NetworkTopology) -> int:
        if self.strategy == NOMA:
            return topology.n_gateways + topology.n_clusters
        return topology.n_devices + topology.n_gateways


def shannon_bits(bandwidth_hz: float, t_s, sinr) -> float:
    return bandwidth_hz * np.asarray(t_s) * np.log2(1.0 + np.asarray(sinr))


def noma_device_rate(
    topology: NetworkTopology,
    params: SystemParams,
    gateway: int,
    device: int,
    device_powers_w: np.ndarray,
    t_phase_s: float,
) -> float:
    """Bits delivered by one device during its group's NOMA phase.

    Within a group the receiver decodes in stored (descending-gain) order:
    a device sees interference only from group members after it.
    """
    group = topology.device_groups[gateway]
    if device not in group:
        raise ValueError(f"device {device} not served by gateway {gateway}")
    pos = group.index(device)
    gain = topology.gain_device_to_gateway
    interference = sum(
        gain[l] * device_powers_w[l] for l in group[pos + 1 :]
    )
    sinr = gain[device] * device_powers_w[device] / (interference + params.noise_w)
    return float(shannon_bits(params.bandwidth_hz, t_phase_s, sinr))


def noma_gateway_rate(
    topology: NetworkTopology,
    params: SystemParams,
    cluster: int,
    gateway: int,
    gateway_powers_w: np.ndarray,
    t_phase_s: float,
) -> float:
    """Bits relayed by one gateway during its cluster's NOMA phase."""
    members = topology.gateway_clusters[cluster]
    if gateway not in members:
        raise ValueError(f"gateway {gateway} not in cluster {cluster}")
    pos = members.index(gateway)
    gain = topology.gain_gateway_to_bs
    interference = sum(gain[n] * gateway_powers_w[n] for n in members[pos + 1 :])
    sinr = gain[gateway] * gateway_powers_w[gateway] / (interference + params.noise_w)
    return float(shannon_bits(params.bandwidth_hz, t_phase_s, sinr))


def tdma_rate(gain: float, power_w: float, t_s: float, params: SystemParams) -> float:
    """Bits over an interference-free link."""
    if gain < 0 or power_w < 0 or t_s < 0:
        raise ValueError("gain, power and time must be non-negative")
    return float(shannon_bits(params.bandwidth_hz, t_s, gain * power_w / params.noise_w))


def cluster_received_power(
    topology: NetworkTopology, gateway_powers_w: np.ndarray
) -> np.ndarray:
    """(K, M) received RF power at each device during each cluster phase."""
    received = np.empty((topology.n_clusters, topology.n_devices))
    for k, members in enumerate(topology.gateway_clusters):
        idx = list(members)
        received[k] = topology.gain_gateway_to_device[idx, :].T @ gateway_powers_w[idx]
    return received


@dataclass(frozen=True)
class EnergyReport:
    """Energy decomposition plus signed constraint residuals (negative = satisfied).

    Residuals are normalized: throughput shortfalls relative to the payload,
    causality relative to the larger of consumed/harvested energy, time
    relative to the deadline, powers relative to their caps.
    """

    strategy: str
    total_j: float
    device_energy_j: np.ndarray          # (M,) consumed by each device
    device_harvested_j: np.ndarray       # (M,)
    device_phase_energy_j: np.ndarray    # per device-uplink phase
    gateway_phase_energy_j: np.ndarray   # per relay phase (net of harvest)
    device_rate_bits: np.ndarray
    gateway_rate_bits: np.ndarray
    residuals: dict[str, float] = field(default_factory=dict)

    def feasible(self, tol: float) -> bool:
        return all(v <= tol for v in self.residuals.values())


def total_energy(
    topology: NetworkTopology,
    params: SystemParams,
    allocation: Allocation,
) -> EnergyReport:
    """Full energy accounting for an allocation, with the gated harvest curve.

    Raises ModelError if the decomposition does not re-sum consistently or if
    harvested power ever reaches the radiated RF power of a phase (energy
    conservation over the air).
    """
    m, n, k = topology.n_devices, topology.n_gateways, topology.n_clusters
    t = allocation.phase_times_s
    p = allocation.device_powers_w
    q = allocation.gateway_powers_w
    if len(t) != allocation.expected_phase_count(topology):
        raise ValueError(
            f"{allocation.strategy} allocation needs "
            f"{allocation.expected_phase_count(topology)} phase times, got {len(t)}"
        )
    if len(p) != m or len(q) != n:
        raise ValueError("power vector lengths do not match the topology")

    eta, xi = params.pa_eff_device, params.pa_eff_gateway
    pc, qc = params.circuit_device_w, params.circuit_gateway_w
    payload = params.payload_vector(m)
    caps_p = params.device_cap_vector(m)
    caps_q = params.gateway_cap_vector(n)

    device_energy = np.zeros(m)
    device_harvest = np.zeros(m)
    device_rate = np.zeros(m)
    gateway_rate = np.zeros(n)

    if allocation.strategy == NOMA:
        dev_phase = np.zeros(n)
        for i, group in enumerate(topology.device_groups):
            for j in group:
                device_energy[j] = t[i] * (p[j] / eta + pc)
                device_rate[j] = noma_device_rate(topology, params, i, j, p, t[i])
            dev_phase[i] = device_energy[list(group)].sum() if group else 0.0

        gw_phase = np.zeros(k)
        received = cluster_received_power(topology, q)  # (K, M)
        harvested_power = np.asarray(eh_harvest(received, params))
        for kk, members in enumerate(topology.gateway_clusters):
            t_phase = t[n + kk]
            radiated = sum(q[i] for i in members)
            pool = harvested_power[kk].sum()
            if radiated > 0 and pool >= radiated:
                raise ModelError(
                    f"cluster phase {kk}: harvested power {pool:.3e} W >= radiated {radiated:.3e} W"
                )
            gw_phase[kk] = t_phase * (sum(q[i] / xi + qc for i in members) - pool)
            device_harvest += t_phase * harvested_power[kk]
            for i in members:
                gateway_rate[i] = noma_gateway_rate(topology, params, kk, i, q, t_phase)
        time_used = t.sum()
    else:
        dev_phase = np.zeros(m)
        for j in range(m):
            device_energy[j] = t[j] * (p[j] / eta + pc)
            device_rate[j] = tdma_rate(
                topology.gain_device_to_gateway[j], p[j], t[j], params
            )
            dev_phase[j] = device_energy[j]

        gw_phase = np.zeros(n)
        received = topology.gain_gateway_to_device * q[:, None]  # (N, M)
        harvested_power = np.asarray(eh_harvest(received, params))
        for i in range(n):
            t_phase = t[m + i]
            pool = harvested_power[i].sum()
            if q[i] > 0 and pool >= q[i]:
                raise ModelError(
                    f"gateway phase {i}: harvested power {pool:.3e} W >= radiated {q[i]:.3e} W"
                )
            gw_phase[i] = t_phase * (q[i] / xi + qc - pool)
            device_harvest += t_phase * harvested_power[i]
            gateway_rate[i] = tdma_rate(topology.gain_gateway_to_bs[i], q[i], t_phase, params)
        time_used = t.sum()

    total = dev_phase.sum() + gw_phase.sum()
    # Independent re-summation: device- and harvest-major instead of phase-major.
    if allocation.strategy == NOMA:
        alt = device_energy.sum() - device_harvest.sum() + sum(
            t[n + kk] * sum(q[i] / xi + qc for i in members)
            for kk, members in enumerate(topology.gateway_clusters)
        )
    else:
        alt = device_energy.sum() - device_harvest.sum() + sum(
            t[m + i] * (q[i] / xi + qc) for i in range(n)
        )
    scale = max(abs(total), abs(alt), 1e-12)
    if abs(total - alt) > 1e-9 * scale:
        raise ModelError(f"energy decomposition mismatch: {total!r} vs {alt!r}")

    group_payload = np.array(
        [sum(payload[j] for j in grp) for grp in topology.device_groups]
    )
    causality_scale = np.maximum(np.maximum(device_energy, device_harvest), 1e-12)
    residuals = {
        "device_throughput": float(np.max((payload - device_rate) / payload)),
        "gateway_throughput": float(
            max(
                (
                    (group_payload[i] - gateway_rate[i]) / group_payload[i]
                    for i in range(n)
                    if group_payload[i] > 0
                ),
                default=-np.inf,
            )
        ),
        "energy_causality": float(
            np.max((device_energy - device_harvest) / causality_scale)
        ),
        "time_budget": float((time_used - params.deadline_s) / params.deadline_s),
        "device_power_cap": float(np.max((p - caps_p) / caps_p)),
        "gateway_power_cap": float(np.max((q - caps_q) / caps_q)),
        "nonnegativity": float(
            max(np.max(-p / caps_p), np.max(-q / caps_q), np.max(-t) / params.deadline_s)
        ),
    }

    return EnergyReport(
        strategy=allocation.strategy,
        total_j=float(total),
        device_energy_j=device_energy,
        device_harvested_j=device_harvest,
        device_phase_energy_j=dev_phase,
        gateway_phase_energy_j=gw_phase,
        device_rate_bits=device_rate,
        gateway_rate_bits=gateway_rate,
        residuals=residuals,
    )
