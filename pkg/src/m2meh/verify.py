"""Independent feasibility audit of an allocation.

Re-derives every constraint of the original (gated-harvest) problem with
plain Python loops, deliberately avoiding the vectorized accounting paths in
`metrics`, so the two implementations cross-check each other.  Residuals are
signed and normalized; negative means satisfied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from m2meh.ehmodel import eh_harvest
from m2meh.metrics import NOMA, Allocation
from m2meh.params import SystemParams
from m2meh.topology import NetworkTopology


@dataclass(frozen=True)
class ViolationReport:
    strategy: str
    residuals: dict[str, float]
    tol: float

    @property
    def feasible(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())

    def worst(self) -> tuple[str, float]:
        name = max(self.residuals, key=self.residuals.get)
        return name, self.residuals[name]

    def summary(self) -> str:
        status = "feasible" if self.feasible else "INFEASIBLE"
        body = ", ".join(f"{k}={v:+.3e}" for k, v in sorted(self.residuals.items()))
        return f"{status} (tol {self.tol:g}): {body}"


def _rate_bits(bandwidth: float, t: float, num: float, den: float) -> float:
    return bandwidth * t * math.log2(1.0 + num / den)


def verify_solution(
    topology: NetworkTopology,
    params: SystemParams,
    allocation: Allocation,
    tol: float = 1e-6,
) -> ViolationReport:
    m, n = topology.n_devices, topology.n_gateways
    t = allocation.phase_times_s
    p = allocation.device_powers_w
    q = allocation.gateway_powers_w
    expected = allocation.expected_phase_count(topology)
    if len(t) != expected or len(p) != m or len(q) != n:
        raise ValueError("allocation dimensions do not match the topology")

    payload = params.payload_vector(m)
    caps_p = params.device_cap_vector(m)
    caps_q = params.gateway_cap_vector(n)
    sigma2 = params.noise_w
    bw = params.bandwidth_hz

    worst_dev_rate = -math.inf
    worst_gw_rate = -math.inf
    worst_causality = -math.inf
    harvested = [0.0] * m
    consumed = [0.0] * m

    if allocation.strategy == NOMA:
        for i, group in enumerate(topology.device_groups):
            for pos, j in enumerate(group):
                interf = 0.0
                for l in group[pos + 1 :]:
                    interf += topology.gain_device_to_gateway[l] * p[l]
                rate = _rate_bits(
                    bw, t[i], topology.gain_device_to_gateway[j] * p[j], interf + sigma2
                )
                worst_dev_rate = max(worst_dev_rate, (payload[j] - rate) / payload[j])
                consumed[j] = t[i] * (p[j] / params.pa_eff_device + params.circuit_device_w)
        for k, members in enumerate(topology.gateway_clusters):
            t_phase = t[n + k]
            for pos, i in enumerate(members):
                need = sum(payload[j] for j in topology.device_groups[i])
                if need <= 0:
                    continue
                interf = 0.0
                for l in members[pos + 1 :]:
                    interf += topology.gain_gateway_to_bs[l] * q[l]
                rate = _rate_bits(
                    bw, t_phase, topology.gain_gateway_to_bs[i] * q[i], interf + sigma2
                )
                worst_gw_rate = max(worst_gw_rate, (need - rate) / need)
            for j in range(m):
                x = sum(topology.gain_gateway_to_device[nn, j] * q[nn] for nn in members)
                harvested[j] += t_phase * float(eh_harvest(x, params))
    else:
        for j in range(m):
            rate = _rate_bits(bw, t[j], topology.gain_device_to_gateway[j] * p[j], sigma2)
            worst_dev_rate = max(worst_dev_rate, (payload[j] - rate) / payload[j])
            consumed[j] = t[j] * (p[j] / params.pa_eff_device + params.circuit_device_w)
        for i in range(n):
            t_phase = t[m + i]
            need = sum(payload[j] for j in topology.device_groups[i])
            if need > 0:
                rate = _rate_bits(bw, t_phase, topology.gain_gateway_to_bs[i] * q[i], sigma2)
                worst_gw_rate = max(worst_gw_rate, (need - rate) / need)
            for j in range(m):
                x = topology.gain_gateway_to_device[i, j] * q[i]
                harvested[j] += t_phase * float(eh_harvest(x, params))

    for j in range(m):
        scale = max(consumed[j], harvested[j], 1e-12)
        worst_causality = max(worst_causality, (consumed[j] - harvested[j]) / scale)

    residuals = {
        "device_throughput": worst_dev_rate,
        "gateway_throughput": worst_gw_rate,
        "energy_causality": worst_causality,
        "time_budget": (float(sum(t)) - params.deadline_s) / params.deadline_s,
        "device_power_cap": max((p[j] - caps_p[j]) / caps_p[j] for j in range(m)),
        "gateway_power_cap": max((q[i] - caps_q[i]) / caps_q[i] for i in range(n)),
        "nonnegativity": max(
            max(-p[j] / caps_p[j] for j in range(m)),
            max(-q[i] / caps_q[i] for i in range(n)),
            max(-ti for ti in t) / params.deadline_s,
        ),
    }
    return ViolationReport(allocation.strategy, residuals, tol)
