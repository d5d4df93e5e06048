"""Feasibility seeding and deadline analysis for the NOMA strategy.

The seed allocation fixes every device-phase time at its group's
energy-optimal value, powers devices by the closed form, runs gateways at
their power caps, and picks the relay-phase times by a small LP (minimize
relay-phase energy subject to relay throughput and per-device energy
causality).  The seed satisfies every constraint except possibly the total
time budget.

From the seed we also get a closed-form deadline threshold: whenever the
deadline exceeds it, spending the whole deadline is provably wasteful, so
optimal schedules leave slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from m2meh.ehmodel import eh_harvest
from m2meh.errors import ConfigError, InfeasibleError
from m2meh.kernel.simplex import INFEASIBLE, OPTIMAL, LinearProgram, solve_lp
from m2meh.metrics import NOMA, Allocation, cluster_received_power
from m2meh.noma_analytic import (
    group_profile,
    optimal_device_time_profile,
    optimal_group_time_profile,
)
from m2meh.params import SolverConfig, SystemParams
from m2meh.topology import NetworkTopology

__all__ = [
    "SeedResult",
    "TimeAnalysis",
    "feasible_seed_noma",
    "deadline_upper_bound",
    "time_analysis",
]


@dataclass(frozen=True)
class SeedResult:
    allocation: Allocation
    group_times_s: np.ndarray           # (N,)
    relay_times_s: np.ndarray           # (K,)
    relay_phase_energy_j: np.ndarray    # (K,) net energy of each relay phase
    relay_rate_lb_s: np.ndarray         # (K,) throughput-driven time lower bounds
    lp_objective_j: float

    @property
    def total_time_s(self) -> float:
        return float(self.group_times_s.sum() + self.relay_times_s.sum())


def _relay_time_lower_bounds(
    topology: NetworkTopology, params: SystemParams, q: np.ndarray
) -> np.ndarray:
    """Per-cluster phase times below which some member cannot relay its payload."""
    payload = params.payload_vector(topology.n_devices)
    bs_gain = topology.gain_gateway_to_bs
    lbs = np.zeros(topology.n_clusters)
    for k, members in enumerate(topology.gateway_clusters):
        need = 0.0
        for pos, i in enumerate(members):
            c_i = sum(payload[j] for j in topology.device_groups[i])
            if c_i <= 0:
                continue
            interference = sum(bs_gain[l] * q[l] for l in members[pos + 1 :])
            sinr = bs_gain[i] * q[i] / (interference + params.noise_w)
            if sinr <= 0:
                raise InfeasibleError(f"gateway {i} cannot relay at zero power")
            need = max(need, c_i / (params.bandwidth_hz * np.log2(1.0 + sinr)))
        lbs[k] = need
    return lbs


def feasible_seed_noma(
    topology: NetworkTopology,
    params: SystemParams,
    config: SolverConfig | None = None,
) -> SeedResult:
    """Allocation meeting every constraint except (possibly) the time budget."""
    config = config or SolverConfig()
    if params.circuit_device_w <= 0:
        raise ConfigError("seeding needs positive device circuit power")
    n, m, k = topology.n_gateways, topology.n_devices, topology.n_clusters
    q_cap = params.gateway_cap_vector(n)

    group_times = np.zeros(n)
    device_powers = np.zeros(m)
    consumed = np.zeros(m)
    for i in range(n):
        profile = group_profile(topology, params, i)
        if profile.size == 0:
            continue
        t_i = optimal_group_time_profile(profile, tol=config.bisect_tol)
        group_times[i] = t_i
        powers = profile.powers(t_i)
        energies = profile.device_energies(t_i)
        for pos, j in enumerate(profile.device_ids):
            device_powers[j] = powers[pos]
            consumed[j] = energies[pos]

    received = cluster_received_power(topology, q_cap)       # (K, M)
    harvest_rate = np.asarray(eh_harvest(received, params))  # (K, M) watts per second of phase
    lbs = _relay_time_lower_bounds(topology, params, q_cap)

    coef = np.array(
        [
            sum(q_cap[i] / params.pa_eff_gateway + params.circuit_gateway_w for i in members)
            - harvest_rate[kk].sum()
            for kk, members in enumerate(topology.gateway_clusters)
        ]
    )
    # causality rows: harvest_rate^T tau >= consumed
    lp = LinearProgram(
        c=coef,
        a_ub=-harvest_rate.T,
        b_ub=-consumed,
        lower=lbs,
        upper=None,
    )
    sol = solve_lp(lp, tol=config.lp_tol, max_pivots=config.lp_max_pivots)
    if sol.status == INFEASIBLE:
        dead = [
            j
            for j in range(m)
            if consumed[j] > 0 and harvest_rate[:, j].max() <= 0
        ]
        hint = f"; devices {dead} cannot harvest even at full gateway power" if dead else ""
        raise InfeasibleError("relay-phase seeding LP infeasible" + hint)
    if sol.status != OPTIMAL:
        raise InfeasibleError(f"relay-phase seeding LP {sol.status}")

    tau = sol.x
    allocation = Allocation(
        strategy=NOMA,
        device_powers_w=device_powers,
        gateway_powers_w=q_cap.copy(),
        phase_times_s=np.concatenate([group_times, tau]),
    )
    return SeedResult(
        allocation=allocation,
        group_times_s=group_times,
        relay_times_s=tau,
        relay_phase_energy_j=coef * tau,
        relay_rate_lb_s=lbs,
        lp_objective_j=float(sol.objective),
    )


@dataclass(frozen=True)
class TimeAnalysis:
    device_optimal_times_s: np.ndarray   # (M,) per-device energy-optimal phase time
    group_optimal_times_s: np.ndarray    # (N,)
    min_cluster_size: int                # alpha
    harvest_margins: np.ndarray          # (N,) beta_i, best harvest rate over circuit draw
    amplifier_bound_s: float             # deadline above which relay circuit waste dominates
    seed_total_time_s: float
    deadline_upper_s: float              # max of the two bounds


def time_analysis(
    topology: NetworkTopology,
    params: SystemParams,
    config: SolverConfig | None = None,
) -> TimeAnalysis:
    """Closed-form time diagnostics; raises InfeasibleError on hopeless instances."""
    config = config or SolverConfig()
    if params.circuit_device_w <= 0 or params.circuit_gateway_w <= 0:
        raise ConfigError("time analysis requires positive circuit powers")
    n, m = topology.n_gateways, topology.n_devices

    device_times = np.zeros(m)
    group_times = np.zeros(n)
    for i in range(n):
        profile = group_profile(topology, params, i)
        if profile.size == 0:
            continue
        group_times[i] = optimal_group_time_profile(profile, tol=config.bisect_tol)
        for pos, j in enumerate(profile.device_ids):
            device_times[j] = optimal_device_time_profile(profile, pos, tol=config.bisect_tol)

    seed = feasible_seed_noma(topology, params, config)

    q_cap = params.gateway_cap_vector(n)
    harvest_rate = np.asarray(
        eh_harvest(cluster_received_power(topology, q_cap), params)
    )  # (K, M)
    alpha = min(len(c) for c in topology.gateway_clusters)
    beta = np.zeros(n)
    for i in range(n):
        group = topology.device_groups[i]
        if group:
            beta[i] = min(
                harvest_rate[:, j].max() / params.circuit_device_w for j in group
            )
    t_amp = (
        (1.0 + beta.sum())
        * seed.relay_phase_energy_j.sum()
        / (alpha * params.circuit_gateway_w)
    )
    upper = max(seed.total_time_s, t_amp)
    return TimeAnalysis(
        device_optimal_times_s=device_times,
        group_optimal_times_s=group_times,
        min_cluster_size=alpha,
        harvest_margins=beta,
        amplifier_bound_s=t_amp,
        seed_total_time_s=seed.total_time_s,
        deadline_upper_s=upper,
    )


def deadline_upper_bound(
    topology: NetworkTopology,
    params: SystemParams,
    config: SolverConfig | None = None,
) -> float:
    """Deadline beyond which an optimal schedule provably leaves idle time."""
    return time_analysis(topology, params, config).deadline_upper_s
