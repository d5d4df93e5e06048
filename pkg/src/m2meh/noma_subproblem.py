"""Block subproblems of the NOMA alternating optimization.

For fixed harvest sets, the smooth-model objective (device closed-form
energies + relay-phase energy - smooth harvest recovery) splits into two
tractable blocks:

- fixed relay times tau: a smooth convex problem in (gateway powers q,
  device-phase times t_bar), solved by the interior-point kernel;
- fixed (q, t_bar): a linear program in tau, solved by the simplex kernel.

Device powers never appear explicitly: every device quantity is the closed
form of its group time, and device power caps become per-group time floors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from m2meh.ehmodel import eh_harvest_smooth, eh_harvest_smooth_deriv
from m2meh.errors import InfeasibleError
from m2meh.harvest_sets import HarvestSets
from m2meh.kernel.barrier import ConstraintBlock, ConvexProblem
from m2meh.kernel.simplex import LinearProgram
from m2meh.noma_analytic import GroupTimeProfile
from m2meh.params import SolverConfig, SystemParams
from m2meh.topology import NetworkTopology


@dataclass(frozen=True)
class NomaStructure:
    """Instance constants reused across all block solves."""

    topology: NetworkTopology
    params: SystemParams
    profiles: tuple[GroupTimeProfile, ...]
    t_floor: np.ndarray           # (N,) device-phase floors from power caps
    group_payload: np.ndarray     # (N,) bits each gateway must relay
    cluster_of: np.ndarray        # (N,)

    @property
    def n(self) -> int:
        return self.topology.n_gateways

    @property
    def k(self) -> int:
        return self.topology.n_clusters


def build_structure(
    topology: NetworkTopology,
    params: SystemParams,
    profiles: tuple[GroupTimeProfile, ...],
    t_floor: np.ndarray,
) -> NomaStructure:
    payload = params.payload_vector(topology.n_devices)
    group_payload = np.array(
        [sum(payload[j] for j in grp) for grp in topology.device_groups]
    )
    return NomaStructure(
        topology=topology,
        params=params,
        profiles=profiles,
        t_floor=np.asarray(t_floor, float),
        group_payload=group_payload,
        cluster_of=topology.cluster_of_gateway,
    )


class _HarvestGeometry:
    """Pairs (device, active cluster) with their combining weights over q."""

    def __init__(self, structure: NomaStructure, sets: HarvestSets):
        topo = structure.topology
        pairs = [(j, k) for j in range(topo.n_devices) for k in sorted(sets.sets[j])]
        self.pair_j = np.array([j for j, _ in pairs], dtype=int)
        self.pair_k = np.array([k for _, k in pairs], dtype=int)
        self.weights = np.zeros((len(pairs), topo.n_gateways))
        for row, (j, k) in enumerate(pairs):
            for nn in topo.gateway_clusters[k]:
                self.weights[row, nn] = topo.gain_gateway_to_device[nn, j]

    def received(self, q: np.ndarray) -> np.ndarray:
        return self.weights @ q


def device_side_energy(structure: NomaStructure, t_bar: np.ndarray) -> float:
    return sum(
        p.group_energy(t_bar[i]) for i, p in enumerate(structure.profiles) if p.size
    )


def smooth_objective(
    structure: NomaStructure,
    sets: HarvestSets,
    q: np.ndarray,
    t_bar: np.ndarray,
    tau: np.ndarray,
) -> float:
    """Fixed-set objective: the quantity the alternating blocks both minimize."""
    params = structure.params
    relay = sum(
        tau[k]
        * sum(q[i] / params.pa_eff_gateway + params.circuit_gateway_w for i in members)
        for k, members in enumerate(structure.topology.gateway_clusters)
    )
    geom = _HarvestGeometry(structure, sets)
    w = geom.received(q)
    recovered = float(
        (tau[geom.pair_k] * np.asarray(eh_harvest_smooth(w, params))).sum()
    )
    return device_side_energy(structure, t_bar) + relay - recovered


def _relay_rate_rows(
    structure: NomaStructure, tau: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Linear relay-throughput constraints in q for fixed tau: A q + b <= 0."""
    topo, params = structure.topology, structure.params
    caps_q = params.gateway_cap_vector(structure.n)
    rows, offs = [], []
    for k, members in enumerate(topo.gateway_clusters):
        for pos, i in enumerate(members):
            need = structure.group_payload[i]
            if need <= 0:
                continue
            if tau[k] <= 0:
                raise InfeasibleError(f"cluster {k} has payload but zero phase time")
            gamma = math.pow(2.0, need / (params.bandwidth_hz * tau[k])) - 1.0
            row = np.zeros(structure.n)
            row[i] = -topo.gain_gateway_to_bs[i]
            for l in members[pos + 1 :]:
                row[l] = gamma * topo.gain_gateway_to_bs[l]
            scale = topo.gain_gateway_to_bs[i] * caps_q[i]
            rows.append(row / scale)
            offs.append(gamma * params.noise_w / scale)
    if not rows:
        return np.zeros((0, structure.n)), np.zeros(0)
    return np.array(rows), np.array(offs)


def build_power_time_problem(
    structure: NomaStructure,
    sets: HarvestSets,
    tau: np.ndarray,
    warm_energy_scale: np.ndarray,
) -> ConvexProblem:
    """Convex block over x = [q (N), t_bar (N)] with relay times frozen.

    warm_energy_scale (M,) normalizes the causality rows; pass the consumed
    energies at the warm point (floored to something positive).
    """
    topo, params = structure.topology, structure.params
    n, m = structure.n, topo.n_devices
    dim = 2 * n
    caps_q = params.gateway_cap_vector(n)
    t_total = params.deadline_s
    geom = _HarvestGeometry(structure, sets)
    tau_pair = tau[geom.pair_k]
    p0 = params.eh_threshold_w

    for j in range(m):
        if not sets.sets[j]:
            raise InfeasibleError(f"device {j} has an empty harvest set")

    a_rate, b_rate = _relay_rate_rows(structure, tau)
    tau_of_gw = tau[structure.cluster_of]

    # device membership bookkeeping for causality rows
    dev_group = [int(topo.serving_gateway[j]) for j in range(m)]
    dev_pos = np.zeros(m, dtype=int)
    for i, prof in enumerate(structure.profiles):
        for pos, j in enumerate(prof.device_ids):
            dev_pos[j] = pos
    caus_scale = np.maximum(np.asarray(warm_energy_scale, float), 1e-12)

    def objective(x: np.ndarray) -> float:
        q, t_bar = x[:n], x[n:]
        relay = float(
            (tau_of_gw * (q / params.pa_eff_gateway + params.circuit_gateway_w)).sum()
        )
        w = geom.received(q)
        recovered = float(
            (tau_pair * np.asarray(eh_harvest_smooth(w, params))).sum()
        )
        return device_side_energy(structure, t_bar) + relay - recovered

    def gradient(x: np.ndarray) -> np.ndarray:
        q, t_bar = x[:n], x[n:]
        g = np.zeros(dim)
        g[:n] = tau_of_gw / params.pa_eff_gateway
        w = geom.received(q)
        du = np.asarray(eh_harvest_smooth_deriv(w, params))
        g[:n] -= (tau_pair * du) @ geom.weights
        for i, prof in enumerate(structure.profiles):
            g[n + i] = prof.group_energy_derivative(t_bar[i]) if prof.size else 0.0
        return g

    def rate_eval(x: np.ndarray):
        q = x[:n]
        vals = a_rate @ q + b_rate
        jac = np.zeros((len(vals), dim))
        jac[:, :n] = a_rate
        return vals, jac

    def causality_eval(x: np.ndarray):
        q, t_bar = x[:n], x[n:]
        consumed = np.zeros(m)
        dconsumed = np.zeros(m)
        for i, prof in enumerate(structure.profiles):
            if not prof.size:
                continue
            e = prof.device_energies(t_bar[i])
            de = prof.energy_derivatives(t_bar[i])
            for pos, j in enumerate(prof.device_ids):
                consumed[j] = e[pos]
                dconsumed[j] = de[pos]
        w = geom.received(q)
        ubar = np.asarray(eh_harvest_smooth(w, params))
        du = np.asarray(eh_harvest_smooth_deriv(w, params))
        rhs = np.zeros(m)
        np.add.at(rhs, geom.pair_j, tau_pair * ubar)
        vals = (consumed - rhs) / caus_scale
        jac = np.zeros((m, dim))
        for j in range(m):
            jac[j, n + dev_group[j]] = dconsumed[j] / caus_scale[j]
        jac_q = np.zeros((m, n))
        np.add.at(
            jac_q,
            geom.pair_j,
            -(tau_pair * du)[:, None] * geom.weights / caus_scale[geom.pair_j][:, None],
        )
        jac[:, :n] += jac_q
        return vals, jac

    def threshold_eval(x: np.ndarray):
        q = x[:n]
        w = geom.received(q)
        vals = (p0 - w) / p0
        jac = np.zeros((len(w), dim))
        jac[:, :n] = -geom.weights / p0
        return vals, jac

    budget_cap = t_total - float(tau.sum())

    def budget_eval(x: np.ndarray):
        vals = np.array([(x[n:].sum() - budget_cap) / t_total])
        jac = np.zeros((1, dim))
        jac[0, n:] = 1.0 / t_total
        return vals, jac

    blocks = [
        ConstraintBlock("relay_rate", rate_eval, len(b_rate)),
        ConstraintBlock("energy_causality", causality_eval, m),
        ConstraintBlock("harvest_threshold", threshold_eval, len(geom.pair_j)),
        ConstraintBlock("time_budget", budget_eval, 1),
    ]
    lower = np.concatenate([np.zeros(n), structure.t_floor])
    upper = np.concatenate([caps_q, np.full(n, t_total)])
    var_scale = np.concatenate([caps_q, np.full(n, t_total)])
    return ConvexProblem(
        dim=dim,
        objective=objective,
        gradient=gradient,
        blocks=tuple(blocks),
        lower=lower,
        upper=upper,
        var_scale=var_scale,
    )


def build_relay_time_lp(
    structure: NomaStructure,
    sets: HarvestSets,
    q: np.ndarray,
    t_bar: np.ndarray,
) -> tuple[LinearProgram, float]:
    """LP over tau for fixed (q, t_bar); returns (lp, fixed objective part)."""
    topo, params = structure.topology, structure.params
    n_k = structure.k
    geom = _HarvestGeometry(structure, sets)
    w = geom.received(q)
    ubar = np.asarray(eh_harvest_smooth(w, params))

    coef = np.zeros(n_k)
    for k, members in enumerate(topo.gateway_clusters):
        coef[k] = sum(
            q[i] / params.pa_eff_gateway + params.circuit_gateway_w for i in members
        )
    np.add.at(coef, geom.pair_k, -ubar)

    # causality rows: sum_k ubar_jk tau_k >= consumed_j
    m = topo.n_devices
    consumed = np.zeros(m)
    for i, prof in enumerate(structure.profiles):
        if not prof.size:
            continue
        e = prof.device_energies(t_bar[i])
        for pos, j in enumerate(prof.device_ids):
            consumed[j] = e[pos]
    harvest_rate = np.zeros((m, n_k))
    harvest_rate[geom.pair_j, geom.pair_k] = ubar

    # relay throughput at the current powers: per-cluster time floors
    lbs = np.zeros(n_k)
    for k, members in enumerate(topo.gateway_clusters):
        for pos, i in enumerate(members):
            need = structure.group_payload[i]
            if need <= 0:
                continue
            interf = sum(
                topo.gain_gateway_to_bs[l] * q[l] for l in members[pos + 1 :]
            )
            sinr = topo.gain_gateway_to_bs[i] * q[i] / (interf + params.noise_w)
            if sinr <= 0:
                raise InfeasibleError(f"gateway {i} has payload but zero power")
            lbs[k] = max(lbs[k], need / (params.bandwidth_hz * math.log2(1.0 + sinr)))

    budget_row = np.ones((1, n_k))
    budget_rhs = np.array([params.deadline_s - float(t_bar.sum())])
    lp = LinearProgram(
        c=coef,
        a_ub=np.vstack([-harvest_rate, budget_row]),
        b_ub=np.concatenate([-consumed, budget_rhs]),
        lower=lbs,
        upper=None,
    )
    return lp, device_side_energy(structure, t_bar)
