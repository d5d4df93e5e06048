"""Alternating power-control / time-allocation optimizer for the NOMA uplink.

Outer loop: freeze the per-device harvest sets, minimize the smooth-model
objective, then refresh the sets from the solved gateway powers; stop when
the objective settles, the sets cycle, or the iteration cap hits.  Inner
loop (fixed sets): alternate an interior-point solve over (gateway powers,
device-phase times) with a simplex solve over the relay-phase times, each
block accepted only if it does not increase the fixed-set objective, so the
per-segment trace is non-increasing by construction.

The returned allocation is the best iterate that passes the independent
gated-model verifier.
"""

from __future__ import annotations

import math

import numpy as np

from m2meh.errors import InfeasibleError
from m2meh.harvest_sets import HarvestSets, initial_harvest_sets, update_harvest_sets
from m2meh.kernel.barrier import START_INFEASIBLE, solve_convex
from m2meh.kernel.simplex import OPTIMAL as LP_OPTIMAL
from m2meh.kernel.simplex import solve_lp
from m2meh.metrics import NOMA, Allocation, total_energy
from m2meh.noma_analytic import group_profile, min_time_for_power_caps
from m2meh.noma_feasibility import feasible_seed_noma
from m2meh.noma_subproblem import (
    NomaStructure,
    build_power_time_problem,
    build_relay_time_lp,
    build_structure,
    smooth_objective,
)
from m2meh.params import SolverConfig, SystemParams
from m2meh.solver_common import (
    CONVERGED,
    INFEASIBLE,
    MAX_OUTER,
    SET_CYCLE,
    SolveResult,
    SolveTrace,
    TraceSegment,
)
from m2meh.topology import NetworkTopology
from m2meh.verify import verify_solution

__all__ = ["optimize_noma"]


def _consumed_energies(structure: NomaStructure, t_bar: np.ndarray) -> np.ndarray:
    m = structure.topology.n_devices
    out = np.zeros(m)
    for i, prof in enumerate(structure.profiles):
        if not prof.size:
            continue
        e = prof.device_energies(t_bar[i])
        for pos, j in enumerate(prof.device_ids):
            out[j] = e[pos]
    return out


def _assemble_allocation(
    structure: NomaStructure, t_bar: np.ndarray, tau: np.ndarray, q: np.ndarray
) -> Allocation:
    topo = structure.topology
    powers = np.zeros(topo.n_devices)
    times = np.zeros(topo.n_gateways)
    for i, prof in enumerate(structure.profiles):
        if not prof.size:
            continue
        times[i] = t_bar[i]
        p = prof.powers(t_bar[i])
        for pos, j in enumerate(prof.device_ids):
            powers[j] = p[pos]
    return Allocation(
        strategy=NOMA,
        device_powers_w=powers,
        gateway_powers_w=q.copy(),
        phase_times_s=np.concatenate([times, tau]),
    )


def _shrink_to_budget(
    structure: NomaStructure,
    sets: HarvestSets,
    t_seed: np.ndarray,
    q: np.ndarray,
    config: SolverConfig,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Scale device-phase times between their floors and the seed values until
    the minimal relay times fit the deadline.  Returns (t_bar, tau) or None."""
    t_total = structure.params.deadline_s
    floors = structure.t_floor

    def relay_min(t_bar: np.ndarray) -> np.ndarray | None:
        lp, _ = build_relay_time_lp(structure, sets, q, t_bar)
        # same feasible set minus the (last) budget row, minimizing total time
        lp_min = lp.__class__(
            c=np.ones(structure.k), a_ub=lp.a_ub[:-1], b_ub=lp.b_ub[:-1], lower=lp.lower
        )
        sol = solve_lp(lp_min, tol=config.lp_tol, max_pivots=config.lp_max_pivots)
        return sol.x if sol.status == LP_OPTIMAL else None

    best = None
    for s in np.linspace(1.0, 0.0, 17):
        t_bar = floors + s * (t_seed - floors)
        tau = relay_min(t_bar)
        if tau is None:
            continue
        total = float(t_bar.sum() + tau.sum())
        if total <= t_total * (1.0 - 1e-9):
            best = (t_bar, tau)
            break
    return best


def _redistribute_slack(
    structure: NomaStructure, t_bar: np.ndarray, tau: np.ndarray
) -> np.ndarray:
    """Spend leftover deadline slack on device phases whose energies all still
    decrease; pure descent, keeps every constraint satisfied."""
    t_total = structure.params.deadline_s
    slack = t_total - float(t_bar.sum() + tau.sum())
    if slack <= 1e-12 * t_total:
        return t_bar
    t_new = t_bar.copy()
    for i, prof in enumerate(structure.profiles):
        if slack <= 1e-12 * t_total:
            break
        if not prof.size:
            continue

        def worst_deriv(delta: float) -> float:
            return float(prof.energy_derivatives(t_new[i] + delta).max())

        if worst_deriv(0.0) >= 0.0:
            continue
        if worst_deriv(slack) <= 0.0:
            delta = slack
        else:
            lo, hi = 0.0, slack
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if worst_deriv(mid) <= 0.0:
                    lo = mid
                else:
                    hi = mid
            delta = lo
        t_new[i] += delta
        slack -= delta
    return t_new


def optimize_noma(
    topology: NetworkTopology,
    params: SystemParams,
    config: SolverConfig | None = None,
) -> SolveResult:
    config = config or SolverConfig()
    n = topology.n_gateways
    trace = SolveTrace(strategy=NOMA)
    caps_p = params.device_cap_vector(topology.n_devices)

    profiles = tuple(group_profile(topology, params, i) for i in range(n))
    t_floor = np.array(
        [
            min_time_for_power_caps(prof, caps_p[list(prof.device_ids)])
            if prof.size
            else 1e-9
            for prof in profiles
        ]
    )
    structure = build_structure(topology, params, profiles, t_floor)
    sets = initial_harvest_sets(NOMA, topology)

    try:
        seed = feasible_seed_noma(topology, params, config)
    except InfeasibleError as exc:
        trace.termination = INFEASIBLE
        trace.notes.append(str(exc))
        return SolveResult(NOMA, None, None, None, trace, None, 0)

    q = params.gateway_cap_vector(n).copy()
    t_bar = np.maximum(seed.group_times_s, t_floor)
    tau = seed.relay_times_s.copy()
    if seed.total_time_s > params.deadline_s:
        trace.phase1_used = True
        shrunk = _shrink_to_budget(structure, sets, t_bar, q, config)
        if shrunk is None:
            trace.termination = INFEASIBLE
            trace.notes.append("deadline too short for any seeded schedule")
            return SolveResult(NOMA, None, None, None, trace, None, 0)
        t_bar, tau = shrunk

    best: tuple[float, Allocation, object, object] | None = None
    prev_u = None
    seen: set = set()
    termination = MAX_OUTER
    v = 0
    while v < config.v_max:
        v += 1
        u = smooth_objective(structure, sets, q, t_bar, tau)
        segment = TraceSegment(outer=v, harvest_signature=sets.signature())
        segment.objectives.append(u)

        inner_tol = config.theta * config.inner_theta_factor
        for _ in range(config.inner_blocks_max):
            u_prev_block = u
            consumed = _consumed_energies(structure, t_bar)
            try:
                problem = build_power_time_problem(
                    structure, sets, tau, np.maximum(consumed, 1e-12)
                )
            except InfeasibleError as exc:
                trace.notes.append(f"outer {v}: {exc}")
                break
            res = solve_convex(problem, np.concatenate([q, t_bar]), config)
            if res.status != START_INFEASIBLE:
                q_cand, t_cand = res.x[:n], res.x[n:]
                u_cand = smooth_objective(structure, sets, q_cand, t_cand, tau)
                if u_cand <= u:
                    q, t_bar, u = q_cand, t_cand, u_cand

            lp, _ = build_relay_time_lp(structure, sets, q, t_bar)
            sol = solve_lp(lp, tol=config.lp_tol, max_pivots=config.lp_max_pivots)
            if sol.status == LP_OPTIMAL:
                u_cand = smooth_objective(structure, sets, q, t_bar, sol.x)
                if u_cand <= u:
                    tau, u = sol.x, u_cand
            segment.objectives.append(u)
            if abs(u_prev_block - u) <= inner_tol * max(abs(u_prev_block), 1e-12):
                break

        t_polished = _redistribute_slack(structure, t_bar, tau)
        if t_polished is not t_bar:
            u_cand = smooth_objective(structure, sets, q, t_polished, tau)
            if u_cand <= u:
                t_bar, u = t_polished, u_cand
                segment.objectives.append(u)

        trace.segments.append(segment)
        trace.outer_objectives.append(u)

        allocation = _assemble_allocation(structure, t_bar, tau, q)
        report = total_energy(topology, params, allocation)
        verification = verify_solution(topology, params, allocation, tol=1e-6)
        if verification.feasible and (best is None or report.total_j < best[0]):
            best = (report.total_j, allocation, report, verification)

        if prev_u is not None and abs(u - prev_u) < config.theta * max(abs(prev_u), 1e-12):
            termination = CONVERGED
            break
        prev_u = u

        new_sets = update_harvest_sets(NOMA, topology, params, q)
        dead = [
            j
            for j in range(topology.n_devices)
            if not new_sets.sets[j] and structure.profiles[topology.serving_gateway[j]].size
        ]
        if dead:
            trace.notes.append(f"devices {dead} lost every harvest phase; stopping")
            termination = SET_CYCLE
            break
        if new_sets.signature() in seen:
            if new_sets != sets:
                termination = SET_CYCLE
                trace.notes.append("harvest sets revisited a previous state")
                break
            # fixed point: keep iterating until the objective settles
        seen.add(sets.signature())
        sets = new_sets

    trace.termination = termination
    if best is None:
        trace.notes.append("no verified-feasible iterate found")
        return SolveResult(NOMA, None, None, None, trace, None, v)
    total, allocation, report, verification = best
    return SolveResult(NOMA, allocation, report, verification, trace, total, v)
