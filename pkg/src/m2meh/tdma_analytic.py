"""TDMA closed forms and the equivalent convex program in energy variables.

With one transmitter per phase, delivering D bits over a gain-h link in time
t takes power p(t) = sigma^2 (2^{D/(Bt)} - 1)/h^2, and the device energy
E(t) = t p(t)/eta + t Pc is convex in t (strictly decreasing when Pc = 0,
U-shaped otherwise).

The joint power/time problem becomes convex after substituting the radiated
energies ph_j = t_j p_j and qh_i = t_{M+i} q_i: rates turn into perspectives
of concave link rates, and each harvest term becomes t * ubar(h^2 qh / t),
the perspective of the smooth harvest curve (taken as 0 at t = 0).  The
strict received-power threshold is enforced with a 1e-9 relative margin,
and phase times carry a 1e-9 s floor inside the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from m2meh.ehmodel import eh_harvest_smooth, eh_harvest_smooth_deriv
from m2meh.errors import InfeasibleTimeError, ModelError, UnboundedTimeError
from m2meh.harvest_sets import HarvestSets
from m2meh.kernel.barrier import ConstraintBlock, ConvexProblem
from m2meh.kernel.rootfind import bisect, expand_bracket
from m2meh.metrics import TDMA, Allocation
from m2meh.params import SolverConfig, SystemParams
from m2meh.topology import NetworkTopology

__all__ = [
    "TransformedAllocation",
    "tdma_power",
    "tdma_device_energy",
    "tdma_energy_derivative",
    "tdma_optimal_time",
    "tdma_min_time",
    "build_tdma_convex_problem",
    "recover_allocation",
]

TIME_FLOOR_S = 1e-9
THRESHOLD_MARGIN = 1e-9


def _exponent_guard(payload_bits: float, t_s: float, params: SystemParams) -> float:
    nats = math.log(2.0) * payload_bits / (params.bandwidth_hz * t_s)
    if nats > params.exp_cap_nats:
        raise InfeasibleTimeError(
            f"time {t_s:.3e}s needs exponent {nats:.1f} nats (cap {params.exp_cap_nats:.0f})"
        )
    return nats


def tdma_power(t_s: float, payload_bits: float, gain: float, params: SystemParams) -> float:
    """Exact power delivering the payload in time t over a clean link."""
    if t_s <= 0:
        raise ValueError("transmission time must be positive")
    nats = _exponent_guard(payload_bits, t_s, params)
    return params.noise_w * math.expm1(nats) / gain


def tdma_device_energy(
    t_s: float, payload_bits: float, gain: float, params: SystemParams
) -> float:
    return t_s * (
        tdma_power(t_s, payload_bits, gain, params) / params.pa_eff_device
        + params.circuit_device_w
    )


def tdma_energy_derivative(
    t_s: float, payload_bits: float, gain: float, params: SystemParams
) -> float:
    """dE/dt: negative near 0, approaching the circuit draw for large t."""
    if t_s <= 0:
        raise ValueError("transmission time must be positive")
    nats = _exponent_guard(payload_bits, t_s, params)
    c = params.noise_w / (gain * params.pa_eff_device)
    return c * (math.expm1(nats) - nats * math.exp(nats)) + params.circuit_device_w


def tdma_optimal_time(
    payload_bits: float,
    gain: float,
    params: SystemParams,
    tol: float = 1e-10,
    config: SolverConfig | None = None,
) -> float:
    """Unique energy-minimizing phase time (positive circuit power required)."""
    if params.circuit_device_w <= 0:
        raise UnboundedTimeError("zero circuit power: energy decreases for all t")

    def f(t: float) -> float:
        try:
            return tdma_energy_derivative(t, payload_bits, gain, params)
        except InfeasibleTimeError:
            return -np.inf

    cap = (config or SolverConfig()).bracket_cap_s
    lo, hi = expand_bracket(f, 1e-6, 1.0, cap=cap)
    return bisect(f, lo, hi, tol=tol)


def tdma_min_time(
    payload_bits: float, gain: float, cap_w: float, params: SystemParams
) -> float:
    """Shortest phase able to carry the payload at the power cap."""
    snr = gain * cap_w / params.noise_w
    return payload_bits / (params.bandwidth_hz * math.log2(1.0 + snr))


@dataclass(frozen=True)
class TransformedAllocation:
    """Energy-variable representation: radiated joules and phase times."""

    device_energy_j: np.ndarray    # (M,) ph_j = t_j p_j
    gateway_energy_j: np.ndarray   # (N,) qh_i = t_{M+i} q_i
    phase_times_s: np.ndarray      # (M+N,)

    @staticmethod
    def from_allocation(allocation: Allocation, n_devices: int) -> "TransformedAllocation":
        t = allocation.phase_times_s
        return TransformedAllocation(
            device_energy_j=t[:n_devices] * allocation.device_powers_w,
            gateway_energy_j=t[n_devices:] * allocation.gateway_powers_w,
            phase_times_s=t.copy(),
        )

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [self.device_energy_j, self.gateway_energy_j, self.phase_times_s]
        )

    @staticmethod
    def unpack(x: np.ndarray, n_devices: int, n_gateways: int) -> "TransformedAllocation":
        m, n = n_devices, n_gateways
        return TransformedAllocation(
            device_energy_j=x[:m].copy(),
            gateway_energy_j=x[m : m + n].copy(),
            phase_times_s=x[m + n :].copy(),
        )


def recover_allocation(
    transformed: TransformedAllocation,
    topology: NetworkTopology,
    params: SystemParams,
    zero_time_s: float = TIME_FLOOR_S,
    cap_slack: float = 1e-7,
) -> Allocation:
    """Back out powers q = qh/t; zero phases must carry zero energy."""
    m, n = topology.n_devices, topology.n_gateways
    t = np.asarray(transformed.phase_times_s, float)
    if len(t) != m + n:
        raise ValueError("phase time vector has the wrong length")
    caps_p = params.device_cap_vector(m)
    caps_q = params.gateway_cap_vector(n)

    def _recover(energy: np.ndarray, times: np.ndarray, caps: np.ndarray, kind: str):
        powers = np.zeros(len(energy))
        for idx, (e, ti) in enumerate(zip(energy, times)):
            if ti <= zero_time_s:
                if e > zero_time_s * caps[idx]:
                    raise ModelError(
                        f"{kind} {idx}: positive energy {e:.3e} J in a zero-length phase"
                    )
                powers[idx] = 0.0
            else:
                powers[idx] = e / ti
        over = (powers - caps) / caps
        if np.any(over > cap_slack):
            raise ModelError(f"{kind} power cap exceeded by {float(over.max()):.2e} relative")
        return np.minimum(powers, caps)

    p = _recover(transformed.device_energy_j, t[:m], caps_p, "device")
    q = _recover(transformed.gateway_energy_j, t[m:], caps_q, "gateway")
    times = np.where(t <= zero_time_s, 0.0, t)
    return Allocation(TDMA, p, q, times)


class _TdmaObjective:
    """Objective of the transformed problem and its gradient, vectorized.

    Layout: x = [ph (M), qh (N), t (M+N)].
    """

    def __init__(self, topology, params: SystemParams, sets: HarvestSets):
        m, n = topology.n_devices, topology.n_gateways
        self.m, self.n = m, n
        self.params = params
        pairs = [
            (j, nn) for j in range(m) for nn in sorted(sets.sets[j])
        ]  # device j harvests from gateway nn's phase
        self.pair_j = np.array([j for j, _ in pairs], dtype=int)
        self.pair_n = np.array([nn for _, nn in pairs], dtype=int)
        self.pair_gain = topology.gain_gateway_to_device[self.pair_n, self.pair_j]

    def harvest_terms(self, x: np.ndarray):
        m, n = self.m, self.n
        qh = x[m : m + n]
        t_gw = x[m + n + m :]
        tau = t_gw[self.pair_n]
        w = self.pair_gain * qh[self.pair_n] / tau
        ubar = np.asarray(eh_harvest_smooth(w, self.params))
        dubar = np.asarray(eh_harvest_smooth_deriv(w, self.params))
        return tau, w, ubar, dubar

    def value(self, x: np.ndarray) -> float:
        m, n = self.m, self.n
        ph, qh = x[:m], x[m : m + n]
        t_dev, t_gw = x[m + n : m + n + m], x[m + n + m :]
        tau, _, ubar, _ = self.harvest_terms(x)
        consumed = (
            ph.sum() / self.params.pa_eff_device
            + self.params.circuit_device_w * t_dev.sum()
            + qh.sum() / self.params.pa_eff_gateway
            + self.params.circuit_gateway_w * t_gw.sum()
        )
        return float(consumed - (tau * ubar).sum())

    def gradient(self, x: np.ndarray) -> np.ndarray:
        m, n = self.m, self.n
        g = np.zeros(2 * (m + n))
        g[:m] = 1.0 / self.params.pa_eff_device
        g[m : m + n] = 1.0 / self.params.pa_eff_gateway
        g[m + n : m + n + m] = self.params.circuit_device_w
        g[m + n + m :] = self.params.circuit_gateway_w
        tau, w, ubar, dubar = self.harvest_terms(x)
        # d/dqh of -tau*ubar(c qh/tau) and d/dtau of the perspective
        np.add.at(g, m + self.pair_n, -self.pair_gain * dubar)
        np.add.at(g, m + n + m + self.pair_n, -(ubar - w * dubar))
        return g


def build_tdma_convex_problem(
    topology: NetworkTopology,
    params: SystemParams,
    sets: HarvestSets,
    config: SolverConfig | None = None,
) -> ConvexProblem:
    """Assemble the transformed problem for fixed harvest sets."""
    m, n = topology.n_devices, topology.n_gateways
    dim = 2 * (m + n)
    payload = params.payload_vector(m)
    caps_p = params.device_cap_vector(m)
    caps_q = params.gateway_cap_vector(n)
    g_dev = topology.gain_device_to_gateway
    g_bs = topology.gain_gateway_to_bs
    t_total = params.deadline_s
    sigma2 = params.noise_w
    bw = params.bandwidth_hz
    ln2 = math.log(2.0)

    obj = _TdmaObjective(topology, params, sets)
    group_payload = np.array(
        [sum(payload[j] for j in grp) for grp in topology.device_groups]
    )
    relay_idx = np.where(group_payload > 0)[0]

    def rate_block(vals_idx, gains, need, var_offset, time_offset, name):
        k = len(vals_idx)

        def eval_fn(x: np.ndarray):
            y = x[var_offset + vals_idx]
            t = x[time_offset + vals_idx]
            z = gains * y / (sigma2 * t)
            rate = (bw / ln2) * t * np.log1p(z)
            vals = (need - rate) / need
            jac = np.zeros((k, dim))
            drate_dy = (bw / ln2) * gains / (sigma2 * (1.0 + z))
            drate_dt = (bw / ln2) * (np.log1p(z) - z / (1.0 + z))
            jac[np.arange(k), var_offset + vals_idx] = -drate_dy / need
            jac[np.arange(k), time_offset + vals_idx] = -drate_dt / need
            return vals, jac

        return ConstraintBlock(name, eval_fn, k)

    dev_rate = rate_block(np.arange(m), g_dev, payload, 0, m + n, "device_rate")
    gw_rate = rate_block(
        relay_idx, g_bs[relay_idx], group_payload[relay_idx], m, m + n + m, "gateway_rate"
    )

    # energy causality: ph/eta + t Pc <= sum of harvest perspectives
    caus_scale = caps_p * t_total / params.pa_eff_device + params.circuit_device_w * t_total

    def causality_eval(x: np.ndarray):
        ph = x[:m]
        t_dev = x[m + n : m + n + m]
        tau, w, ubar, dubar = obj.harvest_terms(x)
        lhs = ph / params.pa_eff_device + params.circuit_device_w * t_dev
        rhs = np.zeros(m)
        np.add.at(rhs, obj.pair_j, tau * ubar)
        vals = (lhs - rhs) / caus_scale
        jac = np.zeros((m, dim))
        jac[np.arange(m), np.arange(m)] = 1.0 / (params.pa_eff_device * caus_scale)
        jac[np.arange(m), m + n + np.arange(m)] = params.circuit_device_w / caus_scale
        rows = obj.pair_j
        np.add.at(jac, (rows, m + obj.pair_n), -obj.pair_gain * dubar / caus_scale[rows])
        np.add.at(
            jac,
            (rows, m + n + m + obj.pair_n),
            -(ubar - w * dubar) / caus_scale[rows],
        )
        return vals, jac

    causality = ConstraintBlock("energy_causality", causality_eval, m)

    # strict threshold on active harvest links: P0 t (1+margin) <= gain * qh
    pair_j, pair_n, pair_gain = obj.pair_j, obj.pair_n, obj.pair_gain
    n_pairs = len(pair_j)
    p0 = params.eh_threshold_w

    def threshold_eval(x: np.ndarray):
        qh = x[m : m + n]
        t_gw = x[m + n + m :]
        vals = (
            p0 * t_gw[pair_n] * (1.0 + THRESHOLD_MARGIN) - pair_gain * qh[pair_n]
        ) / (p0 * t_total)
        jac = np.zeros((n_pairs, dim))
        jac[np.arange(n_pairs), m + pair_n] = -pair_gain / (p0 * t_total)
        jac[np.arange(n_pairs), m + n + m + pair_n] = (1.0 + THRESHOLD_MARGIN) / t_total
        return vals, jac

    threshold = ConstraintBlock("harvest_threshold", threshold_eval, n_pairs)

    def budget_eval(x: np.ndarray):
        vals = np.array([(x[m + n :].sum() - t_total) / t_total])
        jac = np.zeros((1, dim))
        jac[0, m + n :] = 1.0 / t_total
        return vals, jac

    budget = ConstraintBlock("time_budget", budget_eval, 1)

    def dev_cap_eval(x: np.ndarray):
        vals = (x[:m] - caps_p * x[m + n : m + n + m]) / (caps_p * t_total)
        jac = np.zeros((m, dim))
        jac[np.arange(m), np.arange(m)] = 1.0 / (caps_p * t_total)
        jac[np.arange(m), m + n + np.arange(m)] = -1.0 / t_total
        return vals, jac

    def gw_cap_eval(x: np.ndarray):
        vals = (x[m : m + n] - caps_q * x[m + n + m :]) / (caps_q * t_total)
        jac = np.zeros((n, dim))
        jac[np.arange(n), m + np.arange(n)] = 1.0 / (caps_q * t_total)
        jac[np.arange(n), m + n + m + np.arange(n)] = -1.0 / t_total
        return vals, jac

    dev_cap = ConstraintBlock("device_power_cap", dev_cap_eval, m)
    gw_cap = ConstraintBlock("gateway_power_cap", gw_cap_eval, n)

    lower = np.concatenate(
        [np.zeros(m), np.zeros(n), np.full(m + n, TIME_FLOOR_S)]
    )
    upper = np.concatenate(
        [caps_p * t_total, caps_q * t_total, np.full(m + n, t_total)]
    )
    var_scale = np.concatenate(
        [caps_p * t_total, caps_q * t_total, np.full(m + n, t_total)]
    )
    return ConvexProblem(
        dim=dim,
        objective=obj.value,
        gradient=obj.gradient,
        blocks=(dev_rate, gw_rate, causality, threshold, budget, dev_cap, gw_cap),
        lower=lower,
        upper=upper,
        var_scale=var_scale,
    )
