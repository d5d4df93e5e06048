"""Per-device sets of phases that count as harvesting opportunities.

The gated harvest curve makes the optimization objective non-smooth, so the
solvers fix, per device, the set of relay phases treated as active (NOMA:
cluster indices; TDMA: gateway indices), optimize with the smooth curve on
those phases only, and then refresh the sets from the solved powers.  A
phase enters a set only when its received power strictly exceeds the
sensitivity threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from m2meh.metrics import NOMA, TDMA, cluster_received_power
from m2meh.params import SystemParams
from m2meh.topology import NetworkTopology


@dataclass(frozen=True)
class HarvestSets:
    strategy: str
    sets: tuple[frozenset[int], ...]   # one set per device

    def signature(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(s)) for s in self.sets)

    def __eq__(self, other):
        return (
            isinstance(other, HarvestSets)
            and self.strategy == other.strategy
            and self.signature() == other.signature()
        )

    def __hash__(self):
        return hash((self.strategy, self.signature()))


def initial_harvest_sets(strategy: str, topology: NetworkTopology) -> HarvestSets:
    """Start from the device's own serving phase: its gateway's cluster (NOMA)
    or its serving gateway (TDMA)."""
    cluster_of = topology.cluster_of_gateway
    sets = []
    for j in range(topology.n_devices):
        own = int(topology.serving_gateway[j])
        if strategy == NOMA:
            sets.append(frozenset([int(cluster_of[own])]))
        else:
            sets.append(frozenset([own]))
    return HarvestSets(strategy, tuple(sets))


def update_harvest_sets(
    strategy: str,
    topology: NetworkTopology,
    params: SystemParams,
    gateway_powers_w: np.ndarray,
) -> HarvestSets:
    """Recompute the sets from radiated powers; strictly-above-threshold only."""
    q = np.asarray(gateway_powers_w, float)
    if np.any(q < 0):
        raise ValueError("gateway powers must be non-negative")
    p0 = params.eh_threshold_w
    sets = []
    if strategy == NOMA:
        received = cluster_received_power(topology, q)  # (K, M)
        for j in range(topology.n_devices):
            sets.append(frozenset(np.where(received[:, j] > p0)[0].tolist()))
    elif strategy == TDMA:
        received = topology.gain_gateway_to_device * q[:, None]  # (N, M)
        for j in range(topology.n_devices):
            sets.append(frozenset(np.where(received[:, j] > p0)[0].tolist()))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return HarvestSets(strategy, tuple(sets))
