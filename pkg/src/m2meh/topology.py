"""Network geometry, channel gains and grouping heuristics.

Layout: base station at the origin, gateways evenly spaced on a ring, and
devices either packed in small annuli around their home gateway (default;
"clustered") or spread uniformly over a disc centred on the base station
("uniform_disc").  Harvesting is only possible when a gateway can place at
least the sensitivity threshold (0.1 mW by default) at a device, which with
the 128.1 + 37.6 log10(d) path-loss law means serving distances of a few
metres; the clustered layout reflects that operating point.

Association is nearest-gateway greedy with a hard capacity of four devices
per gateway.  Gateway clusters for the NOMA uplink use strong-weak pairing
on the gateway-to-base-station gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from m2meh.errors import ConfigError
from m2meh.params import SystemParams

MAX_DEVICES_PER_GATEWAY = 4
MAX_GATEWAYS_PER_CLUSTER = 4

# Never allow less total attenuation than this: a physical near-field floor
# that also keeps total harvested power below total radiated power for every
# admissible power vector (the harvest curve outputs up to 24 mW per device).
PATH_LOSS_FLOOR_DB = 20.0


def path_loss_linear(d_km: float, shadow_db: float = 0.0) -> float:
    """Linear channel gain for the 128.1 + 37.6 log10(d[km]) law plus shadowing."""
    if d_km <= 0:
        raise ValueError("distance must be positive")
    loss_db = 128.1 + 37.6 * math.log10(d_km) + shadow_db
    return 10.0 ** (-max(loss_db, PATH_LOSS_FLOOR_DB) / 10.0)


@dataclass(frozen=True)
class GeometryConfig:
    n_devices: int = 40
    n_gateways: int = 12
    n_clusters: int = 6
    placement: str = "clustered"       # "clustered" | "uniform_disc"
    cell_radius_km: float = 0.5        # device disc radius for uniform_disc
    gateway_ring_km: float = 0.1
    device_spread_km: float = 0.003    # outer radius of the per-gateway annulus
    device_min_km: float = 0.0015      # inner radius (near-field keep-out)
    shadowing_std_db: float = 4.0

    def __post_init__(self):
        if min(self.n_devices, self.n_gateways, self.n_clusters) < 1:
            raise ConfigError("counts must be positive")
        if self.n_devices > MAX_DEVICES_PER_GATEWAY * self.n_gateways:
            raise ConfigError(
                f"{self.n_devices} devices exceed capacity "
                f"{MAX_DEVICES_PER_GATEWAY} x {self.n_gateways} gateways"
            )
        if self.n_gateways > MAX_GATEWAYS_PER_CLUSTER * self.n_clusters:
            raise ConfigError("gateways exceed cluster capacity")
        if self.n_clusters > self.n_gateways:
            raise ConfigError("more clusters than gateways")
        if self.placement not in ("clustered", "uniform_disc"):
            raise ConfigError(f"unknown placement {self.placement!r}")
        for name in ("cell_radius_km", "gateway_ring_km", "device_spread_km", "device_min_km"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.device_min_km >= self.device_spread_km:
            raise ConfigError("device_min_km must be below device_spread_km")

    def with_(self, **kwargs) -> "GeometryConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class NetworkTopology:
    """Immutable network instance: partitions and channel gains.

    Devices and gateways are 0-indexed.  ``device_groups[i]`` lists the
    devices served by gateway i in SIC order (descending serving gain);
    ``gateway_clusters[k]`` lists gateways in descending base-station gain.
    ``gain_gateway_to_device`` is the full (N, M) cross matrix used for
    harvesting; channel reciprocity makes row serving_gateway[j] also the
    uplink gain of device j.
    """

    n_gateways: int
    n_devices: int
    n_clusters: int
    device_groups: tuple[tuple[int, ...], ...]
    gateway_clusters: tuple[tuple[int, ...], ...]
    serving_gateway: np.ndarray            # (M,) int
    gain_device_to_gateway: np.ndarray     # (M,) serving-link gains
    gain_gateway_to_device: np.ndarray     # (N, M)
    gain_gateway_to_bs: np.ndarray         # (N,)
    device_xy_km: np.ndarray | None = None
    gateway_xy_km: np.ndarray | None = None

    def __post_init__(self):
        self.validate()

    @property
    def cluster_of_gateway(self) -> np.ndarray:
        lookup = np.empty(self.n_gateways, dtype=int)
        for k, cluster in enumerate(self.gateway_clusters):
            for i in cluster:
                lookup[i] = k
        return lookup

    def group_of(self, gateway: int) -> tuple[int, ...]:
        return self.device_groups[gateway]

    def validate(self) -> None:
        seen = sorted(j for grp in self.device_groups for j in grp)
        if seen != list(range(self.n_devices)):
            raise ConfigError("device groups must partition the device set")
        seen_g = sorted(i for cl in self.gateway_clusters for i in cl)
        if seen_g != list(range(self.n_gateways)):
            raise ConfigError("clusters must partition the gateway set")
        if any(len(grp) > MAX_DEVICES_PER_GATEWAY for grp in self.device_groups):
            raise ConfigError("a device group exceeds the SIC capacity of 4")
        if any(len(cl) > MAX_GATEWAYS_PER_CLUSTER for cl in self.gateway_clusters):
            raise ConfigError("a gateway cluster exceeds the SIC capacity of 4")
        for i, grp in enumerate(self.device_groups):
            gains = [self.gain_device_to_gateway[j] for j in grp]
            if any(a < b for a, b in zip(gains, gains[1:])):
                raise ConfigError(f"group {i} not sorted by descending gain")
            if any(self.serving_gateway[j] != i for j in grp):
                raise ConfigError("serving_gateway inconsistent with groups")
        for cl in self.gateway_clusters:
            gains = [self.gain_gateway_to_bs[i] for i in cl]
            if any(a < b for a, b in zip(gains, gains[1:])):
                raise ConfigError("cluster not sorted by descending gain")
        if (
            np.any(self.gain_device_to_gateway <= 0)
            or np.any(self.gain_gateway_to_device <= 0)
            or np.any(self.gain_gateway_to_bs <= 0)
        ):
            raise ConfigError("all channel gains must be positive")
        for j in range(self.n_devices):
            i = int(self.serving_gateway[j])
            if self.gain_device_to_gateway[j] != self.gain_gateway_to_device[i, j]:
                raise ConfigError("serving gains must match the cross matrix (reciprocity)")


def _greedy_association(dist_km: np.ndarray) -> np.ndarray:
    """Nearest-gateway assignment with capacity 4, device index as tie-break.

    Devices are processed in index order; each takes its nearest gateway
    that still has room, falling back to the next nearest.
    """
    n_gw, n_dev = dist_km.shape[0], dist_km.shape[1]
    load = np.zeros(n_gw, dtype=int)
    serving = np.empty(n_dev, dtype=int)
    for j in range(n_dev):
        order = np.argsort(dist_km[:, j], kind="stable")
        for i in order:
            if load[i] < MAX_DEVICES_PER_GATEWAY:
                serving[j] = i
                load[i] += 1
                break
        else:
            raise ConfigError("association failed: all gateways full")
    return serving


def _strong_weak_clusters(bs_gain: np.ndarray, n_clusters: int) -> list[list[int]]:
    """Partition gateways into clusters by pairing strongest with weakest.

    Cluster sizes are balanced (they differ by at most one).  Each cluster is
    filled alternately from the strong end and the weak end of the gain-sorted
    list, which reduces to the classic strong-weak pairing for size-2 clusters.
    """
    n = len(bs_gain)
    order = sorted(range(n), key=lambda i: (-bs_gain[i], i))
    base, extra = divmod(n, n_clusters)
    sizes = [base + (1 if k < extra else 0) for k in range(n_clusters)]
    lo, hi = 0, n - 1
    clusters = []
    for size in sizes:
        members = []
        for slot in range(size):
            if slot % 2 == 0:
                members.append(order[lo])
                lo += 1
            else:
                members.append(order[hi])
                hi -= 1
        members.sort(key=lambda i: (-bs_gain[i], i))
        clusters.append(members)
    return clusters


def generate_topology(
    geometry: GeometryConfig,
    params: SystemParams,
    seed: int,
) -> NetworkTopology:
    """Draw a random network instance; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    n_dev, n_gw, n_cl = geometry.n_devices, geometry.n_gateways, geometry.n_clusters

    angles = 2.0 * np.pi * np.arange(n_gw) / n_gw
    gw_xy = geometry.gateway_ring_km * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    if geometry.placement == "clustered":
        home = np.arange(n_dev) % n_gw
        r = np.sqrt(
            rng.uniform(geometry.device_min_km**2, geometry.device_spread_km**2, size=n_dev)
        )
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n_dev)
        dev_xy = gw_xy[home] + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
    else:
        r = geometry.cell_radius_km * np.sqrt(rng.uniform(0.0, 1.0, size=n_dev))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=n_dev)
        dev_xy = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)

    dist = np.maximum(
        np.linalg.norm(gw_xy[:, None, :] - dev_xy[None, :, :], axis=2), 1e-6
    )  # (N, M)
    shadow_gw_dev = rng.normal(0.0, geometry.shadowing_std_db, size=(n_gw, n_dev))
    loss_db = 128.1 + 37.6 * np.log10(dist) + shadow_gw_dev
    gain_gw_dev = 10.0 ** (-np.maximum(loss_db, PATH_LOSS_FLOOR_DB) / 10.0)

    bs_dist = np.maximum(np.linalg.norm(gw_xy, axis=1), 1e-6)
    shadow_bs = rng.normal(0.0, geometry.shadowing_std_db, size=n_gw)
    bs_loss_db = 128.1 + 37.6 * np.log10(bs_dist) + shadow_bs
    gain_bs = 10.0 ** (-np.maximum(bs_loss_db, PATH_LOSS_FLOOR_DB) / 10.0)

    serving = _greedy_association(dist)
    groups: list[tuple[int, ...]] = []
    for i in range(n_gw):
        members = [j for j in range(n_dev) if serving[j] == i]
        members.sort(key=lambda j: (-gain_gw_dev[i, j], j))
        groups.append(tuple(members))

    clusters = _strong_weak_clusters(gain_bs, n_cl)

    serving_gain = gain_gw_dev[serving, np.arange(n_dev)]
    return NetworkTopology(
        n_gateways=n_gw,
        n_devices=n_dev,
        n_clusters=n_cl,
        device_groups=tuple(groups),
        gateway_clusters=tuple(tuple(c) for c in clusters),
        serving_gateway=serving,
        gain_device_to_gateway=serving_gain,
        gain_gateway_to_device=gain_gw_dev,
        gain_gateway_to_bs=gain_bs,
        device_xy_km=dev_xy,
        gateway_xy_km=gw_xy,
    )
