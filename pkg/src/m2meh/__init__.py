"""Energy-minimizing resource allocation for M2M uplinks with RF energy harvesting.

The package models an uplink network in which machine-type devices relay a
fixed payload through gateways to a base station, under either NOMA or TDMA
multiple access.  Gateways recharge the devices over the air while relaying,
subject to a non-linear harvesting characteristic with a sensitivity
threshold.  Total network energy (device RF + device circuit + gateway RF +
gateway circuit - harvested) is minimized by joint power control and
per-phase time allocation.
"""

from m2meh.params import SolverConfig, SystemParams
from m2meh.topology import GeometryConfig, NetworkTopology, generate_topology, path_loss_linear
from m2meh.ehmodel import eh_harvest, eh_harvest_smooth
from m2meh.metrics import Allocation, EnergyReport, total_energy
from m2meh.noma_solver import optimize_noma
from m2meh.tdma_solver import optimize_tdma
from m2meh.verify import verify_solution

__all__ = [
    "Allocation",
    "EnergyReport",
    "GeometryConfig",
    "NetworkTopology",
    "SolverConfig",
    "SystemParams",
    "eh_harvest",
    "eh_harvest_smooth",
    "generate_topology",
    "optimize_noma",
    "optimize_tdma",
    "path_loss_linear",
    "total_energy",
    "verify_solution",
]

__version__ = "0.1.0"
