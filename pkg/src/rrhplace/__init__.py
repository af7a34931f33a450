"""RRH placement under a wireless-backhaul outage constraint.

The access side uses a closed-form lower bound on the zero-forcing spectral
efficiency averaged over a hotspot traffic density; the backhaul side uses
the Rician outage probability of each CU-RRH link. Rates are in nats/s/Hz
internally and in bits/s/Hz in reports.
"""

from .access import AccessModel, expected_rate, rate_access_lb
from .backhaul import (BackhaulLimit, Feasibility, InfeasibleError, backhaul_limit,
                       max_backhaul_distance, outage_at, outage_prob)
from .kernels import BACKEND
from .model import (ConfigError, Layout, NetworkParams, TrafficModel, generate_traffic,
                    pathloss, traffic_pdf)
from .optimizer import Optimizer, OptimizerSettings, optimize, optimize_restarts
from .report import RunReport

__version__ = "0.1.0"

__all__ = [
    "AccessModel", "BACKEND", "BackhaulLimit", "ConfigError", "Feasibility", "InfeasibleError",
    "Layout", "NetworkParams", "Optimizer", "OptimizerSettings", "RunReport", "TrafficModel",
    "backhaul_limit", "expected_rate", "generate_traffic", "max_backhaul_distance", "optimize",
    "optimize_restarts", "outage_at", "outage_prob", "pathloss", "rate_access_lb", "traffic_pdf",
]
