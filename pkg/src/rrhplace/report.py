"""Run report container and its JSON round trip."""

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

LN2 = math.log(2.0)


@dataclass
class RunReport:
    """Outcome of one placement run. Rates are in bits/s/Hz, distances in meters."""

    mode: str
    status: str
    converged: bool
    iterations: int
    rrh_xy: list
    cu_xy: list
    lambdas: list
    outage: list
    cu_dist: list
    d_out: list
    expected_rate_bits: list
    network_mean_bits: float
    d_max_trace: list = field(default_factory=list)
    objective_trace_bits: list = field(default_factory=list)
    fallbacks: int = 0
    # cells moved by a tail extrapolation, summed over the run
    extrapolations: int = 0
    no_constraint: bool = False
    a4_check: dict = field(default_factory=dict)
    seed: int | None = None
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    trajectory: list = field(default_factory=list)
    mc_audit: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status != "infeasible"

    @property
    def max_outage(self):
        return float(np.max(self.outage)) if self.outage else 0.0

    def rrh_array(self):
        return np.asarray(self.rrh_xy, dtype=float)

    def to_dict(self):
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown report keys: {sorted(unknown)}")
        return cls(**data)


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
