"""Simulation configuration with the published defaults."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

SCHEMES = ("proposed", "ccef", "def")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    # Field and radio (Table 1 defaults).
    field_side: float = 500.0
    node_count: int = 1000
    bs_position: tuple = (250.0, 0.0)
    radio_range: float = 50.0
    cluster_cell: float = 50.0
    initial_energy: float = 1.0
    e_elec: float = 50e-9
    e_amp: float = 100e-12
    path_loss_lambda: float = 2.0
    data_packet_bits: int = 256
    control_packet_bits: int = 1024
    ftr: float = 0.5
    rng_seed: int = 0
    scheme: str = "proposed"
    # Session model.
    rounds_per_session: int = 100
    strand_window: int = 10
    cluster_selection: str = "round_robin"
    mac_slots: int = 5
    # Scheme overrides; None means the committed scheme default.
    q: Optional[float] = None
    fitness_m: float = 0.5
    fitness_n: float = 0.5
    def_k: Optional[int] = None
    selector: str = "fuzzy"

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = (
            "field_side", "radio_range", "cluster_cell", "initial_energy",
            "e_elec", "e_amp", "data_packet_bits", "control_packet_bits",
            "node_count", "rounds_per_session", "strand_window", "mac_slots",
        )
        for name in positive:
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"{name} must be > 0, got {value!r}")
        if not 0.0 <= self.ftr <= 1.0:
            raise ConfigError(f"ftr must be in [0, 1], got {self.ftr!r}")
        if not self.path_loss_lambda >= 2:
            raise ConfigError(f"path_loss_lambda must be >= 2, got {self.path_loss_lambda!r}")
        cells = self.field_side / self.cluster_cell
        if not math.isclose(cells, round(cells), rel_tol=0, abs_tol=1e-9):
            raise ConfigError("cluster_cell must divide field_side evenly")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.cluster_selection not in ("round_robin", "random"):
            raise ConfigError(f"unknown cluster_selection {self.cluster_selection!r}")
        if self.selector not in ("fuzzy", "crisp"):
            raise ConfigError(f"unknown selector {self.selector!r}")
        if self.q is not None and not 0.0 <= self.q <= 1.0:
            raise ConfigError(f"q must be in [0, 1], got {self.q!r}")
        for name in ("fitness_m", "fitness_n"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {value!r}")
        if self.def_k is not None and self.def_k < 1:
            raise ConfigError(f"def_k must be >= 1, got {self.def_k!r}")
        if len(self.bs_position) != 2:
            raise ConfigError("bs_position must be an (x, y) pair")
        if not (0 <= self.rng_seed < 2**64):
            raise ConfigError("rng_seed must be a 64-bit unsigned integer")

    @property
    def grid_size(self) -> int:
        return int(round(self.field_side / self.cluster_cell))

    @property
    def cell_count(self) -> int:
        return self.grid_size ** 2

    @property
    def diagonal(self) -> float:
        return math.hypot(self.field_side, self.field_side)

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bs_position"] = list(self.bs_position)
        return d


# Each concern draws from its own child of the master seed, so extra draws in
# one never shift another.
STREAMS = ("deploy", "attack", "verify", "scheme", "session")


def stream(seed: int, concern: str) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(STREAMS.index(concern),))
    return np.random.Generator(np.random.PCG64(seq))
