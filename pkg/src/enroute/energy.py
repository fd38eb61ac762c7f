"""First-order radio energy model and per-node depletion bookkeeping."""
from __future__ import annotations

import numpy as np

TX, RX = 0, 1


class EnergyError(ValueError):
    pass


def tx_cost(bits, distance, config) -> float:
    """Energy to transmit ``bits`` over ``distance`` metres."""
    if bits < 0 or distance < 0:
        raise EnergyError(f"negative tx input: bits={bits}, distance={distance}")
    return bits * config.e_elec + bits * config.e_amp * distance ** config.path_loss_lambda


def rx_cost(bits, config) -> float:
    if bits < 0:
        raise EnergyError(f"negative rx input: bits={bits}")
    return bits * config.e_elec


class EnergyLedger:
    """Consumed joules per node, radio totals, and the order nodes died in."""

    def __init__(self, initial_energy: float, n_nodes: int):
        self.initial_energy = float(initial_energy)
        self.consumed = np.zeros(n_nodes, dtype=np.float64)
        self.totals = np.zeros(2, dtype=np.float64)  # [tx, rx]
        self.depletion_order = []  # (node_id, round)

    @classmethod
    def for_topology(cls, topology):
        return cls(topology.config.initial_energy, len(topology.nodes))

    @property
    def tx_joules(self) -> float:
        return float(self.totals[TX])

    @property
    def rx_joules(self) -> float:
        return float(self.totals[RX])

    @property
    def total(self) -> float:
        return float(self.totals[TX] + self.totals[RX])

    @property
    def fnd(self):
        return self.depletion_order[0][1] if self.depletion_order else None

    @property
    def lnd(self):
        return self.depletion_order[-1][1] if self.depletion_order else None


def debit(topology, ledger: EnergyLedger, node_id: int, amount: float, round_: int,
          kind: int = TX) -> float:
    """Take energy from a live node without retiring it; returns joules paid.

    Residual energy is derived from the ledger so the two never drift apart.
    A node whose debt exceeds its residual pays only what it has and its
    ``alive`` flag drops; graph and headship updates are left to the caller.
    """
    if not topology.alive[node_id]:
        raise EnergyError(f"charging dead node {node_id}")
    if amount < 0:
        raise EnergyError(f"negative charge {amount}")
    initial = ledger.initial_energy
    before = ledger.consumed[node_id]
    after = before + amount
    if after >= initial:
        after = initial
    paid = after - before
    ledger.consumed[node_id] = after
    ledger.totals[kind] += paid
    topology.residual[node_id] = initial - after
    if after >= initial:
        topology.alive[node_id] = False
        ledger.depletion_order.append((node_id, round_))
    return paid


def charge(topology, ledger: EnergyLedger, node_id: int, amount: float, round_: int,
           kind: int = TX) -> bool:
    """Debit a node and retire it if that emptied it; returns True on death."""
    debit(topology, ledger, node_id, amount, round_, kind)
    if not topology.alive[node_id]:
        topology.mark_dead(node_id)
        return True
    return False
