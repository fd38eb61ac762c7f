"""False-report injection, symbolic MAC checks and attack-frequency estimation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

DELIVERED = "delivered"
DROPPED_ENROUTE = "dropped_enroute"
DROPPED_AT_BS = "dropped_at_bs"
STRANDED = "stranded"
FATES = (DELIVERED, DROPPED_ENROUTE, DROPPED_AT_BS, STRANDED)

PASS, DROP = "pass", "drop"
ACCEPT, REJECT = "accept", "reject"


@dataclass
class Report:
    id: int
    source_cluster: int
    legitimate: bool
    mac_slots: list  # True = valid
    origin: Optional[int] = None
    hop_trace: list = field(default_factory=list)
    fate: Optional[str] = None
    dropped_at: Optional[int] = None

    @property
    def hops(self) -> int:
        return max(len(self.hop_trace) - 1, 0)


def generate_report(topology, cluster: int, rng, config, report_id: int = 0) -> Optional[Report]:
    """Draw one event report from ``cluster``; None if the cluster is inactive.

    Exactly two draws are consumed per call so the attack sequence lines up
    across schemes sharing a seed.
    """
    c = topology.clusters[cluster]
    fabricate = rng.random() < config.ftr
    slot = int(rng.integers(0, config.mac_slots))
    if not c.active:
        return None
    macs = [True] * config.mac_slots
    origin = c.head
    if fabricate:
        macs[slot] = False
        if c.compromised is not None:
            origin = c.compromised
    report = Report(report_id, cluster, not fabricate, macs, origin)
    report.hop_trace.append(c.head)
    return report


def verify_at_hop(report: Report, node_id: int, q: float, rng) -> str:
    """Per-hop filter: a forged report is caught with probability ``q``."""
    if report.legitimate:
        return PASS
    if rng.random() < q:
        report.fate = DROPPED_ENROUTE
        report.dropped_at = node_id
        return DROP
    return PASS


def bs_verify(report: Report) -> str:
    # The BS holds every key, so any invalid slot is caught.
    if all(report.mac_slots):
        report.fate = DELIVERED
        return ACCEPT
    report.fate = DROPPED_AT_BS
    return REJECT


@dataclass
class AttackCounter:
    false_count: int = 0
    legit_count: int = 0
    accepted: int = 0

    @property
    def af(self) -> float:
        total = self.false_count + self.legit_count
        return self.false_count / total if total else 0.0


def update_attack_frequency(counter: AttackCounter, report: Report) -> AttackCounter:
    """Pool one terminal report into the cumulative forged/total ratio."""
    if report.fate is None or report.fate == STRANDED:
        raise ValueError(f"report {report.id} has no terminal fate")
    if not report.legitimate:
        counter.false_count += 1
    elif report.fate == DELIVERED:
        counter.legit_count += 1
        counter.accepted += 1
    return counter


def recount_af(reports) -> float:
    """Brute-force AF over a report collection."""
    terminal = [r for r in reports if r.fate in (DELIVERED, DROPPED_ENROUTE, DROPPED_AT_BS)]
    if not terminal:
        return 0.0
    return sum(not r.legitimate for r in terminal) / len(terminal)
