"""Path construction and filtering policies: fuzzy dynamic, CCEF-like, DEF-like."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .config import SCHEMES

PER_SESSION_FIXED = "per_session_fixed"
PER_REPORT_DYNAMIC = "per_report_dynamic"

BS_REACHED = "bs_reached"
STRANDED = "stranded"

# Per-hop detection probabilities, fixed by scripts/calibrate_q.py (see README).
Q_PROPOSED = 0.85
Q_CCEF = 0.85
Q_DEF = 0.85
DEF_CANDIDATES = 3


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class SchemePolicy:
    kind: str
    per_hop_detection_q: float
    path_mode: str
    candidate_width_k: int = 1
    fitness_m: float = 0.5
    fitness_n: float = 0.5
    selector: str = "fuzzy"  # proposed only: "fuzzy" or "crisp"

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise SchemeError(f"unknown scheme {self.kind!r}")
        if not 0.0 <= self.per_hop_detection_q <= 1.0:
            raise SchemeError("q must be in [0, 1]")
        if self.candidate_width_k < 1:
            raise SchemeError("k must be >= 1")
        if not (0.0 < self.fitness_m < 1.0 and 0.0 < self.fitness_n < 1.0):
            raise SchemeError("fitness exponents must lie in (0, 1)")


def scheme_defaults(kind: str) -> SchemePolicy:
    if kind == "proposed":
        return SchemePolicy(kind, Q_PROPOSED, PER_REPORT_DYNAMIC)
    if kind == "ccef":
        return SchemePolicy(kind, Q_CCEF, PER_SESSION_FIXED)
    if kind == "def":
        return SchemePolicy(kind, Q_DEF, PER_REPORT_DYNAMIC, candidate_width_k=DEF_CANDIDATES)
    raise SchemeError(f"unknown scheme {kind!r}")


def policy_for(config) -> SchemePolicy:
    """Scheme defaults with any overrides carried by ``config``."""
    base = scheme_defaults(config.scheme)
    return SchemePolicy(
        kind=base.kind,
        per_hop_detection_q=base.per_hop_detection_q if config.q is None else config.q,
        path_mode=base.path_mode,
        candidate_width_k=base.candidate_width_k if config.def_k is None else config.def_k,
        fitness_m=config.fitness_m,
        fitness_n=config.fitness_n,
        selector=config.selector,
    )


@dataclass
class Route:
    nodes: list
    terminal: str

    @property
    def hops(self) -> int:
        """Radio hops including the final one into the BS."""
        return len(self.nodes) if self.terminal == BS_REACHED else len(self.nodes) - 1


def crisp_fitness(node, af: float, config, m: float = 0.5, n: float = 0.5,
                  mac_capacity: float = 1.0) -> float:
    """Closed-form forwarding fitness from MAC capacity, AF, proximity and energy.

    Proximity is 1 - dist/diagonal (larger is closer to the BS); energy is the
    residual fraction.
    """
    if not node.alive:
        raise SchemeError(f"node {node.id} is dead")
    if not 0.0 <= af <= 1.0:
        raise SchemeError(f"af {af!r} outside [0, 1]")
    proximity = 1.0 - node.dist_to_bs / config.diagonal
    energy = node.residual_energy / config.initial_energy
    return mac_capacity * af ** m + (proximity + energy) ** n


class FitnessCache:
    """Memoised fuzzy FV per node, valid while its energy and AF are unchanged."""

    def __init__(self, topology, fuzzy_system):
        self.topology = topology
        self.fuzzy = fuzzy_system
        self.initial = topology.config.initial_energy
        self.diagonal = topology.config.diagonal
        self._store = {}

    def fv(self, node_id: int, af: float) -> float:
        e = float(self.topology.residual[node_id])
        hit = self._store.get(node_id)
        if hit is not None and hit[0] == e and hit[1] == af:
            return hit[2]
        nd = float(self.topology.dist_to_bs[node_id]) / self.diagonal
        value = self.fuzzy.infer(e / self.initial, nd, af)
        self._store[node_id] = (e, af, value)
        return value


def _candidates(topology, current, visited):
    """(closer, all) alive unvisited neighbours of ``current``."""
    alive = topology.alive
    dist = topology.dist_to_bs
    here = dist[current]
    nbrs = [v for v in topology.adjacency[current] if alive[v] and v not in visited]
    closer = [v for v in nbrs if dist[v] < here]
    return closer, nbrs


def _argmax(ids, score):
    """Highest score; ties go to the lowest id."""
    best, best_score = None, None
    for v in sorted(ids):
        s = score(v)
        if best is None or s > best_score:
            best, best_score = v, s
    return best


def next_hop_proposed(topology, fuzzy_system, current: int, af: float, rng=None,
                      visited=frozenset(), cache: Optional[FitnessCache] = None):
    """Neighbour with the highest fuzzy FV, preferring ones closer to the BS."""
    if cache is None:
        cache = FitnessCache(topology, fuzzy_system)
    closer, nbrs = _candidates(topology, current, visited)
    pool = closer or nbrs
    if not pool:
        return None
    return _argmax(pool, lambda v: cache.fv(v, af))


def next_hop_crisp(topology, current, af, visited=frozenset(), m=0.5, n=0.5):
    closer, nbrs = _candidates(topology, current, visited)
    pool = closer or nbrs
    if not pool:
        return None
    nodes, cfg = topology.nodes, topology.config
    return _argmax(pool, lambda v: crisp_fitness(nodes[v], af, cfg, m, n))


def next_hop_greedy(topology, current, visited=frozenset()):
    """Neighbour nearest the BS (ties to lowest id)."""
    closer, nbrs = _candidates(topology, current, visited)
    pool = closer or nbrs
    if not pool:
        return None
    dist = topology.dist_to_bs
    return min(pool, key=lambda v: (dist[v], v))


def next_hop_def(topology, current, rng, k: int, visited=frozenset()):
    """Uniform pick among the k neighbours with the most progress toward the BS."""
    closer, nbrs = _candidates(topology, current, visited)
    dist = topology.dist_to_bs
    if closer:
        ranked = sorted(closer, key=lambda v: (dist[v], v))[:k]
        return ranked[int(rng.integers(0, len(ranked)))]
    if not nbrs:
        return None
    return min(nbrs, key=lambda v: (dist[v], v))


@dataclass
class Router:
    """Binds a policy to the structures its next-hop rule needs."""

    topology: object
    policy: SchemePolicy
    fuzzy: object = None
    rng: object = None
    cache: Optional[FitnessCache] = field(default=None, repr=False)

    def __post_init__(self):
        if self.policy.kind == "proposed" and self.policy.selector == "fuzzy":
            if self.fuzzy is None:
                raise SchemeError("proposed scheme needs a fuzzy system")
            if self.cache is None:
                self.cache = FitnessCache(self.topology, self.fuzzy)

    def next_hop(self, current: int, af: float, visited):
        p = self.policy
        if p.kind == "proposed":
            if p.selector == "crisp":
                return next_hop_crisp(self.topology, current, af, visited,
                                      p.fitness_m, p.fitness_n)
            return next_hop_proposed(self.topology, self.fuzzy, current, af,
                                     visited=visited, cache=self.cache)
        if p.kind == "def":
            return next_hop_def(self.topology, current, self.rng,
                                p.candidate_width_k, visited)
        return next_hop_greedy(self.topology, current, visited)

    def build_route(self, cluster_head: int, af: float) -> Route:
        return build_route(self.topology, self.policy, cluster_head, af,
                           self.rng, self.fuzzy, router=self)


def build_route(topology, policy: SchemePolicy, cluster_head: int, af: float,
                rng=None, fuzzy_system=None, router: Optional[Router] = None) -> Route:
    """Chain next-hop choices from the cluster head until a node hears the BS."""
    if not topology.nodes[cluster_head].alive:
        raise SchemeError(f"cluster head {cluster_head} is dead")
    if router is None:
        router = Router(topology, policy, fuzzy_system, rng)
    nodes = [cluster_head]
    visited = {cluster_head}
    current = cluster_head
    while not topology.reaches_bs(current):
        nxt = router.next_hop(current, af, visited)
        if nxt is None:
            return Route(nodes, STRANDED)
        nodes.append(nxt)
        visited.add(nxt)
        current = nxt
    return Route(nodes, BS_REACHED)
