"""Round loop for the query/response session model and lifetime metrics.

Two interchangeable backends forward reports: a compiled kernel (default) and
a pure-Python reference built from the schemes/energy/security functions. Both
consume the same random streams in the same order and agree bit for bit.
"""
from __future__ import annotations

import dataclasses
import statistics
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import security as sec
from .config import NetworkConfig, stream
from .energy import RX, TX, EnergyLedger, debit, rx_cost, tx_cost
from .fuzzy import load_system
from .schemes import BS_REACHED, PER_SESSION_FIXED, Router, policy_for
from .topology import deploy

BACKENDS = ("numba", "python")

# Published lifetime gains of the fuzzy scheme, used as reference columns only.
PAPER_RATIOS = {
    "fnd_vs_ccef": 3.104,
    "fnd_vs_def": 1.147,
    "lnd_vs_ccef": 2.545,
    "lnd_vs_def": 1.055,
}
PAPER_FILTERING = {"ccef": 0.986, "def": 0.993, "proposed": 0.994}

NO_REPORT = -1  # fate code of a round whose cluster had no head left

ROUND_COLUMNS = (
    "round", "session", "cluster", "reports_sent", "delivered", "dropped_enroute",
    "dropped_at_bs", "stranded", "deaths_this_round", "alive_count", "energy_consumed",
    "current_af", "legitimate", "fate", "hop_count",
)


@dataclass(slots=True)
class RoundRecord:
    round: int
    session: int
    cluster: int
    reports_sent: int = 0
    delivered: int = 0
    dropped_enroute: int = 0
    dropped_at_bs: int = 0
    stranded: int = 0
    deaths_this_round: list = field(default_factory=list)
    alive_count: int = 0
    energy_consumed: float = 0.0
    current_af: float = 0.0
    report_id: int = -1
    legitimate: bool = True
    fate: str = ""
    hop_count: int = 0


class RunLog:
    """Columnar per-round log; iterating yields :class:`RoundRecord` rows."""

    def __init__(self, node_count: int):
        self.node_count = node_count
        self._parts = []
        self._cols = None
        self.depletion = []

    def add(self, session, cluster, first_round, n, fate, legit, hops, energy, af):
        self._parts.append((
            np.arange(first_round, first_round + n, dtype=np.int64),
            np.full(n, session, dtype=np.int64),
            np.full(n, cluster, dtype=np.int64),
            fate[:n].copy(), legit[:n].copy(), hops[:n].copy(),
            energy[:n].copy(), af[:n].copy(),
        ))
        self._cols = None

    @property
    def columns(self) -> dict:
        if self._cols is None:
            names = ("round", "session", "cluster", "fate", "legitimate", "hop_count",
                     "energy_consumed", "current_af")
            if self._parts:
                cols = {k: np.concatenate([p[i] for p in self._parts]) for i, k in enumerate(names)}
            else:
                dtypes = (np.int64, np.int64, np.int64, np.int8, np.bool_, np.int64,
                          np.float64, np.float64)
                cols = {k: np.zeros(0, dtype=d) for k, d in zip(names, dtypes)}
            died = np.array([r for _, r in self.depletion], dtype=np.int64)
            cols["alive_count"] = self.node_count - np.searchsorted(died, cols["round"], "right")
            self._cols = cols
        return self._cols

    def __len__(self):
        return sum(len(p[0]) for p in self._parts)

    def deaths_by_round(self) -> dict:
        out = {}
        for node, rnd in self.depletion:
            out.setdefault(rnd, []).append(node)
        return out

    def __iter__(self):
        c = self.columns
        deaths = self.deaths_by_round()
        report_id = 0
        for i in range(len(c["round"])):
            rnd = int(c["round"][i])
            rec = RoundRecord(rnd, int(c["session"][i]), int(c["cluster"][i]),
                              deaths_this_round=deaths.get(rnd, []),
                              alive_count=int(c["alive_count"][i]),
                              energy_consumed=float(c["energy_consumed"][i]),
                              current_af=float(c["current_af"][i]))
            code = int(c["fate"][i])
            if code != NO_REPORT:
                fate = sec.FATES[code]
                rec.reports_sent = 1
                setattr(rec, fate, 1)
                rec.fate = fate
                rec.report_id = report_id
                rec.legitimate = bool(c["legitimate"][i])
                rec.hop_count = int(c["hop_count"][i])
                report_id += 1
            yield rec

    def __getitem__(self, i):
        if i < 0:
            i += len(self)
        for j, rec in enumerate(self):
            if j == i:
                return rec
        raise IndexError(i)

    def to_csv(self, path_or_file) -> None:
        """Write the stable-column round log; accepts a path or an open text file."""
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)
        else:
            self._write(path_or_file)

    def _write(self, fh):
        c = self.columns
        fate = c["fate"]
        idle = fate == NO_REPORT
        # reports_sent plus the four fate flags, then the fate name, per code
        flags = [",".join("1" if i in (0, k + 1) else "0" for i in range(5))
                 for k in range(len(sec.FATES))] + ["0,0,0,0,0"]
        names = list(sec.FATES) + [""]
        deaths = {r: ";".join(map(str, ns)) for r, ns in self.deaths_by_round().items()}
        rows = zip(c["round"].tolist(), c["session"].tolist(), c["cluster"].tolist(),
                   np.where(idle, len(sec.FATES), fate).tolist(), c["alive_count"].tolist(),
                   c["energy_consumed"].tolist(), c["current_af"].tolist(),
                   (idle | c["legitimate"]).tolist(), np.where(idle, 0, c["hop_count"]).tolist())
        fh.write(",".join(ROUND_COLUMNS) + "\n")
        fh.write("".join([
            f"{rnd},{ses},{cl},{flags[code]},{deaths.get(rnd, '')},{alive},{energy!r},"
            f"{af!r},{'1' if legit else '0'},{names[code]},{hops}\n"
            for rnd, ses, cl, code, alive, energy, af, legit, hops in rows
        ]))


@dataclass
class RunSummary:
    scheme: str
    seed: int
    node_count: int
    ftr: float
    fnd_round: Optional[int]
    lnd_round: Optional[int]
    filtering_efficiency: float
    filtering_vacuous: bool
    total_rounds: int
    sessions: int
    skipped_sessions: int
    early_termination: bool
    fabricated: int
    delivered: int
    dropped_enroute: int
    dropped_at_bs: int
    stranded: int
    deaths: int
    tx_joules: float
    rx_joules: float
    mean_hops_delivered: float
    distinct_relays: int
    config: dict = field(default_factory=dict, repr=False)
    audit: Optional[dict] = None  # route audit counts when the run was traced


@dataclass
class Audit:
    """Structural checks collected while tracing hop paths."""

    routes: int = 0
    loops: int = 0
    bad_hops: int = 0
    false_drops: int = 0

    @property
    def clean(self) -> bool:
        return self.loops == 0 and self.bad_hops == 0 and self.false_drops == 0


class _Scratch:
    """Per-session output columns shared by both backends."""

    def __init__(self, rounds, node_count):
        self.fate = np.zeros(rounds, dtype=np.int8)
        self.legit = np.zeros(rounds, dtype=np.bool_)
        self.slot = np.zeros(rounds, dtype=np.int64)
        self.hops = np.zeros(rounds, dtype=np.int64)
        self.energy = np.zeros(rounds, dtype=np.float64)
        self.af = np.zeros(rounds, dtype=np.float64)
        self.trace = np.zeros(rounds * (node_count + 1), dtype=np.int64)
        self.trace_off = np.zeros(rounds + 1, dtype=np.int64)

    def reset(self):
        self.fate[:] = NO_REPORT
        self.legit[:] = True
        self.slot[:] = -1
        self.hops[:] = 0
        self.energy[:] = 0.0
        self.af[:] = 0.0
        self.trace_off[:] = 0


def _rows_by_progress(topo):
    """Neighbour rows re-sorted by (distance to BS, id), plus each node's count
    of strictly closer neighbours (the row prefix the kernel prefers)."""
    ptr, idx, dist = topo.nbr_ptr, topo.nbr_idx, topo.dist_to_bs
    ordered = np.empty_like(idx)
    closer = np.zeros(len(topo), dtype=np.int64)
    for i in range(len(topo)):
        row = idx[ptr[i]:ptr[i + 1]]
        ordered[ptr[i]:ptr[i + 1]] = row[np.lexsort((row, dist[row]))]
        closer[i] = int((dist[row] < dist[i]).sum())
    return ordered, closer


class _Kernel:
    """Argument bundles for the compiled loop, aliasing the live arrays."""

    def __init__(self, sim):
        from . import _kernels as K

        self.K = K
        cfg = sim.config
        topo = sim.topology
        p = sim.policy
        n = len(topo)
        if p.kind == "proposed":
            self.kind = K.CRISP if p.selector == "crisp" else K.FUZZY
        elif p.kind == "def":
            self.kind = K.DEF
        else:
            self.kind = K.GREEDY
        self.k = int(p.candidate_width_k)
        self.net = (topo.x, topo.y, topo.dist_to_bs, topo.alive, topo.residual,
                    topo.nbr_ptr) + _rows_by_progress(topo)
        if sim.fuzzy is not None:
            self.fz = sim.fuzzy.arrays
        else:
            self.fz = (np.zeros((4, 1, 4)), np.zeros(4, dtype=np.int64),
                       np.zeros((1, 1, 1), dtype=np.int64))
        n_out = int(self.fz[1][3]) if sim.fuzzy is not None else 1
        nwork, nact = K.work_sizes(max(n_out, 1))
        # mu gets one extra slot for the AF its AF degrees were computed at
        self.cache = (np.full(n, np.nan), np.full(n, np.nan), np.zeros(n),
                      np.zeros(max(n_out, 1)), np.zeros(nwork), np.zeros(nact, dtype=np.int64),
                      np.full(int(self.fz[1][:3].sum()) + 1, np.nan),
                      K.nd_degrees(self.fz[0], self.fz[1], topo.dist_to_bs,
                                   float(cfg.diagonal)))
        self.crisp = (float(p.fitness_m), float(p.fitness_n), float(cfg.initial_energy),
                      float(cfg.diagonal))
        self.radio = (int(cfg.data_packet_bits), float(cfg.e_elec), float(cfg.e_amp),
                      float(cfg.path_loss_lambda), float(cfg.initial_energy),
                      float(cfg.radio_range))
        self.stamps = np.zeros(n, dtype=np.int64)
        self.stamp_ctr = np.zeros(1, dtype=np.int64)
        self.seen = np.zeros(n, dtype=np.int64)
        self.seen_ctr = np.zeros(1, dtype=np.int64)
        self.kbuf = np.zeros(max(self.k, 1), dtype=np.int64)
        self.route = np.zeros(n, dtype=np.int64)
        self.deaths = np.zeros((n, 2), dtype=np.int64)
        self.death_count = np.zeros(1, dtype=np.int64)
        self.counts = np.zeros(2, dtype=np.int64)
        self.no_route = np.zeros(0, dtype=np.int64)

    def build_route(self, sim, head, af):
        n, reached = self.K.build_route(
            head, af, self.kind, self.k, self.radio[5], self.stamps, self.stamp_ctr,
            self.net, self.fz, self.cache, self.crisp, sim.scheme_rng, self.kbuf, self.route)
        return self.route[:n].copy(), bool(reached)


class Simulation:
    """All mutable state of one run; executes sessions strictly in order."""

    def __init__(self, config: NetworkConfig, fuzzy_system=None, keep_reports=False,
                 backend="numba", trace=False):
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        self.config = config
        self.backend = backend
        self.policy = policy_for(config)
        self.topology = deploy(config, stream(config.rng_seed, "deploy"))
        self.ledger = EnergyLedger.for_topology(self.topology)
        self.counter = sec.AttackCounter()
        self.attack_rng = stream(config.rng_seed, "attack")
        self.verify_rng = stream(config.rng_seed, "verify")
        self.scheme_rng = stream(config.rng_seed, "scheme")
        self.session_rng = stream(config.rng_seed, "session")
        if fuzzy_system is None and self.policy.kind == "proposed" \
                and self.policy.selector == "fuzzy":
            fuzzy_system = load_system()
        self.fuzzy = fuzzy_system
        self.router = Router(self.topology, self.policy, fuzzy_system, self.scheme_rng)
        self.kernel = _Kernel(self) if backend == "numba" else None
        self.tracing = bool(trace or keep_reports)
        self.audit = Audit()
        self.reports = [] if keep_reports else None
        self.round = 0
        self.session = 0
        self.sessions_run = 0
        self.skipped_sessions = 0
        self.fixed_routes = {}
        self.used = np.zeros(len(self.topology), dtype=np.bool_)
        self.log = RunLog(len(self.topology))
        self.log.depletion = self.ledger.depletion_order
        self._retired_upto = 0
        self._scratch = _Scratch(config.rounds_per_session, len(self.topology))

    @property
    def records(self) -> RunLog:
        return self.log

    # -- helpers -------------------------------------------------------------

    def _retire(self):
        """Finish graph and headship bookkeeping for nodes that ran dry."""
        order = self.ledger.depletion_order
        while self._retired_upto < len(order):
            self.topology.mark_dead(order[self._retired_upto][0])
            self._retired_upto += 1

    def _build_route(self, head, af):
        if self.kernel is not None:
            return self.kernel.build_route(self, head, af)
        route = self.router.build_route(head, af)
        return np.array(route.nodes, dtype=np.int64), route.terminal == BS_REACHED

    def _route_for(self, head, af):
        """Current best route from ``head``; fixed-path schemes reuse theirs."""
        if self.policy.path_mode != PER_SESSION_FIXED:
            return self._build_route(head, af)
        hit = self.fixed_routes.get(head)
        if hit is None or not self.topology.alive[hit[0]].all():
            hit = self._build_route(head, af)
            self.fixed_routes[head] = hit
        return hit

    def _disseminate_query(self, path, rnd) -> float:
        """BS -> cluster head along the route, control-packet sized; returns joules."""
        if self.kernel is not None:
            return self._query_kernel(path, rnd)
        cfg = self.config
        topo, ledger = self.topology, self.ledger
        bits = cfg.control_packet_bits
        rx = rx_cost(bits, cfg)
        spent = debit(topo, ledger, int(path[-1]), rx, rnd, RX)
        if not topo.alive[path[-1]]:
            return spent
        for i in range(len(path) - 1, 0, -1):
            sender, receiver = int(path[i]), int(path[i - 1])
            spent += debit(topo, ledger, sender,
                           tx_cost(bits, topo.distance(sender, receiver), cfg), rnd, TX)
            spent += debit(topo, ledger, receiver, rx, rnd, RX)
            if not topo.alive[receiver]:
                break
        return spent

    def _query_kernel(self, path, rnd) -> float:
        kn = self.kernel
        kn.death_count[0] = 0
        spent = kn.K.disseminate_query(
            path, len(path), rnd, self.config.control_packet_bits, kn.radio,
            self.topology.x, self.topology.y, self.ledger.consumed, self.topology.residual,
            self.topology.alive, self.ledger.totals, kn.deaths, kn.death_count)
        for i in range(int(kn.death_count[0])):
            self.ledger.depletion_order.append((int(kn.deaths[i, 0]), int(kn.deaths[i, 1])))
        return float(spent)

    # -- report forwarding ---------------------------------------------------

    def _reports_kernel(self, r0, r_end, first_round, head, fixed, af):
        kn = self.kernel
        b = self._scratch
        if fixed is None:
            route, flen, reached = kn.no_route, 0, False
        else:
            route, reached = fixed
            flen = len(route)
        kn.counts[0] = self.counter.false_count
        kn.counts[1] = self.counter.legit_count
        kn.death_count[0] = 0
        r = kn.K.run_reports(
            r0, r_end, first_round, head, route, flen, reached, kn.kind, af,
            self.policy.per_hop_detection_q, kn.k, self.config.ftr, self.config.mac_slots,
            kn.radio, kn.net, kn.fz, kn.cache, kn.crisp, kn.stamps, kn.stamp_ctr, kn.kbuf,
            self.ledger.consumed, self.ledger.totals, self.used, kn.counts,
            self.attack_rng, self.verify_rng, self.scheme_rng,
            b.fate, b.legit, b.slot, b.hops, b.energy, b.af,
            kn.deaths, kn.death_count, self.tracing, b.trace, b.trace_off)
        delivered = int(kn.counts[1]) - self.counter.legit_count
        self.counter.false_count = int(kn.counts[0])
        self.counter.legit_count = int(kn.counts[1])
        self.counter.accepted += delivered
        for i in range(int(kn.death_count[0])):
            self.ledger.depletion_order.append((int(kn.deaths[i, 0]), int(kn.deaths[i, 1])))
        return int(r)

    def _reports_python(self, r0, r_end, first_round, head, fixed, af):
        """Reference implementation of the compiled loop."""
        cfg = self.config
        topo, ledger = self.topology, self.ledger
        b = self._scratch
        bits = cfg.data_packet_bits
        rx = rx_cost(bits, cfg)
        q = self.policy.per_hop_detection_q
        cell = int(topo.cluster[head])
        for r in range(r0, r_end):
            rnd = first_round + r
            report = sec.generate_report(topo, cell, self.attack_rng, cfg, 0)
            legit = report.legitimate
            b.legit[r] = legit
            b.slot[r] = -1 if legit else report.mac_slots.index(False)
            deaths_before = len(ledger.depletion_order)
            trace = report.hop_trace
            if self.tracing:
                t = b.trace_off[r]
                b.trace[t] = head
                b.trace_off[r + 1] = t + 1
            cur = head
            if fixed is not None:
                planned = iter(fixed[0][1:].tolist())
                last = int(fixed[0][-1]) if fixed[1] else None
            else:
                visited = {head}
            while True:
                if fixed is not None:
                    if cur == last:
                        break
                    nxt = next(planned, None)
                else:
                    if topo.reaches_bs(cur):
                        break
                    nxt = self.router.next_hop(cur, af, visited)
                    if nxt is not None:
                        visited.add(nxt)
                if nxt is None:
                    report.fate = sec.STRANDED
                    break
                b.energy[r] += debit(topo, ledger, cur,
                                     tx_cost(bits, topo.distance(cur, nxt), cfg), rnd, TX)
                if self.tracing:
                    b.trace[b.trace_off[r + 1]] = nxt
                    b.trace_off[r + 1] += 1
                trace.append(nxt)
                self.used[nxt] = True
                b.energy[r] += debit(topo, ledger, nxt, rx, rnd, RX)
                if not topo.alive[nxt]:
                    report.fate = sec.STRANDED
                    break
                if sec.verify_at_hop(report, nxt, q, self.verify_rng) == sec.DROP:
                    break
                cur = nxt
            if report.fate is None:
                b.energy[r] += debit(topo, ledger, cur,
                                     tx_cost(bits, float(topo.dist_to_bs[cur]), cfg), rnd, TX)
                sec.bs_verify(report)
            b.fate[r] = sec.FATES.index(report.fate)
            b.hops[r] = report.hops
            if report.fate != sec.STRANDED:
                sec.update_attack_frequency(self.counter, report)
            b.af[r] = self.counter.af
            if len(ledger.depletion_order) > deaths_before:
                return r + 1
        return r_end

    # -- sessions ------------------------------------------------------------

    def pick_cluster(self, session_index):
        active = self.topology.active_clusters()
        if not active:
            return None
        if self.config.cluster_selection == "random":
            return active[int(self.session_rng.integers(0, len(active)))]
        return active[session_index % len(active)]

    def run_session(self, session_index=None) -> int:
        """Run one session; returns how many rounds it used (0 if skipped)."""
        if session_index is None:
            session_index = self.session
        self.session = session_index + 1
        cluster = self.pick_cluster(session_index)
        if cluster is None:
            self.skipped_sessions += 1
            return 0
        af = self.counter.af
        path, reached = self._route_for(cluster.head, af)
        if not reached:
            self.skipped_sessions += 1
            return 0
        self.sessions_run += 1
        cfg = self.config
        first = self.round + 1
        b = self._scratch
        b.reset()
        # Query deaths are stamped with the session's first round.
        b.energy[0] = self._disseminate_query(path, first)
        self._retire()
        forward = self._reports_kernel if self.kernel is not None else self._reports_python
        fixed_mode = self.policy.path_mode == PER_SESSION_FIXED
        n = 0
        if not cluster.active:
            # The report draw still happens so attack streams stay aligned.
            self.attack_rng.random()
            self.attack_rng.integers(0, cfg.mac_slots)
            b.af[0] = self.counter.af
            n = 1
        while n < cfg.rounds_per_session and cluster.active:
            fixed = self._route_for(cluster.head, af) if fixed_mode else None
            n = forward(n, cfg.rounds_per_session, first, cluster.head, fixed, af)
            self._retire()
        self.round = first + n - 1
        self.log.add(session_index, cluster.cell, first, n, b.fate, b.legit, b.hops,
                     b.energy, b.af)
        if self.tracing:
            self._inspect(session_index, cluster, first, n)
        return n

    def _inspect(self, session_index, cluster, first, n):
        """Audit traced paths and optionally keep them as Report objects."""
        b = self._scratch
        topo = self.topology
        off = b.trace_off[:n + 1]
        if self.kernel is not None:
            kn = self.kernel
            counts = kn.K.audit_paths(n, b.fate, b.legit, b.trace, off, topo.x, topo.y,
                                      self.config.radio_range, kn.seen, kn.seen_ctr)
            for name, value in zip(("routes", "loops", "bad_hops", "false_drops"), counts):
                setattr(self.audit, name, getattr(self.audit, name) + int(value))
        else:
            self._audit_numpy(n)
        if self.reports is not None:
            self._keep_reports(cluster, n)

    def _audit_numpy(self, n):
        b = self._scratch
        topo = self.topology
        sent = b.fate[:n] != NO_REPORT
        off = b.trace_off[:n + 1]
        lens = np.diff(off)
        nodes = b.trace[:off[n]]
        seg = np.repeat(np.arange(n), lens)
        # a path revisits a node iff it has fewer distinct nodes than entries
        distinct = np.bincount(np.unique(seg * len(topo) + nodes) // len(topo), minlength=n)
        step = seg[1:] == seg[:-1]
        u, v = nodes[:-1][step], nodes[1:][step]
        dx = topo.x[u] - topo.x[v]
        dy = topo.y[u] - topo.y[v]
        self.audit.routes += int(sent.sum())
        self.audit.loops += int(((distinct != lens) & sent).sum())
        self.audit.bad_hops += int((np.sqrt(dx * dx + dy * dy) > self.config.radio_range).sum())
        dropped = sec.FATES.index(sec.DROPPED_ENROUTE)
        self.audit.false_drops += int((b.legit[:n] & (b.fate[:n] == dropped)).sum())

    def _keep_reports(self, cluster, n):
        b = self._scratch
        off = b.trace_off[:n + 1]
        for r in range(n):
            code = int(b.fate[r])
            if code == NO_REPORT:
                continue
            path = b.trace[off[r]:off[r + 1]].tolist()
            fate = sec.FATES[code]
            legit = bool(b.legit[r])
            macs = [True] * self.config.mac_slots
            origin = path[0]
            if not legit:
                macs[int(b.slot[r])] = False
                if cluster.compromised is not None:
                    origin = cluster.compromised
            self.reports.append(sec.Report(
                len(self.reports), cluster.cell, legit, macs, origin, path, fate,
                path[-1] if fate == sec.DROPPED_ENROUTE else None))

    def finished(self, consecutive_skips) -> bool:
        if not self.topology.alive.any():
            return True
        if not self.topology.active_clusters():
            return True
        return consecutive_skips >= self.config.strand_window

    def run(self) -> RunSummary:
        skips = 0
        while not self.finished(skips):
            skips = 0 if self.run_session() else skips + 1
        return self.summary()

    def summary(self) -> RunSummary:
        c = self.log.columns
        fate = c["fate"]
        sent = fate != NO_REPORT
        fab = int((sent & ~c["legitimate"]).sum())
        totals = {f: int((fate == i).sum()) for i, f in enumerate(sec.FATES)}
        delivered = totals[sec.DELIVERED]
        dropped = totals[sec.DROPPED_ENROUTE]
        hops = int(c["hop_count"][fate == sec.FATES.index(sec.DELIVERED)].sum()) + delivered
        return RunSummary(
            scheme=self.config.scheme,
            seed=self.config.rng_seed,
            node_count=self.config.node_count,
            ftr=self.config.ftr,
            fnd_round=self.ledger.fnd,
            lnd_round=self.ledger.lnd,
            filtering_efficiency=dropped / fab if fab else 1.0,
            filtering_vacuous=fab == 0,
            total_rounds=self.round,
            sessions=self.sessions_run,
            skipped_sessions=self.skipped_sessions,
            early_termination=bool(self.topology.alive.any()),
            fabricated=fab,
            delivered=delivered,
            dropped_enroute=dropped,
            dropped_at_bs=totals[sec.DROPPED_AT_BS],
            stranded=totals[sec.STRANDED],
            deaths=len(self.ledger.depletion_order),
            tx_joules=self.ledger.tx_joules,
            rx_joules=self.ledger.rx_joules,
            mean_hops_delivered=hops / delivered if delivered else 0.0,
            distinct_relays=int(self.used.sum()),
            config=self.config.to_dict(),
            audit=dataclasses.asdict(self.audit) if self.tracing else None,
        )


def run_to_exhaustion(config: NetworkConfig, fuzzy_system=None, keep_reports=False,
                      backend="numba", trace=False):
    """Run sessions until the network dies or strands; returns (summary, log)."""
    sim = Simulation(config, fuzzy_system, keep_reports, backend, trace)
    summary = sim.run()
    return summary, sim.log


def run_one(config: NetworkConfig):
    """Summary only (picklable worker entry point)."""
    summary, _ = run_to_exhaustion(config)
    return summary


def _ratio(a, b):
    return a / b if a is not None and b else None


def _median(values):
    """Median of the observed values; runs with no death are left out."""
    xs = [v for v in values if v is not None]
    return statistics.median(xs) if xs else None


def medians_by_scheme(summaries, schemes) -> dict:
    out = {}
    for s in schemes:
        rows = [r for r in summaries if r.scheme == s]
        if not rows:
            continue
        out[s] = {
            "fnd": _median(r.fnd_round for r in rows),
            "lnd": _median(r.lnd_round for r in rows),
            "filtering_efficiency": statistics.median(r.filtering_efficiency for r in rows),
        }
    return out


def lifetime_ratios(medians) -> dict:
    ratios = {}
    if "proposed" in medians:
        p = medians["proposed"]
        for other in ("ccef", "def"):
            if other in medians:
                ratios[f"fnd_vs_{other}"] = _ratio(p["fnd"], medians[other]["fnd"])
                ratios[f"lnd_vs_{other}"] = _ratio(p["lnd"], medians[other]["lnd"])
    return ratios


def compare_schemes(base: NetworkConfig, schemes=("proposed", "ccef", "def"), seeds=(0,),
                    runner=run_one, jobs=1):
    """Run every (scheme, seed); returns (summaries, per-scheme medians, ratios)."""
    if not seeds:
        raise ValueError("need at least one seed")
    configs = [base.replace(scheme=s, rng_seed=seed) for s in schemes for seed in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(runner, configs))
    else:
        summaries = [runner(c) for c in configs]
    medians = medians_by_scheme(summaries, schemes)
    return summaries, medians, lifetime_ratios(medians)
