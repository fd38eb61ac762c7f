import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enroute.config import NetworkConfig, stream
from enroute.engine import Simulation
from enroute.fuzzy import load_system
from enroute.schemes import (
    BS_REACHED, PER_REPORT_DYNAMIC, PER_SESSION_FIXED, STRANDED, FitnessCache, Router,
    SchemeError, SchemePolicy, build_route, crisp_fitness, next_hop_crisp, next_hop_def,
    next_hop_greedy, next_hop_proposed, policy_for, scheme_defaults,
)
from enroute.topology import Cluster, Topology, deploy

FUZZY = load_system()


def layout(points, **cfg):
    """Single-cluster topology on the default field with explicit positions."""
    config = NetworkConfig(node_count=len(points), **cfg)
    xs, ys = zip(*points)
    return Topology(config, xs, ys, [Cluster(0, (25.0, 25.0), list(range(len(points))), 0)])


def test_crisp_fitness_fresh_node_at_bs():
    topo = layout([(250.0, 0.0)])
    assert crisp_fitness(topo.nodes[0], 0.0, topo.config) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_crisp_fitness_hand_value():
    topo = layout([(250.0, 300.0)])
    topo.residual[0] = 0.64
    d = 1 - 300 / math.hypot(500, 500)
    want = 0.25 ** 0.5 + (d + 0.64) ** 0.5
    assert crisp_fitness(topo.nodes[0], 0.25, topo.config) == pytest.approx(want, rel=1e-12)


def test_crisp_fitness_prefers_energy():
    topo = layout([(200.0, 100.0), (300.0, 100.0)])
    topo.residual[:] = (0.9, 0.5)
    f = [crisp_fitness(topo.nodes[i], 0.3, topo.config) for i in (0, 1)]
    assert f[0] > f[1]


def test_crisp_fitness_rejects_dead_or_bad_af():
    topo = layout([(10.0, 10.0), (20.0, 10.0)])
    with pytest.raises(SchemeError):
        crisp_fitness(topo.nodes[0], 1.5, topo.config)
    topo.mark_dead(1)
    with pytest.raises(SchemeError):
        crisp_fitness(topo.nodes[1], 0.1, topo.config)


def test_defaults():
    assert scheme_defaults("proposed").path_mode == PER_REPORT_DYNAMIC
    assert scheme_defaults("ccef").path_mode == PER_SESSION_FIXED
    assert scheme_defaults("def").path_mode == PER_REPORT_DYNAMIC
    assert scheme_defaults("def").candidate_width_k > 1
    with pytest.raises(SchemeError):
        scheme_defaults("sef")


def test_policy_overrides():
    p = policy_for(NetworkConfig(scheme="def", q=0.42, def_k=5, fitness_m=0.3))
    assert (p.per_hop_detection_q, p.candidate_width_k, p.fitness_m) == (0.42, 5, 0.3)
    with pytest.raises(SchemeError):
        SchemePolicy("ccef", 1.2, PER_SESSION_FIXED)
    with pytest.raises(SchemeError):
        SchemePolicy("ccef", 0.5, PER_SESSION_FIXED, fitness_n=1.0)


# current node 100 m up from the BS; two equidistant candidates closer in
PAIR = [(250.0, 120.0), (240.0, 80.0), (260.0, 80.0)]


@pytest.mark.parametrize("af", [1 / 3, 1.0])
def test_proposed_prefers_richer_candidate(af):
    topo = layout(PAIR)
    topo.residual[1] = 0.2
    topo.residual[2] = 0.9
    cache = FitnessCache(topo, FUZZY)
    assert cache.fv(2, af) > cache.fv(1, af)
    assert next_hop_proposed(topo, FUZZY, 0, af) == 2


@pytest.mark.parametrize("af", [0.0, 1 / 3, 2 / 3, 1.0])
def test_fv_never_drops_with_energy(af):
    topo = layout(PAIR)
    for nd_node in (1, 2):
        lo = FUZZY.infer(0.2, topo.dist_to_bs[nd_node] / topo.config.diagonal, af)
        hi = FUZZY.infer(0.9, topo.dist_to_bs[nd_node] / topo.config.diagonal, af)
        assert hi >= lo


def test_equal_fitness_ties_to_lowest_id():
    topo = layout(PAIR)
    assert next_hop_proposed(topo, FUZZY, 0, 0.0) == 1
    assert next_hop_crisp(topo, 0, 0.0) == 1
    assert next_hop_greedy(topo, 0) == 1


def test_single_candidate_and_voids():
    topo = layout([(250.0, 120.0), (250.0, 80.0), (250.0, 300.0)])
    assert next_hop_proposed(topo, FUZZY, 0, 0.2) == 1
    assert next_hop_proposed(topo, FUZZY, 0, 0.2, visited={1}) is None
    topo.mark_dead(1)
    assert next_hop_greedy(topo, 0) is None
    assert next_hop_def(topo, 0, stream(0, "scheme"), 3) is None


def test_fallback_moves_away_when_no_progress():
    topo = layout([(250.0, 100.0), (250.0, 130.0), (250.0, 20.0)])
    topo.mark_dead(2)
    assert next_hop_greedy(topo, 0) == 1


def test_def_picks_among_k_best():
    pts = [(250.0, 140.0)] + [(230.0 + 5 * i, 100.0 - i) for i in range(6)]
    topo = layout(pts)
    rng = stream(4, "scheme")
    picks = {next_hop_def(topo, 0, rng, 3) for _ in range(300)}
    ranked = sorted(range(1, 7), key=lambda v: (topo.dist_to_bs[v], v))
    assert picks == set(ranked[:3])


def test_head_in_range_is_one_hop():
    topo = layout([(250.0, 30.0), (250.0, 10.0)])
    for kind in ("proposed", "ccef", "def"):
        route = build_route(topo, scheme_defaults(kind), 0, 0.0, stream(0, "scheme"), FUZZY)
        assert route.nodes == [0] and route.terminal == BS_REACHED and route.hops == 1


def test_stranded_route():
    topo = layout([(250.0, 300.0), (250.0, 260.0)])
    route = build_route(topo, scheme_defaults("ccef"), 0, 0.0)
    assert route.terminal == STRANDED
    assert route.nodes == [0, 1]


@given(seed=st.integers(0, 1000), af=st.floats(0, 1), scale=st.floats(1e-3, 1e3))
@settings(max_examples=30, deadline=None)
def test_crisp_argmax_scale_invariant(seed, af, scale):
    topo = deploy(NetworkConfig(node_count=300, rng_seed=seed))
    rng = np.random.default_rng(seed)
    topo.residual[:] = rng.uniform(0.05, 1.0, len(topo))
    cfg = topo.config
    for cur in range(0, 300, 37):
        pick = next_hop_crisp(topo, cur, af)
        nbrs = topo.neighbors(cur)
        closer = [v for v in nbrs if topo.dist_to_bs[v] < topo.dist_to_bs[cur]] or nbrs
        if not closer:
            assert pick is None
            continue
        scaled = max(closer, key=lambda v: (scale * crisp_fitness(topo.nodes[v], af, cfg), -v))
        assert pick == scaled


def routes(scheme, seeds):
    for seed in seeds:
        topo = deploy(NetworkConfig(scheme=scheme, rng_seed=seed))
        router = Router(topo, policy_for(topo.config), FUZZY, stream(seed, "scheme"))
        for c in topo.clusters:
            yield topo, c.head, router.build_route(c.head, 0.5)


@pytest.mark.parametrize("scheme", ["ccef", "def"])
def test_hop_count_band(scheme):
    for topo, head, route in routes(scheme, range(10)):
        assert route.terminal == BS_REACHED
        ratio = topo.dist_to_bs[head] / 50.0
        assert ratio <= route.hops <= max(4 * ratio, 1)


@pytest.mark.xfail(strict=True, reason="fuzzy routes detour toward high-FV far nodes; "
                                       "see decisions ledger")
def test_hop_count_band_proposed():
    for topo, head, route in routes("proposed", range(3)):
        ratio = topo.dist_to_bs[head] / 50.0
        assert route.terminal == BS_REACHED and route.hops <= max(4 * ratio, 1)


@pytest.mark.parametrize("scheme", ["proposed", "ccef", "def"])
def test_routes_are_loop_free_and_radio_feasible(scheme):
    for topo, head, route in routes(scheme, range(2)):
        assert len(set(route.nodes)) == len(route.nodes)
        for u, v in zip(route.nodes, route.nodes[1:]):
            assert topo.distance(u, v) <= 50.0
        assert route.nodes[0] == head


@pytest.mark.parametrize("scheme", ["proposed", "ccef", "def"])
def test_kernel_routes_match_reference(scheme):
    cfg = NetworkConfig(scheme=scheme, node_count=400, rng_seed=8)
    fast = Simulation(cfg, backend="numba")
    slow = Simulation(cfg, backend="python")
    for af in (0.0, 0.37, 0.8):
        for c in fast.topology.clusters:
            a, ra = fast._build_route(c.head, af)
            b, rb = slow._build_route(c.head, af)
            assert ra == rb and a.tolist() == b.tolist()


def run_reports(scheme, reports):
    sim = Simulation(NetworkConfig(scheme=scheme, rng_seed=1), trace=True)
    while len(sim.log) < reports and not sim.finished(0):
        sim.run_session()
    return sim


def test_fuzzy_selection_spreads_load():
    proposed = run_reports("proposed", 1000)
    ccef = run_reports("ccef", 1000)
    assert proposed.used.sum() > ccef.used.sum()


def test_ccef_route_is_frozen_between_deaths():
    sim = Simulation(NetworkConfig(scheme="ccef", rng_seed=2), keep_reports=True)
    for _ in range(5):
        sim.run_session()
    assert sim.ledger.depletion_order == []
    by_cluster = {}
    for r in sim.reports:
        if r.fate in ("delivered", "dropped_at_bs"):
            by_cluster.setdefault(r.source_cluster, set()).add(tuple(r.hop_trace))
    assert by_cluster and all(len(paths) == 1 for paths in by_cluster.values())
