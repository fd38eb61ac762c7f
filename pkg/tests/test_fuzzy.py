import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enroute import _kernels as K
from enroute.fuzzy import (
    ANCHOR_RULES, AF_LABELS, FV_LABELS, ND_LABELS, TE_LABELS, FuzzyError,
    MembershipFunction, build_default_system, centroid, load_system, rule_number,
    system_from_dict, system_to_dict, validate_rule_base,
)
from oracles import brute_force_levels, quadrature_centroid, shipped_rules


@pytest.fixture(scope="module")
def system():
    return load_system()


def fv_mfs(system):
    return [mf for _, mf in system.fv.labels]


def test_anchor_rules_reproduced(system):
    for no, te, nd, af, fv in ANCHOR_RULES:
        assert system.rule_lookup(te, nd, af) == fv
        cell = (TE_LABELS.index(te), ND_LABELS.index(nd), AF_LABELS.index(af))
        assert rule_number(*cell) == no


def test_rule_base_is_exhaustive(system):
    cells = list(system.rules.cells())
    assert len(cells) == 24
    assert len({c for c, _ in cells}) == 24
    assert sum(1 for (t, n, a), _ in cells if system.rules.sources[t][n][a] == "anchor") == 7


def test_monotone_closure(system):
    table = np.array(system.rules.table)
    assert (np.diff(table, axis=0) >= 0).all()
    assert (np.diff(table, axis=1) >= 0).all()
    assert (np.diff(table, axis=2) >= 0).all()


def test_shipped_file_matches_regenerated_completion(system):
    fresh = build_default_system()
    assert fresh.rules.table == system.rules.table


def test_partitions_cross_at_half():
    s = load_system()
    for var in (s.te, s.nd, s.af, s.fv):
        degrees = var.fuzzify(0.5)
        # uniform partitions sum to one everywhere
        assert sum(mu for _, mu in var.fuzzify(0.37)) == pytest.approx(1.0)
        assert all(0.0 <= mu <= 1.0 for _, mu in degrees)


def test_single_rule_centroids(system):
    # rule 13 (E, S, VL) -> L, rule 24 (E, H, VH) -> H; full firing
    assert system.infer(1.0, 0.0, 0.0) == pytest.approx(1 / 6, abs=1e-12)
    assert system.infer(1.0, 1.0, 1.0) == pytest.approx(5 / 6, abs=1e-12)
    # rule 19 (E, M, H) -> N
    assert system.infer(1.0, 0.5, 2 / 3) == pytest.approx(0.5, abs=1e-12)


def test_two_rules_half_fired(system):
    # AF = 1/6 splits VL and L; rules 13 -> L and 14 -> N both fire at 0.5.
    # Aggregate is flat at 0.5 on [0, 0.75] then falls to 0 at 1: centroid 37/84.
    assert system.infer(1.0, 0.0, 1 / 6) == pytest.approx(37 / 84, abs=1e-12)


def test_clipped_triangle_centroid(system):
    # L clipped at 0.5: area 3/16, moment 7/192
    assert centroid(fv_mfs(system), [0.5, 0.0, 0.0]) == pytest.approx(7 / 36, abs=1e-12)


@pytest.mark.parametrize("lv", [1e-3, 1.2e-7, 1e-9, 1e-12])
def test_faint_low_set_centroid(system, lv):
    # L = (0, 0, 0, 0.5) clipped at lv: a box up to x1, then a triangle to 0.5
    x1 = 0.5 * (1 - lv)
    tri = lv * (0.5 - x1) / 2
    want = (lv * x1 ** 2 / 2 + tri * (x1 + (0.5 - x1) / 3)) / (lv * x1 + tri)
    got = centroid(fv_mfs(system), [lv, 0.0, 0.0])
    assert got == pytest.approx(want, rel=1e-13)
    assert centroid(fv_mfs(system), [0.0, lv, 0.0]) == pytest.approx(0.5, abs=1e-15)


def test_empty_aggregate_is_an_error(system):
    with pytest.raises(FuzzyError, match="no rule fired"):
        centroid(fv_mfs(system), [0.0, 0.0, 0.0])


def test_spike_outputs_use_peak_mean():
    spikes = [MembershipFunction(0.2, 0.2, 0.2, 0.2), MembershipFunction(0.8, 0.8, 0.8, 0.8)]
    assert centroid(spikes, [1.0, 0.5]) == pytest.approx((0.2 + 0.4) / 1.5)


def test_trapezoid_rejects_unordered_knots():
    with pytest.raises(FuzzyError):
        MembershipFunction(0.5, 0.2, 0.6, 1.0)


def test_box_sets_integrate_as_steps():
    box = MembershipFunction(0.2, 0.2, 0.6, 0.6)
    assert centroid([box], [1.0]) == pytest.approx(0.4, abs=1e-12)
    # box at 0.5 over [0.2, 0.6] plus a full triangle (0.6, 0.8, 0.8, 1.0):
    # areas 0.2 and 0.2, centres 0.4 and 0.8
    tri = MembershipFunction(0.6, 0.8, 0.8, 1.0)
    assert centroid([box, tri], [0.5, 1.0]) == pytest.approx(0.6, abs=1e-12)


def test_box_sets_kernel_agrees():
    mfs = [MembershipFunction(0.0, 0.0, 0.3, 0.3), MembershipFunction(0.25, 0.5, 0.5, 0.75),
           MembershipFunction(0.7, 0.7, 1.0, 1.0)]
    knots = np.zeros((4, 3, 4))
    for j, mf in enumerate(mfs):
        knots[3, j] = mf.knots()
    counts = np.array([1, 1, 1, 3])
    rng = np.random.default_rng(3)
    for levels in rng.random((200, 3)):
        want = quadrature_centroid({j: mf.knots() for j, mf in enumerate(mfs)},
                                   dict(enumerate(levels)), 400_000)
        got = centroid(mfs, levels)
        assert got == pytest.approx(want, rel=1e-6)
        assert K.centroid(knots, counts, levels) == got


@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3).filter(lambda v: max(v) > 1e-9))
def test_centroid_mirror_symmetry(levels):
    mfs = fv_mfs(load_system())
    left = centroid(mfs, levels)
    right = centroid(mfs, levels[::-1])
    assert left + right == pytest.approx(1.0, abs=1e-12)


@pytest.fixture(scope="module")
def compiled(system):
    knots, counts, table = system.arrays
    K.infer(knots, counts, table, 0.5, 0.5, 0.5, np.zeros(3))  # compile outside the deadline
    return system


@given(te=st.floats(0, 1), nd=st.floats(0, 1), af=st.floats(0, 1))
@settings(max_examples=300, deadline=None)
def test_kernel_matches_reference(compiled, te, nd, af):
    knots, counts, table = compiled.arrays
    levels = np.zeros(3)
    assert K.infer(knots, counts, table, te, nd, af, levels) == compiled.infer(te, nd, af)


def test_quadrature_oracle_small_sample(system):
    variables, rules = shipped_rules()
    rng = np.random.default_rng(7)
    for te, nd, af in rng.random((50, 3)):
        levels = brute_force_levels(variables, rules, te, nd, af)
        assert system.firing_levels(te, nd, af) == [levels[k] for k in FV_LABELS]
        want = quadrature_centroid(variables["FV"], levels)
        assert system.infer(te, nd, af) == pytest.approx(want, rel=1e-6)


def _write(tmp_path, data):
    p = tmp_path / "fs.json"
    p.write_text(json.dumps(data))
    return p


def test_file_roundtrip(tmp_path, system):
    again = load_system(_write(tmp_path, system_to_dict(system)))
    assert again.rules.table == system.rules.table
    assert again.infer(0.3, 0.6, 0.2) == system.infer(0.3, 0.6, 0.2)


def test_file_rejects_missing_rule(tmp_path, system):
    data = system_to_dict(system)
    data["rules"].pop()
    with pytest.raises(FuzzyError, match="24 rules"):
        load_system(_write(tmp_path, data))


def test_file_rejects_duplicate_rule(tmp_path, system):
    data = system_to_dict(system)
    data["rules"][1] = dict(data["rules"][0])
    with pytest.raises(FuzzyError):
        load_system(_write(tmp_path, data))


def test_file_rejects_changed_anchor(tmp_path, system):
    data = system_to_dict(system)
    for rule in data["rules"]:
        if rule["no"] == 23:
            rule["fv"] = "N"
    with pytest.raises(FuzzyError):
        load_system(_write(tmp_path, data))


def test_file_rejects_non_monotone_completion(tmp_path, system):
    data = system_to_dict(system)
    for rule in data["rules"]:
        if rule["no"] == 24:  # above anchor 23 (H) in AF
            rule["fv"] = "N"
    with pytest.raises(FuzzyError, match="monotone"):
        load_system(_write(tmp_path, data))


def test_file_rejects_other_operators(tmp_path, system):
    data = system_to_dict(system)
    data["inference"]["and"] = "product"
    with pytest.raises(FuzzyError):
        load_system(_write(tmp_path, data))


def test_file_rejects_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(FuzzyError):
        load_system(p)


def test_validate_catches_wrong_shape(system):
    from enroute.fuzzy import RuleBase

    with pytest.raises(FuzzyError):
        validate_rule_base(RuleBase(system.rules.table[:1]))


def test_labels_must_match():
    s = load_system()
    data = system_to_dict(s)
    data["variables"]["FV"]["labels"] = data["variables"]["FV"]["labels"][:2]
    with pytest.raises(FuzzyError):
        system_from_dict(data)
