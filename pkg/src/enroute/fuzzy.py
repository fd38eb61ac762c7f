"""Mamdani fuzzy inference for forwarding-node fitness.

Three inputs (residual energy TE, distance to the base station ND, attack
frequency AF) map to one output, the fitness value FV. Inference uses min for
rule firing, max for aggregation and an exact centroid over the piecewise-linear
aggregate.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

TE_LABELS = ("VL", "E")
ND_LABELS = ("S", "M", "H")
AF_LABELS = ("VL", "L", "H", "VH")
FV_LABELS = ("L", "N", "H")

# (rule number, TE, ND, AF, FV) as published.
ANCHOR_RULES = (
    (1, "VL", "S", "VL", "L"),
    (3, "VL", "S", "H", "N"),
    (12, "VL", "H", "VH", "N"),
    (15, "E", "S", "H", "N"),
    (17, "E", "M", "VL", "L"),
    (19, "E", "M", "H", "N"),
    (23, "E", "H", "H", "H"),
)

RULE_FILE_VERSION = 1


class FuzzyError(ValueError):
    """Invalid fuzzy system definition or out-of-domain input."""


@dataclass(frozen=True)
class MembershipFunction:
    """Trapezoid with abscissae a <= b <= c <= d; a triangle when b == c."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not (self.a <= self.b <= self.c <= self.d):
            raise FuzzyError(f"trapezoid abscissae out of order: {self}")

    @property
    def peak(self) -> float:
        return 0.5 * (self.b + self.c)

    def knots(self):
        return (self.a, self.b, self.c, self.d)


def membership_degree(mf: MembershipFunction, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise FuzzyError(f"input {x!r} outside [0, 1]")
    return _degree(mf.a, mf.b, mf.c, mf.d, x)


def _degree(a, b, c, d, x):
    if x < a or x > d:
        return 0.0
    if b <= x <= c:
        return 1.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    labels: tuple  # ((label, MembershipFunction), ...)

    def __post_init__(self):
        peaks = [mf.peak for _, mf in self.labels]
        if any(p1 >= p2 for p1, p2 in zip(peaks, peaks[1:])):
            raise FuzzyError(f"{self.name}: label peaks not strictly increasing")
        mfs = [mf for _, mf in self.labels]
        if mfs[0].b > 0.0 or mfs[-1].c < 1.0:
            raise FuzzyError(f"{self.name}: domain ends not covered")
        # With ordered peaks, overlapping neighbour supports give full coverage.
        for left, right in zip(mfs, mfs[1:]):
            if left.d <= right.a:
                raise FuzzyError(f"{self.name}: gap between {left} and {right}")

    @property
    def names(self):
        return tuple(name for name, _ in self.labels)

    def index(self, label: str) -> int:
        try:
            return self.names.index(label)
        except ValueError:
            raise FuzzyError(f"{self.name} has no label {label!r}") from None

    def fuzzify(self, x: float):
        """Return [(label index, degree)] for labels with non-zero degree."""
        if not 0.0 <= x <= 1.0:
            raise FuzzyError(f"{self.name} input {x!r} outside [0, 1]")
        out = []
        for i, (_, mf) in enumerate(self.labels):
            mu = _degree(mf.a, mf.b, mf.c, mf.d, x)
            if mu > 0.0:
                out.append((i, mu))
        return out


def uniform_partition(name: str, labels) -> LinguisticVariable:
    """Evenly spaced triangles on [0, 1] with shoulders at both ends.

    Peaks sit at i/(k-1); neighbouring labels cross at degree 0.5.
    """
    k = len(labels)
    if k < 2:
        raise FuzzyError("need at least two labels")
    step = 1.0 / (k - 1)
    mfs = []
    for i, label in enumerate(labels):
        peak = i * step
        left = max(0.0, peak - step) if i > 0 else 0.0
        right = min(1.0, peak + step) if i < k - 1 else 1.0
        mfs.append((label, MembershipFunction(left, peak, peak, right)))
    return LinguisticVariable(name, tuple(mfs))


@dataclass(frozen=True)
class RuleBase:
    """Exhaustive TE x ND x AF -> FV table, stored as label indices."""

    table: tuple  # table[te][nd][af] -> fv index
    sources: tuple = ()  # parallel to table, "anchor" or "completed"

    def lookup(self, te: int, nd: int, af: int) -> int:
        return self.table[te][nd][af]

    def cells(self):
        for t, n, a in itertools.product(
            range(len(TE_LABELS)), range(len(ND_LABELS)), range(len(AF_LABELS))
        ):
            yield (t, n, a), self.table[t][n][a]


def rule_number(te: int, nd: int, af: int) -> int:
    """1-based position in TE-major, AF-minor enumeration order."""
    return te * len(ND_LABELS) * len(AF_LABELS) + nd * len(AF_LABELS) + af + 1


def _anchor_indices():
    return {
        (TE_LABELS.index(t), ND_LABELS.index(n), AF_LABELS.index(a)): FV_LABELS.index(v)
        for _, t, n, a, v in ANCHOR_RULES
    }


def _dominates(hi, lo):
    return all(h >= l for h, l in zip(hi, lo))


def monotone_bounds(anchors: dict) -> dict:
    """Tightest [lower, upper] output index per cell implied by monotonicity."""
    top = len(FV_LABELS) - 1
    bounds = {}
    for cell in itertools.product(
        range(len(TE_LABELS)), range(len(ND_LABELS)), range(len(AF_LABELS))
    ):
        lower = max((v for c, v in anchors.items() if _dominates(cell, c)), default=0)
        upper = min((v for c, v in anchors.items() if _dominates(c, cell)), default=top)
        bounds[cell] = (lower, upper)
    return bounds


def _features(cell):
    t, n, a = cell
    return (
        t / (len(TE_LABELS) - 1),
        n / (len(ND_LABELS) - 1),
        a / (len(AF_LABELS) - 1),
    )


def fit_index_score(anchors: dict):
    """Max-margin linear score over normalised label indices.

    Solves for non-negative weights (summing to 1) and thresholds t1 < t2 such
    that every anchor's score lands in its output band with the widest
    possible margin. Returns (weights, t1, t2, margin).
    """
    from scipy.optimize import linprog

    # Variables: w_te, w_nd, w_af, t1, t2, margin.
    rows, rhs = [], []
    for cell, out in anchors.items():
        f = list(_features(cell))
        neg = [-x for x in f]
        if out == 0:
            rows.append(f + [-1.0, 0.0, 1.0])
        if out >= 1:
            rows.append(neg + [1.0, 0.0, 1.0])
        if out == 1:
            rows.append(f + [0.0, -1.0, 1.0])
        if out == 2:
            rows.append(neg + [0.0, 1.0, 1.0])
        rhs.extend([0.0] * (len(rows) - len(rhs)))
    rows.append([0.0, 0.0, 0.0, 1.0, -1.0, 1.0])
    rhs.append(0.0)
    res = linprog(
        c=[0, 0, 0, 0, 0, -1],
        A_ub=rows, b_ub=rhs,
        A_eq=[[1, 1, 1, 0, 0, 0]], b_eq=[1],
        bounds=[(0, None)] * 5 + [(None, None)],
        method="highs",
    )
    if not res.success or res.x[5] <= 0:
        raise FuzzyError("no monotone index score separates the anchor rules")
    w_te, w_nd, w_af, t1, t2, margin = (float(v) for v in res.x)
    return (w_te, w_nd, w_af), t1, t2, margin


def _band(score, t1, t2):
    if score < t1:
        return 0
    if score < t2:
        return 1
    return 2


def complete_rule_base(anchors=ANCHOR_RULES) -> RuleBase:
    """Fill the 24-cell table from the anchor rules.

    Free cells are labelled by a fitted linear index score, then clamped into
    the bounds that monotonicity forces from the anchors (anchor cells have
    lower == upper, so they are reproduced exactly).
    """
    amap = {
        (TE_LABELS.index(t), ND_LABELS.index(n), AF_LABELS.index(a)): FV_LABELS.index(v)
        for _, t, n, a, v in anchors
    }
    bounds = monotone_bounds(amap)
    for cell, (lo, hi) in bounds.items():
        if lo > hi:
            raise FuzzyError(f"anchors are not monotone around cell {cell}")
    weights, t1, t2, _ = fit_index_score(amap)
    table = [[[0] * len(AF_LABELS) for _ in ND_LABELS] for _ in TE_LABELS]
    sources = [[[""] * len(AF_LABELS) for _ in ND_LABELS] for _ in TE_LABELS]
    for (t, n, a), (lo, hi) in bounds.items():
        score = sum(w * f for w, f in zip(weights, _features((t, n, a))))
        table[t][n][a] = min(max(_band(score, t1, t2), lo), hi)
        sources[t][n][a] = "anchor" if (t, n, a) in amap else "completed"
    rb = RuleBase(_freeze(table), _freeze(sources))
    validate_rule_base(rb)
    return rb


def _freeze(nested):
    return tuple(tuple(tuple(row) for row in plane) for plane in nested)


def validate_rule_base(rb: RuleBase) -> None:
    shape = (len(TE_LABELS), len(ND_LABELS), len(AF_LABELS))
    if (
        len(rb.table) != shape[0]
        or any(len(p) != shape[1] for p in rb.table)
        or any(len(r) != shape[2] for p in rb.table for r in p)
    ):
        raise FuzzyError("rule base must cover all 24 input combinations")
    for cell, v in rb.cells():
        if not 0 <= v < len(FV_LABELS):
            raise FuzzyError(f"bad consequent {v} at {cell}")
    for cell, v in _anchor_indices().items():
        if rb.lookup(*cell) != v:
            raise FuzzyError(f"rule {rule_number(*cell)} differs from the anchor table")
    for cell, v in rb.cells():
        for axis, size in enumerate(shape):
            if cell[axis] + 1 < size:
                up = list(cell)
                up[axis] += 1
                if rb.lookup(*up) < v:
                    raise FuzzyError(f"rule base not monotone between {cell} and {tuple(up)}")


@dataclass(frozen=True)
class FuzzySystem:
    te: LinguisticVariable
    nd: LinguisticVariable
    af: LinguisticVariable
    fv: LinguisticVariable
    rules: RuleBase

    def __post_init__(self):
        for var, names in (
            (self.te, TE_LABELS),
            (self.nd, ND_LABELS),
            (self.af, AF_LABELS),
            (self.fv, FV_LABELS),
        ):
            if var.names != names:
                raise FuzzyError(f"{var.name} labels {var.names} != {names}")
        validate_rule_base(self.rules)

    def rule_lookup(self, te: str, nd: str, af: str) -> str:
        i = self.rules.lookup(self.te.index(te), self.nd.index(nd), self.af.index(af))
        return FV_LABELS[i]

    def firing_levels(self, te: float, nd: float, af: float):
        """Clip level per output label (max over rules of min antecedent degree)."""
        levels = [0.0] * len(FV_LABELS)
        table = self.rules.table
        fa = self.af.fuzzify(af)
        fn = self.nd.fuzzify(nd)
        for i, mu_t in self.te.fuzzify(te):
            plane = table[i]
            for j, mu_n in fn:
                row = plane[j]
                w_tn = mu_t if mu_t < mu_n else mu_n
                for k, mu_a in fa:
                    w = w_tn if w_tn < mu_a else mu_a
                    out = row[k]
                    if w > levels[out]:
                        levels[out] = w
        return levels

    def infer(self, te: float, nd: float, af: float) -> float:
        levels = self.firing_levels(te, nd, af)
        return centroid([mf for _, mf in self.fv.labels], levels)

    @functools.cached_property
    def arrays(self):
        """(knots[var, label, 4], label counts[var], table[te, nd, af]) for kernels."""
        variables = (self.te, self.nd, self.af, self.fv)
        width = max(len(v.labels) for v in variables)
        knots = np.zeros((4, width, 4), dtype=np.float64)
        counts = np.zeros(4, dtype=np.int64)
        for i, var in enumerate(variables):
            counts[i] = len(var.labels)
            for j, (_, mf) in enumerate(var.labels):
                knots[i, j] = mf.knots()
        table = np.array(self.rules.table, dtype=np.int64)
        return knots, counts, table


def _clipped_knots(mf: MembershipFunction, level: float):
    a, b, c, d = mf.knots()
    return (a, a + (b - a) * level, d - (d - c) * level, d)


def _one_sided(a, b, c, d, x, right):
    """Limit of the trapezoid at x from the right (or left), so vertical edges
    inside the domain are integrated as the step they are."""
    if right:
        if x < a or x >= d:
            return 0.0
        if x < b:
            return (x - a) / (b - a)
        if x < c:
            return 1.0
    else:
        if x <= a or x > d:
            return 0.0
        if x <= b:
            return (x - a) / (b - a)
        if x <= c:
            return 1.0
    return (d - x) / (d - c)


def _clipped(mf, level, x, right):
    # Between the clip points the value is the level itself; reading it back
    # off a ramp would cancel badly for tiny levels.
    lo = mf.a + (mf.b - mf.a) * level
    hi = mf.d - (mf.d - mf.c) * level
    if (lo <= x < hi) if right else (lo < x <= hi):
        return level
    mu = _one_sided(mf.a, mf.b, mf.c, mf.d, x, right)
    return mu if mu < level else level


def centroid(mfs, levels) -> float:
    """Exact centre of gravity of max_i min(level_i, mf_i(x)).

    Between consecutive knots of the clipped shapes every set is linear, so
    the aggregate there is the upper envelope of a few lines; it is split at
    their pairwise crossings and each linear piece integrated analytically.
    """
    active = [(mf, lv) for mf, lv in zip(mfs, levels) if lv > 0.0]
    if not active:
        raise FuzzyError("no rule fired; aggregate output is empty")
    xs = sorted({x for mf, lv in active for x in _clipped_knots(mf, lv)})
    area = 0.0
    moment = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        v = [_clipped(mf, lv, x0, True) for mf, lv in active]
        w = [_clipped(mf, lv, x1, False) for mf, lv in active]
        h = x1 - x0
        ts = []
        for i in range(len(active)):
            for j in range(i + 1, len(active)):
                g0 = v[i] - v[j]
                g1 = w[i] - w[j]
                if g0 * g1 < 0.0:
                    ts.append(g0 / (g0 - g1))
        ts.sort()
        xa, ya = x0, max(v)
        for u in ts:
            xb = x0 + h * u
            yb = max(vi + (wi - vi) * u for vi, wi in zip(v, w))
            area, moment = _piece(area, moment, xa, ya, xb, yb)
            xa, ya = xb, yb
        area, moment = _piece(area, moment, xa, ya, x1, max(w))
    if area <= 0.0:
        # Every active set is a single spike (zero-width support).
        return sum(mf.peak * lv for mf, lv in active) / sum(lv for _, lv in active)
    return moment / area


def _piece(area, moment, xa, ya, xb, yb):
    hw = xb - xa
    if hw > 0.0:
        area += 0.5 * hw * (ya + yb)
        moment += hw * (xa * (2.0 * ya + yb) + xb * (ya + 2.0 * yb)) / 6.0
    return area, moment


# -- serialisation -----------------------------------------------------------

def _variable_to_dict(var: LinguisticVariable):
    return {
        "labels": [
            {"name": name, "trapezoid": list(mf.knots())} for name, mf in var.labels
        ]
    }


def _variable_from_dict(name, data):
    try:
        labels = tuple(
            (entry["name"], MembershipFunction(*map(float, entry["trapezoid"])))
            for entry in data["labels"]
        )
    except (KeyError, TypeError) as exc:
        raise FuzzyError(f"malformed variable {name}: {exc}") from None
    for _, mf in labels:
        if mf.a < 0.0 or mf.d > 1.0:
            raise FuzzyError(f"{name}: trapezoid {mf} leaves [0, 1]")
    return LinguisticVariable(name, labels)


def system_to_dict(system: FuzzySystem, notes=()) -> dict:
    rules = []
    for (t, n, a), v in system.rules.cells():
        src = system.rules.sources[t][n][a] if system.rules.sources else "completed"
        rules.append({
            "no": rule_number(t, n, a),
            "te": TE_LABELS[t],
            "nd": ND_LABELS[n],
            "af": AF_LABELS[a],
            "fv": FV_LABELS[v],
            "source": src,
        })
    return {
        "format": "enroute-fuzzy-system",
        "version": RULE_FILE_VERSION,
        "notes": list(notes),
        "inference": {"and": "min", "aggregate": "max", "defuzzify": "centroid"},
        "variables": {
            "TE": _variable_to_dict(system.te),
            "ND": _variable_to_dict(system.nd),
            "AF": _variable_to_dict(system.af),
            "FV": _variable_to_dict(system.fv),
        },
        "rules": rules,
    }


def system_from_dict(data: dict) -> FuzzySystem:
    if data.get("format") != "enroute-fuzzy-system":
        raise FuzzyError("not a fuzzy system file")
    if data.get("version") != RULE_FILE_VERSION:
        raise FuzzyError(f"unsupported version {data.get('version')!r}")
    inference = data.get("inference", {})
    if inference != {"and": "min", "aggregate": "max", "defuzzify": "centroid"}:
        raise FuzzyError(f"unsupported inference operators {inference}")
    variables = data.get("variables", {})
    try:
        te, nd, af, fv = (
            _variable_from_dict(key, variables[key]) for key in ("TE", "ND", "AF", "FV")
        )
    except KeyError as exc:
        raise FuzzyError(f"missing variable {exc}") from None
    table = [[[None] * len(AF_LABELS) for _ in ND_LABELS] for _ in TE_LABELS]
    sources = [[[""] * len(AF_LABELS) for _ in ND_LABELS] for _ in TE_LABELS]
    rules = data.get("rules", [])
    if len(rules) != 24:
        raise FuzzyError(f"expected 24 rules, found {len(rules)}")
    for rule in rules:
        try:
            cell = (
                TE_LABELS.index(rule["te"]),
                ND_LABELS.index(rule["nd"]),
                AF_LABELS.index(rule["af"]),
            )
            out = FV_LABELS.index(rule["fv"])
        except (KeyError, ValueError) as exc:
            raise FuzzyError(f"malformed rule {rule}: {exc}") from None
        t, n, a = cell
        if table[t][n][a] is not None:
            raise FuzzyError(f"duplicate rule for {rule['te']}, {rule['nd']}, {rule['af']}")
        if "no" in rule and rule["no"] != rule_number(*cell):
            raise FuzzyError(f"rule number {rule['no']} does not match its antecedent")
        table[t][n][a] = out
        sources[t][n][a] = rule.get("source", "completed")
    return FuzzySystem(te, nd, af, fv, RuleBase(_freeze(table), _freeze(sources)))


def load_system(path=None) -> FuzzySystem:
    """Load and validate a fuzzy system file (the bundled one by default)."""
    if path is None:
        text = resources.files("enroute").joinpath("data/fuzzy_system.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FuzzyError(f"fuzzy system file is not valid JSON: {exc}") from None
    return system_from_dict(data)


def default_partitions():
    return (
        uniform_partition("TE", TE_LABELS),
        uniform_partition("ND", ND_LABELS),
        uniform_partition("AF", AF_LABELS),
        uniform_partition("FV", FV_LABELS),
    )


def build_default_system() -> FuzzySystem:
    te, nd, af, fv = default_partitions()
    return FuzzySystem(te, nd, af, fv, complete_rule_base())
