"""Independent reference computations used by several test modules."""
import json
from importlib import resources

import numpy as np


def shipped_rules():
    """Rule list and label trapezoids read straight from the bundled JSON."""
    text = resources.files("enroute").joinpath("data/fuzzy_system.json").read_text()
    data = json.loads(text)
    variables = {
        key: {lab["name"]: tuple(lab["trapezoid"]) for lab in var["labels"]}
        for key, var in data["variables"].items()
    }
    rules = [(r["te"], r["nd"], r["af"], r["fv"]) for r in data["rules"]]
    return variables, rules


def trapezoid(knots, x):
    a, b, c, d = knots
    if x < a or x > d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    if x <= c:
        return 1.0
    return (d - x) / (d - c)


def brute_force_levels(variables, rules, te, nd, af):
    """Clip level per FV label, one rule at a time."""
    levels = {name: 0.0 for name in variables["FV"]}
    for t, n, a, out in rules:
        w = min(trapezoid(variables["TE"][t], te), trapezoid(variables["ND"][n], nd),
                trapezoid(variables["AF"][a], af))
        levels[out] = max(levels[out], w)
    return levels


def quadrature_centroid(fv_knots, levels, points=100_000):
    """Midpoint-rule centroid of the max-aggregated clipped output."""
    xs = (np.arange(points) + 0.5) / points
    mu = np.zeros_like(xs)
    for name, (a, b, c, d) in fv_knots.items():
        shape = np.ones_like(xs)
        if b > a:
            shape = np.minimum(shape, (xs - a) / (b - a))
        if d > c:
            shape = np.minimum(shape, (d - xs) / (d - c))
        shape = np.clip(shape, 0.0, 1.0)
        shape[(xs < a) | (xs > d)] = 0.0
        mu = np.maximum(mu, np.minimum(shape, levels[name]))
    return float((mu * xs).sum() / mu.sum())
