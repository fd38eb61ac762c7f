"""Command-line sweep runner: configuration, orchestration and result files.

Config files are flat ``key=value`` text; keys are the long flag names with
dashes turned into underscores (``q_prop=0.8``). Blank lines and ``#``
comments are ignored. Flags override the file, which overrides the defaults.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import gzip
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .config import SCHEMES, ConfigError, NetworkConfig
from .engine import PAPER_FILTERING, PAPER_RATIOS, lifetime_ratios, medians_by_scheme

RUN_COLUMNS = ("scheme", "seed", "nodes", "ftr", "fnd", "lnd", "filtering_efficiency")
COMPARISON_COLUMNS = (
    "nodes", "ftr", "scheme", "runs", "median_fnd", "median_lnd",
    "median_filtering_efficiency", "fnd_ratio_vs_scheme", "lnd_ratio_vs_scheme",
    "reference_fnd_ratio", "reference_lnd_ratio", "reference_filtering",
)
Q_KEYS = {"proposed": "q_prop", "ccef": "q_ccef", "def": "q_def"}


class UsageError(ValueError):
    pass


class FileError(OSError):
    pass


@dataclass
class ExperimentSpec:
    base: NetworkConfig = field(default_factory=NetworkConfig)
    nodes: tuple = (1000,)
    schemes: tuple = ("proposed",)
    seeds: tuple = (0,)
    ftrs: tuple = (0.5,)
    q: dict = field(default_factory=dict)  # scheme -> q override
    out: str = "results"
    charts: bool = True
    jobs: int = 1

    def configs(self):
        """One NetworkConfig per run, in a fixed order."""
        out = []
        for n in self.nodes:
            for ftr in self.ftrs:
                for scheme in self.schemes:
                    for seed in self.seeds:
                        out.append(self.base.replace(node_count=n, ftr=ftr, scheme=scheme,
                                                     rng_seed=seed, q=self.q.get(scheme)))
        return out

    def to_text(self) -> str:
        lines = [
            f"# enroute {__version__} effective experiment spec",
            f"nodes={','.join(map(str, self.nodes))}",
            f"scheme={','.join(self.schemes)}",
            f"seeds={','.join(map(str, self.seeds))}",
            f"ftr={','.join(repr(f) for f in self.ftrs)}",
        ]
        for scheme, key in Q_KEYS.items():
            if scheme in self.q:
                lines.append(f"{key}={self.q[scheme]!r}")
        lines += [
            f"m={self.base.fitness_m!r}",
            f"n={self.base.fitness_n!r}",
            f"rounds_per_session={self.base.rounds_per_session}",
            f"out={self.out}",
            f"jobs={self.jobs}",
            f"charts={'on' if self.charts else 'off'}",
        ]
        return "\n".join(lines) + "\n"


# -- parsing ------------------------------------------------------------------

def _split(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _ints(key, text):
    try:
        return tuple(int(t) for t in _split(text))
    except ValueError:
        raise UsageError(f"{key}: expected integers, got {text!r}") from None


def _floats(key, text):
    try:
        return tuple(float(t) for t in _split(text))
    except ValueError:
        raise UsageError(f"{key}: expected numbers, got {text!r}") from None


def _seeds(text):
    items = _ints("seeds", text)
    if not items:
        raise UsageError("seeds: empty")
    # A single number is a count (seeds 0..N-1); a list names the seeds.
    if "," not in str(text):
        if items[0] < 1:
            raise UsageError(f"seeds: count must be >= 1, got {items[0]}")
        return tuple(range(items[0]))
    return items


def _flag(key, text):
    low = str(text).strip().lower()
    if low in ("1", "on", "true", "yes"):
        return True
    if low in ("0", "off", "false", "no"):
        return False
    raise UsageError(f"{key}: expected on/off, got {text!r}")


def _number(key, text, cast=float):
    try:
        return cast(text)
    except ValueError:
        raise UsageError(f"{key}: expected a number, got {text!r}") from None


KEYS = ("nodes", "scheme", "seeds", "ftr", "q_prop", "q_ccef", "q_def", "m", "n",
        "rounds_per_session", "out", "jobs", "charts")


def read_config_file(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise FileError(f"cannot read config file {path}: {exc.strerror}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_parser():
    p = argparse.ArgumentParser(
        prog="enroute",
        description="Run lifetime/filtering sweeps for fuzzy dynamic en-route filtering.",
        allow_abbrev=False,
    )
    p.add_argument("--nodes", help="comma list of node counts (default 1000)")
    p.add_argument("--scheme", help="comma list from proposed,ccef,def (default proposed)")
    p.add_argument("--seeds", help="seed count N (seeds 0..N-1) or a comma list")
    p.add_argument("--ftr", help="comma list of false traffic ratios (default 0.5)")
    p.add_argument("--q-prop", dest="q_prop", help="per-hop detection q, proposed")
    p.add_argument("--q-ccef", dest="q_ccef", help="per-hop detection q, ccef")
    p.add_argument("--q-def", dest="q_def", help="per-hop detection q, def")
    p.add_argument("--m", help="crisp fitness AF exponent")
    p.add_argument("--n", help="crisp fitness energy/distance exponent")
    p.add_argument("--rounds-per-session", dest="rounds_per_session")
    p.add_argument("--out", help="output directory (default results)")
    p.add_argument("--jobs", help="parallel runs (default 1)")
    p.add_argument("--charts", help="on/off (default on)")
    p.add_argument("--config", help="key=value file; flags override it")
    return p


def parse_args_and_config(argv=None) -> ExperimentSpec:
    """Flags > config file > defaults; raises UsageError/FileError."""
    parser = build_parser()
    args = parser.parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for key in KEYS:
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    return spec_from_values(values)


def spec_from_values(values: dict) -> ExperimentSpec:
    spec = ExperimentSpec()
    base = {}
    if "nodes" in values:
        spec.nodes = _ints("nodes", values["nodes"])
    if "scheme" in values:
        schemes = tuple(_split(values["scheme"]))
        bad = [s for s in schemes if s not in SCHEMES]
        if bad or not schemes:
            raise UsageError(f"scheme: unknown {bad or values['scheme']!r}; choose from {SCHEMES}")
        spec.schemes = schemes
    if "seeds" in values:
        spec.seeds = _seeds(values["seeds"])
    if "ftr" in values:
        spec.ftrs = _floats("ftr", values["ftr"])
    for scheme, key in Q_KEYS.items():
        if key in values:
            q = _number(key, values[key])
            if not 0.0 <= q <= 1.0:
                raise UsageError(f"{key}: must be in [0, 1], got {q}")
            spec.q[scheme] = q
    if "m" in values:
        base["fitness_m"] = _number("m", values["m"])
    if "n" in values:
        base["fitness_n"] = _number("n", values["n"])
    if "rounds_per_session" in values:
        base["rounds_per_session"] = _number("rounds_per_session",
                                             values["rounds_per_session"], int)
    if "out" in values:
        spec.out = str(values["out"])
    if "jobs" in values:
        spec.jobs = _number("jobs", values["jobs"], int)
        if spec.jobs < 1:
            raise UsageError(f"jobs: must be >= 1, got {spec.jobs}")
    if "charts" in values:
        spec.charts = _flag("charts", values["charts"])
    for key, items in (("nodes", spec.nodes), ("ftr", spec.ftrs), ("scheme", spec.schemes)):
        if not items:
            raise UsageError(f"{key}: empty")
    try:
        spec.base = NetworkConfig(**base)
        for cfg in spec.configs():
            cfg.validate()
            if cfg.node_count < cfg.cell_count:
                raise ConfigError(f"nodes: {cfg.node_count} is below the {cfg.cell_count} "
                                  "grid cells")
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    return spec


# -- running ------------------------------------------------------------------

def run_name(cfg: NetworkConfig) -> str:
    return f"{cfg.scheme}_n{cfg.node_count}_ftr{cfg.ftr:g}_s{cfg.rng_seed}"


def _write_gzip_text(path, text):
    # mtime=0 keeps reruns byte-identical. Level 1 compresses a round log about
    # 12x faster than the default 9 at 30% more bytes.
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=1,
                                                mtime=0) as gz:
        gz.write(text.encode())


def execute_run(job):
    """Worker: one run, its round log and summary JSON; returns the summary."""
    from .engine import run_to_exhaustion

    cfg, out = job
    summary, log = run_to_exhaustion(cfg, trace=True)
    name = run_name(cfg)
    buf = io.StringIO()
    log.to_csv(buf)
    _write_gzip_text(os.path.join(out, "rounds", name + ".csv.gz"), buf.getvalue())
    with open(os.path.join(out, "summaries", name + ".json"), "w") as fh:
        json.dump(dataclasses.asdict(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def preflight(out):
    """Create the output tree and prove it is writable before any run."""
    try:
        for sub in ("", "rounds", "summaries"):
            os.makedirs(os.path.join(out, sub), exist_ok=True)
        probe = os.path.join(out, ".write-test")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise FileError(f"output directory {out!r} is not writable: {exc.strerror}") from None


def run_sweep(spec: ExperimentSpec, log=None):
    jobs = [(cfg, spec.out) for cfg in spec.configs()]
    if spec.jobs > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            summaries = list(pool.map(execute_run, jobs))
    else:
        summaries = []
        for job in jobs:
            summaries.append(execute_run(job))
            if log:
                s = summaries[-1]
                log(f"{run_name(job[0])}: fnd={s.fnd_round} lnd={s.lnd_round} "
                    f"filtering={s.filtering_efficiency:.4f}")
    return summaries


# -- emission -----------------------------------------------------------------

def write_runs_csv(path, summaries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for s in summaries:
            w.writerow([s.scheme, s.seed, s.node_count, repr(s.ftr),
                        "" if s.fnd_round is None else s.fnd_round,
                        "" if s.lnd_round is None else s.lnd_round,
                        repr(s.filtering_efficiency)])


def read_runs_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def comparison_rows(summaries):
    """Per (nodes, ftr, scheme) medians with ratios against the baselines."""
    rows = []
    groups = {}
    for s in summaries:
        groups.setdefault((s.node_count, s.ftr), []).append(s)
    for (nodes, ftr), runs in groups.items():
        schemes = list(dict.fromkeys(s.scheme for s in runs))
        med = medians_by_scheme(runs, schemes)
        ratios = lifetime_ratios(med)
        for scheme in schemes:
            m = med[scheme]
            row = {
                "nodes": nodes, "ftr": ftr, "scheme": scheme,
                "runs": sum(1 for s in runs if s.scheme == scheme),
                "median_fnd": m["fnd"], "median_lnd": m["lnd"],
                "median_filtering_efficiency": m["filtering_efficiency"],
                "fnd_ratio_vs_scheme": "", "lnd_ratio_vs_scheme": "",
                "reference_fnd_ratio": "", "reference_lnd_ratio": "",
                "reference_filtering": PAPER_FILTERING.get(scheme, ""),
            }
            if scheme in ("ccef", "def") and f"fnd_vs_{scheme}" in ratios:
                # proposed / this baseline, next to the published gain
                row["fnd_ratio_vs_scheme"] = ratios[f"fnd_vs_{scheme}"]
                row["lnd_ratio_vs_scheme"] = ratios[f"lnd_vs_{scheme}"]
                row["reference_fnd_ratio"] = PAPER_RATIOS[f"fnd_vs_{scheme}"]
                row["reference_lnd_ratio"] = PAPER_RATIOS[f"lnd_vs_{scheme}"]
            rows.append(row)
    return rows


def write_comparison_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, COMPARISON_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})


PALETTE = {"proposed": "#1b7837", "ccef": "#762a83", "def": "#e08214"}


def bar_chart_svg(title, ylabel, groups, series, values, fmt="{:g}") -> str:
    """Grouped bars: ``values[(group, series)]``; missing pairs are skipped."""
    width, height = 640, 360
    left, right, top, bottom = 70, 20, 40, 50
    plot_w = width - left - right
    plot_h = height - top - bottom
    vmax = max([v for v in values.values() if v is not None] + [0.0]) or 1.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
        f'<text x="15" y="{top + plot_h / 2}" transform="rotate(-90 15 {top + plot_h / 2})" '
        f'text-anchor="middle">{ylabel}</text>',
    ]
    for i in range(5):
        v = vmax * i / 4
        y = top + plot_h - plot_h * i / 4
        out.append(f'<text x="{left - 5}" y="{y + 4:.1f}" text-anchor="end">{fmt.format(v)}</text>')
    gw = plot_w / max(len(groups), 1)
    bw = gw * 0.8 / max(len(series), 1)
    for gi, g in enumerate(groups):
        x0 = left + gi * gw + gw * 0.1
        out.append(f'<text x="{left + gi * gw + gw / 2:.1f}" y="{top + plot_h + 18}" '
                   f'text-anchor="middle">{g}</text>')
        for si, s in enumerate(series):
            v = values.get((g, s))
            if v is None:
                continue
            h = plot_h * v / vmax
            x = x0 + si * bw
            out.append(f'<rect x="{x:.1f}" y="{top + plot_h - h:.1f}" width="{bw * 0.9:.1f}" '
                       f'height="{h:.1f}" fill="{PALETTE.get(s, "#555")}"><title>{s}: '
                       f'{fmt.format(v)}</title></rect>')
    for si, s in enumerate(series):
        x = left + 10 + si * 100
        out.append(f'<rect x="{x}" y="{height - 18}" width="10" height="10" fill="{PALETTE.get(s, "#555")}"/>')
        out.append(f'<text x="{x + 14}" y="{height - 9}">{s}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_charts(out, runs_csv):
    """FND, LND and filtering charts, recomputed from runs.csv medians."""
    from statistics import median

    rows = read_runs_csv(runs_csv)
    groups = list(dict.fromkeys(f"{r['nodes']} nodes" for r in rows))
    series = list(dict.fromkeys(r["scheme"] for r in rows))
    charts = {}
    for metric, title, ylabel, fmt in (
        ("fnd", "First node depleted (median round)", "round", "{:.0f}"),
        ("lnd", "Last node depleted (median round)", "round", "{:.0f}"),
        ("filtering_efficiency", "En-route filtering efficiency (median)", "fraction", "{:.3f}"),
    ):
        vals = {}
        for g in groups:
            for s in series:
                xs = [float(r[metric]) for r in rows
                      if f"{r['nodes']} nodes" == g and r["scheme"] == s and r[metric] != ""]
                if xs:
                    vals[(g, s)] = median(xs)
        name = "filtering.svg" if metric == "filtering_efficiency" else f"{metric}.svg"
        with open(os.path.join(out, name), "w") as fh:
            fh.write(bar_chart_svg(title, ylabel, groups, series, vals, fmt))
        charts[metric] = vals
    return charts


def emit_results(summaries, spec: ExperimentSpec):
    """runs.csv, comparison.csv, summary.json and (optionally) SVG charts."""
    out = spec.out
    runs_csv = os.path.join(out, "runs.csv")
    write_runs_csv(runs_csv, summaries)
    rows = comparison_rows(summaries)
    write_comparison_csv(os.path.join(out, "comparison.csv"), rows)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump({"version": __version__, "runs": len(summaries), "comparison": rows},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    if spec.charts:
        write_charts(out, runs_csv)


def main(argv=None) -> int:
    try:
        spec = parse_args_and_config(argv)
        preflight(spec.out)
        with open(os.path.join(spec.out, "spec.txt"), "w") as fh:
            fh.write(spec.to_text())
    except UsageError as exc:
        print(f"enroute: usage error: {exc}", file=sys.stderr)
        return 2
    except FileError as exc:
        print(f"enroute: {exc}", file=sys.stderr)
        return 3
    print(spec.to_text(), end="")
    summaries = run_sweep(spec, log=print)
    emit_results(summaries, spec)
    print(f"wrote {len(summaries)} runs to {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
