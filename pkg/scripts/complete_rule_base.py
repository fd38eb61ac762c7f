"""Regenerate src/enroute/data/fuzzy_system.json from the anchor rules.

The shipped file is the source of truth at runtime; rerun this only when the
completion policy changes, and commit the result.
"""
import json
import sys
from pathlib import Path

from enroute.fuzzy import build_default_system, system_to_dict

NOTES = [
    "Labels: TE {VL, E}; ND {S, M, H}; AF {VL, L, H, VH}; FV {L, N, H}.",
    "AF's second label 'L' is not printed in the source rule table; it completes the VL < L < H < VH ladder.",
    "Rule numbers enumerate TE-major, then ND, then AF; the seven 'anchor' rules are the published ones.",
    "Completed cells: max-margin linear index score (weights and thresholds fitted to the anchors), clamped to the bounds monotonicity forces from the anchors.",
    "ND is raw distance to the base station over the field diagonal, so 'H' means far; the anchors make FV rise with ND.",
    "Partitions are uniform: peaks at i/(k-1), shoulders at the domain ends, neighbours cross at 0.5.",
]

if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "enroute" / "data" / "fuzzy_system.json"
    )
    out.write_text(json.dumps(system_to_dict(build_default_system(), NOTES), indent=2) + "\n")
    print(f"wrote {out}")
