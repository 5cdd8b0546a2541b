#!/usr/bin/env python3
"""Generate chemical-plant scenarios at the three difficulty presets.

Presets mirror the evaluation setup: sparse (features spread uniformly),
even (denser uniform coverage), clustered (features grouped into hotspots).
Counts default far below the headline presets so the exact planners stay at
desk scale; pass --features to push them up for stress experiments.
"""

import argparse
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import yaml  # noqa: E402

FEATURE_TYPES = [
    "trapped_person", "poisoned_person", "alkane_gas_flame",
    "high_temp_liquid_flame", "high_voltage_electrical_flame",
    "hydrogen_sulfide_leakage", "damaged_tank",
]
ABBREV = {
    "trapped_person": "tp", "poisoned_person": "poi",
    "alkane_gas_flame": "af", "high_temp_liquid_flame": "htlf",
    "high_voltage_electrical_flame": "hvf",
    "hydrogen_sulfide_leakage": "h2s", "damaged_tank": "tank",
}
RESOURCE_FOR = {
    "alkane_gas_flame": ["valve", "water"],
    "high_temp_liquid_flame": ["asbestos_felt", "water"],
    "high_voltage_electrical_flame": ["switch", "foam", "metal_net"],
    "poisoned_person": ["oxygen"],
    "hydrogen_sulfide_leakage": ["activated_carbon"],
    "damaged_tank": ["water"],
}

PRESETS = {
    "sparse": {"clusters": 0, "spread": 1.0},
    "even": {"clusters": 0, "spread": 0.6},
    "clustered": {"clusters": 4, "spread": 0.12},
}


def positions(rng, n, arena, preset):
    w, h = arena
    cfg = PRESETS[preset]
    if cfg["clusters"]:
        centers = [(rng.uniform(0.15 * w, 0.85 * w),
                    rng.uniform(0.15 * h, 0.85 * h))
                   for _ in range(cfg["clusters"])]
        out = []
        for _ in range(n):
            cx, cy = rng.choice(centers)
            out.append((min(w, max(0, rng.gauss(cx, cfg["spread"] * w / 4))),
                        min(h, max(0, rng.gauss(cy, cfg["spread"] * h / 4)))))
        return out
    margin = (1 - cfg["spread"]) / 2
    return [(rng.uniform(margin * w, (1 - margin) * w),
             rng.uniform(margin * h, (1 - margin) * h)) for _ in range(n)]


def build(preset, n_features, n_groups, seed, arena=(400.0, 300.0)):
    rng = random.Random(seed)
    pts = positions(rng, n_features, arena, preset)
    features = []
    resources = []
    type_count = {}
    needed_resources = set()
    for i, pos in enumerate(pts):
        ftype = FEATURE_TYPES[i % len(FEATURE_TYPES)] if i < len(FEATURE_TYPES) \
            else rng.choice(FEATURE_TYPES)
        type_count[ftype] = type_count.get(ftype, 0) + 1
        fid = f"{ABBREV[ftype]}_{type_count[ftype]}"
        features.append({"id": fid, "type": ftype,
                         "pos": [round(pos[0], 1), round(pos[1], 1)],
                         "discovered": True})
        needed_resources.update(RESOURCE_FOR.get(ftype, []))
    for i, rtype in enumerate(sorted(needed_resources)):
        for k in range(max(1, n_features // 8)):
            resources.append({
                "id": f"{rtype}_{k + 1}", "type": rtype,
                "pos": [round(rng.uniform(0, arena[0]), 1),
                        round(rng.uniform(0, arena[1]), 1)],
                "discovered": True})
    groups = []
    robots = []
    for g in range(n_groups):
        home = [round(rng.uniform(20, arena[0] - 20), 1),
                round(rng.uniform(20, arena[1] - 20), 1)]
        gid = f"g{g + 1}"
        groups.append({"id": gid, "home": home})
        for j, platform in enumerate(("UAV", "TUGV", "TUGV", "Dog")):
            robots.append({"id": f"{gid}_{platform.lower()}{j}",
                           "platform": platform, "group": gid,
                           "pos": [home[0] + j, home[1]]})
    return {
        "name": f"plant_{preset}_{n_features}",
        "arena": {"width": arena[0], "height": arena[1]},
        "features": features,
        "resources": resources,
        "groups": groups,
        "robots": robots,
        "missions": {
            "order_rules": [{
                "before_types": ["trapped_person", "poisoned_person"],
                "after_types": [t for t in FEATURE_TYPES
                                if t not in ("trapped_person",
                                             "poisoned_person")],
            }],
            "extra": [],
        },
        "plan_library": str((Path(__file__).resolve().parent.parent
                             / "scenarios" / "plan_library.json")),
        "priors": {"water": 1.0, "metal_net": 0.7},
        "human": {"verification": False},
        "backend": {"kind": "rules"},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--preset", choices=sorted(PRESETS), default="sparse")
    ap.add_argument("--features", type=int, default=7)
    ap.add_argument("--groups", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()
    doc = build(args.preset, args.features, args.groups, args.seed)
    text = yaml.safe_dump(doc, sort_keys=False)
    if args.out == "-":
        print(text)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
