"""Shared vocabulary: robot platforms, feature requirements, resource types.

Skill names use a single verb vocabulary at the subtask level; the platform
sheet's noun forms (inspection, laying, ...) are normalized to the same verbs
so capability checks have one spelling everywhere.
"""

from __future__ import annotations

SKILLS = frozenset({
    "global_exploration", "local_exploration", "inspect", "monitor", "detect",
    "throw", "liquid_spray", "gas_spray", "solid_spray", "ignite", "transport",
    "build", "lay", "clean_up", "operate", "rescue", "fix",
})

PLATFORM_SKILLS: dict[str, frozenset[str]] = {
    "UHeli": frozenset({"global_exploration"}),
    "UAV": frozenset({"local_exploration", "inspect", "monitor", "detect",
                      "throw", "liquid_spray", "gas_spray", "ignite"}),
    "UGV": frozenset({"local_exploration", "inspect", "monitor", "transport",
                      "ignite", "solid_spray", "liquid_spray", "gas_spray"}),
    "TUGV": frozenset({"local_exploration", "inspect", "monitor", "transport",
                       "ignite", "build", "solid_spray", "lay", "clean_up",
                       "liquid_spray", "gas_spray"}),
    "Dog": frozenset({"local_exploration", "inspect", "monitor", "operate",
                      "build", "rescue", "clean_up", "ignite", "fix"}),
}

PLATFORM_VELOCITY = {p: 2.0 for p in PLATFORM_SKILLS}

# feature type -> required (skill, robot count) rows
FEATURE_REQUIREMENTS: dict[str, tuple[tuple[str, int], ...]] = {
    "alkane_gas_flame": (("inspect", 2), ("operate", 1), ("liquid_spray", 1),
                         ("monitor", 2)),
    "high_temp_liquid_flame": (("inspect", 2), ("lay", 2), ("liquid_spray", 1),
                               ("monitor", 2)),
    "high_voltage_electrical_flame": (("inspect", 2), ("liquid_spray", 1),
                                      ("monitor", 2), ("operate", 1),
                                      ("lay", 1)),
    "trapped_person": (("inspect", 2), ("clean_up", 2), ("rescue", 1),
                       ("monitor", 2)),
    "poisoned_person": (("inspect", 2), ("rescue", 1), ("gas_spray", 1),
                        ("monitor", 2)),
    "hydrogen_sulfide_leakage": (("inspect", 2), ("ignite", 1), ("monitor", 2),
                                 ("solid_spray", 1)),
    "damaged_tank": (("liquid_spray", 1), ("monitor", 2), ("fix", 1)),
}

RESOURCE_TYPES = frozenset({
    "valve", "switch", "water", "foam", "activated_carbon", "asbestos_felt",
    "oxygen", "metal_net", "antidote",
})

RESCUE_FEATURES = frozenset({"trapped_person", "poisoned_person"})

DEFAULT_SERVICE_TIMES: dict[str, float] = {
    "global_exploration": 15.0, "local_exploration": 10.0, "inspect": 8.0,
    "monitor": 6.0, "detect": 4.0, "throw": 4.0, "liquid_spray": 10.0,
    "gas_spray": 8.0, "solid_spray": 8.0, "ignite": 5.0, "transport": 8.0,
    "build": 12.0, "lay": 10.0, "clean_up": 10.0, "operate": 6.0,
    "rescue": 12.0, "fix": 12.0,
}


def required_robots(feature_type: str, skill: str) -> int:
    for s, n in FEATURE_REQUIREMENTS.get(feature_type, ()):
        if s == skill:
            return n
    return 1

