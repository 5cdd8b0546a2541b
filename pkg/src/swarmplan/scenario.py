"""Scenario files: the single structured input describing a simulated mission.

YAML with a strict schema: arena, placements, robot roster and grouping,
mission ordering rules plus optional raw LTL, planner and scheduler knobs,
priors, service times, backend selection, and scripted world events.
Validation failures carry machine-readable diagnostics.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .catalog import (DEFAULT_SERVICE_TIMES, FEATURE_REQUIREMENTS,
                      PLATFORM_SKILLS, RESOURCE_TYPES, SKILLS)
from .ltl import LtlSyntaxError, UndeclaredProposition, parse_ltl

_IDENT = re.compile(r"[a-z_][a-z0-9_]*\Z")


class ScenarioError(ValueError):
    """Invalid scenario; ``diagnostics`` lists every problem found."""

    def __init__(self, diagnostics: list[dict]):
        super().__init__("; ".join(d["message"] for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    type: str
    pos: tuple[float, float]
    discovered: bool = True


@dataclass(frozen=True)
class ResourceSpec:
    id: str
    type: str
    pos: tuple[float, float]
    discovered: bool = True


@dataclass(frozen=True)
class RobotSpec:
    id: str
    platform: str
    group: str
    pos: tuple[float, float]


@dataclass(frozen=True)
class GroupSpec:
    id: str
    home: tuple[float, float]


@dataclass(frozen=True)
class OrderRule:
    before_types: tuple[str, ...]
    after_types: tuple[str, ...]


@dataclass(frozen=True)
class ScriptedEvent:
    t: float
    kind: str
    payload: dict


@dataclass(frozen=True)
class PlannerConfig:
    eta1: float = 0.1
    eta2: float = 5.0
    width: int = 8
    budget: int = 10000
    state_budget: int = 4096


@dataclass(frozen=True)
class SchedulerConfig:
    eps: float = 0.3
    batch_size: int = 16
    resolve_after: int = 4


@dataclass(frozen=True)
class HumanConfig:
    verification: bool = True
    approval_timeout: float = 10.0


@dataclass(frozen=True)
class SimConfig:
    tick: float = 0.5
    sense_radius_ground: float = 5.0
    sense_radius_air: float = 15.0
    max_time: float = 3600.0


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "rules"  # rules | http
    url: str = ""
    timeout: float = 30.0
    retries: int = 2


ADAPTATION_KINDS = frozenset({
    "new_task_type", "new_task_instance", "new_resource_type",
    "new_resource_instance", "robot_failure",
})


@dataclass
class Scenario:
    name: str
    arena: tuple[float, float]
    features: list[FeatureSpec]
    resources: list[ResourceSpec]
    robots: list[RobotSpec]
    groups: list[GroupSpec]
    order_rules: list[OrderRule]
    extra_missions: list[str]
    plan_library_path: str
    service_times: dict[str, float]
    priors: dict[str, float]
    planner: PlannerConfig
    scheduler: SchedulerConfig
    human: HumanConfig
    sim: SimConfig
    backend: BackendConfig
    scripted_events: list[ScriptedEvent] = field(default_factory=list)
    source_sha: str = ""

    def feature_ids(self) -> list[str]:
        return [f.id for f in self.features]


def _problem(diagnostics, path, message):
    diagnostics.append({"path": path, "message": message})


def load_scenario(path: str) -> Scenario:
    raw_bytes = Path(path).read_bytes()
    try:
        data = yaml.safe_load(raw_bytes)
    except yaml.YAMLError as exc:
        raise ScenarioError([{"path": path, "message": f"YAML parse: {exc}"}])
    if not isinstance(data, dict):
        raise ScenarioError([{"path": path, "message": "scenario must be a map"}])
    sc = parse_scenario(data, base_dir=str(Path(path).parent))
    sc.source_sha = hashlib.sha256(raw_bytes).hexdigest()[:16]
    return sc


def parse_scenario(data: dict, base_dir: str = ".") -> Scenario:
    diags: list[dict] = []

    def need(key, kind, default=None):
        if key not in data:
            if default is not None:
                return default
            _problem(diags, key, f"missing required key '{key}'")
            return None
        value = data[key]
        if kind is not None and not isinstance(value, kind):
            _problem(diags, key, f"'{key}' must be {kind}")
            return default
        return value

    name = need("name", str, "unnamed")
    arena_raw = need("arena", dict, {})
    arena = (float(arena_raw.get("width", 100.0)),
             float(arena_raw.get("height", 100.0)))

    def pos_of(item, path, key="pos"):
        p = item.get(key)
        if (not isinstance(p, (list, tuple)) or len(p) != 2
                or not all(isinstance(v, (int, float)) for v in p)):
            _problem(diags, path, "pos must be [x, y]")
            return (0.0, 0.0)
        x, y = float(p[0]), float(p[1])
        if not (0.0 <= x <= arena[0] and 0.0 <= y <= arena[1]):
            _problem(diags, path, f"pos {p} outside arena {arena}")
        return (x, y)

    feature_types = set(FEATURE_REQUIREMENTS)
    for ev in data.get("scripted_events", []) or []:
        if isinstance(ev, dict) and ev.get("kind") == "new_task_type":
            tname = (ev.get("payload") or {}).get("type_name")
            if isinstance(tname, str):
                feature_types.add(tname)

    features: list[FeatureSpec] = []
    seen_ids: set[str] = set()
    for i, item in enumerate(need("features", list, []) or []):
        path = f"features[{i}]"
        fid = str(item.get("id", ""))
        if not _IDENT.match(fid):
            _problem(diags, path, f"feature id '{fid}' is not an identifier")
        if fid in seen_ids:
            _problem(diags, path, f"duplicate id '{fid}'")
        seen_ids.add(fid)
        ftype = str(item.get("type", ""))
        if ftype not in feature_types:
            _problem(diags, path, f"unknown feature type '{ftype}'")
        features.append(FeatureSpec(fid, ftype, pos_of(item, path),
                                    bool(item.get("discovered", True))))

    resources: list[ResourceSpec] = []
    resource_types = set(RESOURCE_TYPES)
    for ev in data.get("scripted_events", []) or []:
        if isinstance(ev, dict) and ev.get("kind") == "new_resource_type":
            tname = (ev.get("payload") or {}).get("type_name")
            if isinstance(tname, str):
                resource_types.add(tname)
    for i, item in enumerate(need("resources", list, []) or []):
        path = f"resources[{i}]"
        rid = str(item.get("id", ""))
        if rid in seen_ids:
            _problem(diags, path, f"duplicate id '{rid}'")
        seen_ids.add(rid)
        rtype = str(item.get("type", ""))
        if rtype not in resource_types:
            _problem(diags, path, f"unknown resource type '{rtype}'")
        resources.append(ResourceSpec(rid, rtype, pos_of(item, path),
                                      bool(item.get("discovered", True))))

    groups: list[GroupSpec] = []
    group_ids: set[str] = set()
    for i, item in enumerate(need("groups", list, []) or []):
        gid = str(item.get("id", ""))
        if gid in group_ids:
            _problem(diags, f"groups[{i}]", f"duplicate group '{gid}'")
        group_ids.add(gid)
        groups.append(GroupSpec(gid, pos_of(item, f"groups[{i}]", key="home")))

    robots: list[RobotSpec] = []
    for i, item in enumerate(need("robots", list, []) or []):
        path = f"robots[{i}]"
        rid = str(item.get("id", ""))
        if rid in seen_ids:
            _problem(diags, path, f"duplicate id '{rid}'")
        seen_ids.add(rid)
        platform = str(item.get("platform", ""))
        if platform not in PLATFORM_SKILLS:
            _problem(diags, path, f"unknown platform '{platform}'")
            platform = "UGV"
        gid = str(item.get("group", ""))
        if gid not in group_ids:
            _problem(diags, path, f"robot {rid} references unknown group {gid}")
        robots.append(RobotSpec(rid, platform, gid, pos_of(item, path)))

    missions_raw = need("missions", dict, {}) or {}
    order_rules: list[OrderRule] = []
    for i, item in enumerate(missions_raw.get("order_rules", []) or []):
        before = tuple(item.get("before_types", []))
        after = tuple(item.get("after_types", []))
        for t in before + after:
            if t not in feature_types:
                _problem(diags, f"missions.order_rules[{i}]",
                         f"unknown feature type '{t}'")
        if set(before) & set(after):
            _problem(diags, f"missions.order_rules[{i}]",
                     "before and after overlap")
        order_rules.append(OrderRule(before, after))

    extra_missions = list(missions_raw.get("extra", []) or [])
    task_ids = {f.id for f in features}
    for i, text in enumerate(extra_missions):
        try:
            parse_ltl(text, ap_decl=task_ids or None)
        except (LtlSyntaxError, UndeclaredProposition) as exc:
            _problem(diags, f"missions.extra[{i}]", f"LTL: {exc}")

    lib_rel = need("plan_library", str, "plan_library.json")
    lib_path = str((Path(base_dir) / lib_rel).resolve())
    if not Path(lib_path).exists():
        _problem(diags, "plan_library", f"file not found: {lib_rel}")

    service_times = dict(DEFAULT_SERVICE_TIMES)
    for skill, secs in (need("service_times", dict, {}) or {}).items():
        if skill not in SKILLS:
            _problem(diags, "service_times", f"unknown skill '{skill}'")
        elif not isinstance(secs, (int, float)) or secs <= 0:
            _problem(diags, "service_times", f"'{skill}' must be positive")
        else:
            service_times[skill] = float(secs)

    priors = {}
    for rtype, p in (need("priors", dict, {}) or {}).items():
        if not isinstance(p, (int, float)) or not 0.0 <= p <= 1.0:
            _problem(diags, "priors", f"prior for '{rtype}' must be in [0,1]")
        else:
            priors[rtype] = float(p)

    def build(cls, key):
        raw = need(key, dict, {}) or {}
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(raw) - known
        if unknown:
            _problem(diags, key, f"unknown keys {sorted(unknown)}")
        try:
            return cls(**{k: v for k, v in raw.items() if k in known})
        except (TypeError, ValueError) as exc:
            _problem(diags, key, str(exc))
            return cls()

    planner = build(PlannerConfig, "planner")
    scheduler = build(SchedulerConfig, "scheduler")
    human = build(HumanConfig, "human")
    sim = build(SimConfig, "sim")
    backend = build(BackendConfig, "backend")
    if backend.kind not in ("rules", "http"):
        _problem(diags, "backend", f"unknown backend kind '{backend.kind}'")
    if backend.kind == "http" and not backend.url:
        _problem(diags, "backend", "http backend needs a url")
    if not 0.0 < scheduler.eps < 1.0:
        _problem(diags, "scheduler", "eps must lie in (0, 1)")

    scripted: list[ScriptedEvent] = []
    for i, item in enumerate(need("scripted_events", list, []) or []):
        path = f"scripted_events[{i}]"
        kind = str(item.get("kind", ""))
        if kind not in ADAPTATION_KINDS:
            _problem(diags, path, f"unknown event kind '{kind}'")
        t = item.get("t", None)
        if not isinstance(t, (int, float)) or t < 0:
            _problem(diags, path, "event needs a non-negative time 't'")
            t = 0.0
        scripted.append(ScriptedEvent(float(t), kind,
                                      dict(item.get("payload") or {})))

    if diags:
        raise ScenarioError(diags)
    return Scenario(
        name=name, arena=arena, features=features, resources=resources,
        robots=robots, groups=groups, order_rules=order_rules,
        extra_missions=extra_missions, plan_library_path=lib_path,
        service_times=service_times, priors=priors, planner=planner,
        scheduler=scheduler, human=human, sim=sim, backend=backend,
        scripted_events=sorted(scripted, key=lambda e: (e.t, e.kind)),
    )


def diagnostics_json(err: ScenarioError) -> str:
    return json.dumps({"error": "scenario_validation",
                       "diagnostics": err.diagnostics}, sort_keys=True)
