"""Task decomposition: plan retrieval, staged prompting, and layered DAGs.

A task assigned to a group is decomposed into a labeled subtask graph by a
three-stage pipeline (knowledge analysis, subtask guide, subtask sequencing)
over a pluggable text-completion backend.  The bundled rule backend compiles
the feature catalog and plan library into deterministic candidate schemes;
an HTTP adapter speaks the same protocol against an external service.
Missing resources are guarded by inserted exploration subtasks.
"""

from __future__ import annotations

import json
import math
import re
import urllib.request
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol

from .catalog import SKILLS, required_robots


# ---------------------------------------------------------------------------
# Plan library and retrieval

_TOKEN_RE = re.compile(r"[a-z0-9_]+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _tf_vector(text: str) -> dict[str, float]:
    vec: dict[str, float] = {}
    for tok in _tokens(text):
        vec[tok] = vec.get(tok, 0.0) + 1.0
    return vec


def cosine(u: dict[str, float], v: dict[str, float]) -> float:
    if not u or not v:
        return 0.0
    dot = sum(w * v[t] for t, w in u.items() if t in v)
    nu = math.sqrt(sum(w * w for w in u.values()))
    nv = math.sqrt(sum(w * w for w in v.values()))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


@dataclass
class PlanLibrary:
    entries: list[str]
    index: list[dict[str, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not all(isinstance(e, str) and e.strip() for e in self.entries):
            raise ValueError("plan entries must be non-empty strings")
        if not self.index:
            self.index = [_tf_vector(e) for e in self.entries]

    @staticmethod
    def load(path: str) -> "PlanLibrary":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise ValueError("plan library must be a list of plan strings")
        return PlanLibrary(list(data))


def retrieve(task_text: str, lib: PlanLibrary,
             top_n: int = 1) -> list[tuple[int, str, float]]:
    """Entries ranked by term-frequency cosine, ties broken by entry index."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    query = _tf_vector(task_text)
    scored = [(i, entry, cosine(query, lib.index[i]))
              for i, entry in enumerate(lib.entries)]
    scored.sort(key=lambda t: (-t[2], t[0]))
    return scored[:top_n]


# ---------------------------------------------------------------------------
# Layered DAGs


@dataclass(frozen=True)
class SubtaskNode:
    id: str
    skill: str
    robots: int
    duration: float
    resource: Optional[str] = None
    p_success: float = 1.0
    exploration: bool = False
    regions: tuple[tuple[float, float], ...] = ()  # candidate search points

    def __post_init__(self) -> None:
        if self.robots < 1:
            raise ValueError("subtask needs at least one robot")
        if not 0.0 < self.p_success <= 1.0:
            raise ValueError("success probability must be in (0, 1]")


@dataclass(frozen=True)
class LayeredDag:
    task: str
    scheme: int
    nodes: tuple[SubtaskNode, ...]
    edges: frozenset[tuple[str, str]]
    known_resources: frozenset[str] = frozenset()

    def node(self, node_id: str) -> SubtaskNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def predecessors(self, node_id: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == node_id)

    def ancestors(self, node_id: str) -> set[str]:
        out: set[str] = set()
        stack = [node_id]
        while stack:
            for p in self.predecessors(stack.pop()):
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out


def validate_dag(g: LayeredDag, caps: frozenset[str]) -> list[str]:
    """All violations of the layered-DAG invariants; empty list means ok."""
    problems: list[str] = []
    ids = [n.id for n in g.nodes]
    if len(set(ids)) != len(ids):
        problems.append("duplicate node ids")
    known_ids = set(ids)
    for a, b in sorted(g.edges):
        if a not in known_ids or b not in known_ids:
            problems.append(f"edge ({a}, {b}) references unknown node")
    # cycle check
    adj = {i: [b for a, b in g.edges if a == i] for i in ids}
    color: dict[str, int] = {}

    def dfs(n: str) -> bool:
        color[n] = 1
        for m in adj.get(n, ()):  # pragma: no branch
            if color.get(m, 0) == 1 or (color.get(m, 0) == 0 and dfs(m)):
                return True
        color[n] = 2
        return False

    if any(color.get(n, 0) == 0 and dfs(n) for n in ids):
        problems.append("cycle in precedence edges")
    for n in g.nodes:
        if n.skill not in caps:
            problems.append(f"unknown skill: {n.skill} (node {n.id})")
        if n.duration <= 0:
            problems.append(f"non-positive duration (node {n.id})")
    if "cycle in precedence edges" not in problems:
        explorers = {n.resource: n.id for n in g.nodes
                     if n.exploration and n.resource}
        for n in g.nodes:
            if n.resource and not n.exploration and \
                    n.resource not in g.known_resources:
                guard = explorers.get(n.resource)
                if guard is None or guard not in g.ancestors(n.id):
                    problems.append(
                        f"resource {n.resource} unresolved (node {n.id})")
    return problems


def insert_exploration(g: LayeredDag, known: frozenset[str],
                       priors: dict[str, float],
                       duration: float = 20.0,
                       regions: tuple[tuple[float, float], ...] = ()
                       ) -> LayeredDag:
    """Guard every missing resource with one exploration subtask.

    A single exploration node per missing resource type precedes all of its
    consumers; its success probability comes from the scenario priors.
    """
    missing: list[str] = []
    for n in g.nodes:
        if n.resource and not n.exploration and n.resource not in known \
                and n.resource not in missing:
            missing.append(n.resource)
    if not missing:
        return replace(g, known_resources=known)
    nodes = list(g.nodes)
    edges = set(g.edges)
    for rtype in missing:
        node_id = f"{g.task}_s{g.scheme}_explore_{rtype}"
        nodes.insert(0, SubtaskNode(
            id=node_id, skill="local_exploration", robots=1,
            duration=duration, resource=rtype,
            p_success=float(priors.get(rtype, 0.5)),
            exploration=True, regions=regions))
        for consumer in g.nodes:
            if consumer.resource == rtype and not consumer.exploration:
                edges.add((node_id, consumer.id))
    return LayeredDag(g.task, g.scheme, tuple(nodes), frozenset(edges), known)


# ---------------------------------------------------------------------------
# Prompt pipeline


@dataclass(frozen=True)
class PromptContext:
    task_name: str
    task_type: str
    knowledge: str  # retrieved plan text plus map facts
    capabilities: tuple[str, ...]
    perception: tuple[tuple[str, tuple[float, float]], ...]  # (name, position)

    def __post_init__(self) -> None:
        for skill in self.capabilities:
            if skill not in SKILLS:
                raise ValueError(f"unknown skill in capabilities: {skill}")


SKILL_GLOSS = {
    "inspect": "On-site investigation",
    "operate": "Valve/switch control",
    "liquid_spray": "Spray pressurized liquid",
    "gas_spray": "Release pressurized gas",
    "solid_spray": "Spread solid agent",
    "monitor": "Post-task observation",
    "lay": "Place covering material",
    "clean_up": "Clear debris",
    "rescue": "Carry person to safety",
    "ignite": "Controlled ignition",
    "fix": "Repair equipment",
    "transport": "Carry objects",
    "build": "Construct structure",
    "throw": "Throw object",
    "detect": "Sensor sweep",
    "local_exploration": "Search nearby area",
    "global_exploration": "Wide-area overwatch",
}


def build_prompt(task_name: str, task_type: str, knowledge: str,
                 capabilities: tuple[str, ...],
                 perception) -> PromptContext:
    return PromptContext(task_name, task_type, knowledge,
                         tuple(capabilities), tuple(perception))


def _common_header(ctx: PromptContext) -> str:
    resources = ", ".join(sorted({name for name, _ in ctx.perception}))
    skills = "\n".join(f"- {s}: {SKILL_GLOSS.get(s, s)}"
                       for s in sorted(ctx.capabilities))
    return (
        f"Task: name: {ctx.task_name}; type: {ctx.task_type}\n"
        f"Resources: {resources}\n"
        f"Related Knowledge: {ctx.knowledge}\n"
        "Instruction: Combine skills to accomplish the task. "
        "Output must be strict JSON format only.\n"
        f"Robot Skills:\n{skills}\n"
    )


def stage_one_prompt(ctx: PromptContext) -> str:
    return (
        _common_header(ctx)
        + "Output Format:\n"
        "- related_knowledge_analysis: Analyze schemes/steps\n"
    )


def stage_two_prompt(ctx: PromptContext, analysis: str) -> str:
    return (
        _common_header(ctx)
        + f"Related Knowledge Analysis: {analysis}\n"
        "Output Format:\n"
        "- schemes_draft: Use natural language to describe the schemes and "
        "steps involved; multiple schemes and steps are allowed.\n"
    )


def stage_three_prompt(ctx: PromptContext, analysis: str, draft: str) -> str:
    return (
        _common_header(ctx)
        + f"Related Knowledge Analysis: {analysis}\n"
        + f"Schemes Draft: {draft}\n"
        "Output Format:\n"
        "- schemes: list of schemes\n"
        "  - steps: list of steps\n"
        "    - required_skill: skill name\n"
        "    - resource: 0-1 immediately available objects nearby (\"\" if none)\n"
        "    - dependency: [prerequisite steps, e.g. step_1]\n"
    )


class GenerationBackend(Protocol):
    def complete(self, prompt: str) -> str:  # pragma: no cover - protocol
        ...


class BackendError(RuntimeError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


# Candidate schemes per feature type: (skill, resource, robots) stages in
# precedence order.  Variants needing a resource type are offered only when
# the type is known or declared explorable.
SCHEME_RECIPES: dict[str, list[list[tuple[str, Optional[str], int]]]] = {
    "alkane_gas_flame": [
        [("inspect", None, 2), ("operate", "valve", 1), ("monitor", None, 2)],
        [("inspect", None, 2), ("liquid_spray", "water", 1), ("monitor", None, 2)],
    ],
    "high_temp_liquid_flame": [
        [("inspect", None, 2), ("lay", "asbestos_felt", 2), ("monitor", None, 2)],
        [("inspect", None, 2), ("liquid_spray", "water", 1), ("monitor", None, 2)],
    ],
    "high_voltage_electrical_flame": [
        [("inspect", None, 2), ("operate", "switch", 1), ("monitor", None, 2)],
        [("inspect", None, 2), ("liquid_spray", "foam", 1),
         ("lay", "metal_net", 1), ("monitor", None, 2)],
    ],
    "trapped_person": [
        [("inspect", None, 2), ("clean_up", None, 2), ("rescue", None, 1),
         ("monitor", None, 2)],
    ],
    "poisoned_person": [
        [("inspect", None, 2), ("gas_spray", "oxygen", 1), ("rescue", None, 1),
         ("monitor", None, 2)],
    ],
    "hydrogen_sulfide_leakage": [
        [("inspect", None, 2), ("ignite", None, 1),
         ("solid_spray", "activated_carbon", 1), ("monitor", None, 2)],
    ],
    "damaged_tank": [
        [("liquid_spray", "water", 1), ("fix", None, 1), ("monitor", None, 2)],
    ],
}


class RuleBackend:
    """Deterministic backend compiled from the feature catalog and recipes.

    Parses the task type and visible resources out of the prompt text, so it
    speaks the same request/response protocol as an external service.  Extra
    recipes can be registered for task types introduced at runtime.
    """

    def __init__(self, extra_recipes: Optional[dict] = None,
                 explorable: Optional[frozenset[str]] = None):
        self.recipes = dict(SCHEME_RECIPES)
        if extra_recipes:
            self.recipes.update(extra_recipes)
        self.explorable = explorable if explorable is not None else frozenset()

    def register(self, task_type: str, recipes) -> None:
        self.recipes[task_type] = recipes

    def complete(self, prompt: str) -> str:
        m = re.search(r"type: ([a-z0-9_]+)", prompt)
        if not m:
            raise BackendError("prompt has no task type line", prompt)
        task_type = m.group(1)
        rm = re.search(r"Resources: ([^\n]*)", prompt)
        visible = {r.strip() for r in rm.group(1).split(",")} if rm else set()
        visible.discard("")
        if "related_knowledge_analysis" in prompt:
            return (f"Handling {task_type} follows the retrieved plan: "
                    "stage the preparation steps, apply one mitigation "
                    "scheme, then watch the outcome.")
        if "schemes_draft" in prompt:
            return (f"Each scheme for {task_type} runs its steps in order; "
                    "alternatives differ in the mitigation resource.")
        recipes = self.recipes.get(task_type)
        if not recipes:
            raise BackendError(f"no recipe for task type {task_type}", prompt)
        schemes = []
        for recipe in recipes:
            usable = all(res is None or res in visible or res in self.explorable
                         for _, res, _ in recipe)
            if not usable:
                continue
            steps = []
            for i, (skill, res, robots) in enumerate(recipe):
                steps.append({
                    "required_skill": skill,
                    "resource": res or "",
                    "robots": robots,
                    "dependency": [f"step_{i}"] if i > 0 else [],
                })
            schemes.append({"steps": steps})
        return json.dumps({"schemes": schemes})


class HttpBackend:
    """Single request/response text endpoint adapter."""

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 2):
        self.url = url
        self.timeout = timeout
        self.retries = retries

    def complete(self, prompt: str) -> str:
        body = json.dumps({"prompt": prompt}).encode("utf-8")
        last: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                req = urllib.request.Request(
                    self.url, data=body,
                    headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
                return payload["text"]
            except Exception as exc:  # noqa: BLE001 - adapter boundary
                last = exc
        raise BackendError(f"backend unreachable: {last}")


def parse_schemes(raw: str) -> list[list[dict]]:
    """Tolerant parse of the stage-three response into scheme step lists.

    Accepts either a list of schemes with ``steps`` arrays or the nested
    ``scheme_N``/``step_N`` object shape; missing required keys are errors.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BackendError(f"unparseable scheme response: {exc}", raw)
    if not isinstance(data, dict) or "schemes" not in data:
        raise BackendError("response lacks 'schemes'", raw)
    schemes_field = data["schemes"]
    scheme_items: list = []
    if isinstance(schemes_field, list):
        scheme_items = schemes_field
    elif isinstance(schemes_field, dict):
        scheme_items = [schemes_field[k] for k in sorted(schemes_field)]
    else:
        raise BackendError("'schemes' must be a list or object", raw)
    out: list[list[dict]] = []
    for scheme in scheme_items:
        if isinstance(scheme, dict) and "steps" in scheme:
            steps_field = scheme["steps"]
            steps = (steps_field if isinstance(steps_field, list)
                     else [steps_field[k] for k in sorted(steps_field)])
        elif isinstance(scheme, dict):
            steps = [scheme[k] for k in sorted(scheme)]
        else:
            raise BackendError("scheme entry must be an object", raw)
        parsed_steps = []
        for step in steps:
            if not isinstance(step, dict) or "required_skill" not in step:
                raise BackendError("step lacks required_skill", raw)
            parsed_steps.append(step)
        if parsed_steps:
            out.append(parsed_steps)
    if not out:
        raise BackendError("no schemes in response", raw)
    return out


def _dag_from_steps(task: str, scheme_ix: int, task_type: str,
                    steps: list[dict], service_times: dict[str, float],
                    known_resources: frozenset[str]) -> LayeredDag:
    nodes = []
    ids = []
    for i, step in enumerate(steps):
        skill = step["required_skill"]
        resource = step.get("resource") or None
        robots = int(step.get("robots") or required_robots(task_type, skill))
        node_id = f"{task}_s{scheme_ix}_n{i + 1}"
        ids.append(node_id)
        nodes.append(SubtaskNode(
            id=node_id, skill=skill, robots=robots,
            duration=float(service_times.get(skill, 10.0)),
            resource=resource))
    edges = set()
    for i, step in enumerate(steps):
        for dep in step.get("dependency") or []:
            m = re.fullmatch(r"step_(\d+)", str(dep))
            if m:
                j = int(m.group(1))
                if 1 <= j <= len(ids) and j - 1 != i:
                    edges.add((ids[j - 1], ids[i]))
    return LayeredDag(task, scheme_ix, tuple(nodes), frozenset(edges),
                      known_resources)


def generate(ctx: PromptContext, backend: GenerationBackend,
             service_times: dict[str, float],
             known_resources: frozenset[str],
             explorable: frozenset[str] = frozenset(),
             max_schemes: int = 4, retries: int = 2,
             task_id: Optional[str] = None) -> list[LayeredDag]:
    """Run the three-stage pipeline and return validated candidate DAGs.

    Resources in ``explorable`` count as resolvable during validation; the
    caller guards them with exploration subtasks afterwards.
    """
    caps = frozenset(ctx.capabilities)
    task = task_id or ctx.task_name
    last_error: Optional[BackendError] = None
    for _ in range(retries + 1):
        try:
            analysis = backend.complete(stage_one_prompt(ctx))
            draft = backend.complete(stage_two_prompt(ctx, analysis))
            raw = backend.complete(stage_three_prompt(ctx, analysis, draft))
            schemes = parse_schemes(raw)
        except BackendError as exc:
            last_error = exc
            continue
        dags = []
        for ix, steps in enumerate(schemes[:max_schemes]):
            dag = _dag_from_steps(task, ix, ctx.task_type, steps,
                                  service_times, known_resources)
            relaxed = replace(dag,
                              known_resources=known_resources | explorable)
            if not validate_dag(relaxed, caps):
                dags.append(dag)
        if dags:
            return dags
        last_error = BackendError("all candidate schemes invalid", raw)
    assert last_error is not None
    raise last_error
