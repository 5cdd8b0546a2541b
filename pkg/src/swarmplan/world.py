"""World model for the discrete-event simulation: robots, features,
resources, straight-line motion segments, and disc sensing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .catalog import PLATFORM_SKILLS, PLATFORM_VELOCITY

UNDISCOVERED = "undiscovered"
DISCOVERED = "discovered"
HANDLED = "handled"

AERIAL_PLATFORMS = frozenset({"UAV", "UHeli"})

Point = tuple[float, float]


@dataclass
class FeatureState:
    id: str
    type: str
    pos: Point
    status: str = UNDISCOVERED

    def handle(self) -> None:
        if self.status == HANDLED:
            raise ValueError(f"feature {self.id} already handled")
        self.status = HANDLED


@dataclass
class ResourceState:
    id: str
    type: str
    pos: Point
    discovered: bool = False


@dataclass
class MotionSegment:
    t0: float
    p0: Point
    t1: float
    p1: Point

    def at(self, t: float) -> Point:
        if t <= self.t0:
            return self.p0
        if t >= self.t1 or self.t1 <= self.t0:
            return self.p1
        f = (t - self.t0) / (self.t1 - self.t0)
        return (self.p0[0] + f * (self.p1[0] - self.p0[0]),
                self.p0[1] + f * (self.p1[1] - self.p0[1]))


@dataclass
class RobotState:
    id: str
    platform: str
    group: str
    pos: Point
    failed: bool = False
    route: list[MotionSegment] = field(default_factory=list)
    activity: Optional[str] = None  # subtask id or manual action

    def __post_init__(self) -> None:
        if self.platform not in PLATFORM_SKILLS:
            raise ValueError(f"unknown platform {self.platform}")

    @property
    def skills(self) -> frozenset[str]:
        return PLATFORM_SKILLS[self.platform]

    @property
    def velocity(self) -> float:
        return PLATFORM_VELOCITY[self.platform]

    @property
    def aerial(self) -> bool:
        return self.platform in AERIAL_PLATFORMS

    def position_at(self, t: float) -> Point:
        pos = self.pos
        for seg in self.route:
            if t < seg.t0:
                break
            pos = seg.at(t)
        return pos

    def settle(self, t: float) -> None:
        """Collapse finished route segments into the base position."""
        self.pos = self.position_at(t)
        self.route = [seg for seg in self.route if seg.t1 > t]

    def plan_route(self, start: float, waypoints: list[Point]) -> float:
        """Straight-line legs through ``waypoints``; returns arrival time."""
        if self.failed:
            raise ValueError(f"robot {self.id} has failed")
        self.settle(start)
        t = start
        pos = self.pos
        self.route = []
        for wp in waypoints:
            dist = math.dist(pos, wp)
            arrive = t + dist / self.velocity
            self.route.append(MotionSegment(t, pos, arrive, wp))
            t = arrive
            pos = wp
        return t

    def halt(self, t: float) -> None:
        self.settle(t)
        self.route = []
        self.activity = None


@dataclass
class WorldState:
    width: float
    height: float
    features: dict[str, FeatureState]
    resources: dict[str, ResourceState]
    robots: dict[str, RobotState]
    clock: float = 0.0
    travelled: dict[str, float] = field(default_factory=dict)

    def sense_radius(self, robot: RobotState, ground: float,
                     air: float) -> float:
        return air if robot.aerial else ground

    def step_motion(self, dt: float, sense_ground: float = 5.0,
                    sense_air: float = 15.0) -> list[str]:
        """Advance all robots by ``dt`` and return newly discovered ids.

        Robots move along their planned routes at platform velocity; features
        and resources within the sensing disc of a live robot become
        discovered.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        t_next = self.clock + dt
        discovered: list[str] = []
        for rid in sorted(self.robots):
            robot = self.robots[rid]
            if robot.failed:
                continue
            before = robot.pos
            robot.settle(t_next)
            self.travelled[rid] = self.travelled.get(rid, 0.0) + math.dist(
                before, robot.pos)
        for rid in sorted(self.robots):
            robot = self.robots[rid]
            if robot.failed:
                continue
            radius = self.sense_radius(robot, sense_ground, sense_air)
            for fid in sorted(self.features):
                feat = self.features[fid]
                if feat.status == UNDISCOVERED and \
                        math.dist(robot.pos, feat.pos) <= radius:
                    feat.status = DISCOVERED
                    discovered.append(fid)
            for res_id in sorted(self.resources):
                res = self.resources[res_id]
                if not res.discovered and \
                        math.dist(robot.pos, res.pos) <= radius:
                    res.discovered = True
                    discovered.append(res_id)
        self.clock = t_next
        return discovered

    def discovered_resources(self, rtype: str) -> list[ResourceState]:
        return [r for r in (self.resources[k] for k in sorted(self.resources))
                if r.type == rtype and r.discovered]

    def hidden_resources(self, rtype: str) -> list[ResourceState]:
        return [r for r in (self.resources[k] for k in sorted(self.resources))
                if r.type == rtype and not r.discovered]

    def nearest_resource(self, rtype: str, to: Point,
                         within: Optional[list[Point]] = None
                         ) -> Optional[ResourceState]:
        pool = self.discovered_resources(rtype)
        if within:
            pool = [r for r in pool if point_in_polygon(r.pos, within)]
        if not pool:
            return None
        return min(pool, key=lambda r: (math.dist(r.pos, to), r.id))


def point_in_polygon(p: Point, polygon: list[Point]) -> bool:
    """Ray casting; points on an edge count as inside for our purposes."""
    x, y = p
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = (x2 - x1) * (y - y1) / (y2 - y1) + x1
            if x < xin:
                inside = not inside
    return inside


def centroid(points: list[Point]) -> Point:
    if not points:
        return (0.0, 0.0)
    return (sum(p[0] for p in points) / len(points),
            sum(p[1] for p in points) / len(points))
