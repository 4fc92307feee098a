"""Indoor random walk, the AoAs it induces at the RIS, and channel tracking.

Room frame: the floor spans ``[0, room_x] x [0, room_y]``, the RIS hangs in
the middle of the wall ``y = 0`` facing +y. The RIS local frame uses the
wall's horizontal direction (+x) for azimuth and +z for elevation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .array import Aoa, AngleGrid, ArrayGeometry, array_response, search_grid
from .channel import ChannelState, LinkBudget, LosChannelParams, draw_direct_channel, make_los_channel
from .configurator import build_codebook, config_from_estimate, run_adaptive_estimation
from .metrics import se_achieved, se_max
from .seeding import stream


class BehindSurface(ValueError):
    """Position is not in front of the RIS."""


@dataclass(frozen=True)
class RoomScenario:
    room_x: float = 5.0
    room_y: float = 5.0
    ris_center: tuple[float, float, float] = (2.5, 0.0, 1.5)
    ris_normal: tuple[float, float, float] = (0.0, 1.0, 0.0)
    ris_horizontal: tuple[float, float, float] = (1.0, 0.0, 0.0)
    ue_height: float = 1.0
    wavelength: float = 0.1
    speed_mean: float = 0.5
    step_interval: float = 0.2
    turn_sigma: float = np.deg2rad(30.0)
    wall_margin: float = 0.1

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.step_interval <= 0 or self.speed_mean <= 0:
            raise ValueError("speed and step interval must be positive")
        if not 0 <= 2 * self.wall_margin < min(self.room_x, self.room_y):
            raise ValueError("wall margin leaves no room to walk in")

    @property
    def step_distance(self) -> float:
        return self.speed_mean * self.step_interval


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    position: np.ndarray = field(repr=False)
    aoa: Aoa
    distance: float


def _reflect(x: float, heading_component: float, lo: float, hi: float) -> tuple[float, float]:
    while x < lo or x > hi:
        x = 2 * lo - x if x < lo else 2 * hi - x
        heading_component = -heading_component
    return x, heading_component


def random_walk(scenario: RoomScenario, duration: float, rng: np.random.Generator,
                start=None) -> list[TrajectoryPoint]:
    """Heading random walk with specular reflection at the walls.

    Each step moves ``step_distance`` metres; the heading changes by a
    zero-mean Gaussian turn of ``turn_sigma`` radians.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    steps = int(round(duration / scenario.step_interval))
    m = scenario.wall_margin
    lo_x, hi_x = m, scenario.room_x - m
    lo_y, hi_y = m, scenario.room_y - m
    if start is None:
        x, y = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
    else:
        x, y = start
    heading = rng.uniform(0, 2 * np.pi)
    points = []
    for k in range(steps + 1):
        pos = np.array([x, y, scenario.ue_height])
        points.append(_make_point(scenario, k * scenario.step_interval, pos))
        heading += rng.normal(0.0, scenario.turn_sigma)
        dx, dy = np.cos(heading), np.sin(heading)
        x, dx = _reflect(x + scenario.step_distance * dx, dx, lo_x, hi_x)
        y, dy = _reflect(y + scenario.step_distance * dy, dy, lo_y, hi_y)
        heading = np.arctan2(dy, dx)
    return points


def _make_point(scenario: RoomScenario, t: float, pos: np.ndarray) -> TrajectoryPoint:
    aoa = aoa_from_position(scenario, pos)
    return TrajectoryPoint(t, pos, aoa, float(np.linalg.norm(pos - np.asarray(scenario.ris_center))))


def aoa_from_position(scenario: RoomScenario, position) -> Aoa:
    """Azimuth/elevation of ``position`` in the RIS local frame (boresight = normal)."""
    r = np.asarray(position, dtype=float) - np.asarray(scenario.ris_center)
    normal = np.asarray(scenario.ris_normal, dtype=float)
    horiz = np.asarray(scenario.ris_horizontal, dtype=float)
    up = np.cross(normal, horiz)
    up = up if up[2] >= 0 else -up
    forward = r @ normal
    if forward <= 0:
        raise BehindSurface(f"position {tuple(position)} is not in front of the RIS")
    u = r / np.linalg.norm(r)
    az = np.arctan2(u @ horiz, u @ normal)
    el = np.arcsin(np.clip(u @ up, -1.0, 1.0))
    return Aoa(float(az), float(el))


def propagation_phase(scenario: RoomScenario, distance: float) -> float:
    return float(np.mod(-2 * np.pi * distance / scenario.wavelength, 2 * np.pi))


def channel_at(scenario: RoomScenario, point: TrajectoryPoint, beta: float, rng: np.random.Generator,
               geom: ArrayGeometry, h, *, direct: str = "phase") -> ChannelState:
    """Channel seen at a trajectory point.

    ``direct="phase"`` keeps ``|d| = sqrt(10 beta)`` and redraws its phase;
    ``direct="gaussian"`` draws ``d`` from CN(0, 10 beta).
    """
    params = LosChannelParams(beta, propagation_phase(scenario, point.distance), point.aoa)
    g = make_los_channel(params, geom)
    per_element = beta * float(np.abs(np.asarray(h)[0])) ** 2
    if direct == "phase":
        d = np.sqrt(10 * per_element) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    elif direct == "gaussian":
        d = draw_direct_channel(per_element, rng)
    else:
        raise ValueError(f"unknown direct-channel model {direct!r}")
    return ChannelState(g, d, h)


def write_trajectory_csv(points: list[TrajectoryPoint], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["t", "x", "y", "z", "az", "el", "distance"])
        for p in points:
            w.writerow([repr(float(v)) for v in (p.t, *p.position, p.aoa.azimuth, p.aoa.elevation, p.distance)])


@dataclass
class TrackingTrace:
    policy_period: float
    t: np.ndarray
    se_achieved: np.ndarray
    se_max: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        return self.se_achieved / self.se_max


def tracking_channels(scenario: RoomScenario, total_duration: float, seed: int, geom: ArrayGeometry,
                      budget: LinkBudget, h) -> tuple[list[TrajectoryPoint], list[ChannelState]]:
    points = random_walk(scenario, total_duration, stream(seed, "walk"))
    rng = stream(seed, "channel")
    return points, [channel_at(scenario, p, budget.beta, rng, geom, h) for p in points]


def run_tracking(scenario: RoomScenario, policy_period: float, L: int, total_duration: float, seed: int, *,
                 geom: ArrayGeometry | None = None, budget: LinkBudget | None = None,
                 h_aoa: Aoa = Aoa(0.3, -0.2), grid: AngleGrid | None = None,
                 noise_realizations: int = 1, channels=None, noiseless_pilots: bool = False) -> TrackingTrace:
    """Periodic re-estimation with smart initialisation along one walk.

    Every ``policy_period`` seconds the adaptive estimator runs on the
    instantaneous channel and the resulting configuration is held until
    the next update. The recorded SE is averaged over independent noise
    realizations (each one is a full chain of sessions); the walk and the
    channel draws depend only on ``seed``, so runs with different policies
    and equal seeds see identical channels. ``noiseless_pilots`` removes
    the pilot noise only; the SE is still evaluated at the link's noise power.
    """
    geom = geom or ArrayGeometry()
    budget = budget or LinkBudget()
    grid = grid or search_grid()
    ratio = policy_period / scenario.step_interval
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise ValueError("policy period must be a positive multiple of the step interval")
    every = int(round(ratio))
    h = array_response(geom, h_aoa)
    if channels is None:
        points, channels = tracking_channels(scenario, total_duration, seed, geom, budget, h)
        t = np.array([p.t for p in points])
    else:
        t = np.arange(len(channels)) * scenario.step_interval
    codebook = build_codebook(h, geom)
    pd, nv = budget.data_power, budget.noise_power
    pilot_nv = 0.0 if noiseless_pilots else nv
    se_sum = np.zeros(len(channels))
    for r in range(noise_realizations):
        rng = stream(seed, "tracking-noise", r)
        previous = theta = None
        for k, state in enumerate(channels):
            if k % every == 0:
                est, _ = run_adaptive_estimation(L, codebook.fresh(), state, budget.pilot_power, pilot_nv, grid, rng,
                                                 previous_config=previous)
                theta = previous = config_from_estimate(est, h, geom)
            se_sum[k] += se_achieved(theta, state, pd, nv)
    upper = np.array([se_max(s, pd, nv) for s in channels])
    return TrackingTrace(policy_period, t, se_sum / noise_realizations, upper)
