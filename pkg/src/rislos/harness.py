"""Experiment configuration, Monte-Carlo orchestration and result files.

Every random quantity is drawn from a stream keyed by
``(master seed, experiment, component, index...)`` (see :mod:`rislos.seeding`),
and work units are aggregated in index order, so output files depend only
on the configuration and seed, never on the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .array import Aoa, ArrayGeometry, array_response, search_grid
from .channel import ChannelState, LinkBudget, LosChannelParams, draw_direct_channel, make_los_channel, synth_received_pilots
from .configurator import (build_codebook, config_from_channel, config_from_estimate, run_adaptive_estimation)
from .estimator import dft_configurations
from .metrics import nmse, se_achieved, se_max
from .mobility import RoomScenario, channel_at, random_walk, run_tracking
from .seeding import child_seed, stream

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # array
    n_h: int = 8
    n_v: int = 8
    delta_h: float = 0.25
    delta_v: float = 0.25
    # link budget; pilot SNR defaults to data SNR + 10 dB
    snr_d_db: float = -10.0
    snr_p_db: float | None = None
    # RIS-BS channel direction (any choice gives the same results)
    h_az: float = 0.3
    h_el: float = -0.2
    # estimator
    search_res_az: int = 181
    search_res_el: int = 181
    refine: bool = True
    # fig2
    l_min: int = 2
    l_max: int = 12
    ls_l_min: int = 1
    ls_l_max: int = 64
    monte_carlo_trials: int = 500
    walk_points: int = 200
    session_interval: float = 1.0
    # room and walk
    room_x: float = 5.0
    room_y: float = 5.0
    ris_height: float = 1.5
    ue_height: float = 1.0
    wavelength: float = 0.1
    speed_mean: float = 0.5
    step_interval: float = 0.2
    turn_sigma_deg: float = 30.0
    # tracking (fig3)
    track_l: int = 6
    track_duration: float = 200.0
    policy_periods: tuple = (1.0, 10.0)
    track_noise_realizations: int = 100
    track_walks: int = 1
    # estimate-once
    once_l: int = 6
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.snr_p_db is None:
            self.snr_p_db = self.snr_d_db + 10.0
        self.policy_periods = tuple(float(p) for p in self.policy_periods)
        self.validate()

    def validate(self) -> None:
        if self.n_h < 1 or self.n_v < 1:
            raise ConfigError("n_h and n_v must be >= 1")
        if self.delta_h <= 0 or self.delta_v <= 0:
            raise ConfigError("element spacings must be positive")
        n = self.n_h * self.n_v
        # MLE sessions cannot use more pilots than there are distinct configurations
        m = len(build_codebook(np.ones(n), self.geometry))
        checks = [
            (self.monte_carlo_trials >= 1, "monte_carlo_trials must be >= 1"),
            (self.walk_points >= 1, "walk_points must be >= 1"),
            (2 <= self.l_min <= self.l_max <= m, f"need 2 <= l_min <= l_max <= {m} (codebook size)"),
            (1 <= self.ls_l_min <= self.ls_l_max <= n, f"need 1 <= ls_l_min <= ls_l_max <= N={n}"),
            (2 <= self.track_l <= m and 2 <= self.once_l <= m, f"pilot lengths must be in [2, {m}]"),
            (self.search_res_az >= 2 and self.search_res_el >= 2, "search resolution must be >= 2"),
            (self.track_noise_realizations >= 1 and self.track_walks >= 1, "tracking counts must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.session_interval > 0 and self.track_duration > 0, "durations must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for p in self.policy_periods:
            r = p / self.step_interval
            if r < 1 or abs(r - round(r)) > 1e-9:
                raise ConfigError(f"policy period {p} is not a multiple of the step interval")
        r = self.session_interval / self.step_interval
        if r < 1 or abs(r - round(r)) > 1e-9:
            raise ConfigError("session_interval must be a multiple of step_interval")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**mapping)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a flat key/value object")
        return cls.from_mapping(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["policy_periods"] = list(self.policy_periods)
        return d

    # derived objects
    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.n_h, self.n_v, self.delta_h, self.delta_v)

    @property
    def budget(self) -> LinkBudget:
        return LinkBudget(self.snr_d_db, self.snr_p_db)

    @property
    def scenario(self) -> RoomScenario:
        return RoomScenario(
            room_x=self.room_x, room_y=self.room_y,
            ris_center=(self.room_x / 2, 0.0, self.ris_height),
            ue_height=self.ue_height, wavelength=self.wavelength, speed_mean=self.speed_mean,
            step_interval=self.step_interval, turn_sigma=math.radians(self.turn_sigma_deg),
        )

    @property
    def h_aoa(self) -> Aoa:
        return Aoa(self.h_az, self.h_el)

    def grid(self):
        return search_grid(self.search_res_az, self.search_res_el)


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match) -> list[dict]:
        out = []
        for r in self.rows:
            rec = dict(zip(self.columns, r))
            if all(rec[k] == v for k, v in match.items()):
                out.append(rec)
        return out


def _pool_map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------- fig2

def fig2_walk(config: ExperimentConfig):
    """Walk positions one estimation session apart."""
    every = int(round(config.session_interval / config.step_interval))
    duration = config.walk_points * config.session_interval
    points = random_walk(config.scenario, duration, stream(config.seed, "fig2", "walk"))
    return points[::every][: config.walk_points]


def _fig2_pass(args):
    config, p, count = args
    geom, budget = config.geometry, config.budget
    scenario = config.scenario
    points = fig2_walk(config)[:count]
    h = array_response(geom, config.h_aoa)
    codebook = build_codebook(h, geom)
    grid = config.grid()
    pd, nv, pp = budget.data_power, budget.noise_power, budget.pilot_power

    rng_c = stream(config.seed, "fig2", "channel", p)
    states = [channel_at(scenario, pt, budget.beta, rng_c, geom, h, direct="gaussian") for pt in points]
    out = {"perfect": np.array([se_max(s, pd, nv) for s in states])}

    mle_ls = list(range(config.l_min, config.l_max + 1))
    rnd = np.empty((len(mle_ls), count))
    for i, state in enumerate(states):
        rng = stream(config.seed, "fig2", "mle_random", p, i)
        _, session = run_adaptive_estimation(config.l_max, codebook.fresh(), state, pp, nv, grid, rng,
                                             refine=config.refine)
        for j, L in enumerate(mle_ls):
            est = session.history[L - 2]
            rnd[j, i] = se_achieved(config_from_estimate(est, h, geom), state, pd, nv)
    out["mle_random"] = rnd

    smart = np.empty((len(mle_ls), count))
    for j, L in enumerate(mle_ls):
        rng = stream(config.seed, "fig2", "mle_smart", p, L)
        previous = None
        for i, state in enumerate(states):
            est, _ = run_adaptive_estimation(L, codebook.fresh(), state, pp, nv, grid, rng,
                                             previous_config=previous, refine=config.refine)
            previous = config_from_estimate(est, h, geom)
            smart[j, i] = se_achieved(previous, state, pd, nv)
    out["mle_smart"] = smart

    ls_ls = list(range(config.ls_l_min, config.ls_l_max + 1))
    dft = dft_configurations(geom.n, config.ls_l_max)
    pinvs = [np.linalg.pinv(np.hstack([dft[:L], np.ones((L, 1))]) * np.sqrt(pp)) for L in ls_ls]
    ls = np.empty((len(ls_ls), count))
    for i, state in enumerate(states):
        y = synth_received_pilots(state, dft, pp, nv, stream(config.seed, "fig2", "ls", p, i))
        for j, L in enumerate(ls_ls):
            x = pinvs[j] @ y[:L]
            ls[j, i] = se_achieved(config_from_channel(x[:-1] / h, x[-1], h), state, pd, nv)
    out["ls"] = ls
    return out


def run_fig2(config: ExperimentConfig) -> ResultTable:
    """Mean SE versus pilot length for the ML estimator (random and smart
    initialisation), least squares with DFT configurations, and perfect CSI.

    ``monte_carlo_trials`` sessions are averaged per (estimator, L); they
    are laid out as consecutive passes over a ``walk_points``-long walk,
    each pass with fresh noise and direct-channel draws.
    """
    passes = math.ceil(config.monte_carlo_trials / config.walk_points)
    counts = [min(config.walk_points, config.monte_carlo_trials - p * config.walk_points) for p in range(passes)]
    results = _pool_map(_fig2_pass, [(config, p, c) for p, c in enumerate(counts)], config.workers)

    def stack(name):
        return np.concatenate([r[name] for r in results], axis=-1)

    perfect = stack("perfect")
    table = ResultTable(["estimator", "L", "mean_se", "std_se", "fraction_of_perfect", "samples"],
                        metadata=_metadata("fig2", config))
    p_mean = float(np.mean(perfect))

    def add(name, L, samples):
        m = float(np.mean(samples))
        s = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
        table.rows.append([name, int(L), m, s, m / p_mean, int(samples.size)])

    all_ls = sorted(set(range(config.l_min, config.l_max + 1)) | set(range(config.ls_l_min, config.ls_l_max + 1)))
    for L in all_ls:
        add("perfect", L, perfect)
    for name in ("mle_random", "mle_smart"):
        data = stack(name)
        for j, L in enumerate(range(config.l_min, config.l_max + 1)):
            add(name, L, data[j])
    data = stack("ls")
    for j, L in enumerate(range(config.ls_l_min, config.ls_l_max + 1)):
        add("ls", L, data[j])
    return table


def pilots_to_reach(table: ResultTable, estimator: str, fraction: float = 0.98) -> int | None:
    """Smallest L whose mean SE reaches ``fraction`` of the perfect-CSI mean."""
    rows = sorted(table.where(estimator=estimator), key=lambda r: r["L"])
    for r in rows:
        if r["fraction_of_perfect"] >= fraction:
            return r["L"]
    return None


# ---------------------------------------------------------------- fig3

def _walk_seed(config: ExperimentConfig, w: int) -> int:
    return int(child_seed(config.seed, "fig3", w).generate_state(1, dtype=np.uint32)[0])


def _fig3_task(args):
    config, w, period = args
    return run_tracking(config.scenario, period, config.track_l, config.track_duration, _walk_seed(config, w),
                        geom=config.geometry, budget=config.budget, h_aoa=config.h_aoa, grid=config.grid(),
                        noise_realizations=config.track_noise_realizations)


def run_fig3(config: ExperimentConfig) -> ResultTable:
    """Per-instant SE of the periodic re-configuration policies.

    Policies are paired: for each walk they share trajectory, channel and
    noise streams.
    """
    tasks = [(config, w, p) for w in range(config.track_walks) for p in config.policy_periods]
    traces = _pool_map(_fig3_task, tasks, config.workers)
    table = ResultTable(["policy_period", "walk", "t", "se_achieved", "se_max"], metadata=_metadata("track", config))
    for (_, w, p), tr in zip(tasks, traces):
        for t, a, m in zip(tr.t, tr.se_achieved, tr.se_max):
            table.rows.append([float(p), int(w), float(t), float(a), float(m)])
    return table


def tracking_summary(table: ResultTable, period: float) -> dict:
    rows = table.where(policy_period=float(period))
    ratio = np.array([r["se_achieved"] / r["se_max"] for r in rows])
    return {
        "instants": int(ratio.size),
        "fraction_at_least_92pct": float(np.mean(ratio >= 0.92)),
        "fraction_below_60pct": float(np.mean(ratio < 0.6)),
        "mean_ratio": float(np.mean(ratio)),
    }


# ---------------------------------------------------------------- single session & trajectory

def run_estimate_once(config: ExperimentConfig) -> ResultTable:
    """One random-init session on a random LOS channel; truth vs estimate."""
    geom, budget = config.geometry, config.budget
    rng = stream(config.seed, "once", "channel")
    aoa = Aoa(float(rng.uniform(-np.pi / 2, np.pi / 2)), float(rng.uniform(-np.pi / 2, np.pi / 2)))
    params = LosChannelParams(budget.beta, float(rng.uniform(0, 2 * np.pi)), aoa)
    h = array_response(geom, config.h_aoa)
    state = ChannelState(make_los_channel(params, geom), draw_direct_channel(budget.beta, rng), h)
    est, session = run_adaptive_estimation(config.once_l, build_codebook(h, geom), state, budget.pilot_power,
                                           budget.noise_power, config.grid(), stream(config.seed, "once", "noise"),
                                           refine=config.refine)
    theta = config_from_estimate(est, h, geom)
    truth = {
        "azimuth": aoa.azimuth, "elevation": aoa.elevation, "omega": params.omega, "beta": params.beta,
        "vartheta": float(np.mod(np.angle(state.d), 2 * np.pi)), "alpha": abs(state.d) ** 2,
        "se": se_max(state, budget.data_power, budget.noise_power),
    }
    estimate = {
        "azimuth": est.aoa_hat.azimuth, "elevation": est.aoa_hat.elevation, "omega": est.omega_hat,
        "beta": est.beta_hat, "vartheta": est.vartheta_hat, "alpha": est.alpha_hat,
        "se": se_achieved(theta, state, budget.data_power, budget.noise_power),
    }
    table = ResultTable(["quantity", "true", "estimate"], metadata=_metadata("estimate-once", config))
    for k in truth:
        table.rows.append([k, float(truth[k]), float(estimate[k])])
    table.rows.append(["nmse_g", 0.0, nmse(est.g_hat, state.g)[0]])
    table.metadata["pilot_indices"] = list(session.indices)
    return table


def run_trajectory(config: ExperimentConfig) -> ResultTable:
    points = random_walk(config.scenario, config.track_duration, stream(config.seed, "trajectory"))
    table = ResultTable(["t", "x", "y", "z", "az", "el", "distance"], metadata=_metadata("trajectory", config))
    for p in points:
        table.rows.append([float(p.t), *map(float, p.position), p.aoa.azimuth, p.aoa.elevation, float(p.distance)])
    return table


# ---------------------------------------------------------------- output

def _metadata(experiment: str, config: ExperimentConfig) -> dict:
    cfg = config.as_dict()
    cfg.pop("workers")
    return {"experiment": experiment, "seed": config.seed, "config": cfg}


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def emit_results(table: ResultTable, path, fmt: str = "csv") -> None:
    """Write ``table`` as headered CSV (metadata on a leading ``#`` line) or JSON."""
    if fmt == "csv":
        buf = io.StringIO()
        if table.metadata:
            buf.write("# " + json.dumps(table.metadata, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_format(v) for v in r])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "metadata": table.metadata,
               "columns": table.columns, "rows": table.rows}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {os.fspath(path)}: {exc.strerror}") from exc


def read_results(path) -> ResultTable:
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return ResultTable(doc["columns"], [list(r) for r in doc["rows"]], doc.get("metadata", {}))
    lines = text.splitlines()
    metadata = {}
    if lines and lines[0].startswith("# "):
        metadata = json.loads(lines[0][2:])
        lines = lines[1:]
    reader = csv.reader(lines)
    columns = next(reader)
    rows = [[_parse(v) for v in r] for r in reader]
    return ResultTable(columns, rows, metadata)
