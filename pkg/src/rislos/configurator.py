"""RIS configuration codebook and the adaptive pilot loop.

Configurations are stored as the vector of RIS reflection coefficients
``theta = [e^{-j theta_1}, ..., e^{-j theta_N}]`` so that the cascaded
channel seen by the BS is ``theta^T diag(h) g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array import Aoa, AngleGrid, ArrayGeometry, array_response, configuration_angle_grid
from .channel import ChannelState, PilotSession, synth_received_pilots
from .estimator import Estimate, estimate_all, first_argmax


DUPLICATE_RTOL = 1e-9


class Exhausted(Exception):
    """Every codebook entry has already been used in this session."""


class InvalidL(ValueError):
    pass


@dataclass
class ConfigCodebook:
    """One configuration per angle of the configuration grid, with usage flags."""

    configs: np.ndarray
    angles: AngleGrid
    h: np.ndarray
    geom: ArrayGeometry
    used: np.ndarray = None
    _projections: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.used is None:
            self.used = np.zeros(len(self.configs), dtype=bool)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def unused(self) -> np.ndarray:
        return np.flatnonzero(~self.used)

    def fresh(self) -> "ConfigCodebook":
        """Copy with every entry unused; projection caches are shared."""
        return ConfigCodebook(self.configs, self.angles, self.h, self.geom,
                              np.zeros(len(self.configs), dtype=bool), self._projections)

    def take(self, index: int) -> np.ndarray:
        if self.used[index]:
            raise ValueError(f"codebook entry {index} already used")
        self.used[index] = True
        return self.configs[index]

    def projections(self, grid: AngleGrid) -> np.ndarray:
        """``theta_k^T diag(h) a(phi)`` for every entry k and grid point (N x G)."""
        key = id(grid)
        if key not in self._projections:
            self._projections[key] = (grid, (self.configs * self.h) @ grid.responses(self.geom).T)
        return self._projections[key][1]


def phase_compensation(h) -> np.ndarray:
    return np.exp(-1j * np.angle(h))


def build_codebook(h, geom: ArrayGeometry) -> ConfigCodebook:
    """Steer toward each configuration-grid angle, pre-compensating ``arg(h)``.

    The codebook is a set: grid angles with identical array responses
    (the whole elevation = pi/2 row when N_V is even) contribute one entry.
    """
    h = np.asarray(h, dtype=complex)
    grid = configuration_angle_grid(geom)
    configs = phase_compensation(h) * grid.responses(geom).conj()
    keep = []
    for k in range(len(configs)):
        if not any(abs(np.vdot(configs[j], configs[k])) >= geom.n * (1 - DUPLICATE_RTOL) for j in keep):
            keep.append(k)
    angles = AngleGrid(grid.azimuth[keep], grid.elevation[keep], kind="configuration")
    return ConfigCodebook(configs[keep], angles, h, geom)


def optimal_config(vartheta_hat: float, omega_hat: float, aoa_hat: Aoa, h, geom: ArrayGeometry) -> np.ndarray:
    """Configuration aligning the LOS cascaded path with the direct path.

    Only the phase difference ``vartheta - omega`` and the AoA matter.
    """
    a = array_response(geom, aoa_hat)
    return np.exp(1j * (vartheta_hat - omega_hat)) * phase_compensation(h) * a.conj()


def config_from_estimate(est: Estimate, h, geom: ArrayGeometry) -> np.ndarray:
    return optimal_config(est.vartheta_hat, est.omega_hat, est.aoa_hat, h, geom)


def config_from_channel(g, d, h) -> np.ndarray:
    """Coherent-combining configuration for an unstructured channel estimate."""
    return np.exp(1j * np.angle(d)) * np.exp(-1j * np.angle(np.asarray(h) * np.asarray(g)))


def nearest_unused(target, codebook: ConfigCodebook) -> tuple[int, np.ndarray]:
    """Unused entry maximising ``|target^H theta|`` (lowest index on ties); marks it used."""
    free = codebook.unused
    if free.size == 0:
        raise Exhausted("no unused configurations left")
    scores = np.abs(codebook.configs[free] @ np.conj(target))
    index = int(free[first_argmax(scores)])
    return index, codebook.take(index)


def smart_init(previous_best, codebook: ConfigCodebook, rng: np.random.Generator):
    """First configuration closest to the previously applied one, second at random."""
    i1, _ = nearest_unused(previous_best, codebook)
    i2 = int(rng.choice(codebook.unused))
    codebook.take(i2)
    return i1, i2


def random_init(codebook: ConfigCodebook, rng: np.random.Generator):
    free = codebook.unused
    if free.size < 2:
        raise Exhausted("need two unused configurations to start")
    i1, i2 = (int(i) for i in rng.choice(free, size=2, replace=False))
    codebook.take(i1)
    codebook.take(i2)
    return i1, i2


def run_adaptive_estimation(L: int, codebook: ConfigCodebook, channel: ChannelState,
                            pilot_power: float, noise_power: float, grid: AngleGrid,
                            rng: np.random.Generator, *, previous_config=None,
                            refine: bool = True) -> tuple[Estimate, PilotSession]:
    """Iteratively grow the pilot session, steering each new pilot toward
    the current SE-optimal configuration.

    ``previous_config=None`` selects both initial configurations at random;
    otherwise the first one is the entry nearest to ``previous_config``.
    ``codebook`` is consumed (entries get marked used); pass ``codebook.fresh()``
    to reuse one across sessions. The per-iteration estimates are kept in
    ``session.history`` (``history[k]`` is the estimate after ``k + 2`` pilots).
    """
    if not 2 <= L <= len(codebook):
        raise InvalidL(f"pilot length must be in [2, {len(codebook)}], got {L}")
    geom, h = codebook.geom, codebook.h
    if previous_config is None:
        i1, i2 = random_init(codebook, rng)
    else:
        i1, i2 = smart_init(previous_config, codebook, rng)
    b = codebook.configs[[i1, i2]]
    y = synth_received_pilots(channel, b, pilot_power, noise_power, rng)
    session = PilotSession(b, y, pilot_power, noise_power, indices=[i1, i2])

    proj = codebook.projections(grid)
    for l in range(2, L + 1):
        est = estimate_all(session.y, session.b_matrix, h, pilot_power, grid, geom,
                           refine=refine, projections=proj[session.indices])
        session.history.append(est)
        if l < L:
            target = config_from_estimate(est, h, geom)
            index, theta = nearest_unused(target, codebook)
            y_l = synth_received_pilots(channel, theta[None, :], pilot_power, noise_power, rng)[0]
            session.append(theta, y_l, index)
    return session.history[-1], session
