"""Planar RIS geometry, array response vectors and angle grids.

Element ordering
----------------
The double index (n_h, n_v) of a planar RIS is flattened row-major with
the vertical index outer and the horizontal index inner::

    n = n_v * n_h_count + n_h

All modules use this order. Angle grids follow the same convention:
elevation outer, azimuth inner.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HALF_PI = np.pi / 2


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar array. Spacings are in wavelengths."""

    n_h: int = 8
    n_v: int = 8
    delta_h: float = 0.25
    delta_v: float = 0.25

    def __post_init__(self):
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError(f"element counts must be >= 1, got {self.n_h}x{self.n_v}")
        if self.delta_h <= 0 or self.delta_v <= 0:
            raise ValueError("element spacings must be positive")

    @property
    def n(self) -> int:
        return self.n_h * self.n_v

    def element_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Horizontal and vertical index (0-based) of every flattened element."""
        n_v_idx, n_h_idx = np.divmod(np.arange(self.n), self.n_h)
        return n_h_idx, n_v_idx


@dataclass(frozen=True)
class Aoa:
    azimuth: float
    elevation: float

    def __post_init__(self):
        tol = 1e-12
        if not (-HALF_PI - tol <= self.azimuth <= HALF_PI + tol):
            raise ValueError(f"azimuth {self.azimuth} outside [-pi/2, pi/2]")
        if not (-HALF_PI - tol <= self.elevation <= HALF_PI + tol):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")

    def __iter__(self):
        yield self.azimuth
        yield self.elevation


@dataclass(frozen=True, eq=False)
class AngleGrid:
    """Ordered list of (azimuth, elevation) pairs.

    ``kind`` is ``"configuration"`` for the N-point grid the RIS codebook is
    built from and ``"search"`` for the dense grid the AoA estimator scans.
    """

    azimuth: np.ndarray
    elevation: np.ndarray
    kind: str = "search"
    pitch: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.azimuth.shape != self.elevation.shape or self.azimuth.ndim != 1:
            raise ValueError("azimuth and elevation must be 1-D arrays of equal length")
        if self.kind not in ("configuration", "search"):
            raise ValueError(f"unknown grid kind {self.kind!r}")

    def __len__(self) -> int:
        return self.azimuth.size

    def __getitem__(self, i: int) -> Aoa:
        return Aoa(float(self.azimuth[i]), float(self.elevation[i]))

    def responses(self, geom: ArrayGeometry) -> np.ndarray:
        """(len(grid), N) matrix whose rows are the array responses."""
        key = ("responses", geom)
        if key not in self._cache:
            self._cache[key] = array_response_matrix(geom, self.azimuth, self.elevation)
        return self._cache[key]


def steering_phases(geom: ArrayGeometry, aoa: Aoa) -> tuple[float, float]:
    """Inter-element phase increments (psi_h, psi_v) for a plane wave from ``aoa``."""
    az, el = aoa
    psi_h = 2 * np.pi * geom.delta_h * np.sin(az) * np.cos(el)
    psi_v = 2 * np.pi * geom.delta_v * np.sin(el)
    return float(psi_h), float(psi_v)


def array_response_matrix(geom: ArrayGeometry, azimuth, elevation) -> np.ndarray:
    """Vectorised array response; one row per (azimuth, elevation) pair.

    Entries are ``exp(-j (n_h psi_h + n_v psi_v))``, i.e. the conjugated
    phase progression (the response vector is written with a Hermitian
    transpose).
    """
    az = np.atleast_1d(np.asarray(azimuth, dtype=float))
    el = np.atleast_1d(np.asarray(elevation, dtype=float))
    psi_h = 2 * np.pi * geom.delta_h * np.sin(az) * np.cos(el)
    psi_v = 2 * np.pi * geom.delta_v * np.sin(el)
    n_h_idx, n_v_idx = geom.element_indices()
    phase = np.outer(psi_h, n_h_idx) + np.outer(psi_v, n_v_idx)
    return np.exp(-1j * phase)


def array_response(geom: ArrayGeometry, aoa: Aoa) -> np.ndarray:
    """Length-N unit-modulus response vector for ``aoa``."""
    return array_response_matrix(geom, aoa.azimuth, aoa.elevation)[0]


def _grid_indices(count: int) -> np.ndarray:
    return np.arange(-((count - 1) // 2), count // 2 + 1)


def configuration_angle_grid(geom: ArrayGeometry) -> AngleGrid:
    """The N angle pairs ``arcsin(2m / N_H) x arcsin(2m / N_V)`` used for the codebook."""
    az = np.arcsin(np.clip(2 * _grid_indices(geom.n_h) / geom.n_h, -1, 1))
    el = np.arcsin(np.clip(2 * _grid_indices(geom.n_v) / geom.n_v, -1, 1))
    el_g, az_g = np.meshgrid(el, az, indexing="ij")
    return AngleGrid(az_g.ravel(), el_g.ravel(), kind="configuration")


def search_grid(res_az: int = 181, res_el: int = 181) -> AngleGrid:
    """Uniform grid over [-pi/2, pi/2]^2 including the endpoints."""
    if res_az < 2 or res_el < 2:
        raise ValueError(f"search grid resolution must be >= 2, got ({res_az}, {res_el})")
    az = np.linspace(-HALF_PI, HALF_PI, res_az)
    el = np.linspace(-HALF_PI, HALF_PI, res_el)
    el_g, az_g = np.meshgrid(el, az, indexing="ij")
    pitch = min(np.pi / (res_az - 1), np.pi / (res_el - 1))
    return AngleGrid(az_g.ravel(), el_g.ravel(), kind="search", pitch=pitch)


def refinement_grid(center: Aoa, pitch: float = np.deg2rad(0.1), points: int = 11) -> AngleGrid:
    """Local ``points x points`` grid around ``center``, clipped to the angle domain.

    The center itself is always included.
    """
    offsets = (np.arange(points) - (points - 1) / 2) * pitch
    az = np.unique(np.clip(center.azimuth + offsets, -HALF_PI, HALF_PI))
    el = np.unique(np.clip(center.elevation + offsets, -HALF_PI, HALF_PI))
    el_g, az_g = np.meshgrid(el, az, indexing="ij")
    return AngleGrid(az_g.ravel(), el_g.ravel(), kind="search", pitch=pitch)
