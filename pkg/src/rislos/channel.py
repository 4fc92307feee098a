"""Ground-truth channels and noisy pilot synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .array import Aoa, ArrayGeometry, array_response


@dataclass(frozen=True)
class LosChannelParams:
    beta: float
    omega: float
    aoa: Aoa

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"channel gain must be non-negative, got {self.beta}")
        object.__setattr__(self, "omega", float(np.mod(self.omega, 2 * np.pi)))


@dataclass
class ChannelState:
    """UE-RIS LOS vector ``g``, direct scalar ``d`` and known RIS-BS vector ``h``."""

    g: np.ndarray
    d: complex
    h: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=complex)
        self.h = np.asarray(self.h, dtype=complex)
        self.d = complex(self.d)
        if self.g.shape != self.h.shape or self.g.ndim != 1:
            raise ValueError(f"g and h must be vectors of equal length, got {self.g.shape} and {self.h.shape}")

    @property
    def cascaded(self) -> np.ndarray:
        return self.h * self.g


@dataclass
class PilotSession:
    """Configurations used so far (rows of ``b_matrix``) and the matching observations.

    ``indices`` holds the codebook positions of the rows when the session was
    driven by a codebook, and ``history`` the per-iteration estimates.
    """

    b_matrix: np.ndarray
    y: np.ndarray
    pilot_power: float
    noise_power: float
    indices: list[int] = field(default_factory=list)
    history: list = field(default_factory=list)

    def __post_init__(self):
        self.b_matrix = np.atleast_2d(np.asarray(self.b_matrix, dtype=complex))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=complex))
        if self.b_matrix.shape[0] != self.y.size:
            raise ValueError(f"{self.b_matrix.shape[0]} configurations but {self.y.size} observations")

    @property
    def length(self) -> int:
        return self.y.size

    def append(self, theta: np.ndarray, y_l: complex, index: int | None = None) -> None:
        self.b_matrix = np.vstack([self.b_matrix, theta])
        self.y = np.append(self.y, y_l)
        if index is not None:
            self.indices.append(index)


@dataclass(frozen=True)
class LinkBudget:
    """Power bookkeeping with ``|h_n| = 1``.

    The per-element data SNR fixes ``beta = |h_n g_n|^2`` once the data and
    noise powers are chosen; the pilot power follows from the pilot SNR.
    """

    snr_d_db: float = -10.0
    snr_p_db: float = 0.0
    data_power: float = 1.0
    noise_power: float = 1.0

    @property
    def beta(self) -> float:
        return 10 ** (self.snr_d_db / 10) * self.noise_power / self.data_power

    @property
    def pilot_power(self) -> float:
        return self.data_power * 10 ** ((self.snr_p_db - self.snr_d_db) / 10)


def make_los_channel(params: LosChannelParams, geom: ArrayGeometry) -> np.ndarray:
    return np.sqrt(params.beta) * np.exp(1j * params.omega) * array_response(geom, params.aoa)


def cascade_diag(h) -> np.ndarray:
    """The diagonal operator diag(h) as a dense matrix."""
    return np.diag(np.asarray(h, dtype=complex))


def complex_normal(rng: np.random.Generator, variance: float, size=None):
    """Circularly-symmetric complex Gaussian samples."""
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def synth_received_pilots(state: ChannelState, b_matrix, pilot_power: float,
                          noise_power: float, rng: np.random.Generator) -> np.ndarray:
    """Received pilot vector ``(B diag(h) g + d 1) sqrt(P_p) + w``."""
    b = np.atleast_2d(np.asarray(b_matrix, dtype=complex))
    if b.shape[1] != state.g.size:
        raise ValueError(f"configuration length {b.shape[1]} does not match N={state.g.size}")
    if pilot_power < 0 or noise_power < 0:
        raise ValueError("powers must be non-negative")
    clean = (b @ state.cascaded + state.d) * np.sqrt(pilot_power)
    return clean + complex_normal(rng, noise_power, clean.shape)


def draw_direct_channel(per_element_gain: float, rng: np.random.Generator) -> complex:
    """Non-LOS direct path, ten times stronger than one cascaded element."""
    if per_element_gain < 0:
        raise ValueError("per-element gain must be non-negative")
    return complex(complex_normal(rng, 10 * per_element_gain))
