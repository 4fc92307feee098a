"""Spectral efficiency and estimation-error metrics."""

from __future__ import annotations

import numpy as np

from .channel import ChannelState


def received_amplitude(theta, state: ChannelState) -> complex:
    """Effective scalar channel ``sum_n h_n g_n theta_n + d``."""
    return complex(np.sum(state.cascaded * np.asarray(theta)) + state.d)


def se_achieved(theta, state: ChannelState, data_power: float, noise_power: float) -> float:
    """SE in bit/s/Hz for the RIS configuration ``theta``."""
    gain = abs(received_amplitude(theta, state)) ** 2
    return float(np.log2(1 + gain * data_power / noise_power))


def se_max(state: ChannelState, data_power: float, noise_power: float) -> float:
    """SE with every path combined coherently."""
    amp = np.sum(np.abs(state.cascaded)) + abs(state.d)
    return float(np.log2(1 + amp**2 * data_power / noise_power))


def nmse(g_hat, g) -> tuple[float, bool]:
    """Normalised squared error and a flag that is set when ``g`` is zero
    (the value is then the raw squared norm of ``g_hat``)."""
    g_hat, g = np.asarray(g_hat), np.asarray(g)
    if g_hat.shape != g.shape:
        raise ValueError(f"shape mismatch {g_hat.shape} vs {g.shape}")
    err = float(np.vdot(g_hat - g, g_hat - g).real)
    ref = float(np.vdot(g, g).real)
    if ref == 0:
        return err, True
    return err / ref, False
