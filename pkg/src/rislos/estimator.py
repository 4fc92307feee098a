"""Parametric maximum-likelihood estimation of the LOS UE-RIS channel and the
direct channel, plus the least-squares baseline.

Pilot model: ``y = (B diag(h) g + d 1) sqrt(P_p) + w`` with
``g = sqrt(beta) e^{j omega} a(phi)`` and ``d = sqrt(alpha) e^{j vartheta}``.
Concentrating out the gains and phases leaves a 2-D search over the AoA of

    |y^H P v(phi)|^2 / ||P v(phi)||^2,   v(phi) = B diag(h) a(phi),

where ``P = I - 11^T / L`` removes the common (direct-path) component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import Aoa, AngleGrid, ArrayGeometry, array_response, refinement_grid

DEGENERACY_RTOL = 1e-9
# objective values this close to the maximum count as ties (resolved by grid index)
TIE_RTOL = 1e-12


class EstimationError(Exception):
    pass


class DegenerateDirection(EstimationError):
    """Cascaded response is (numerically) constant across pilots at this angle."""


class AllDegenerate(EstimationError):
    """No point of the search grid yields a usable objective."""


@dataclass
class Estimate:
    aoa_hat: Aoa
    omega_hat: float
    beta_hat: float
    vartheta_hat: float
    alpha_hat: float
    g_hat: np.ndarray
    d_hat: complex
    objective: float


def first_argmax(values: np.ndarray, rtol: float = TIE_RTOL) -> int:
    """Index of the maximum; near-ties go to the smallest index."""
    best = np.max(values)
    if not np.isfinite(best):
        raise AllDegenerate("no finite objective value")
    return int(np.flatnonzero(values >= best - rtol * abs(best))[0])


def _objective_from_projections(y: np.ndarray, v: np.ndarray):
    """Objective for every column of ``v`` (L x G) plus the centred correlations.

    Degenerate columns get ``-inf``.
    """
    L = y.size
    # y_c is orthogonal to 1, so correlating with v or its centred version is the same
    corr = (y - y.mean()).conj() @ v
    s = v.sum(axis=0)
    norm2 = np.einsum("lg,lg->g", v.real, v.real) + np.einsum("lg,lg->g", v.imag, v.imag)
    den = norm2 - (s.real**2 + s.imag**2) / L
    ok = den > DEGENERACY_RTOL * norm2
    obj = np.where(ok, (corr.real**2 + corr.imag**2) / np.where(ok, den, 1.0), -np.inf)
    return obj, corr, den


def _check_session(y, b_matrix, d_h):
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    b = np.atleast_2d(np.asarray(b_matrix, dtype=complex))
    h = np.asarray(d_h, dtype=complex)
    if h.ndim == 2:
        h = np.diag(h)
    if b.shape[0] != y.size:
        raise ValueError(f"{b.shape[0]} configurations but {y.size} observations")
    if b.shape[1] != h.size:
        raise ValueError(f"configuration length {b.shape[1]} does not match N={h.size}")
    if y.size < 2:
        raise ValueError("the ML estimator needs at least two pilots")
    return y, b, h


def mle_objective(y, b_matrix, d_h, aoa: Aoa, geom: ArrayGeometry) -> float:
    """Concentrated likelihood at a single AoA.

    ``d_h`` may be the vector ``h`` or the diagonal matrix. Raises
    :class:`DegenerateDirection` when ``B diag(h) a(aoa)`` is parallel to
    the all-ones vector.
    """
    y, b, h = _check_session(y, b_matrix, d_h)
    v = (b * h) @ array_response(geom, aoa)
    obj, _, _ = _objective_from_projections(y, v[:, None])
    if not np.isfinite(obj[0]):
        raise DegenerateDirection(f"cascaded response constant across pilots at {aoa}")
    return float(obj[0])


def _grid_projections(b, h, grid: AngleGrid, geom: ArrayGeometry) -> np.ndarray:
    return (b * h) @ grid.responses(geom).T


def estimate_aoa(y, b_matrix, d_h, grid: AngleGrid, geom: ArrayGeometry, *,
                 refine: bool = True, projections: np.ndarray | None = None) -> tuple[Aoa, float]:
    """Grid-search maximiser of the concentrated likelihood.

    When ``refine`` is set and ``grid`` is a search grid, an 11 x 11 pass
    at 0.1 degree pitch is run around the coarse maximiser. ``projections``
    may supply ``B diag(h) A^T`` for the grid to skip recomputing it.
    """
    y, b, h = _check_session(y, b_matrix, d_h)
    v = _grid_projections(b, h, grid, geom) if projections is None else projections
    obj, _, _ = _objective_from_projections(y, v)
    if not np.any(np.isfinite(obj)):
        raise AllDegenerate("every grid point is degenerate for this configuration set")
    best = first_argmax(obj)
    aoa, value = grid[best], float(obj[best])
    if refine and grid.kind == "search":
        local = refinement_grid(aoa)
        local_obj, _, _ = _objective_from_projections(y, _grid_projections(b, h, local, geom))
        # the coarse point keeps near-ties
        if np.max(local_obj) > value + TIE_RTOL * abs(value):
            i = first_argmax(local_obj)
            aoa, value = local[i], float(local_obj[i])
    return aoa, value


def estimate_given_aoa(y, b_matrix, d_h, pilot_power: float, aoa: Aoa,
                       geom: ArrayGeometry, objective: float | None = None) -> Estimate:
    """Closed-form gain and phase estimates once the AoA is fixed."""
    y, b, h = _check_session(y, b_matrix, d_h)
    L = y.size
    a = array_response(geom, aoa)
    v = (b * h) @ a
    v_c = v - v.mean()
    corr = (y - y.mean()).conj() @ v_c
    den = float(np.vdot(v_c, v_c).real)
    if den <= DEGENERACY_RTOL * float(np.vdot(v, v).real):
        raise DegenerateDirection(f"cascaded response constant across pilots at {aoa}")
    omega = float(np.mod(-np.angle(corr), 2 * np.pi))
    beta = (abs(corr) / den) ** 2 / pilot_power
    g_hat = np.sqrt(beta) * np.exp(1j * omega) * a
    resid = np.sum(y - np.sqrt(pilot_power) * ((b * h) @ g_hat))
    vartheta = float(np.mod(np.angle(resid), 2 * np.pi))
    alpha = abs(resid) ** 2 / (pilot_power * L**2)
    if objective is None:
        objective = abs(corr) ** 2 / den
    return Estimate(
        aoa_hat=aoa,
        omega_hat=omega,
        beta_hat=float(beta),
        vartheta_hat=vartheta,
        alpha_hat=float(alpha),
        g_hat=g_hat,
        d_hat=complex(np.sqrt(alpha) * np.exp(1j * vartheta)),
        objective=float(objective),
    )


def estimate_all(y, b_matrix, d_h, pilot_power: float, grid: AngleGrid, geom: ArrayGeometry, *,
                 refine: bool = True, projections: np.ndarray | None = None) -> Estimate:
    """Joint ML estimate of ``(phi, omega, beta, vartheta, alpha)``.

    Order matters: the AoA first, then the LOS phase and gain, then the
    direct path from the residual of the reconstructed cascaded channel.
    """
    aoa, value = estimate_aoa(y, b_matrix, d_h, grid, geom, refine=refine, projections=projections)
    return estimate_given_aoa(y, b_matrix, d_h, pilot_power, aoa, geom, objective=value)


def negative_log_likelihood(y, b_matrix, h, pilot_power: float, g, d) -> float:
    """Squared-norm misfit ``||y - (B diag(h) g + d 1) sqrt(P_p)||^2``."""
    b = np.atleast_2d(np.asarray(b_matrix, dtype=complex))
    r = np.asarray(y) - ((b * h) @ g + d) * np.sqrt(pilot_power)
    return float(np.vdot(r, r).real)


def ls_estimate(y, b_matrix, d_h, pilot_power: float) -> tuple[np.ndarray, complex]:
    """Unstructured least squares for ``(g, d)``; minimum-norm when underdetermined."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    b = np.atleast_2d(np.asarray(b_matrix, dtype=complex))
    h = np.asarray(d_h, dtype=complex)
    if h.ndim == 2:
        h = np.diag(h)
    m = np.hstack([b, np.ones((b.shape[0], 1))]) * np.sqrt(pilot_power)
    x = np.linalg.pinv(m) @ y
    return x[:-1] / h, complex(x[-1])


def dft_configurations(n: int, count: int) -> np.ndarray:
    """First ``count`` columns of the N x N DFT matrix, returned as rows."""
    k = np.arange(count)[:, None]
    return np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n)
