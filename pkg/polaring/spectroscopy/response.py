"""
Third-order one-exciton response functions in the impulsive limit.

Every pathway is a quadruple site sum

    R = sum_{m m1 m2 m3} C(m, m1, m2, m3) alpha*_{m1 m}(t1) alpha_{m2 m3}(t2)
        exp(-|lam_{m m1}(t1)|^2/2 - |lam_{m3 m2}(t2)|^2/2)
        exp(sum_q lam*_{m m1 q}(t1) lam_{m3 m2 q}(t2) e^(i w_q t_ph)) F(tau, T_w, t)

with the pathway times

    R1: t1 = T_w,        t2 = tau + T_w + t,  t_ph = t
    R2: t1 = tau + T_w,  t2 = T_w + t,        t_ph = t
    R3: t1 = tau,        t2 = t,              t_ph = T_w + t
    R4: t1 = -t,         t2 = tau,            t_ph = -T_w

alpha_{m1 m}(t) and lam_{m m1 q}(t) come from a trajectory started on site
m. Negative times use time reversal of the closed D1 dynamics:
alpha(-t) = alpha(t)^*, lam_q(-t) = lam_{-q}(t)^*.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from polaring.dynamics.integrate import propagate_ensemble
from polaring.dynamics.state import D1State, IntegratorConfig
from polaring.errors import TrajectoryAborted
from polaring.model.bath import PhononBath, reversed_momentum_index
from polaring.model.exciton import ExcitonMatrix
from polaring.model.geometry import RingGeometry
from polaring.spectroscopy.lineshape import BathLineshapeParams, lineshape_factors

logger = logging.getLogger(__name__)

DEFAULT_T_MAX = 400.0
DEFAULT_STEP = 2.0
POINT_CHUNK = 64
GRID_TOL = 1e-6


def orientation_factor(dipoles: np.ndarray, m: int, m1: int, m2: int, m3: int) -> float:
    """Isotropic average of four dipole projections for parallel beam polarizations."""
    d = np.asarray(dipoles, dtype=float)
    p = d @ d.T
    return float(p[m, m1] * p[m2, m3] + p[m, m2] * p[m1, m3] + p[m, m3] * p[m2, m1]) / 15.0


def orientation_tensor(dipoles: np.ndarray) -> np.ndarray:
    """C[m, m1, m2, m3] for every site quadruple."""
    d = np.asarray(dipoles, dtype=float)
    p = d @ d.T
    return (
        np.einsum("ab,cd->abcd", p, p)
        + np.einsum("ac,bd->abcd", p, p)
        + np.einsum("ad,cb->abcd", p, p)
    ) / 15.0


@dataclass(frozen=True)
class AmplitudeTable:
    """
    alpha_table[m, m1, i] = alpha_{m1 m}(times[i]) for a start on site m;
    lambda_table[m, m1, q, i] are the matching displacements.
    """
    times: np.ndarray
    alpha_table: np.ndarray
    lambda_table: np.ndarray
    omega_q: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.alpha_table.shape[0]

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def displaced(self) -> bool:
        return bool(np.any(self.lambda_table != 0.0))


def build_amplitude_table(
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    cfg: IntegratorConfig,
) -> AmplitudeTable:
    """
    Propagate one closed trajectory from every site on a shared grid.

    Raises:
        TrajectoryAborted: if any of the N propagations went non-finite
    """
    k = model.k if isinstance(model, ExcitonMatrix) else np.asarray(model, dtype=float)
    n = k.shape[-1]
    initial = D1State.from_amplitudes(np.eye(n, dtype=complex), bath.n_modes)
    run = propagate_ensemble(initial, k, bath, None, cfg)
    if np.any(run.aborted):
        first = int(np.flatnonzero(run.aborted)[0])
        raise TrajectoryAborted(
            f"amplitude table rejected: propagation from site {first} went non-finite",
            step=int(run.abort_step[first]),
        )
    return AmplitudeTable(
        times=run.times,
        alpha_table=np.moveaxis(run.alpha, 1, -1),
        lambda_table=np.moveaxis(run.lam, 1, -1),
        omega_q=bath.omega_q_rad,
    )


def table_config(t_max_needed: float, step: float, dt: float = 0.05, eps: float = 1e-8) -> IntegratorConfig:
    """Integrator settings whose record grid has spacing ``step`` up to ``t_max_needed``."""
    stride = int(round(step / dt))
    if stride < 1 or abs(stride * dt - step) > GRID_TOL:
        raise ValueError(f"spectral step {step} fs is not a multiple of dt = {dt} fs")
    n_records = int(np.ceil(t_max_needed / step - GRID_TOL))
    return IntegratorConfig(dt=dt, t_max=n_records * step, record_stride=stride, regularization_eps=eps)


@dataclass(frozen=True)
class ResponseGrid:
    tau_grid: np.ndarray
    t_grid: np.ndarray
    t_w: float
    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    r4: np.ndarray
    n_members: int = 1

    @property
    def rephasing(self) -> np.ndarray:
        return self.r2 + self.r3

    @property
    def nonrephasing(self) -> np.ndarray:
        return self.r1 + self.r4


class _SignedTable:
    """Flattened amplitudes on signed step indices -(T-1) .. T-1."""

    def __init__(self, table: AmplitudeTable):
        n = table.n_sites
        count = table.times.size
        alpha = np.moveaxis(table.alpha_table, -1, 0).reshape(count, n * n)
        lam = np.moveaxis(table.lambda_table, -1, 0).reshape(count, n * n, -1)
        reverse = reversed_momentum_index(lam.shape[-1])

        self.offset = count - 1
        self.alpha = np.concatenate([alpha[:0:-1].conj(), alpha])
        self.lam = np.concatenate([lam[:0:-1][..., reverse].conj(), lam])
        half_norm = 0.5 * np.sum(np.abs(self.lam) ** 2, axis=-1)
        self.bra = self.alpha.conj() * np.exp(-half_norm)
        self.ket = self.alpha * np.exp(-half_norm)
        self.displaced = table.displaced

    def index(self, times: np.ndarray, step: float) -> np.ndarray:
        raw = np.asarray(times) / step
        steps = np.rint(raw).astype(int)
        if np.any(np.abs(raw - steps) > GRID_TOL) or np.any(np.abs(steps) > self.offset):
            raise ValueError("response grid is not covered by the amplitude table")
        return steps + self.offset


def _pathway(
    signed: _SignedTable,
    cbar: np.ndarray,
    omega: np.ndarray,
    i1: np.ndarray,
    i2: np.ndarray,
    t_ph: np.ndarray,
) -> np.ndarray:
    """Site sums for flat point lists of bra index, ket index and phonon phase time."""
    bra = signed.bra[i1]
    ket = signed.ket[i2]
    if not signed.displaced:
        return np.einsum("pa,ab,pb->p", bra, cbar, ket)

    out = np.empty(i1.size, dtype=complex)
    for start in range(0, i1.size, POINT_CHUNK):
        sl = slice(start, start + POINT_CHUNK)
        lam_bra = signed.lam[i1[sl]].conj()
        lam_ket = signed.lam[i2[sl]] * np.exp(1j * np.outer(t_ph[sl], omega))[:, None, :]
        overlap = np.exp(lam_bra @ np.swapaxes(lam_ket, -1, -2))
        weights = bra[sl][:, :, None] * cbar[None] * ket[sl][:, None, :]
        out[sl] = np.sum(weights * overlap, axis=(-2, -1))
    return out


def default_grid(t_max: float = DEFAULT_T_MAX, step: float = DEFAULT_STEP) -> np.ndarray:
    return np.arange(int(round(t_max / step)) + 1) * step


def response_functions(
    table: AmplitudeTable,
    geometry: Union[RingGeometry, np.ndarray],
    p: BathLineshapeParams,
    t_w: float,
    tau_grid: Optional[np.ndarray] = None,
    t_grid: Optional[np.ndarray] = None,
) -> ResponseGrid:
    """
    R1..R4 on the (tau, t) grid at waiting time ``t_w`` (fs).

    Args:
        table: Amplitude table covering max(tau) + t_w + max(t)
        geometry: Ring, or an (N, 3) array of unit dipoles
        p: Drude-Lorentz bath parameters
        t_w: Waiting time in fs
        tau_grid: Coherence times (default 0..400 fs in 2 fs steps)
        t_grid: Detection times (default 0..400 fs in 2 fs steps)

    Raises:
        ValueError: if the grids are not uniform or not covered by the table
    """
    tau_grid = default_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    t_grid = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    for grid in (tau_grid, t_grid):
        if grid.size > 2 and not np.allclose(np.diff(grid), grid[1] - grid[0]):
            raise ValueError("response grids must be uniform")
    if t_w < 0.0:
        raise ValueError("waiting time must be >= 0")

    dipoles = geometry.dipoles if isinstance(geometry, RingGeometry) else np.asarray(geometry, dtype=float)
    n = table.n_sites
    if dipoles.shape[0] != n:
        raise ValueError(f"{dipoles.shape[0]} dipoles for a {n}-site amplitude table")
    if table.times.size < 2:
        raise ValueError("amplitude table needs at least two time points")

    cbar = orientation_tensor(dipoles).transpose(0, 1, 3, 2).reshape(n * n, n * n)
    signed = _SignedTable(table)
    step = table.step

    tau, t = np.meshgrid(tau_grid, t_grid, indexing="ij")
    tau, t = tau.reshape(-1), t.reshape(-1)
    tw = np.full_like(t, float(t_w))
    pathways = (
        (tw, tau + tw + t, t),
        (tau + tw, tw + t, t),
        (tau, t, tw + t),
        (-t, tau, -tw),
    )
    factors = lineshape_factors(tau, tw, t, p)

    shape = (tau_grid.size, t_grid.size)
    out = []
    for (t1, t2, t_ph), f in zip(pathways, factors):
        i1 = signed.index(t1, step)
        i2 = signed.index(t2, step)
        out.append((_pathway(signed, cbar, table.omega_q, i1, i2, t_ph) * f).reshape(shape))

    logger.debug("response functions at T_w = %.1f fs on a %dx%d grid", t_w, *shape)
    return ResponseGrid(tau_grid, t_grid, float(t_w), *out)


def average_responses(grids: Sequence[ResponseGrid]) -> ResponseGrid:
    """Member-weighted mean of response grids, accumulated in the given order."""
    if not grids:
        raise ValueError("cannot average an empty list of response grids")
    first = grids[0]
    total = sum(g.n_members for g in grids)
    acc = [np.zeros_like(first.r1) for _ in range(4)]
    for g in grids:
        if g.r1.shape != first.r1.shape or g.t_w != first.t_w:
            raise ValueError("response grids differ in shape or waiting time")
        w = g.n_members / total
        for slot, r in zip(acc, (g.r1, g.r2, g.r3, g.r4)):
            slot += w * r
    return ResponseGrid(first.tau_grid, first.t_grid, first.t_w, *acc, n_members=total)
