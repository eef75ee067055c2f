"""
Fixed-step RK4 propagation of D1 trajectories.

A batch of independent trajectories (for example the realizations of one
disorder batch, or every initial site of an amplitude table) is advanced
together along a leading axis. Members that go non-finite are frozen and
flagged; the others are unaffected.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from polaring.dynamics.accuracy import deviation_from_eom
from polaring.dynamics.eom import EquationsOfMotion
from polaring.dynamics.state import D1State, IntegratorConfig, SinkSpec, TrajectorySnapshot
from polaring.errors import TrajectoryAborted
from polaring.model.bath import PhononBath
from polaring.model.exciton import ExcitonMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleTrajectory:
    """Recorded batch: alpha (B, T, N), lam (B, T, N, Nq), per-member flags."""
    times: np.ndarray
    alpha: np.ndarray
    lam: np.ndarray
    deviation: np.ndarray
    phonon_energy: np.ndarray
    aborted: np.ndarray
    abort_step: np.ndarray

    @property
    def n_members(self) -> int:
        return self.alpha.shape[0]

    def member(self, index: int) -> List[TrajectorySnapshot]:
        return [
            TrajectorySnapshot(
                time=float(t),
                alpha=self.alpha[index, i],
                lam=self.lam[index, i],
                deviation_amplitude=float(self.deviation[index, i]),
                phonon_energy=float(self.phonon_energy[index, i]),
            )
            for i, t in enumerate(self.times)
        ]


def rk4_step(eom: EquationsOfMotion, alpha: np.ndarray, lam: np.ndarray, dt: float):
    k1a, k1l = eom(alpha, lam)
    k2a, k2l = eom(alpha + 0.5 * dt * k1a, lam + 0.5 * dt * k1l)
    k3a, k3l = eom(alpha + 0.5 * dt * k2a, lam + 0.5 * dt * k2l)
    k4a, k4l = eom(alpha + dt * k3a, lam + dt * k3l)
    alpha = alpha + (dt / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    lam = lam + (dt / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
    return alpha, lam


def _phonon_energy(eom: EquationsOfMotion, alpha: np.ndarray, lam: np.ndarray) -> np.ndarray:
    weights = np.abs(alpha) ** 2
    return np.sum(weights * np.sum(eom.omega * np.abs(lam) ** 2, axis=-1), axis=-1) / eom.omega0


def integrate(
    eom: EquationsOfMotion,
    alpha0: np.ndarray,
    lam0: np.ndarray,
    cfg: IntegratorConfig,
) -> EnsembleTrajectory:
    """Advance a batch of states (leading axis B) and record every stride."""
    alpha = np.array(alpha0, dtype=complex)
    lam = np.array(lam0, dtype=complex)
    n_members = alpha.shape[0]
    record = cfg.record_steps
    n_rec = record.size

    alpha_out = np.zeros((n_members, n_rec) + alpha.shape[1:], dtype=complex)
    lam_out = np.zeros((n_members, n_rec) + lam.shape[1:], dtype=complex)
    deviation = np.zeros((n_members, n_rec))
    phonon = np.zeros((n_members, n_rec))
    aborted = np.zeros(n_members, dtype=bool)
    abort_step = np.full(n_members, -1)

    slot = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(cfg.n_steps + 1):
            if slot < n_rec and step == record[slot]:
                rhs = eom(alpha, lam)
                alpha_out[:, slot] = alpha
                lam_out[:, slot] = lam
                deviation[:, slot] = deviation_from_eom(eom, alpha, lam, rhs)
                phonon[:, slot] = _phonon_energy(eom, alpha, lam)
                slot += 1
            if step == cfg.n_steps:
                break
            alpha, lam = rk4_step(eom, alpha, lam, cfg.dt)

            finite = np.all(np.isfinite(alpha), axis=-1) & np.all(np.isfinite(lam), axis=(-2, -1))
            fresh = ~finite & ~aborted
            if np.any(fresh):
                aborted |= fresh
                abort_step[fresh] = step + 1
                alpha[fresh] = 0.0
                lam[fresh] = 0.0
                logger.warning(
                    "trajectory member(s) %s went non-finite at step %d", np.flatnonzero(fresh).tolist(), step + 1
                )

    return EnsembleTrajectory(
        times=cfg.record_times,
        alpha=alpha_out,
        lam=lam_out,
        deviation=deviation,
        phonon_energy=phonon,
        aborted=aborted,
        abort_step=abort_step,
    )


def propagate_ensemble(
    initial: D1State,
    models: Union[ExcitonMatrix, np.ndarray, Sequence[ExcitonMatrix]],
    bath: PhononBath,
    sink: Optional[SinkSpec],
    cfg: IntegratorConfig,
) -> EnsembleTrajectory:
    """
    Propagate a batch.

    Args:
        initial: State with a leading batch axis, or a single state shared by all models
        models: One exciton matrix for all members, or one per member
        bath: Shared phonon bath
        sink: Optional sink shared by all members
        cfg: Integrator settings
    """
    cfg.check_stability(bath)
    if isinstance(models, (list, tuple)):
        k = np.stack([m.k for m in models])
    else:
        k = models.k if isinstance(models, ExcitonMatrix) else np.asarray(models, dtype=float)

    alpha, lam = initial.alpha, initial.lam
    if alpha.ndim == 1:
        batch = k.shape[0] if k.ndim == 3 else 1
        alpha = np.broadcast_to(alpha, (batch,) + alpha.shape)
        lam = np.broadcast_to(lam, (batch,) + lam.shape)

    eom = EquationsOfMotion.build(k, bath, sink, cfg.regularization_eps)
    return integrate(eom, alpha, lam, cfg)


def propagate(
    initial: D1State,
    model: ExcitonMatrix,
    bath: PhononBath,
    sink: Optional[SinkSpec] = None,
    cfg: Optional[IntegratorConfig] = None,
) -> List[TrajectorySnapshot]:
    """
    Propagate one trajectory with RK4.

    Raises:
        ConfigError: if the step violates the stability guard
        TrajectoryAborted: if the state goes non-finite
    """
    cfg = cfg or IntegratorConfig()
    run = propagate_ensemble(initial, model, bath, sink, cfg)
    if run.aborted[0]:
        raise TrajectoryAborted("trajectory went non-finite", step=int(run.abort_step[0]))
    return run.member(0)
