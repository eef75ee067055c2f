"""
Accuracy of the variational dynamics.

The deviation vector |delta> = i d/dt|D1> - H|D1> measures how far the
trial state strays from the exact Schroedinger evolution. Its norm is
evaluated in closed form with coherent-state algebra:

    <delta|delta> = <D1'|D1'> + <D1|H^2|D1> - 2 Im <D1'|H|D1>

where |D1'> = d/dt|D1>. Both |D1'> and H|D1> restricted to site n are
sums of terms (x + sum_q y_q b_q^+)|lam>, whose overlaps are

    <lam|(x^* + y^*.b)(x' + y'.b^+)|lam'> =
        S [x^* x' + x^* y'.lam^* + x' y^*.lam' + y^*.y' + (y^*.lam')(y'.lam^*)]
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np

from polaring.dynamics.eom import EquationsOfMotion, debye_waller_matrix
from polaring.dynamics.state import D1State, SinkSpec, TrajectorySnapshot
from polaring.model.bath import PhononBath
from polaring.model.exciton import ExcitonMatrix


def _deviation_squared(eom: EquationsOfMotion, alpha, lam, dalpha, dlam) -> np.ndarray:
    s = debye_waller_matrix(lam)
    lam_c = lam.conj()

    # d/dt|D1> on site n: (A_n + B_n . b^+)|lam_n>
    kappa = -np.sum(dlam * lam_c, axis=-1).real
    a = dalpha + alpha * kappa
    b = alpha[..., :, None] * dlam
    b_lam = np.sum(b * lam_c, axis=-1)
    dot_dot = np.sum(np.abs(a + b_lam) ** 2, axis=-1) + np.sum(np.abs(b) ** 2, axis=(-2, -1))

    # H|D1> on site n: sum_m x_nm |lam_m> + alpha_n (v_n . b^+)|lam_n>
    local = -np.sum(eom.coupling.conj() * lam, axis=-1)
    v = eom.omega * lam - eom.coupling
    x = eom.k_effective * alpha[..., None, :]
    diag = np.arange(alpha.shape[-1])
    x = x + 0j
    x[..., diag, diag] += alpha * local
    x_c = x.conj()

    sx = x @ np.swapaxes(s, -1, -2)
    h_h = np.sum(x_c * sx, axis=(-2, -1))
    lam_v = np.einsum("...mq,...nq->...mn", lam_c, v)
    p = s * lam_v
    h_h = h_h + 2.0 * np.einsum("...n,...nm,...mn->...", alpha, x_c, p).real
    v_lam = np.sum(v * lam_c, axis=-1)
    h_h = h_h + np.sum(np.abs(alpha) ** 2 * (np.sum(np.abs(v) ** 2, axis=-1) + np.abs(v_lam) ** 2), axis=-1)

    # <D1'|H|D1>
    b_l = np.einsum("...nq,...mq->...nm", b.conj(), lam)
    cross = np.sum(s * x * (a.conj()[..., :, None] + b_l), axis=(-2, -1))
    y = alpha[..., :, None] * v
    y_lam = np.sum(y * lam_c, axis=-1)
    cross = cross + np.sum(
        a.conj() * y_lam + np.sum(b.conj() * y, axis=-1) + b_lam.conj() * y_lam, axis=-1
    )

    return dot_dot + h_h.real - 2.0 * cross.imag


def deviation_from_eom(
    eom: EquationsOfMotion,
    alpha: np.ndarray,
    lam: np.ndarray,
    rhs: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """Deviation amplitude in omega0 units; accepts batched arrays."""
    dalpha, dlam = rhs if rhs is not None else eom(alpha, lam)
    squared = _deviation_squared(eom, alpha, lam, dalpha, dlam)
    return np.sqrt(np.clip(squared, 0.0, None)) / eom.omega0


def deviation_amplitude(
    state: D1State,
    rhs: Tuple[np.ndarray, np.ndarray],
    model: Union[ExcitonMatrix, np.ndarray],
    bath: PhononBath,
    sink: Optional[SinkSpec] = None,
) -> float:
    """
    Delta(t) = || i d/dt|D1> - H|D1> || in units of omega0.

    Args:
        state: Current trial state
        rhs: (dalpha/dt, dlam/dt) evaluated at ``state``
        model: Exciton matrix of the run
        bath: Phonon bath of the run
        sink: The sink used for ``rhs``, if any
    """
    eom = EquationsOfMotion.build(model, bath, sink)
    return float(deviation_from_eom(eom, state.alpha, state.lam, rhs))


def relative_deviation(trajectory: Sequence[TrajectorySnapshot]) -> Optional[float]:
    """
    max_t Delta(t) / mean_t E_ph(t).

    Returns:
        The ratio, or None when the phonon energy vanishes along the whole
        trajectory (uncoupled bath).
    """
    if len(trajectory) < 2:
        raise ValueError("relative deviation needs at least two snapshots")
    deviation = np.array([snap.deviation_amplitude for snap in trajectory])
    phonon = np.array([snap.phonon_energy for snap in trajectory])
    mean_phonon = float(np.mean(phonon))
    if not mean_phonon > 0.0:
        return None
    return float(np.max(deviation) / mean_phonon)
