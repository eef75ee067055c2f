"""
Brody distribution and its maximum-likelihood fit.

    P(s) = A (beta + 1) s^beta exp(-A s^(beta+1)),  A = Gamma((beta+2)/(beta+1))^(beta+1)

beta = 0 is Poisson (localized), beta = 1 the Wigner surmise (diffusive).
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gamma

if TYPE_CHECKING:
    from polaring.statics.unfolding import SpacingEnsemble

BETA_BOUNDS = (0.0, 1.2)
BETA_TOL = 1e-4
SPACING_FLOOR = 1e-12
MIN_SAMPLES = 500

DIFFUSIVE = "diffusive"
INTERMEDIATE = "intermediate"
LOCALIZED = "localized"


def brody_normalization(beta: float) -> float:
    """A(beta); keeps the mean spacing at 1."""
    return float(gamma((beta + 2.0) / (beta + 1.0)) ** (beta + 1.0))


def brody_pdf(s, beta: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    a = brody_normalization(beta)
    return a * (beta + 1.0) * s**beta * np.exp(-a * s ** (beta + 1.0))


def sample_brody(beta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw spacings by inverting the CDF 1 - exp(-A s^(beta+1))."""
    a = brody_normalization(beta)
    u = rng.random(size)
    return (-np.log1p(-u) / a) ** (1.0 / (beta + 1.0))


def classify_beta(beta: float) -> str:
    if beta > 0.9:
        return DIFFUSIVE
    if beta >= 0.5:
        return INTERMEDIATE
    return LOCALIZED


@dataclass(frozen=True)
class BrodyFit:
    """Maximum-likelihood Brody parameter of one spacing sample."""
    beta: float
    normalization_A: float
    log_likelihood: float
    n_samples: int

    @property
    def classification(self) -> str:
        return classify_beta(self.beta)


def brody_log_likelihood(beta: float, spacings: np.ndarray) -> float:
    s = np.maximum(spacings, SPACING_FLOOR)
    a = brody_normalization(beta)
    n = s.size
    return float(
        n * np.log(a) + n * np.log(beta + 1.0) + beta * np.sum(np.log(s)) - a * np.sum(s ** (beta + 1.0))
    )


def fit_brody(sample: Union["SpacingEnsemble", np.ndarray], min_samples: Optional[int] = MIN_SAMPLES) -> BrodyFit:
    """
    Fit beta on [0, 1.2] by maximum likelihood.

    Args:
        sample: SpacingEnsemble or a flat array of unfolded spacings
        min_samples: Smallest accepted sample; None disables the check

    Raises:
        ValueError: for an empty or too small sample
    """
    spacings = np.asarray(getattr(sample, "unfolded_spacings", sample), dtype=float).ravel()
    if spacings.size == 0:
        raise ValueError("cannot fit an empty spacing sample")
    if min_samples is not None and spacings.size < min_samples:
        raise ValueError(f"need at least {min_samples} spacings, got {spacings.size}")

    def negative(beta: float) -> float:
        return -brody_log_likelihood(beta, spacings)

    result = minimize_scalar(negative, bounds=BETA_BOUNDS, method="bounded", options={"xatol": BETA_TOL})
    candidates = [float(result.x), *BETA_BOUNDS]
    values = [negative(b) for b in candidates]
    beta = candidates[int(np.argmin(values))]
    return BrodyFit(
        beta=beta,
        normalization_A=brody_normalization(beta),
        log_likelihood=-min(values),
        n_samples=int(spacings.size),
    )
