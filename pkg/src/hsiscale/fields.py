"""Stationary Gaussian random fields on a grid via circulant embedding.

The target covariance is laid out on a torus at least twice the requested
size, diagonalized with the FFT, and sampled spectrally. If the embedding
is not positive semi-definite the torus is enlarged; persistent failure is
reported rather than silently fixed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import GenerationError

# negative eigenvalues up to this fraction of the largest are clipped;
# such residual mass is negligible for sampling (Matern embeddings keep a
# tiny indefinite tail at any practical torus size)
_EMBED_TOL = 1e-4
_PAD_FACTORS = (2, 4, 8)


def spherical_covariance(r: np.ndarray, corr_length: float) -> np.ndarray:
    """Spherical covariance model with range ``corr_length`` (C(0) = 1)."""
    x = np.minimum(np.asarray(r, dtype=np.float64) / corr_length, 1.0)
    return 1.0 - 1.5 * x + 0.5 * x**3


def matern_covariance(r: np.ndarray, corr_length: float, nu: float) -> np.ndarray:
    """Matern covariance with smoothness ``nu`` and length scale ``corr_length``."""
    r = np.asarray(r, dtype=np.float64)
    scaled = math.sqrt(2.0 * nu) * r / corr_length
    out = np.ones_like(scaled)
    pos = scaled > 0
    with np.errstate(over="ignore", invalid="ignore"):
        vals = (
            (2.0 ** (1.0 - nu) / special.gamma(nu))
            * scaled[pos] ** nu
            * special.kv(nu, scaled[pos])
        )
    out[pos] = np.nan_to_num(vals, nan=0.0, posinf=0.0, neginf=0.0)
    return out


def gaussian_random_field(
    height: int,
    width: int,
    covariance,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one zero-mean field with the given isotropic covariance.

    ``covariance`` maps a distance array (in pixels) to covariance values
    with ``covariance(0) == 1``. Marginal variance is 1 up to embedding
    rounding; callers wanting exact sample moments standardize afterwards.
    """
    last_min = None
    for factor in _PAD_FACTORS:
        m1, m2 = factor * height, factor * width
        ii = np.arange(m1)
        jj = np.arange(m2)
        dx = np.minimum(ii, m1 - ii)
        dy = np.minimum(jj, m2 - jj)
        r = np.hypot(dx[:, None], dy[None, :])
        cov = covariance(r)
        eig = np.fft.fft2(cov).real
        last_min = float(eig.min())
        if last_min < -_EMBED_TOL * float(eig.max()):
            continue  # embedding not PSD at this size; enlarge the torus
        eig = np.clip(eig, 0.0, None)
        noise = rng.standard_normal((m1, m2)) + 1j * rng.standard_normal((m1, m2))
        field = np.fft.ifft2(np.sqrt(eig) * noise).real * math.sqrt(m1 * m2)
        return field[:height, :width]
    raise GenerationError(
        f"circulant embedding stayed indefinite up to {_PAD_FACTORS[-1]}x padding "
        f"(most negative eigenvalue {last_min:.3e})"
    )
