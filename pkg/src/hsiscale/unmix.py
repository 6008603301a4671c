"""Baseline unmixing: simplex-volume endmember extraction and constrained
least-squares abundances.

These are the reference downstream consumers used to judge whether scale
correction actually helps: extract endmembers, solve abundances under the
non-negativity and sum-to-one constraints, compare against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateDataError, DimensionError, NumericError, ValidationError
from .reduction import ReducedData

# weight of the sum-to-one row relative to the endmember column norms
ASC_WEIGHT = 1e3
KKT_TOL = 1e-8
ANC_TOL = 1e-8
ASC_TOL = 1e-6
NFINDR_STARTS = 3
# relative volume improvement required to accept a vertex swap
_SWAP_TOL = 1e-12


@dataclass(frozen=True)
class UnmixResult:
    """Estimated endmembers and abundances plus per-pixel fit residuals."""

    endmembers: np.ndarray          # (L, K)
    abundances: np.ndarray          # (K, N)
    per_pixel_residual: np.ndarray  # (N,)

    def __post_init__(self):
        a = np.asarray(self.abundances, dtype=np.float64)
        if np.min(a) < -ANC_TOL:
            raise ValidationError("abundances violate non-negativity")
        if np.max(np.abs(a.sum(axis=0) - 1.0)) > ASC_TOL:
            raise ValidationError("abundance columns must sum to one")


def fcls(pixels: np.ndarray, endmembers: np.ndarray) -> np.ndarray:
    """Fully constrained least-squares abundances, one pixel per column.

    Solves min ||y - M a||^2 subject to a >= 0 and sum(a) = 1 by active-set
    non-negative least squares on the sum-to-one-augmented system. Each
    solution is KKT-checked: no negative entries and complementary
    slackness within KKT_TOL.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    m = np.asarray(endmembers, dtype=np.float64)
    if pixels.ndim != 2 or m.ndim != 2 or pixels.shape[0] != m.shape[0]:
        raise DimensionError(
            f"incompatible shapes: pixels {pixels.shape}, endmembers {m.shape}"
        )
    delta = ASC_WEIGHT * float(np.mean(np.linalg.norm(m, axis=0)))
    # the solved system includes the sum-to-one row, which separates
    # signatures that differ only by scale; only signatures degenerate in
    # the augmented sense (e.g. exact duplicates) are unsolvable
    svals = np.linalg.svd(np.vstack([m, delta * np.ones((1, m.shape[1]))]), compute_uv=False)
    if svals[-1] <= 1e-10 * svals[0]:
        raise DimensionError("endmember matrix is rank-deficient")
    n_pixels = pixels.shape[1]
    out = np.empty((m.shape[1], n_pixels))
    for i in range(n_pixels):
        # badly scaled pixels fit poorly, which loosens the sum-to-one
        # row; escalate its weight until the constraint meets tolerance
        weight = delta
        for _ in range(4):
            aug = np.vstack([m, weight * np.ones((1, m.shape[1]))])
            target = np.concatenate([pixels[:, i], [weight]])
            sol, _ = nnls(aug, target)
            if abs(sol.sum() - 1.0) <= 0.1 * ASC_TOL:
                break
            weight *= 10.0
        dual = aug.T @ (aug @ sol - target)
        kkt_scale = 1.0 + float(np.abs(aug.T @ target).max())
        if np.abs(sol * dual).max() / kkt_scale > KKT_TOL:
            raise NumericError("active-set solve failed the KKT check", pixel_index=i)
        out[:, i] = sol
    return out


def unmix(pixels: np.ndarray, endmembers: np.ndarray) -> UnmixResult:
    """FCLS plus residual bookkeeping."""
    abundances = fcls(pixels, endmembers)
    residual = np.linalg.norm(pixels - endmembers @ abundances, axis=0)
    return UnmixResult(endmembers=endmembers, abundances=abundances, per_pixel_residual=residual)


def _simplex_volume(vertices: np.ndarray) -> float:
    """(k-1)-volume of the simplex spanned by the k columns of vertices."""
    edges = vertices[:, 1:] - vertices[:, :1]
    gram = edges.T @ edges
    det = float(np.linalg.det(gram))
    k = vertices.shape[1]
    return np.sqrt(max(det, 0.0)) / factorial(k - 1)


def _hull_distances(pixels: np.ndarray, anchor_set: np.ndarray) -> np.ndarray:
    """Distance from every pixel to the affine hull of the anchor columns."""
    base = anchor_set[:, :1]
    span = anchor_set[:, 1:] - base
    centered = pixels - base
    if span.shape[1] == 0:
        return np.linalg.norm(centered, axis=0)
    q, _ = np.linalg.qr(span)
    return np.linalg.norm(centered - q @ (q.T @ centered), axis=0)


def nfindr_extract(
    reduced: ReducedData,
    k: int,
    seed: int = 0,
    max_sweeps: int = 10,
) -> np.ndarray:
    """Endmembers as the pixel set of locally maximal simplex volume.

    Repeated single-vertex sweeps: each vertex is replaced by the pixel
    farthest from the affine hull of the remaining vertices whenever that
    grows the volume. Several seeded random starts are swept and the
    largest simplex wins. Returned signatures live in the original band
    space via the stored subspace basis.
    """
    pixels = reduced.pixels
    n = reduced.n_pixels
    if k < 2:
        raise DimensionError("endmember extraction needs k >= 2")
    if n < k:
        raise DimensionError(f"need at least {k} pixels, have {n}")
    if k > reduced.k + 1:
        raise DimensionError(
            f"a {k - 1}-simplex does not fit in a {reduced.k}-dimensional subspace"
        )
    rng = np.random.default_rng(seed)
    # flat simplexes have Gram determinants of rounding noise, whose square
    # root sits near sqrt(eps) times the edge-length scale
    degenerate_floor = 1e-7 * float(np.abs(pixels).max() or 1.0) ** (k - 1)

    best_idx = None
    best_vol = -1.0
    for _ in range(NFINDR_STARTS):
        idx = rng.choice(n, size=k, replace=False)
        vol = _simplex_volume(pixels[:, idx])
        for _ in range(max_sweeps):
            swapped = False
            for j in range(k):
                others = np.delete(idx, j)
                dist = _hull_distances(pixels, pixels[:, others])
                cand = int(np.argmax(dist))
                if dist[cand] > dist[idx[j]] * (1.0 + _SWAP_TOL) and cand not in others:
                    idx = idx.copy()
                    idx[j] = cand
                    swapped = True
            new_vol = _simplex_volume(pixels[:, idx])
            if new_vol < vol * (1.0 - 1e-9) and vol > degenerate_floor:
                raise NumericError("simplex volume decreased across a sweep")
            vol = new_vol
            if not swapped:
                break
        if vol > best_vol:
            best_vol = vol
            best_idx = idx

    if best_vol <= degenerate_floor:
        raise DegenerateDataError("pixel cloud is (nearly) coplanar; simplex volume vanishes")
    return reduced.basis.T @ pixels[:, best_idx]
