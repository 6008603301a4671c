"""Estimation and removal of per-pixel multiplicative scale factors.

The pixel cloud of a scale-distorted linear mixture lives on rays through
the origin; the undistorted mixture lives on a hyperplane crossing those
rays. The pipeline estimates that hyperplane (anchor point + unit normal),
reads each pixel's scale factor off the ray/hyperplane intersection, and
divides it out:

1. reduce the cube to the K-dimensional dominant subspace,
2. anchor the hyperplane at the mean reduced pixel,
3. seed a swarm with candidate normals solved from random pixel K-sets,
4. globally minimize the projection residual with PSO,
5. polish with projected gradient descent on the unit sphere,
6. divide every original pixel by its estimated factor.

The residual objective is scale- and sign-invariant in the normal, so all
searches operate on the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cube import HsiCube
from .errors import (
    DegenerateDataError,
    DimensionError,
    NearOrthogonalNormalError,
    NumericError,
    OptimizationError,
    ValidationError,
)
from .reduction import ReducedData, svd_reduce

# scale factors with magnitude below this are clamped before dividing
MU_FLOOR = 1e-3
# anchor-normal dot products below this fraction of the mean pixel norm
# count as "normal orthogonal to the data"; ratios are meaningless there
DENOM_FLOOR_REL = 1e-9
# candidate K-sets must be at least this fraction of the reference median
# pairwise distance apart, and decently conditioned
CANDIDATE_MIN_SEPARATION = 0.5
CANDIDATE_MAX_COND = 1e6
CANDIDATE_MAX_RETRIES = 20
_SEPARATION_SUBSAMPLE = 512
_ARMIJO_C = 1e-4


@dataclass(frozen=True)
class HyperplaneModel:
    """Point-normal form of the estimated mixing hyperplane.

    The normal is unit length with its sign fixed so ``c_star @ normal``
    is positive; ``denom`` caches that product.
    """

    c_star: np.ndarray
    normal: np.ndarray
    denom: float

    def __post_init__(self):
        c_star = np.asarray(self.c_star, dtype=np.float64)
        normal = np.asarray(self.normal, dtype=np.float64)
        if c_star.shape != normal.shape or c_star.ndim != 1:
            raise DimensionError("c_star and normal must be 1-D vectors of equal length")
        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValidationError("normal must have unit Euclidean norm")
        if not self.denom > 0:
            raise ValidationError("denom must be positive (sign convention)")
        c_star.setflags(write=False)
        normal.setflags(write=False)
        object.__setattr__(self, "c_star", c_star)
        object.__setattr__(self, "normal", normal)

    @staticmethod
    def build(c_star: np.ndarray, normal: np.ndarray, denom_floor: float) -> "HyperplaneModel":
        """Normalize, fix the sign, and reject near-orthogonal normals."""
        normal = np.asarray(normal, dtype=np.float64)
        norm = np.linalg.norm(normal)
        if norm == 0 or not np.all(np.isfinite(normal)):
            raise ValidationError("normal must be a finite nonzero vector")
        unit = normal / norm
        denom = float(c_star @ unit)
        if denom < 0:
            unit = -unit
            denom = -denom
        if denom <= denom_floor:
            raise NearOrthogonalNormalError(
                f"anchor-normal product {denom:.3e} below floor {denom_floor:.3e}"
            )
        return HyperplaneModel(c_star=c_star, normal=unit, denom=denom)


@dataclass(frozen=True)
class ScalingField:
    """Per-pixel positive scale factors, normalized to mean one."""

    values: np.ndarray
    clamped_count: int = 0

    MEAN_TOL = 1e-9

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise DimensionError("scaling field must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValidationError("scaling field contains non-finite values")
        if np.min(values) < MU_FLOOR * (1.0 - 1e-12):
            raise ValidationError(f"scaling factors must be >= {MU_FLOOR}")
        if abs(values.mean() - 1.0) > self.MEAN_TOL:
            raise ValidationError("scaling field mean must be 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @staticmethod
    def from_raw(values: np.ndarray, floor: float = MU_FLOOR) -> "ScalingField":
        """Clamp to the floor, renormalize to mean one, count clamp events."""
        mu = np.asarray(values, dtype=np.float64).copy()
        if not np.all(np.isfinite(mu)):
            bad = int(np.argmax(~np.isfinite(mu)))
            raise NumericError("non-finite scaling factor", pixel_index=bad)
        clamped = int(np.count_nonzero(mu < floor))
        for _ in range(10):
            np.clip(mu, floor, None, out=mu)
            mean = mu.mean()
            mu /= mean
            if np.min(mu) >= floor * (1.0 - 1e-12):
                break
        return ScalingField(values=mu, clamped_count=clamped)


@dataclass(frozen=True)
class PsoConfig:
    """Swarm search hyperparameters (constriction-style defaults)."""

    swarm_size: int = 64
    iterations: int = 150
    inertia: float = 0.72
    cognitive: float = 1.49
    social: float = 1.49
    seed: int = 0
    velocity_clamp: float = 0.2  # fraction of the unit-sphere diameter

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValidationError("swarm_size must be >= 2")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if not 0 < self.inertia < 1:
            raise ValidationError("inertia must be in (0, 1)")
        if self.cognitive <= 0 or self.social <= 0:
            raise ValidationError("cognitive and social weights must be positive")
        if self.velocity_clamp <= 0:
            raise ValidationError("velocity_clamp must be positive")


@dataclass(frozen=True)
class GdConfig:
    """Projected-gradient refinement settings.

    ``grad_tol`` is relative to the starting objective value; the loop
    stops once the tangential gradient norm falls below
    ``grad_tol * psi_start``.
    """

    max_iters: int = 500
    initial_step: float = 1e-2
    backtrack_factor: float = 0.5
    grad_tol: float = 1e-10
    step_tol: float = 1e-14

    def __post_init__(self):
        if min(self.max_iters, self.initial_step, self.grad_tol, self.step_tol) <= 0:
            raise ValidationError("all GD settings must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValidationError("backtrack_factor must be in (0, 1)")


@dataclass(frozen=True)
class CorrectionReport:
    """Diagnostics from one end-to-end correction run."""

    mu_hat: ScalingField
    model: HyperplaneModel
    psi_initial: float
    psi_after_pso: float
    psi_final: float
    clamped_pixels: int
    candidate_count: int
    seed: int
    degenerate_mode: bool = False

    def __post_init__(self):
        if not (self.psi_final <= self.psi_after_pso <= self.psi_initial):
            raise ValidationError(
                "objective must not increase through the pipeline: "
                f"{self.psi_initial} -> {self.psi_after_pso} -> {self.psi_final}"
            )

    def to_json_dict(self) -> dict:
        return {
            "psi_initial": self.psi_initial,
            "psi_after_pso": self.psi_after_pso,
            "psi_final": self.psi_final,
            "clamped_pixels": self.clamped_pixels,
            "candidate_count": self.candidate_count,
            "normal": [float(v) for v in self.model.normal],
            "c_star": [float(v) for v in self.model.c_star],
            "seed": self.seed,
            "degenerate_mode": self.degenerate_mode,
        }


def derive_seeds(rng_seed: int) -> tuple[int, int]:
    """Child seeds (candidate sampling, swarm search) from one master seed."""
    children = np.random.SeedSequence(rng_seed).spawn(2)
    return tuple(int(s.generate_state(1)[0]) for s in children)


def mean_point(reduced: ReducedData) -> np.ndarray:
    """Mean of the reduced pixels, summed compensated per coordinate."""
    if reduced.n_pixels < 1:
        raise DimensionError("cannot average an empty pixel set")
    n = reduced.n_pixels
    return np.array([math.fsum(row) / n for row in reduced.pixels])


def denom_floor_for(pixels: np.ndarray) -> float:
    """Orthogonality threshold scaled to the data magnitude."""
    return DENOM_FLOOR_REL * float(np.mean(np.linalg.norm(pixels, axis=0)))


def _clamp_mu(mu: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Sign-preserving magnitude clamp; returns (clamped values, mask)."""
    mask = np.abs(mu) < floor
    if not mask.any():
        return mu, mask
    out = mu.copy()
    signs = np.sign(out[mask])
    signs[signs == 0] = 1.0
    out[mask] = signs * floor
    return out, mask


def _psi_terms(pixels, sq_norms, c_star, normal, denom_floor, mu_floor):
    """Per-pixel squared projection residuals, or None when degenerate."""
    d = float(c_star @ normal)
    if abs(d) < denom_floor:
        return None, None
    s = normal @ pixels
    mu, clamp_mask = _clamp_mu(s / d, mu_floor)
    residuals = sq_norms * (1.0 - 1.0 / mu) ** 2
    return residuals, clamp_mask


def objective_psi(
    normal: np.ndarray,
    reduced: ReducedData,
    c_star: np.ndarray,
    mu_floor: float = MU_FLOOR,
) -> float:
    """Sum of squared distances between pixels and their ray projections.

    Each pixel is projected along its ray from the origin onto the
    hyperplane defined by (c_star, normal); the residual is the leftover
    displacement. Pixels whose scale ratio falls under ``mu_floor`` enter
    with the clamped ratio. Invariant to rescaling or flipping ``normal``.
    """
    pixels = reduced.pixels
    normal = np.asarray(normal, dtype=np.float64)
    if normal.shape != (reduced.k,):
        raise DimensionError(f"normal must have shape ({reduced.k},), got {normal.shape}")
    sq_norms = np.einsum("ij,ij->j", pixels, pixels)
    residuals, _ = _psi_terms(pixels, sq_norms, c_star, normal, denom_floor_for(pixels), mu_floor)
    if residuals is None:
        raise NearOrthogonalNormalError("normal is orthogonal to the anchor point")
    return float(residuals.sum())


class _PsiEvaluator:
    """Precomputed-state evaluator shared by the optimizers.

    Evaluation is a pure fold over pixels (vectorized, so it parallelizes
    over the data); invalid normals score +inf instead of raising.
    """

    def __init__(self, reduced: ReducedData, c_star: np.ndarray, mu_floor: float = MU_FLOOR):
        self.pixels = reduced.pixels
        self.c_star = np.asarray(c_star, dtype=np.float64)
        self.sq_norms = np.einsum("ij,ij->j", self.pixels, self.pixels)
        self.denom_floor = denom_floor_for(self.pixels)
        self.mu_floor = mu_floor

    def value(self, normal: np.ndarray) -> float:
        residuals, _ = _psi_terms(
            self.pixels, self.sq_norms, self.c_star, normal, self.denom_floor, self.mu_floor
        )
        return math.inf if residuals is None else float(residuals.sum())

    def batch(self, normals: np.ndarray) -> np.ndarray:
        """Objective for each row of ``normals``."""
        d = normals @ self.c_star                      # (P,)
        s = normals @ self.pixels                      # (P, N)
        valid = np.abs(d) >= self.denom_floor
        out = np.full(normals.shape[0], np.inf)
        if valid.any():
            mu = s[valid] / d[valid, None]
            mu, _ = _clamp_mu(mu, self.mu_floor)
            out[valid] = ((1.0 - 1.0 / mu) ** 2 @ self.sq_norms)
        return out

    def gradient(self, normal: np.ndarray) -> np.ndarray:
        """Euclidean gradient of the objective at ``normal``.

        Clamped pixels contribute nothing: their residual is locally
        constant in the normal.
        """
        d = float(self.c_star @ normal)
        if abs(d) < self.denom_floor:
            raise NearOrthogonalNormalError("cannot differentiate at an orthogonal normal")
        s = normal @ self.pixels
        _, clamp_mask = _clamp_mu(s / d, self.mu_floor)
        active = ~clamp_mask
        s_act = s[active]  # |s| >= mu_floor * |d| > 0 on unclamped pixels
        w = np.zeros_like(s)
        w[active] = self.sq_norms[active] * (1.0 - d / s_act)
        t = np.zeros_like(s)
        t[active] = w[active] * d / s_act**2
        if not np.all(np.isfinite(t)):
            raise NumericError(
                "non-finite gradient contribution", pixel_index=int(np.argmax(~np.isfinite(t)))
            )
        grad = 2.0 * (self.pixels @ t - float((w[active] / s_act).sum()) * self.c_star)
        return grad


def candidate_normals(reduced: ReducedData, count: int, rng_seed: int) -> list[np.ndarray]:
    """Solve hyperplane normals from random well-separated pixel K-sets.

    Each candidate solves ``B.T @ n = 1`` where B stacks K sampled reduced
    pixels; a K-set whose pixels share one scale factor yields the true
    normal exactly, so enough samples land some candidates near it. K-sets
    that are too close together or too ill-conditioned are rejected.
    """
    if count < 1:
        raise ValidationError("candidate count must be >= 1")
    k, n = reduced.k, reduced.n_pixels
    if n < k:
        raise DimensionError(f"need at least {k} pixels, have {n}")
    pixels = reduced.pixels
    rng = np.random.default_rng(rng_seed)
    c_star = mean_point(reduced)
    floor = denom_floor_for(pixels)
    ones = np.ones(k)

    min_separation = 0.0
    if k >= 2:
        sub = pixels[:, rng.choice(n, size=min(n, _SEPARATION_SUBSAMPLE), replace=False)]
        diff = sub[:, :, None] - sub[:, None, :]
        dists = np.sqrt(np.einsum("kij,kij->ij", diff, diff))
        iu = np.triu_indices(sub.shape[1], 1)
        min_separation = CANDIDATE_MIN_SEPARATION * float(np.median(dists[iu]))

    accepted: list[np.ndarray] = []
    budget = CANDIDATE_MAX_RETRIES * count
    for _ in range(budget):
        if len(accepted) >= count:
            break
        idx = rng.choice(n, size=k, replace=False)
        b = pixels[:, idx]
        if k >= 2:
            diff = b[:, :, None] - b[:, None, :]
            dists = np.sqrt(np.einsum("kij,kij->ij", diff, diff))
            iu = np.triu_indices(k, 1)
            if float(dists[iu].min()) < min_separation:
                continue
        if np.linalg.cond(b) > CANDIDATE_MAX_COND:
            continue
        try:
            raw = np.linalg.solve(b.T, ones)
        except np.linalg.LinAlgError:
            continue
        norm = np.linalg.norm(raw)
        if norm == 0 or not np.all(np.isfinite(raw)):
            continue
        unit = raw / norm
        denom = float(c_star @ unit)
        if abs(denom) < floor:
            continue
        accepted.append(unit if denom > 0 else -unit)

    if not accepted:
        raise DegenerateDataError(
            "no linearly independent, well-separated pixel set found; "
            "the cube may be rank-deficient"
        )
    return accepted


def pso_minimize(
    reduced: ReducedData,
    c_star: np.ndarray,
    initial_normals: list[np.ndarray],
    config: PsoConfig,
) -> np.ndarray:
    """Global search for the residual-minimizing unit normal.

    Supplied normals become the first particles (the swarm grows to hold
    them all), so the result is never worse than the best of them. Each
    particle owns an RNG stream split from the master seed; schedules that
    evaluate particles in any order produce identical results. Position
    updates renormalize onto the unit sphere, matching the objective's
    scale invariance.
    """
    if not initial_normals:
        raise ValidationError("at least one initial normal is required")
    k = reduced.k
    evaluator = _PsiEvaluator(reduced, c_star)

    n_particles = max(config.swarm_size, len(initial_normals))
    v_max = config.velocity_clamp * 2.0  # fraction of the sphere diameter
    positions = np.empty((n_particles, k))
    velocities = np.empty((n_particles, k))
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(n_particles)]
    for i in range(n_particles):
        if i < len(initial_normals):
            vec = np.asarray(initial_normals[i], dtype=np.float64)
            norm = np.linalg.norm(vec)
            if vec.shape != (k,) or norm == 0:
                raise ValidationError(f"initial normal {i} is not a nonzero {k}-vector")
            # keep already-unit vectors bit-identical so their objective
            # matches any evaluation done before the search
            positions[i] = vec if abs(norm - 1.0) <= 1e-12 else vec / norm
        else:
            vec = streams[i].standard_normal(k)
            positions[i] = vec / np.linalg.norm(vec)
        velocities[i] = streams[i].uniform(-0.5 * v_max, 0.5 * v_max, k)
    # one (iterations, 2, k) block per particle keeps streams schedule-independent
    draws = np.stack([s.random((config.iterations, 2, k)) for s in streams])

    values = evaluator.batch(positions)
    if not np.isfinite(values).any():
        raise OptimizationError("all initial particles have degenerate normals")
    pbest = positions.copy()
    pbest_val = values.copy()
    g_idx = int(np.argmin(pbest_val))  # argmin takes the lowest index on ties
    gbest = pbest[g_idx].copy()
    gbest_val = float(pbest_val[g_idx])

    for it in range(config.iterations):
        r1 = draws[:, it, 0, :]
        r2 = draws[:, it, 1, :]
        velocities = (
            config.inertia * velocities
            + config.cognitive * r1 * (pbest - positions)
            + config.social * r2 * (gbest[None, :] - positions)
        )
        speed = np.linalg.norm(velocities, axis=1)
        over = speed > v_max
        if over.any():
            velocities[over] *= (v_max / speed[over])[:, None]
        positions = positions + velocities
        norms = np.linalg.norm(positions, axis=1)
        collapsed = norms < 1e-12
        if collapsed.any():
            positions[collapsed] = pbest[collapsed]
            norms[collapsed] = np.linalg.norm(positions[collapsed], axis=1)
        positions /= norms[:, None]

        values = evaluator.batch(positions)
        improved = values < pbest_val
        pbest[improved] = positions[improved]
        pbest_val[improved] = values[improved]
        g_idx = int(np.argmin(pbest_val))
        if pbest_val[g_idx] < gbest_val:
            gbest = pbest[g_idx].copy()
            gbest_val = float(pbest_val[g_idx])

    return gbest


def gd_refine(
    start_normal: np.ndarray,
    reduced: ReducedData,
    c_star: np.ndarray,
    config: GdConfig,
) -> np.ndarray:
    """Polish a normal by projected gradient descent on the unit sphere.

    The Euclidean gradient is projected onto the tangent space at the
    current normal; steps use Armijo backtracking and renormalize back
    onto the sphere. The result never scores worse than the start.
    """
    evaluator = _PsiEvaluator(reduced, c_star)
    n = np.asarray(start_normal, dtype=np.float64)
    norm = np.linalg.norm(n)
    if norm == 0 or n.shape != (reduced.k,):
        raise ValidationError("start normal must be a nonzero K-vector")
    n = n / norm
    psi = evaluator.value(n)
    if not math.isfinite(psi):
        raise OptimizationError("objective is not finite at the start normal")
    grad_tol = config.grad_tol * psi

    for _ in range(config.max_iters):
        grad = evaluator.gradient(n)
        tangent = grad - float(grad @ n) * n
        g_norm = float(np.linalg.norm(tangent))
        if g_norm <= grad_tol:
            break
        step = config.initial_step
        accepted = False
        while step >= config.step_tol:
            cand = n - step * tangent
            cand /= np.linalg.norm(cand)
            psi_cand = evaluator.value(cand)
            if psi_cand <= psi - _ARMIJO_C * step * g_norm**2:
                n, psi = cand, psi_cand
                accepted = True
                break
            step *= config.backtrack_factor
        if not accepted:
            break
    return n


def estimate_scaling(reduced: ReducedData, model: HyperplaneModel) -> ScalingField:
    """Per-pixel scale factors from the ray/hyperplane intersection.

    Before clamping, the factors average to one by construction: the
    anchor is the mean pixel, so the mean ray projection is the anchor
    itself.
    """
    mu_raw = (model.normal @ reduced.pixels) / model.denom
    return ScalingField.from_raw(mu_raw)


def correct_pixels(cube: HsiCube, mu_hat: ScalingField) -> HsiCube:
    """Divide each original-space pixel by its estimated scale factor."""
    if len(mu_hat) != cube.n_pixels:
        raise DimensionError(
            f"scaling field has {len(mu_hat)} entries for {cube.n_pixels} pixels"
        )
    factors = mu_hat.values.reshape(cube.height, cube.width)
    return HsiCube(cube.data / factors[None, :, :])


def apply_scaling(cube: HsiCube, mu: ScalingField) -> HsiCube:
    """Multiply each pixel by its scale factor (inverse of correct_pixels)."""
    if len(mu) != cube.n_pixels:
        raise DimensionError(f"scaling field has {len(mu)} entries for {cube.n_pixels} pixels")
    factors = mu.values.reshape(cube.height, cube.width)
    return HsiCube(cube.data * factors[None, :, :])


def run_correction(
    cube: HsiCube,
    k: int,
    pso_config: PsoConfig | None = None,
    gd_config: GdConfig | None = None,
    candidate_count: int = 200,
    rng_seed: int = 0,
) -> tuple[HsiCube, CorrectionReport]:
    """End-to-end scale correction of a cube with K endmembers.

    Deterministic given the seed. With ``k == 1`` the hyperplane collapses
    to a point and the correction degenerates to dividing each pixel by
    its magnitude ratio against the mean; the report flags this mode.
    """
    reduced = svd_reduce(cube, k)
    c_star = mean_point(reduced)
    floor = denom_floor_for(reduced.pixels)

    if k == 1:
        model = HyperplaneModel.build(c_star, np.ones(1), floor)
        evaluator = _PsiEvaluator(reduced, c_star)
        psi = evaluator.value(model.normal)
        mu_hat = estimate_scaling(reduced, model)
        corrected = correct_pixels(cube, mu_hat)
        report = CorrectionReport(
            mu_hat=mu_hat,
            model=model,
            psi_initial=psi,
            psi_after_pso=psi,
            psi_final=psi,
            clamped_pixels=mu_hat.clamped_count,
            candidate_count=0,
            seed=rng_seed,
            degenerate_mode=True,
        )
        return corrected, report

    seed_cand, seed_pso = derive_seeds(rng_seed)
    candidates = candidate_normals(reduced, candidate_count, seed_cand)
    if pso_config is None:
        pso_config = PsoConfig(swarm_size=max(64, candidate_count), seed=seed_pso)
    if gd_config is None:
        gd_config = GdConfig()

    # every reported objective value goes through the same evaluation path,
    # and each stage falls back to the previous point if it failed to
    # improve, so the reported sequence is monotone by construction
    evaluator = _PsiEvaluator(reduced, c_star)
    cand_values = [evaluator.value(c) for c in candidates]
    best_cand = int(np.argmin(cand_values))
    psi_initial = float(cand_values[best_cand])
    n_pso = pso_minimize(reduced, c_star, candidates, pso_config)
    psi_after_pso = evaluator.value(n_pso)
    if psi_after_pso > psi_initial:
        n_pso, psi_after_pso = candidates[best_cand], psi_initial
    n_best = gd_refine(n_pso, reduced, c_star, gd_config)
    psi_final = evaluator.value(n_best)
    if psi_final > psi_after_pso:
        n_best, psi_final = n_pso, psi_after_pso

    model = HyperplaneModel.build(c_star, n_best, floor)
    mu_hat = estimate_scaling(reduced, model)
    corrected = correct_pixels(cube, mu_hat)
    report = CorrectionReport(
        mu_hat=mu_hat,
        model=model,
        psi_initial=psi_initial,
        psi_after_pso=psi_after_pso,
        psi_final=psi_final,
        clamped_pixels=mu_hat.clamped_count,
        candidate_count=len(candidates),
        seed=rng_seed,
    )
    return corrected, report


def psi_angular_samples(
    reduced: ReducedData,
    c_star: np.ndarray,
    n_theta: int = 90,
    n_phi: int = 180,
) -> np.ndarray:
    """Sample the objective over spherical angles for 3-D reduced data.

    Returns rows ``(theta, phi, psi)`` for external plotting; only defined
    for K = 3.
    """
    if reduced.k != 3:
        raise DimensionError("angular sampling requires 3-dimensional reduced data")
    evaluator = _PsiEvaluator(reduced, c_star)
    thetas = np.linspace(0.0, math.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    normals = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    values = evaluator.batch(normals)
    return np.column_stack([tt.ravel(), pp.ravel(), values])
