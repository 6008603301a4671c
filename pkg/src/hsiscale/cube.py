"""Core data carriers: hyperspectral cubes and synthetic ground truth.

Conventions used throughout the toolkit:

* cube data is band-major, shape ``(bands, height, width)``;
* pixels are enumerated in raster order (row-major over the grid), so
  pixel ``i`` sits at ``(row, col) = divmod(i, width)``;
* a pixel matrix is ``(d, n_pixels)`` with one pixel per column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError


@dataclass(frozen=True)
class HsiCube:
    """An L-band reflectance image on an H x W pixel grid.

    ``data`` holds finite, non-negative reflectances in float64. The array
    is never mutated after construction; all operations return new cubes.
    """

    data: np.ndarray  # (L, H, W), float64

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise DimensionError(f"cube data must be (bands, height, width), got shape {data.shape}")
        if min(data.shape) < 1:
            raise DimensionError(f"cube dimensions must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("cube contains non-finite values")
        if np.any(data < 0):
            raise ValidationError("cube contains negative reflectances")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def pixel_matrix(self) -> np.ndarray:
        """Return the (L, N) view with pixel columns in raster order."""
        return self.data.reshape(self.bands, self.n_pixels)

    def pixel(self, row: int, col: int) -> np.ndarray:
        """The L-vector across bands at a fixed grid position."""
        return self.data[:, row, col]

    @staticmethod
    def from_pixel_matrix(matrix: np.ndarray, height: int, width: int) -> "HsiCube":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise DimensionError(f"pixel matrix must be 2-D, got shape {matrix.shape}")
        if matrix.shape[1] != height * width:
            raise DimensionError(
                f"pixel matrix has {matrix.shape[1]} columns, grid needs {height * width}"
            )
        return HsiCube(matrix.reshape(matrix.shape[0], height, width))


@dataclass(frozen=True)
class GroundTruth:
    """Known endmember signatures and abundances of a synthetic scene."""

    endmembers: np.ndarray  # (L, K), columns are signatures in [0, 1]
    abundances: np.ndarray  # (K, N), columns on the probability simplex

    # tolerances for the simplex constraints and the independence check
    ASC_TOL = 1e-9
    INDEP_TOL = 1e-10

    def __post_init__(self):
        m = np.asarray(self.endmembers, dtype=np.float64)
        a = np.asarray(self.abundances, dtype=np.float64)
        if m.ndim != 2 or a.ndim != 2:
            raise DimensionError("endmembers and abundances must be 2-D matrices")
        if m.shape[1] != a.shape[0]:
            raise DimensionError(
                f"endmember count mismatch: {m.shape[1]} signatures vs {a.shape[0]} abundance rows"
            )
        if not (np.all(np.isfinite(m)) and np.all(np.isfinite(a))):
            raise ValidationError("ground truth contains non-finite values")
        if np.any(m < 0) or np.any(m > 1):
            raise ValidationError("endmember signatures must lie in [0, 1]")
        if np.any(a < 0):
            raise ValidationError("abundances violate non-negativity")
        col_sums = a.sum(axis=0)
        if np.max(np.abs(col_sums - 1.0)) > self.ASC_TOL:
            raise ValidationError("abundance columns must sum to one")
        svals = np.linalg.svd(m, compute_uv=False)
        if svals[-1] <= self.INDEP_TOL * svals[0]:
            raise ValidationError("endmember signatures are not linearly independent")
        m.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "endmembers", m)
        object.__setattr__(self, "abundances", a)

    @property
    def n_endmembers(self) -> int:
        return self.endmembers.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.abundances.shape[1]
