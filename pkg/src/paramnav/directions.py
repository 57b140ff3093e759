"""Direction sets: unit-norm vectors in a parametrization of a layer's weights.

Three parametrizations, all linear maps into the layer's raw space:

* ``raw_kernel``     — coordinates are the raw space itself.
* ``singular_values``— coordinates perturb the singular values of the
                       flattened kernel; the SVD of the *unshifted* kernel is
                       computed once and cached, so a shift ``t * xi`` maps
                       the kernel W to U diag(s + t*xi) V.
* ``eigen_coeffs``   — coordinates over a stored orthonormal basis of raw
                       vectors (perceptual-Hessian eigenvectors).
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import svd_jacobi
from .tensor import F32

PARAMETRIZATIONS = ("raw_kernel", "singular_values", "eigen_coeffs")
UNIT_TOL = 1e-6


@dataclass
class DirectionSet:
    """K unit-norm directions in one layer's parametrization space."""

    layer: str
    parametrization: str
    basis: np.ndarray                      # (K, pdim), unit rows
    method: str = "unspecified"
    magnitude_range: float | None = None   # calibrated T
    labels: list = field(default_factory=list)
    scores: np.ndarray | None = None       # eigenvalue estimates / separability
    eigenvectors: np.ndarray | None = None  # (m, raw_dim) for eigen_coeffs
    svd_u: np.ndarray | None = None        # cached factors for singular_values
    svd_s: np.ndarray | None = None
    svd_v: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=F32)
        if self.basis.ndim != 2:
            raise ValueError(f"basis must be (K, pdim), got {self.basis.shape}")
        if self.parametrization not in PARAMETRIZATIONS:
            raise ValueError(f"unknown parametrization {self.parametrization!r}")
        if not self.labels:
            self.labels = [f"{self.method}-{i}" for i in range(self.count)]
        self.validate()

    @property
    def count(self) -> int:
        return self.basis.shape[0]

    @property
    def coeff_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def raw_dim(self) -> int:
        if self.parametrization == "raw_kernel":
            return self.coeff_dim
        if self.parametrization == "singular_values":
            return self.svd_u.shape[0] * self.svd_v.shape[1]
        return self.eigenvectors.shape[1]

    def validate(self):
        norms = np.linalg.norm(self.basis.astype(np.float64), axis=1)
        if np.abs(norms - 1.0).max() > UNIT_TOL:
            raise ValueError(f"direction norms deviate from 1 by {np.abs(norms - 1).max():.2e}")
        if self.parametrization == "singular_values":
            if self.svd_u is None or self.svd_s is None or self.svd_v is None:
                raise ValueError("singular_values parametrization needs cached SVD factors")
            if self.coeff_dim != self.svd_s.shape[0]:
                raise ValueError("basis dim must match the number of singular values")
        if self.parametrization == "eigen_coeffs":
            if self.eigenvectors is None:
                raise ValueError("eigen_coeffs parametrization needs stored eigenvectors")
            e = self.eigenvectors.astype(np.float64)
            gram = e @ e.T
            if np.abs(gram - np.eye(e.shape[0])).max() > UNIT_TOL:
                raise ValueError("stored eigenvectors are not orthonormal within 1e-6")
            if self.coeff_dim > e.shape[0]:
                raise ValueError("more coefficients than eigenvectors")
        if self.count > self.coeff_dim and self.parametrization != "raw_kernel":
            raise ValueError(f"K={self.count} exceeds parametrization dim {self.coeff_dim}")

    def expansion_matrix(self) -> np.ndarray | None:
        """(pdim, raw_dim) float32 linear map from coefficients to raw deltas.

        ``None`` for raw_kernel (identity).  For singular values row i is
        vec(u_i v_i^T); for eigen coefficients the stored eigenvectors.
        """
        if self.parametrization == "raw_kernel":
            return None
        if self.parametrization == "eigen_coeffs":
            return self.eigenvectors[:self.coeff_dim].astype(F32)
        u = self.svd_u.astype(np.float64)
        v = self.svd_v.astype(np.float64)
        rows = np.einsum("ik,kj->kij", u, v).reshape(self.coeff_dim, -1)
        return rows.astype(F32)

    def raw_delta(self, k: int, t: float) -> np.ndarray:
        """Raw-space shift realized by direction ``k`` at magnitude ``t``."""
        if not 0 <= k < self.count:
            raise IndexError(f"direction index {k} out of range [0, {self.count})")
        coeff = (float(t) * self.basis[k].astype(np.float64))
        if self.parametrization == "raw_kernel":
            return coeff.astype(F32)
        if self.parametrization == "eigen_coeffs":
            return (coeff @ self.eigenvectors[:self.coeff_dim].astype(np.float64)).astype(F32)
        u = self.svd_u.astype(np.float64)
        v = self.svd_v.astype(np.float64)
        return ((u * coeff) @ v).ravel().astype(F32)

    def describe(self) -> list:
        """Per-direction metadata rows for listings and exports."""
        rows = []
        for i in range(self.count):
            rows.append({
                "id": i,
                "label": self.labels[i],
                "method": self.method,
                "score": float(self.scores[i]) if self.scores is not None else None,
                "magnitude_range": self.magnitude_range,
            })
        return rows


def svd_parametrization(model, layer: str):
    """SVD factors of the layer's flattened kernel, for singular-value shifts."""
    factors = svd_jacobi(model.flattened_kernel(layer).astype(np.float64))
    return factors.u, factors.s, factors.v


def apply_direction(model, dirs: DirectionSet, k: int, t: float):
    """The model with weights shifted along direction ``k`` by magnitude ``t``.

    The input model is never mutated.  ``t`` beyond the calibrated range is
    permitted (stress plots); only the index and layer are validated.
    """
    if dirs.layer not in getattr(model, "params", {}) and not hasattr(model, "param_dim"):
        raise KeyError(f"model has no layer {dirs.layer!r}")
    if model.param_dim(dirs.layer) != dirs.raw_dim:
        raise ValueError(f"direction set raw dim {dirs.raw_dim} does not match "
                         f"layer {dirs.layer!r} dim {model.param_dim(dirs.layer)}")
    return model.shifted(dirs.layer, dirs.raw_delta(k, t))
