"""Procedural image source: anti-aliased discs on a dark background.

This is the deterministic stand-in for a real photo dataset.  A scene is a
single bright disc; its parameters are either sampled uniformly (datasets)
or derived from latent coordinates by a fixed squashing map (the distillation
targets).  The ``fixed`` radius mode deliberately keeps the radius out of the
latent factors so that a radius-changing parameter direction is provably not
reachable by any latent shift.
"""

from dataclasses import dataclass

import numpy as np

from .rng import Rng

BACKGROUND = 0.1
CENTER_RANGE = (0.25, 0.75)
FG_RANGE = (0.6, 1.0)
FIXED_RADIUS = 6.0
FREE_RADIUS_RANGE = (3.0, 9.0)
FG_FIXED = 0.8          # foreground level used by the latent squash map
FALLOFF_WIDTH = 1.0     # pixels


@dataclass
class SceneParams:
    """One disc: center as a fraction of the image extent, radius in pixels."""

    center_x: float
    center_y: float
    radius: float
    foreground: float

    def as_array(self) -> np.ndarray:
        return np.array([self.center_x, self.center_y, self.radius, self.foreground])


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a reproducible disc dataset; the dataset is a pure function of it."""

    count: int
    seed: int
    size: int = 32
    radius_mode: str = "fixed"  # "fixed" (radius 6) or "free" (radius in [3, 9])

    def __post_init__(self):
        if self.radius_mode not in ("fixed", "free"):
            raise ValueError(f"unknown radius_mode {self.radius_mode!r}")
        if self.count < 1 or self.size < 4:
            raise ValueError("count must be >= 1 and size >= 4")


def _validate_params(p: np.ndarray):
    if not np.all(np.isfinite(p)):
        raise ValueError("scene params must be finite")
    cx, cy, r, fg = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    if np.any(cx < 0) or np.any(cx > 1) or np.any(cy < 0) or np.any(cy > 1):
        raise ValueError("center out of range [0, 1]")
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    if np.any(fg < 0) or np.any(fg > 1):
        raise ValueError("foreground intensity out of range [0, 1]")


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def render_batch(params: np.ndarray, size: int) -> np.ndarray:
    """Render (N, 4) scene parameter rows to (N, 1, size, size) float32 images.

    Coverage at a pixel rises smoothly from 0 to 1 over a one-pixel band
    inside the disc boundary, so the image is differentiable in the params;
    radius 0 gives the exact uniform background.
    """
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    _validate_params(params)
    ax = np.arange(size) + 0.5
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    cx = params[:, 0, None, None] * size
    cy = params[:, 1, None, None] * size
    r = params[:, 2, None, None]
    fg = params[:, 3, None, None]
    d = np.sqrt((xx[None] - cx) ** 2 + (yy[None] - cy) ** 2)
    cov = _smoothstep((r - d) / FALLOFF_WIDTH)
    img = BACKGROUND + (fg - BACKGROUND) * cov
    return img[:, None, :, :].astype(np.float32)


def render_scene(p: SceneParams, size: int = 32) -> np.ndarray:
    """Render one scene to a (1, size, size) float32 image in [0, 1]."""
    return render_batch(p.as_array()[None], size)[0]


def sample_scene(rng: Rng, spec: DatasetSpec) -> SceneParams:
    """Draw scene params uniformly over the declared ranges."""
    arr = sample_scene_batch(rng, spec, 1)[0]
    return SceneParams(*arr.tolist())


def sample_scene_batch(rng: Rng, spec: DatasetSpec, n: int) -> np.ndarray:
    out = np.empty((n, 4))
    out[:, 0] = rng.uniform((n,), *CENTER_RANGE)
    out[:, 1] = rng.uniform((n,), *CENTER_RANGE)
    if spec.radius_mode == "fixed":
        out[:, 2] = FIXED_RADIUS
    else:
        out[:, 2] = rng.uniform((n,), *FREE_RADIUS_RANGE)
    out[:, 3] = rng.uniform((n,), *FG_RANGE)
    return out


def make_dataset(spec: DatasetSpec):
    """Deterministically build the dataset: (images (N,1,H,W) f32, params (N,4))."""
    rng = Rng(spec.seed).split("dataset")
    params = sample_scene_batch(rng, spec, spec.count)
    return render_batch(params, spec.size), params


def _squash01(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def latent_to_scene(z: np.ndarray, radius_mode: str,
                    radius_override: float | None = None) -> np.ndarray:
    """The fixed squashing map from latent codes to scene params, (B, 4).

    Fixed mode uses z[0], z[1] for the disc center; free mode additionally
    maps z[2] to the radius.  Remaining latent coordinates are nuisance
    inputs and the foreground level is a constant, so in fixed mode the
    radius is *not* a latent factor.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    n = z.shape[0]
    lo, hi = CENTER_RANGE
    out = np.empty((n, 4))
    out[:, 0] = lo + (hi - lo) * _squash01(z[:, 0])
    out[:, 1] = lo + (hi - lo) * _squash01(z[:, 1])
    if radius_mode == "fixed":
        out[:, 2] = FIXED_RADIUS
    else:
        rlo, rhi = FREE_RADIUS_RANGE
        out[:, 2] = rlo + (rhi - rlo) * _squash01(z[:, 2])
    if radius_override is not None:
        out[:, 2] = radius_override
    out[:, 3] = FG_FIXED
    return out
