"""Perceptual distances and the Fréchet feature distance.

Two pluggable metrics stand in for a learned perceptual model: plain pixel
MSE, and the squared distance between features of a small frozen
random-weight conv net.  Both satisfy what the second-order analysis needs:
smoothness and a global minimum of d^2 at equal images.

Every metric exposes two routes: a float64 numpy path for evaluation and a
float32 graph path for gradients; they agree to float32 precision.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .linalg import matrix_sqrt_psd
from .rng import Rng
from .tensor import F32, Tensor

FEATURE_DIM = 32


class PixelMSEMetric:
    """d^2(a, b) = mean over pixels of (a - b)^2."""

    kind = "pixel_mse"

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.shape != b.shape:
            raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
        d = a.astype(np.float64) - b.astype(np.float64)
        return (d * d).mean(axis=(1, 2, 3))

    def distance_sq(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.pair_distances(a[None] if a.ndim == 3 else a,
                                         b[None] if b.ndim == 3 else b).mean())

    def batch_distance_graph(self, a: Tensor, b: Tensor) -> Tensor:
        return T.squared_difference_mean(a, b)


class RandomFeatureMetric:
    """Distance in the feature space of a frozen random two-conv extractor.

    conv3x3 (1 -> 16) + leaky-relu, conv3x3 (16 -> 32) + leaky-relu, global
    average pool -> 32 features; d^2 is the mean squared feature difference.
    Weights are drawn once from a seeded fan-in-scaled normal and persisted
    with checkpoints, so the metric is a fixed function.
    """

    kind = "random_features"

    def __init__(self, k1, b1, k2, b2, meta=None):
        self.k1 = np.asarray(k1, dtype=F32)
        self.b1 = np.asarray(b1, dtype=F32)
        self.k2 = np.asarray(k2, dtype=F32)
        self.b2 = np.asarray(b2, dtype=F32)
        if self.k1.shape != (16, 1, 3, 3) or self.k2.shape != (FEATURE_DIM, 16, 3, 3):
            raise ValueError("unexpected extractor kernel shapes")
        self.meta = dict(meta or {})

    @classmethod
    def create(cls, seed: int) -> "RandomFeatureMetric":
        rng = Rng(seed).split("feature-extractor")
        k1 = rng.normal((16, 1, 3, 3)) * np.sqrt(2.0 / 9.0)
        k2 = rng.normal((FEATURE_DIM, 16, 3, 3)) * np.sqrt(2.0 / (16.0 * 9.0))
        return cls(k1, np.zeros(16), k2, np.zeros(FEATURE_DIM), {"seed": seed})

    def weights(self):
        return [("k1", self.k1), ("b1", self.b1), ("k2", self.k2), ("b2", self.b2)]

    @classmethod
    def from_arrays(cls, arrays: dict, meta=None) -> "RandomFeatureMetric":
        return cls(arrays["k1"], arrays["b1"], arrays["k2"], arrays["b2"], meta)

    def features_graph(self, images: Tensor) -> Tensor:
        h = T.leaky_relu(T.conv2d(images, T.constant(self.k1), T.constant(self.b1)))
        h = T.leaky_relu(T.conv2d(h, T.constant(self.k2), T.constant(self.b2)))
        return T.global_avg_pool(h)

    def features(self, images: np.ndarray) -> np.ndarray:
        """(B, 1, H, W) images -> (B, 32) float32 features."""
        if images.ndim != 4 or images.shape[1] != 1:
            raise ValueError(f"expected (B, 1, H, W) images, got {images.shape}")
        return self.features_graph(T.constant(images.astype(F32))).data

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.shape != b.shape:
            raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
        d = self.features(a).astype(np.float64) - self.features(b).astype(np.float64)
        return (d * d).mean(axis=1)

    def distance_sq(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(self.pair_distances(a[None] if a.ndim == 3 else a,
                                         b[None] if b.ndim == 3 else b).mean())

    def batch_distance_graph(self, a: Tensor, b: Tensor) -> Tensor:
        return T.squared_difference_mean(self.features_graph(a), self.features_graph(b))


def make_metric(kind: str, seed: int = 0):
    if kind == "pixel_mse":
        return PixelMSEMetric()
    if kind == "random_features":
        return RandomFeatureMetric.create(seed)
    raise ValueError(f"unknown metric kind {kind!r}")


# ---------------------------------------------------------------------------
# expected displacement (the functional whose Hessian the spectrum method uses)


def displacement_graph(model, layer: str, metric, alpha: Tensor, z: np.ndarray) -> Tensor:
    """Mean over the batch of d^2(G(z), G_shifted(z)); differentiable in alpha."""
    if alpha.data.shape != (model.param_dim(layer),):
        raise ValueError(f"alpha shape {alpha.data.shape} vs raw dim {model.param_dim(layer)}")
    base = T.constant(model.generate(z))
    shifted = model.forward(z, shift_layer=layer, shift=alpha)
    return metric.batch_distance_graph(base, shifted)


def expected_displacement(model, layer: str, metric, alpha: np.ndarray,
                          z: np.ndarray) -> float:
    """Float64 evaluation path of the expected displacement."""
    alpha = np.asarray(alpha, dtype=F32)
    base = model.generate(z)
    shifted = model.shifted(layer, alpha).generate(z)
    return float(metric.pair_distances(base, shifted).mean())


# ---------------------------------------------------------------------------
# Fréchet feature distance


@dataclass
class FrechetStats:
    """Gaussian sufficient statistics of image features."""

    mu: np.ndarray     # (d,)
    sigma: np.ndarray  # (d, d), symmetric PSD up to 1e-8

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.sigma.shape != (self.mu.shape[0],) * 2:
            raise ValueError("sigma shape does not match mu")
        if np.abs(self.sigma - self.sigma.T).max() > 1e-8 * max(1.0, np.abs(self.sigma).max()):
            raise ValueError("sigma must be symmetric")


def fit_feature_stats(metric: RandomFeatureMetric, images: np.ndarray,
                      min_count: int = 64) -> FrechetStats:
    """Mean and unbiased covariance of extractor features over >= 64 images."""
    if images.shape[0] < min_count:
        raise ValueError(f"need at least {min_count} images, got {images.shape[0]}")
    feats = metric.features(images).astype(np.float64)
    mu = feats.mean(axis=0)
    centered = feats - mu
    sigma = centered.T @ centered / (feats.shape[0] - 1)
    return FrechetStats(mu, 0.5 * (sigma + sigma.T))


def frechet_distance(a: FrechetStats, b: FrechetStats) -> float:
    """d^2 = ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)."""
    dmu = a.mu - b.mu
    root_a = matrix_sqrt_psd(a.sigma)
    inner = root_a @ b.sigma @ root_a
    cross = matrix_sqrt_psd(0.5 * (inner + inner.T))
    val = float(dmu @ dmu + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * np.trace(cross))
    if val < -1e-6:
        raise FloatingPointError(f"Fréchet distance materially negative: {val:.3e}")
    return max(val, 0.0)
