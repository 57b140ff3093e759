"""Synthetic generator stand-ins with known analytics.

Each exposes the same duck-typed surface as the real model: ``latent_dim``,
``param_dim``, ``param_vector``, ``shifted``, ``generate`` and a
differentiable ``forward(z, shift_layer=, shift=)``.
"""

import numpy as np

from paramnav import tensor as T
from paramnav.tensor import F32, Tensor


class SumSquaredMetric:
    """d^2(a, b) = sum over pixels of (a - b)^2 (no mean)."""

    kind = "pixel_sse"

    def pair_distances(self, a, b):
        d = a.astype(np.float64) - b.astype(np.float64)
        return (d * d).sum(axis=(1, 2, 3))

    def distance_sq(self, a, b):
        return float(self.pair_distances(a, b).mean())

    def batch_distance_graph(self, a: Tensor, b: Tensor) -> Tensor:
        n_pix = int(np.prod(a.data.shape[1:]))
        return T.mul(T.squared_difference_mean(a, b), float(n_pix))


class LinearMapModel:
    """G(z) = D A z as a (1, 1, 2) image; directions shift the 2x2 matrix A.

    With d^2 the summed squared difference and z ~ N(0, I), the displacement
    Hessian w.r.t. the flattened A is exactly 2 * diag(d1^2, d1^2, d2^2, d2^2),
    so for D = diag(2, 1) the top eigenvalue is 8 with eigenvectors supported
    on the first row of A.
    """

    latent_dim = 2

    def __init__(self, a=None, d=(2.0, 1.0)):
        self.a = np.asarray(a if a is not None else np.eye(2), dtype=F32)
        self.d = np.diag(np.asarray(d, dtype=F32))

    def param_dim(self, layer):
        assert layer == "A"
        return 4

    def param_vector(self, layer):
        assert layer == "A"
        return self.a.ravel().copy()

    def shifted(self, layer, delta):
        assert layer == "A"
        return LinearMapModel(self.a + np.asarray(delta, dtype=F32).reshape(2, 2),
                              np.diag(self.d))

    def forward(self, z, shift_layer=None, shift=None, **_):
        z = T.constant(np.asarray(z, dtype=F32))
        bsz = z.data.shape[0]
        if shift is None or shift_layer is None:
            h = T.affine(z, T.constant(self.a))
        elif shift.data.ndim == 1:
            h = T.affine(z, T.add(T.constant(self.a), T.reshape(shift, (2, 2))))
        else:
            a_eff = T.add(T.reshape(shift, (bsz, 2, 2)), T.constant(self.a[None]))
            h = T.reshape(T.bmm(a_eff, T.reshape(z, (bsz, 2, 1))), (bsz, 2))
        out = T.affine(h, T.constant(self.d))
        return T.reshape(out, (bsz, 1, 1, 2))

    def generate(self, z):
        return self.forward(z).data


class ParamImageModel:
    """G(z) = P: the output *is* the parameter image, ignoring z."""

    latent_dim = 4

    def __init__(self, image: np.ndarray):
        self.image = np.asarray(image, dtype=F32)  # (1, H, W)

    def param_dim(self, layer):
        assert layer == "img"
        return self.image.size

    def param_vector(self, layer):
        assert layer == "img"
        return self.image.ravel().copy()

    def shifted(self, layer, delta):
        assert layer == "img"
        return ParamImageModel(self.image + np.asarray(delta, dtype=F32).reshape(self.image.shape))

    def forward(self, z, shift_layer=None, shift=None, **_):
        bsz = np.asarray(z).shape[0]
        zeros = T.constant(np.zeros((bsz,) + self.image.shape, dtype=F32))
        base = T.add(zeros, T.constant(self.image))
        if shift is None or shift_layer is None:
            return base
        if shift.data.ndim == 1:
            return T.add(base, T.reshape(shift, self.image.shape))
        return T.add(base, T.reshape(shift, (bsz,) + self.image.shape))

    def generate(self, z):
        return self.forward(z).data


class LinearImageModel:
    """G(z) = reshape(M p, (1, H, W)) for a fixed map M; directions shift p.

    The displacement Hessian (pixel-MSE) is 2 M^T M / n_pixels, giving a
    deterministic non-degenerate spectrum to test deflation against.
    """

    latent_dim = 4

    def __init__(self, m: np.ndarray, p: np.ndarray, hw: tuple):
        self.m = np.asarray(m, dtype=F32)          # (n_pix, dim)
        self.p = np.asarray(p, dtype=F32)          # (dim,)
        self.hw = hw

    def param_dim(self, layer):
        assert layer == "p"
        return self.p.size

    def param_vector(self, layer):
        assert layer == "p"
        return self.p.copy()

    def shifted(self, layer, delta):
        assert layer == "p"
        return LinearImageModel(self.m, self.p + np.asarray(delta, dtype=F32), self.hw)

    def forward(self, z, shift_layer=None, shift=None, **_):
        bsz = np.asarray(z).shape[0]
        h, w = self.hw
        if shift is None or shift_layer is None:
            img = self.m @ self.p
            return T.constant(np.broadcast_to(img.reshape(1, 1, h, w),
                                              (bsz, 1, h, w)).copy())
        if shift.data.ndim == 1:
            vec = T.add(T.constant(self.p), shift)
            flat = T.matmul(T.reshape(vec, (1, self.p.size)), T.constant(self.m.T))
            return T.add(T.constant(np.zeros((bsz, 1, h, w), dtype=F32)),
                         T.reshape(flat, (1, 1, h, w)))
        vecs = T.add(shift, T.constant(self.p[None]))
        flat = T.matmul(vecs, T.constant(self.m.T))
        return T.reshape(flat, (bsz, 1, h, w))

    def generate(self, z):
        return self.forward(z).data
