"""The toy convolutional generator and the mechanics of shifting its weights.

Architecture (latent dim 8, output 32x32 grayscale in [0, 1]):

    L0: dense 8 -> 512, reshaped to (32, 4, 4)
    L1: nearest-2x upsample + conv3x3 32 -> 16
    L2: nearest-2x upsample + conv3x3 16 -> 8
    L3: nearest-2x upsample + conv3x3  8 -> 1, sigmoid output

with leaky-relu(0.2) between layers.  Four layers mirror the usual
early/middle/late taxonomy while keeping every layer's brute-force Hessian
tractable (L3 has 72 kernel parameters).

Direction raw spaces: for a conv layer the space is the flattened kernel
(bias excluded); for the dense layer it is the flattened augmented matrix
[W | b], whose rank-one updates can realize latent translations.
"""

import hashlib

import numpy as np

from . import tensor as T
from .rng import Rng
from .tensor import F32, Tensor

LATENT_DIM = 8
CONV_LAYERS = ("L1", "L2", "L3")
ALL_LAYERS = ("L0", "L1", "L2", "L3")

_ARCH = {
    "L0": {"w": (512, LATENT_DIM), "b": (512,)},
    "L1": {"k": (16, 32, 3, 3), "b": (16,)},
    "L2": {"k": (8, 16, 3, 3), "b": (8,)},
    "L3": {"k": (1, 8, 3, 3), "b": (1,)},
}
_SEED_SHAPE = (32, 4, 4)  # (C, H, W) after L0


def flatten_kernel(kernel: np.ndarray) -> np.ndarray:
    """(out, in, kh, kw) -> (out, in*kh*kw)."""
    if kernel.ndim != 4:
        raise ValueError(f"not a conv kernel: shape {kernel.shape}")
    return kernel.reshape(kernel.shape[0], -1)


def unflatten_kernel(mat: np.ndarray, kernel_shape) -> np.ndarray:
    out = np.asarray(mat).reshape(kernel_shape)
    return out


class GeneratorModel:
    """Layered toy generator; a pure function of (parameters, z)."""

    latent_dim = LATENT_DIM

    def __init__(self, params: dict, meta: dict | None = None):
        for layer, spec in _ARCH.items():
            for name, shape in spec.items():
                got = params[layer][name]
                if got.shape != shape:
                    raise ValueError(f"{layer}.{name}: shape {got.shape}, want {shape}")
                if not np.all(np.isfinite(got)):
                    raise ValueError(f"{layer}.{name} contains non-finite values")
        self.params = {l: {n: np.asarray(a, dtype=F32) for n, a in d.items()}
                       for l, d in params.items()}
        self.meta = dict(meta or {})

    @classmethod
    def init_random(cls, rng: Rng, meta: dict | None = None) -> "GeneratorModel":
        params = {}
        for layer, spec in _ARCH.items():
            r = rng.split(f"init/{layer}")
            wkey = "w" if "w" in spec else "k"
            shape = spec[wkey]
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
            params[layer] = {
                wkey: (std * r.normal(shape)).astype(F32),
                "b": np.zeros(spec["b"], dtype=F32),
            }
        return cls(params, meta)

    # -- parameter access ---------------------------------------------------

    def weight_key(self, layer: str) -> str:
        if layer not in _ARCH:
            raise KeyError(f"unknown layer {layer!r}")
        return "k" if layer in CONV_LAYERS else "w"

    def kernel(self, layer: str) -> np.ndarray:
        if layer not in CONV_LAYERS:
            raise ValueError(f"{layer} is not a conv layer")
        return self.params[layer]["k"]

    def flattened_kernel(self, layer: str) -> np.ndarray:
        return flatten_kernel(self.kernel(layer))

    def param_dim(self, layer: str) -> int:
        """Dimension of the layer's raw direction space."""
        if layer in CONV_LAYERS:
            return int(np.prod(_ARCH[layer]["k"]))
        if layer == "L0":
            return 512 * (LATENT_DIM + 1)
        raise KeyError(f"unknown layer {layer!r}")

    def param_vector(self, layer: str) -> np.ndarray:
        """The layer's parameters as a flat float32 vector (raw direction space)."""
        if layer in CONV_LAYERS:
            return self.params[layer]["k"].ravel().copy()
        p = self.params["L0"]
        return np.concatenate([p["w"], p["b"][:, None]], axis=1).ravel()

    def shifted(self, layer: str, delta: np.ndarray) -> "GeneratorModel":
        """A new model with ``delta`` (flat, raw space) added to ``layer``."""
        delta = np.asarray(delta, dtype=F32)
        if delta.shape != (self.param_dim(layer),):
            raise ValueError(f"delta shape {delta.shape} vs raw dim {self.param_dim(layer)}")
        params = {l: {n: a.copy() for n, a in d.items()} for l, d in self.params.items()}
        if layer in CONV_LAYERS:
            params[layer]["k"] = params[layer]["k"] + delta.reshape(_ARCH[layer]["k"])
        else:
            aug = delta.reshape(512, LATENT_DIM + 1)
            params["L0"]["w"] = params["L0"]["w"] + aug[:, :LATENT_DIM]
            params["L0"]["b"] = params["L0"]["b"] + aug[:, LATENT_DIM]
        return GeneratorModel(params, self.meta)

    def params_hash(self) -> str:
        h = hashlib.sha256()
        for layer in ALL_LAYERS:
            for name in sorted(self.params[layer]):
                h.update(np.ascontiguousarray(self.params[layer][name]).tobytes())
        return h.hexdigest()

    # -- forward ------------------------------------------------------------

    def forward(self, z, shift_layer: str | None = None, shift: Tensor | None = None,
                params_override: dict | None = None,
                act_offset_layer: str | None = None,
                act_offset: Tensor | None = None) -> Tensor:
        """Differentiable forward pass returning images (B, 1, 32, 32).

        ``shift`` lives in ``shift_layer``'s raw direction space, either
        shared across the batch (flat) or per-sample (batch, dim).
        ``params_override`` substitutes Tensors for the stored arrays so a
        trainer can differentiate with respect to the weights themselves.
        ``act_offset`` is added to the activations entering a conv layer
        (shared across the batch).
        """
        z = np.asarray(z, dtype=F32) if not isinstance(z, Tensor) else z
        if isinstance(z, np.ndarray):
            if z.ndim != 2 or z.shape[1] != LATENT_DIM:
                raise ValueError(f"latent batch must be (B, {LATENT_DIM}), got {z.shape}")
            z = T.constant(z)
        bsz = z.data.shape[0]
        if shift_layer is not None and shift_layer not in _ARCH:
            raise KeyError(f"unknown layer {shift_layer!r}")

        def p(layer, name):
            if params_override is not None:
                return params_override[layer][name]
            return T.constant(self.params[layer][name])

        # L0 dense
        h = T.affine(z, p("L0", "w"), p("L0", "b"))
        if shift_layer == "L0" and shift is not None:
            zaug = T.constant(np.concatenate(
                [z.data, np.ones((bsz, 1), dtype=F32)], axis=1))
            if shift.data.ndim == 1:
                h = T.add(h, T.affine(zaug, T.reshape(shift, (512, LATENT_DIM + 1))))
            else:
                d = T.reshape(shift, (bsz, 512, LATENT_DIM + 1))
                extra = T.bmm(d, T.reshape(zaug, (bsz, LATENT_DIM + 1, 1)))
                h = T.add(h, T.reshape(extra, (bsz, 512)))
        h = T.reshape(h, (bsz,) + _SEED_SHAPE)
        h = T.leaky_relu(h)

        for layer in CONV_LAYERS:
            h = T.upsample2x(h)
            if act_offset_layer == layer and act_offset is not None:
                h = T.add(h, act_offset)
            k, b = p(layer, "k"), p(layer, "b")
            kshape = _ARCH[layer]["k"]
            if shift_layer == layer and shift is not None:
                if shift.data.ndim == 1:
                    h = T.conv2d(h, T.add(k, T.reshape(shift, kshape)), b)
                else:
                    kb = T.add(T.reshape(shift, (bsz,) + kshape),
                               T.reshape(k, (1,) + kshape))
                    h = T.conv2d_per_sample(h, kb, b)
            else:
                h = T.conv2d(h, k, b)
            if layer != "L3":
                h = T.leaky_relu(h)
        return T.sigmoid(h)

    def generate(self, z: np.ndarray) -> np.ndarray:
        """Images for a latent batch, (B, 1, 32, 32) float32 in [0, 1]."""
        return self.forward(z).data
