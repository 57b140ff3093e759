"""Supervised distillation of the procedural renderer into the toy generator.

The "pretrained" generator is produced by regressing G(z) onto the rendered
disc whose parameters are the fixed squashing of z, with per-pixel squared
error.  This keeps the pretraining deterministic and minutes-fast while
giving the discovery methods the smooth pretrained mapping they need.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .generator import ALL_LAYERS, LATENT_DIM, GeneratorModel
from .optim import Adam
from .rng import Rng
from .scenes import latent_to_scene, render_batch
from .tensor import NonFiniteError, Tensor


class DistillationError(RuntimeError):
    """Training loss went non-finite; carries the failing step index."""

    def __init__(self, step: int):
        super().__init__(f"distillation diverged at step {step}")
        self.step = step


@dataclass
class DistillConfig:
    steps: int = 20_000
    batch: int = 32
    lr: float = 1e-3
    seed: int = 0
    radius_mode: str = "fixed"
    holdout: int = 512
    image_size: int = 32  # fixed by the generator architecture

    def __post_init__(self):
        if self.image_size != 32:
            raise ValueError("the toy generator renders 32x32 images")
        if self.steps < 0 or self.batch < 1 or self.lr <= 0:
            raise ValueError("invalid distillation config")


def _targets(z: np.ndarray, radius_mode: str, size: int) -> np.ndarray:
    return render_batch(latent_to_scene(z, radius_mode), size)


def holdout_mse(model: GeneratorModel, cfg: DistillConfig) -> float:
    z = Rng(cfg.seed).split("distill-eval").normal((cfg.holdout, LATENT_DIM))
    target = _targets(z, cfg.radius_mode, cfg.image_size)
    diff = model.generate(z).astype(np.float64) - target
    return float((diff * diff).mean())


def distill_generator(cfg: DistillConfig):
    """Train the generator; returns (model, loss_curve as list of floats).

    The returned model's meta records the config and the final held-out MSE.
    Deterministic: same config -> bit-identical checkpoint.
    """
    root = Rng(cfg.seed)
    init = GeneratorModel.init_random(root.split("distill-init"))
    params = {layer: {name: Tensor(arr, requires_grad=True)
                      for name, arr in init.params[layer].items()}
              for layer in ALL_LAYERS}
    flat = [params[l][n] for l in ALL_LAYERS for n in sorted(params[l])]
    opt = Adam(flat, lr=cfg.lr)
    z_rng = root.split("distill-z")

    curve = []
    for step in range(cfg.steps):
        z = z_rng.normal((cfg.batch, LATENT_DIM))
        target = T.constant(_targets(z, cfg.radius_mode, cfg.image_size))
        out = init.forward(z, params_override=params)
        loss = T.squared_difference_mean(out, target)
        try:
            val = loss.item()
        except NonFiniteError:
            raise DistillationError(step) from None
        curve.append(val)
        T.backward(loss, params=flat)
        opt.step()
        opt.zero_grad()

    trained = GeneratorModel(
        {l: {n: t.data for n, t in params[l].items()} for l in ALL_LAYERS},
        meta={"seed": cfg.seed, "steps": cfg.steps, "batch": cfg.batch,
              "lr": cfg.lr, "radius_mode": cfg.radius_mode})
    trained.meta["final_mse"] = holdout_mse(trained, cfg)
    return trained, curve
