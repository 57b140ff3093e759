"""Evaluation protocols: interpolation strips, realism (Fréchet feature
distance) curves, latent-reproduction residuals, and locality heatmaps.

Everything here is a pure function of (model, directions, config, seed):
latent batches come from documented seeded streams so that independent
re-evaluations line up exactly.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .directions import DirectionSet, apply_direction
from .generator import GeneratorModel, LATENT_DIM
from .metrics import (RandomFeatureMetric, fit_feature_stats, frechet_distance)
from .optim import Adam
from .rng import Rng
from .scenes import latent_to_scene, render_batch
from .tensor import F32


def latent_from_seed(seed: int, latent_dim: int = LATENT_DIM) -> np.ndarray:
    """The (1, d) latent that every viewer associates with an integer seed."""
    return Rng(int(seed)).split("inspect-z").normal((1, latent_dim))


# ---------------------------------------------------------------------------
# interpolation strips


@dataclass
class StripSpec:
    """Image grid layout: rows are latent seeds, columns are magnitudes."""

    direction: int
    t_max: float
    steps: int = 7
    t_min: float | None = None  # default -t_max
    seeds: tuple = (0, 1, 2)

    def __post_init__(self):
        if self.t_min is None:
            self.t_min = -self.t_max
        if self.steps < 2:
            raise ValueError("strip needs at least 2 magnitude steps")
        if not np.any(self.grid() == 0.0):
            raise ValueError("magnitude grid must include 0")

    def grid(self) -> np.ndarray:
        g = np.linspace(self.t_min, self.t_max, self.steps)
        scale = max(abs(self.t_min), abs(self.t_max), 1.0)
        g[np.abs(g) < 1e-9 * scale] = 0.0  # keep the t = 0 column exact
        return g


def render_strip(model, dirs: DirectionSet, spec: StripSpec):
    """Render the strip; returns (grid image (rows*H, cols*W) f32, t grid).

    The t = 0 column is bit-identical to the unshifted model's output.
    """
    grid = spec.grid()
    rows = []
    for seed in spec.seeds:
        z = latent_from_seed(seed, model.latent_dim)
        cells = [apply_direction(model, dirs, spec.direction, float(t)).generate(z)[0, 0]
                 for t in grid]
        rows.append(np.concatenate(cells, axis=1))
    return np.concatenate(rows, axis=0), grid


# ---------------------------------------------------------------------------
# realism curves


def ffd_curve(model, dirs: DirectionSet, k: int, t_grid,
              metric: RandomFeatureMetric, reference_stats, sample_count: int = 4096,
              seed: int = 0, chunk: int = 512):
    """Fréchet feature distance to the reference stats at each magnitude.

    The same seeded latent batch is reused for every t, so the t = 0 entry
    equals the unshifted generator's distance exactly.
    """
    z = Rng(seed).split("ffd-z").normal((sample_count, model.latent_dim))
    out = []
    for t in np.asarray(t_grid, dtype=np.float64):
        shifted = apply_direction(model, dirs, k, float(t))
        imgs = np.concatenate([shifted.generate(z[i:i + chunk])
                               for i in range(0, sample_count, chunk)])
        stats = fit_feature_stats(metric, imgs)
        out.append((float(t), frechet_distance(reference_stats, stats)))
    return out


# ---------------------------------------------------------------------------
# locality heatmaps


def pixel_diff_heatmap(model, dirs: DirectionSet, k: int, t_grid,
                       z_count: int = 256, seed: int = 0):
    """Per-pixel mean squared difference over latents and magnitudes, (H, W) f64.

    The grid must be uniform and symmetric about 0.  Latents come from the
    stream ``Rng(seed).split("heatmap-z")``.
    """
    grid = np.sort(np.asarray(t_grid, dtype=np.float64))
    if grid.size == 0:
        raise ValueError("empty magnitude grid")
    if np.abs(grid + grid[::-1]).max() > 1e-9 * max(1.0, np.abs(grid).max()):
        raise ValueError("magnitude grid must be symmetric about 0")
    steps = np.diff(grid)
    if steps.size and np.abs(steps - steps[0]).max() > 1e-9 * max(1.0, steps[0]):
        raise ValueError("magnitude grid must be uniform")
    z = Rng(seed).split("heatmap-z").normal((z_count, model.latent_dim))
    base = model.generate(z).astype(np.float64)
    acc = np.zeros(base.shape[2:], dtype=np.float64)
    for t in grid:
        shifted = apply_direction(model, dirs, k, float(t)).generate(z).astype(np.float64)
        acc += ((shifted - base) ** 2).mean(axis=0)[0]
    return acc / grid.size


# ---------------------------------------------------------------------------
# latent reproduction (non-reachability protocol)


@dataclass
class ReproduceConfig:
    lr: float = 1e-2
    steps: int = 2000
    batch: int = 64
    eval_batch: int = 64
    eval_every: int = 10
    seed: int = 0


@dataclass
class ReproductionReport:
    """Outcome of trying to mimic a weight shift by a latent/activation shift."""

    direction: int
    space: str
    final_residual: float
    baseline_residual: float
    config: dict
    trace: list = field(default_factory=list)  # (step, train_loss, eval_residual)

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "space": self.space,
            "final_residual": self.final_residual,
            "baseline_residual": self.baseline_residual,
            "config": self.config,
            "trace": [[int(s), float(a), float(b)] for s, a, b in self.trace],
        }


def _residual(pred: np.ndarray, target: np.ndarray) -> float:
    d = pred.astype(np.float64) - target.astype(np.float64)
    return float((d * d).mean())


def reproduce_latent(model, dirs: DirectionSet, k: int, t: float, space: str,
                     cfg: ReproduceConfig = ReproduceConfig()) -> ReproductionReport:
    """Optimize a shared shift h to make G(z + h) (or an activation offset)
    match the weight-shifted generator, reporting residuals on held-out z.

    The reported residual is the best held-out value seen during the run
    (h = 0 is the first candidate), so it never exceeds the baseline.
    """
    if space not in ("z", "activation"):
        raise ValueError(f"space must be 'z' or 'activation', got {space!r}")
    shifted = apply_direction(model, dirs, k, t)
    root = Rng(cfg.seed)
    z_train = root.split("reproduce-train").normal((cfg.batch, model.latent_dim))
    z_eval = root.split("reproduce-eval").normal((cfg.eval_batch, model.latent_dim))
    target_train = T.constant(shifted.generate(z_train))
    target_eval = shifted.generate(z_eval)

    if space == "z":
        h = T.parameter(np.zeros(model.latent_dim, dtype=F32))

        def predict_graph():
            return model.forward(T.add(T.constant(z_train.astype(F32)), h))

        def predict_eval():
            return model.generate(z_eval + h.data.astype(np.float64))
    else:
        layer = dirs.layer
        if layer not in ("L1", "L2", "L3"):
            raise ValueError("activation-space reproduction targets a conv layer")
        act_shape = _conv_input_shape(layer)
        h = T.parameter(np.zeros(act_shape, dtype=F32))

        def predict_graph():
            return model.forward(z_train, act_offset_layer=layer, act_offset=h)

        def predict_eval():
            return model.forward(z_eval, act_offset_layer=layer,
                                 act_offset=T.constant(h.data)).data

    baseline = _residual(model.generate(z_eval), target_eval)
    best = baseline
    best_h = h.data.copy()
    opt = Adam([h], lr=cfg.lr)
    trace = [(0, float("nan"), baseline)]
    for step in range(1, cfg.steps + 1):
        loss = T.squared_difference_mean(predict_graph(), target_train)
        T.backward(loss, params=[h])
        opt.step()
        opt.zero_grad()
        if step % cfg.eval_every == 0 or step == cfg.steps:
            res = _residual(predict_eval(), target_eval)
            trace.append((step, loss.item(), res))
            if res < best:
                best = res
                best_h = h.data.copy()
    h.data = best_h
    return ReproductionReport(
        direction=k, space=space, final_residual=best, baseline_residual=baseline,
        config={"lr": cfg.lr, "steps": cfg.steps, "batch": cfg.batch,
                "eval_batch": cfg.eval_batch, "seed": cfg.seed, "magnitude": t},
        trace=trace)


def _conv_input_shape(layer: str):
    return {"L1": (32, 8, 8), "L2": (16, 16, 16), "L3": (8, 32, 32)}[layer]


# ---------------------------------------------------------------------------
# constructed reference directions


def latent_translation_direction(model: GeneratorModel, c: np.ndarray):
    """A weight direction exactly equivalent to the latent translation z -> z + c.

    Realized as a rank-one update of the dense layer's augmented matrix
    [W | b]: adding W c to the bias.  Returns (DirectionSet on L0, t*) where
    applying the direction at magnitude t* reproduces the translation.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (model.latent_dim,):
        raise ValueError(f"c must have shape ({model.latent_dim},)")
    w = model.params["L0"]["w"].astype(np.float64)
    aug = np.zeros((512, model.latent_dim + 1))
    aug[:, model.latent_dim] = w @ c
    flat = aug.ravel()
    t_star = float(np.linalg.norm(flat))
    dirs = DirectionSet(layer="L0", parametrization="raw_kernel",
                        basis=(flat / t_star)[None].astype(F32),
                        method="constructed", labels=["latent-translation"],
                        magnitude_range=t_star)
    return dirs, t_star


def fit_effect_direction(model, layer: str, target_fn, steps: int = 1200,
                         lr: float = 0.01, batch: int = 64, seed: int = 0,
                         label: str = "fitted-effect"):
    """Fit a raw-space direction whose shift pushes G(z) toward target_fn(z).

    Used to construct reference effects (e.g. "grow the disc radius") whose
    target images the procedural renderer supplies directly.  Returns
    (unit DirectionSet, t*) with t* the fitted shift's norm.
    """
    rng = Rng(seed).split("fit-effect")
    delta = T.parameter(np.zeros(model.param_dim(layer), dtype=F32))
    opt = Adam([delta], lr=lr)
    for _ in range(steps):
        z = rng.normal((batch, model.latent_dim))
        target = T.constant(np.asarray(target_fn(z), dtype=F32))
        loss = T.squared_difference_mean(
            model.forward(z, shift_layer=layer, shift=delta), target)
        T.backward(loss, params=[delta])
        opt.step()
        opt.zero_grad()
    t_star = float(np.linalg.norm(delta.data.astype(np.float64)))
    if t_star == 0.0:
        raise RuntimeError("fitted direction is identically zero")
    dirs = DirectionSet(layer=layer, parametrization="raw_kernel",
                        basis=(delta.data.astype(np.float64) / t_star)[None].astype(F32),
                        method="constructed", labels=[label], magnitude_range=t_star)
    return dirs, t_star


def radius_change_direction(model: GeneratorModel, layer: str = "L2",
                            radius_delta: float = 2.0, **kw):
    """Direction at ``layer`` that changes the rendered disc radius.

    Only meaningful for a generator distilled in fixed-radius mode, where
    the radius is deliberately not a latent factor.
    """
    mode = model.meta.get("radius_mode", "fixed")
    from .scenes import FIXED_RADIUS
    target_radius = FIXED_RADIUS + radius_delta

    def target_fn(z):
        return render_batch(latent_to_scene(z, mode, radius_override=target_radius), 32)

    return fit_effect_direction(model, layer, target_fn,
                                label=f"radius+{radius_delta:g}", **kw)
