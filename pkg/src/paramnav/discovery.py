"""The four direction-discovery methods.

* ``svd_baseline``          — one-hot shifts of individual singular values.
* ``top_k_eigendirections`` — power iteration on the perceptual-displacement
                              Hessian with deflation by orthogonal projection.
* ``discover_opt``          — joint training of a direction matrix and a
                              reconstructor that must identify which direction
                              was applied and how strongly.
* ``discover_hybrid``       — the same optimization restricted to the span of
                              the top Hessian eigenvectors.

plus ``calibrate_shift_range``, which picks the magnitude range T so that a
typical shift produces a visible but not destructive change.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .directions import DirectionSet, svd_parametrization
from .linalg import project_orthogonal
from .metrics import PixelMSEMetric, displacement_graph, expected_displacement
from .optim import Adam
from .rng import Rng
from .tensor import F32, Tensor


class DegenerateOperatorError(RuntimeError):
    """Power iteration collapsed to a (near-)zero vector even after a restart."""


class CalibrationError(RuntimeError):
    """No magnitude T lands the displacement in the target band."""


@dataclass
class DiscoveryConfig:
    """Hyperparameters shared by the discovery methods.

    Defaults follow the reference recipe, scaled to the toy model where
    noted: direction count and iteration budget are reduced (the singular
    value space has only n <= 8 coordinates here), the magnitude range T is
    calibrated instead of fixed, and the probe step/minibatch/iteration
    counts of the spectrum method keep their original values.
    """

    count: int = 8                       # K, directions to discover
    magnitude_range: float | None = None  # T; None -> calibrate_shift_range
    regression_weight: float = 2.5e-3    # lambda on the magnitude head
    lr: float = 1e-4                     # Adam, constant
    iterations: int = 10_000             # 1e5 in the reference recipe
    batch: int = 32
    epsilon: float = 0.1                 # Hessian probe step
    power_iterations: int = 10
    hessian_batch: int = 512
    eigen_count: int | None = None       # hybrid span size; None -> count
    seed: int = 0

    def __post_init__(self):
        if self.count < 1 or self.batch < 1 or self.iterations < 0:
            raise ValueError("count, batch, iterations must be positive")
        if self.lr <= 0 or self.regression_weight < 0 or self.epsilon <= 0:
            raise ValueError("lr and epsilon must be positive")
        if self.power_iterations < 1 or self.hessian_batch < 1:
            raise ValueError("power_iterations and hessian_batch must be positive")


# ---------------------------------------------------------------------------
# SVD baseline


def svd_baseline(model, layer: str) -> DirectionSet:
    """One direction per singular value of the layer's flattened kernel."""
    u, s, v = svd_parametrization(model, layer)
    n = s.shape[0]
    return DirectionSet(
        layer=layer, parametrization="singular_values", basis=np.eye(n, dtype=F32),
        method="svd", labels=[f"sigma_{i}" for i in range(n)],
        scores=s.astype(F32), svd_u=u.astype(F32), svd_s=s.astype(F32),
        svd_v=v.astype(F32))


# ---------------------------------------------------------------------------
# spectrum method


def grad_displacement(model, layer: str, metric, a: np.ndarray,
                      z: np.ndarray) -> np.ndarray:
    """Gradient of the expected displacement at shift ``a`` (float64 copy)."""
    alpha = T.parameter(np.asarray(a, dtype=F32))
    loss = displacement_graph(model, layer, metric, alpha, z)
    T.backward(loss, params=[alpha])
    return alpha.grad.astype(np.float64)


def power_iteration_step(v: np.ndarray, epsilon: float, grad_fn) -> np.ndarray:
    """One update v -> (g(eps v) - g(-eps v)) / (2 eps ||v||).

    The result estimates H v / ||v||; the caller renormalizes and deflates.
    """
    v = np.asarray(v, dtype=np.float64)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise ValueError("power_iteration_step: zero-norm vector")
    return (grad_fn(epsilon * v) - grad_fn(-epsilon * v)) / (2.0 * epsilon * nv)


def top_k_eigendirections(model, layer: str, metric, cfg: DiscoveryConfig,
                          fixed_z: np.ndarray | None = None):
    """Leading eigenvectors of the displacement Hessian, by deflated power iteration.

    Returns (DirectionSet in raw space, eigenvalue estimates).  Each vector
    runs ``cfg.power_iterations`` updates; after every update the vector is
    projected off the span of previously found ones.  Both gradient calls of
    one update share a z-minibatch (common random numbers); minibatches are
    resampled across updates unless ``fixed_z`` pins one batch.
    """
    raw_dim = model.param_dim(layer)
    root = Rng(cfg.seed)
    init_rng = root.split("spectrum-init")
    z_rng = root.split("spectrum-z")
    found = np.zeros((0, raw_dim))
    estimates = []

    for idx in range(cfg.count):
        for attempt in range(2):
            v = init_rng.normal((raw_dim,))
            if found.shape[0]:
                v = project_orthogonal(v, found)
            nv = np.linalg.norm(v)
            if nv < 1e-12:
                continue
            v /= nv
            est = 0.0
            degenerate = False
            for _ in range(cfg.power_iterations):
                z = (fixed_z if fixed_z is not None
                     else z_rng.normal((cfg.hessian_batch, model.latent_dim)))
                hv = power_iteration_step(
                    v, cfg.epsilon,
                    lambda a: grad_displacement(model, layer, metric, a, z))
                if found.shape[0]:
                    hv = project_orthogonal(hv, found)
                est = np.linalg.norm(hv)
                if est < 1e-12:
                    degenerate = True
                    break
                v = hv / est
            if not degenerate:
                break
        else:
            raise DegenerateOperatorError(
                f"direction {idx}: operator result vanished twice on layer {layer}; "
                f"the Hessian rank is likely below the requested count {cfg.count}")
        found = np.vstack([found, v])
        estimates.append(est)

    estimates = np.asarray(estimates)
    order = np.argsort(-estimates, kind="stable")
    dirs = DirectionSet(
        layer=layer, parametrization="raw_kernel",
        basis=found[order].astype(F32), method="spectrum",
        labels=[f"hessian-eig-{i}" for i in range(len(order))],
        scores=estimates[order].astype(F32),
        meta={"epsilon": cfg.epsilon, "power_iterations": cfg.power_iterations,
              "hessian_batch": cfg.hessian_batch, "seed": cfg.seed})
    return dirs, estimates[order]


# ---------------------------------------------------------------------------
# optimization method (direction matrix + reconstructor)


class ReconstructorModel:
    """Small CNN that maps an (original, shifted) image pair to (k logits, t).

    Three conv3x3 + leaky-relu + 2x average-pool blocks (16, 32, 64 channels)
    on the channel-concatenated pair, global average pool, then two heads.
    """

    def __init__(self, num_directions: int, rng: Rng, image_size: int = 32):
        if image_size % 8:
            raise ValueError("image size must be divisible by 8")
        self.num_directions = num_directions
        widths = [(16, 2), (32, 16), (64, 32)]
        self.tensors = {}
        for i, (out_c, in_c) in enumerate(widths, start=1):
            r = rng.split(f"recon-c{i}")
            std = np.sqrt(2.0 / (in_c * 9.0))
            self.tensors[f"c{i}"] = T.parameter((std * r.normal((out_c, in_c, 3, 3))).astype(F32))
            self.tensors[f"b{i}"] = T.parameter(np.zeros(out_c, dtype=F32))
        rk = rng.split("recon-heads")
        self.tensors["head_k"] = T.parameter(
            (rk.normal((num_directions, 64)) / 8.0).astype(F32))
        self.tensors["head_k_b"] = T.parameter(np.zeros(num_directions, dtype=F32))
        self.tensors["head_t"] = T.parameter((rk.normal((1, 64)) / 8.0).astype(F32))
        self.tensors["head_t_b"] = T.parameter(np.zeros(1, dtype=F32))

    @property
    def params(self) -> list[Tensor]:
        return [self.tensors[k] for k in sorted(self.tensors)]

    def forward(self, pairs) -> tuple[Tensor, Tensor]:
        """(B, 2, H, W) pairs -> ((B, K) logits, (B,) magnitude estimate)."""
        h = pairs if isinstance(pairs, Tensor) else T.constant(pairs)
        if h.data.ndim != 4 or h.data.shape[1] != 2:
            raise T.ShapeError(f"reconstructor expects (B, 2, H, W) pairs, got {h.shape}")
        for i in (1, 2, 3):
            h = T.conv2d(h, self.tensors[f"c{i}"], self.tensors[f"b{i}"])
            h = T.leaky_relu(h)
            h = T.avgpool2x(h)
        h = T.global_avg_pool(h)
        logits = T.affine(h, self.tensors["head_k"], self.tensors["head_k_b"])
        t_hat = T.affine(h, self.tensors["head_t"], self.tensors["head_t_b"])
        return logits, T.reshape(t_hat, (h.data.shape[0],))


def reconstructor_forward(recon: ReconstructorModel, pair: np.ndarray):
    """Forward a single (2, H, W) pair; returns (logits (K,), t_hat float)."""
    logits, t_hat = recon.forward(np.asarray(pair, dtype=F32)[None])
    return logits.data[0], float(t_hat.data[0])


class OptimizationTrainer:
    """Joint training of the direction matrix and the reconstructor.

    Each step draws (z, k, t), renders the (original, shifted) pairs through
    the generator, and takes one Adam step on both modules against
    cross-entropy over k plus ``regression_weight`` times the absolute error
    of t.  Direction rows are renormalized to unit length after every step.
    """

    def __init__(self, model, dirs: DirectionSet, cfg: DiscoveryConfig,
                 train_directions: bool = True):
        if dirs.parametrization not in ("singular_values", "eigen_coeffs"):
            raise ValueError("optimization runs in the singular_values or "
                             "eigen_coeffs parametrization")
        if cfg.magnitude_range is None:
            raise ValueError("magnitude_range must be set (run calibrate_shift_range)")
        self.model = model
        self.dirs = dirs
        self.cfg = cfg
        self.xi = T.parameter(dirs.basis.copy())
        expansion = dirs.expansion_matrix()
        self.expansion = T.constant(expansion) if expansion is not None else None
        root = Rng(cfg.seed)
        self.rng = root.split("opt-batches")
        self.recon = ReconstructorModel(dirs.count, root.split("opt-recon"))
        self.opt_xi = Adam([self.xi], lr=cfg.lr) if train_directions else None
        self.opt_r = Adam(self.recon.params, lr=cfg.lr)
        self.train_directions = train_directions

    def _sample(self, rng: Rng, n: int):
        ks = rng.integers(0, self.dirs.count, (n,))
        ts = rng.uniform((n,), -self.cfg.magnitude_range, self.cfg.magnitude_range)
        z = rng.normal((n, self.model.latent_dim))
        return ks, ts, z

    def _pairs(self, ks, ts, z) -> tuple[Tensor, Tensor]:
        n = ks.shape[0]
        sel = np.zeros((n, self.dirs.count), dtype=F32)
        sel[np.arange(n), ks] = ts
        coeff = T.matmul(T.constant(sel), self.xi)            # (B, pdim)
        raw = coeff if self.expansion is None else T.matmul(coeff, self.expansion)
        base = T.constant(self.model.generate(z))
        shifted = self.model.forward(z, shift_layer=self.dirs.layer, shift=raw)
        return T.concat_channels(base, shifted), ts

    def step(self) -> dict:
        ks, ts, z = self._sample(self.rng, self.cfg.batch)
        pairs, ts = self._pairs(ks, ts, z)
        logits, t_hat = self.recon.forward(pairs)
        ce = T.softmax_cross_entropy(logits, ks)
        mae = T.absolute_error_mean(t_hat, T.constant(ts))
        loss = T.add(ce, T.mul(mae, float(self.cfg.regression_weight)))
        out = {"total": loss.item(), "ce": ce.item(), "mae": mae.item()}
        T.backward(loss, params=[self.xi] + self.recon.params)
        if self.train_directions:
            self.opt_xi.step()
            self.opt_xi.zero_grad()
        self.opt_r.step()
        self.opt_r.zero_grad()
        self._renormalize()
        return out

    def _renormalize(self):
        norms = np.linalg.norm(self.xi.data.astype(np.float64), axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise DegenerateOperatorError("a direction collapsed to zero norm")
        self.xi.data = (self.xi.data.astype(np.float64) / norms).astype(F32)

    def held_out_accuracy(self, per_direction: int = 32, seed: int = 1):
        """Classification accuracy on fresh pairs, overall and per direction."""
        rng = Rng(seed).split("opt-heldout")
        k = self.dirs.count
        ks = np.repeat(np.arange(k), per_direction)
        ts = rng.uniform((ks.shape[0],), -self.cfg.magnitude_range,
                         self.cfg.magnitude_range)
        z = rng.normal((ks.shape[0], self.model.latent_dim))
        pairs, _ = self._pairs(ks, ts, z)
        logits, _ = self.recon.forward(pairs)
        pred = logits.data.argmax(axis=1)
        per_dir = np.array([(pred[ks == i] == i).mean() for i in range(k)])
        return float((pred == ks).mean()), per_dir

    def current_directions(self) -> DirectionSet:
        return replace(self.dirs, basis=self.xi.data.copy())


def _train_directions(model, dirs0: DirectionSet, cfg: DiscoveryConfig, method: str):
    trainer = OptimizationTrainer(model, dirs0, cfg)
    curve = []
    for it in range(cfg.iterations):
        stats = trainer.step()
        curve.append((it, stats["total"], stats["ce"], stats["mae"]))
    overall, per_dir = trainer.held_out_accuracy(seed=cfg.seed + 1)
    order = np.argsort(-per_dir, kind="stable")
    trained = trainer.current_directions()
    dirs = replace(trained,
                   basis=trained.basis[order],
                   labels=[f"{method}-{i}" for i in range(dirs0.count)],
                   scores=per_dir[order].astype(F32),
                   method=method)
    dirs.meta = {**dirs0.meta, "held_out_accuracy": overall,
                 "iterations": cfg.iterations, "seed": cfg.seed}
    return dirs, curve


def discover_opt(model, layer: str, cfg: DiscoveryConfig):
    """Eq.-style optimization over shifts of the layer's singular values.

    Returns (DirectionSet sorted by held-out per-direction accuracy, loss
    curve rows (iteration, total, ce, mae)).
    """
    u, s, v = svd_parametrization(model, layer)
    n = s.shape[0]
    k = min(cfg.count, n)
    rng = Rng(cfg.seed).split("opt-init")
    basis = rng.normal((k, n))
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    dirs0 = DirectionSet(layer=layer, parametrization="singular_values",
                         basis=basis.astype(F32), method="opt",
                         svd_u=u.astype(F32), svd_s=s.astype(F32), svd_v=v.astype(F32))
    cfg = _ensure_range(model, dirs0, cfg)
    dirs0 = replace(dirs0, magnitude_range=cfg.magnitude_range)
    return _train_directions(model, dirs0, cfg, "opt")


def discover_hybrid(model, layer: str, metric, cfg: DiscoveryConfig):
    """Optimization constrained to the span of the top Hessian eigenvectors.

    Returns (DirectionSet, loss curve, eigenvalue estimates).  Every raw
    direction lies in the eigenspan by construction.
    """
    m = cfg.eigen_count or cfg.count
    if m < cfg.count:
        raise ValueError("eigen_count must be at least the direction count")
    spec_cfg = replace(cfg, count=m)
    eig_dirs, estimates = top_k_eigendirections(model, layer, metric, spec_cfg)
    basis = np.eye(cfg.count, m, dtype=F32)  # identity coefficients at init
    dirs0 = DirectionSet(layer=layer, parametrization="eigen_coeffs",
                         basis=basis, method="hybrid",
                         eigenvectors=eig_dirs.basis.copy(),
                         meta={"eigenvalues": [float(e) for e in estimates]})
    cfg = _ensure_range(model, dirs0, cfg)
    dirs0 = replace(dirs0, magnitude_range=cfg.magnitude_range)
    dirs, curve = _train_directions(model, dirs0, cfg, "hybrid")
    return dirs, curve, estimates


# ---------------------------------------------------------------------------
# magnitude calibration


def calibrate_shift_range(model, dirs: DirectionSet,
                          band=(0.01, 0.1), seed: int = 0,
                          sample_count: int = 64,
                          t_bounds=(1e-4, 1e6)) -> float:
    """Bisect T so the median displacement of T-scaled directions hits ``band``.

    Displacement is measured in pixel-MSE units on a fixed seeded latent
    batch; the search is monotone in T, so log-space bisection converges or
    the band is unreachable.
    """
    if dirs.count == 0:
        raise CalibrationError("no directions to calibrate")
    z = Rng(seed).split("calibrate").normal((sample_count, model.latent_dim))
    pixel = PixelMSEMetric()

    def median_disp(t: float) -> float:
        vals = [expected_displacement(model, dirs.layer, pixel,
                                      dirs.raw_delta(k, t), z)
                for k in range(dirs.count)]
        return float(np.median(vals))

    lo, hi = t_bounds
    f_lo, f_hi = median_disp(lo), median_disp(hi)
    if f_lo > band[1]:
        raise CalibrationError(f"displacement {f_lo:.3g} at minimal T already above band")
    if f_hi < band[0]:
        raise CalibrationError(f"displacement {f_hi:.3g} at maximal T still below band")
    # bisect toward the band's geometric center so the result is a point,
    # not merely the first magnitude that enters the (wide) band
    target = float(np.sqrt(band[0] * band[1]))
    mid = float(np.sqrt(lo * hi))
    for _ in range(80):
        mid = float(np.sqrt(lo * hi))
        if median_disp(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-9:
            break
    if not band[0] <= median_disp(mid) <= band[1]:
        raise CalibrationError("bisection failed to land in the displacement band")
    return mid


def _ensure_range(model, dirs: DirectionSet, cfg: DiscoveryConfig) -> DiscoveryConfig:
    if cfg.magnitude_range is not None:
        return cfg
    return replace(cfg, magnitude_range=calibrate_shift_range(model, dirs, seed=cfg.seed))
