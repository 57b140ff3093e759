"""Independent float64 oracles shared by the unit and acceptance tests.

These deliberately re-derive results through a different route than the
library (shift-and-accumulate convolution instead of im2col, explicit
central differences instead of reverse-mode autodiff) so that an agreement
is evidence, not circularity.
"""

import numpy as np


def central_diff_grad(f, arrays: list, wrt: int, step: float = 1e-4) -> np.ndarray:
    """64-bit central finite differences of scalar ``f`` w.r.t. arrays[wrt].

    The step is scaled by each entry's magnitude.
    """
    arrays = [a.astype(np.float64).copy() for a in arrays]
    x = arrays[wrt]
    flat = x.reshape(-1)
    g = np.zeros(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        h = step * max(1.0, abs(orig))
        flat[i] = orig + h
        fp = f(arrays)
        flat[i] = orig - h
        fm = f(arrays)
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * h)
    return g.reshape(x.shape)


def max_rel_err(got: np.ndarray, want: np.ndarray) -> float:
    scale = max(np.abs(want).max(), 1e-8)
    return float(np.abs(got.astype(np.float64) - want).max() / scale)


def conv2d_f64(x, k, b=None):
    """Same-padded stride-1 convolution by shift-and-accumulate, float64."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    bsz, c, h, w = x.shape
    o, _, kh, kw = k.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    y = np.zeros((bsz, o, h, w))
    for i in range(kh):
        for j in range(kw):
            y += np.einsum("bchw,oc->bohw", xp[:, :, i:i + h, j:j + w], k[:, :, i, j])
    if b is not None:
        y += np.asarray(b, dtype=np.float64)[None, :, None, None]
    return y


def upsample2x_f64(x):
    return np.asarray(x, dtype=np.float64).repeat(2, axis=2).repeat(2, axis=3)


def avgpool2x_f64(x):
    x = np.asarray(x, dtype=np.float64)
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def softmax_ce_f64(logits, labels):
    logits = np.asarray(logits, dtype=np.float64)
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    logp = (logits - m) - np.log(ex.sum(axis=1, keepdims=True))
    return -logp[np.arange(logits.shape[0]), labels].mean()


def _leaky_f64(x):
    return np.where(x > 0, x, 0.2 * x)


def generator_forward_f64(params: dict, z: np.ndarray,
                          shift_layer: str | None = None,
                          delta: np.ndarray | None = None) -> np.ndarray:
    """Independent float64 forward pass of the toy generator architecture."""
    z = np.asarray(z, dtype=np.float64)
    p = {l: {n: a.astype(np.float64) for n, a in d.items()} for l, d in params.items()}
    if shift_layer is not None and delta is not None:
        delta = np.asarray(delta, dtype=np.float64)
        if shift_layer == "L0":
            aug = delta.reshape(512, 9)
            p["L0"]["w"] = p["L0"]["w"] + aug[:, :8]
            p["L0"]["b"] = p["L0"]["b"] + aug[:, 8]
        else:
            p[shift_layer]["k"] = p[shift_layer]["k"] + delta.reshape(p[shift_layer]["k"].shape)
    h = z @ p["L0"]["w"].T + p["L0"]["b"]
    h = _leaky_f64(h.reshape(z.shape[0], 32, 4, 4))
    for layer in ("L1", "L2", "L3"):
        h = upsample2x_f64(h)
        h = conv2d_f64(h, p[layer]["k"], p[layer]["b"])
        if layer != "L3":
            h = _leaky_f64(h)
    return 1.0 / (1.0 + np.exp(-h))


def displacement_f64(params: dict, layer: str, delta: np.ndarray,
                     z: np.ndarray) -> float:
    """Pixel-MSE expected displacement, entirely in float64."""
    base = generator_forward_f64(params, z)
    shifted = generator_forward_f64(params, z, layer, delta)
    return float(((shifted - base) ** 2).mean())


def _l3_input_f64(params: dict, z: np.ndarray) -> np.ndarray:
    """Activations entering the final conv (after the last upsample), float64."""
    p = {l: {n: a.astype(np.float64) for n, a in d.items()} for l, d in params.items()}
    h = z.astype(np.float64) @ p["L0"]["w"].T + p["L0"]["b"]
    h = _leaky_f64(h.reshape(z.shape[0], 32, 4, 4))
    for layer in ("L1", "L2"):
        h = upsample2x_f64(h)
        h = _leaky_f64(conv2d_f64(h, p[layer]["k"], p[layer]["b"]))
    return upsample2x_f64(h)


def displacement_many_l3_f64(params: dict, deltas: np.ndarray, z: np.ndarray,
                             chunk: int = 96) -> np.ndarray:
    """Displacement at many L3 kernel shifts at once (shared prefix), float64."""
    h_pre = _l3_input_f64(params, z)                   # (B, 8, 32, 32)
    k = params["L3"]["k"].astype(np.float64)
    bias = params["L3"]["b"].astype(np.float64)
    b, c, hh, ww = h_pre.shape
    hp = np.pad(h_pre, ((0, 0), (0, 0), (1, 1), (1, 1)))
    base = 1.0 / (1.0 + np.exp(-(conv2d_f64(h_pre, k, bias))))
    out = np.empty(deltas.shape[0])
    for lo in range(0, deltas.shape[0], chunk):
        dk = k[None] + deltas[lo:lo + chunk].astype(np.float64).reshape(-1, *k.shape)
        y = np.zeros((dk.shape[0], b, hh, ww))
        for i in range(3):
            for j in range(3):
                y += np.einsum("bchw,dc->dbhw", hp[:, :, i:i + hh, j:j + ww],
                               dk[:, 0, :, i, j])
        y = 1.0 / (1.0 + np.exp(-(y + bias[0])))
        d = y - base[None, :, 0]
        out[lo:lo + dk.shape[0]] = (d * d).mean(axis=(1, 2, 3))
    return out


def brute_force_hessian_l3(params: dict, z: np.ndarray,
                           step: float = 1e-2) -> np.ndarray:
    """Central-difference Hessian of the L3 displacement at zero shift.

    Four-point stencil off-diagonal; the diagonal uses f(0) = 0 exactly.
    """
    dim = 72
    e = np.eye(dim) * step
    probes = []
    for i in range(dim):
        probes += [e[i], -e[i]]
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    for i, j in pairs:
        probes += [e[i] + e[j], e[i] - e[j], -e[i] + e[j], -e[i] - e[j]]
    vals = displacement_many_l3_f64(params, np.asarray(probes), z)
    h = np.zeros((dim, dim))
    for i in range(dim):
        h[i, i] = (vals[2 * i] + vals[2 * i + 1]) / step ** 2
    base = 2 * dim
    for idx, (i, j) in enumerate(pairs):
        f_pp, f_pm, f_mp, f_mm = vals[base + 4 * idx: base + 4 * idx + 4]
        h[i, j] = h[j, i] = (f_pp - f_pm - f_mp + f_mm) / (4.0 * step ** 2)
    return h
