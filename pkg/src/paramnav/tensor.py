"""Dense float32 tensors with reverse-mode automatic differentiation.

Ops execute eagerly (define-by-run): calling an op evaluates it and records
the node on the implicit computation graph, so building the graph *is*
evaluating it.  ``backward`` walks the recorded nodes in reverse topological
order (creation order is already topological) and accumulates vector-Jacobian
products into ``.grad`` fields.

Storage is 32-bit throughout; the numerical linear algebra that needs 64-bit
headroom lives in :mod:`paramnav.linalg` and operates on plain numpy arrays.
"""

import itertools

import numpy as np

F32 = np.float32


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the op's signature."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf crossed a graph boundary."""


class GraphError(RuntimeError):
    """Invalid use of the recorded computation graph."""


_seq = itertools.count()


class Tensor:
    """A dense float32 array, optionally tracked by the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_vjp",
                 "seq", "_backward_done")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=F32)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor created from non-finite data")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self.parents = ()
        self._vjp = None
        self.seq = next(_seq)
        self._backward_done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        v = float(self.data.reshape(()))
        if not np.isfinite(v):
            raise NonFiniteError("non-finite value read from graph")
        return v

    def to_numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def _node(data, op, parents, vjp):
    """Internal constructor for op outputs; skips the finiteness scan."""
    t = Tensor.__new__(Tensor)
    t.data = data
    t.grad = None
    t.op = op
    t.seq = next(_seq)
    t._backward_done = False
    if any(p.requires_grad for p in parents):
        t.requires_grad = True
        t.parents = tuple(parents)
        t._vjp = vjp
    else:
        t.requires_grad = False
        t.parents = ()
        t._vjp = None
    return t


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class Graph:
    """Reverse-topologically ordered view of the nodes feeding an output."""

    def __init__(self, output: Tensor):
        nodes, seen, stack = [], set(), [output]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            nodes.append(t)
            stack.extend(t.parents)
        nodes.sort(key=lambda t: t.seq)  # creation order == topological order
        self.output = output
        self.nodes = nodes


def backward(output: Tensor, params=None):
    """Populate ``.grad`` for every requires_grad tensor feeding ``output``.

    ``output`` must be scalar.  Tensors listed in ``params`` that do not
    appear in the graph receive an explicit zero gradient.  A second call on
    the same output is rejected; re-evaluate the forward pass first.
    """
    if output.data.size != 1:
        raise ShapeError(f"backward requires a scalar output, got shape {output.shape}")
    if output._backward_done:
        raise GraphError("backward already ran on this graph; re-evaluate before "
                         "calling backward again")
    output._backward_done = True
    graph = Graph(output)

    acc = {id(output): np.ones_like(output.data)}
    for t in reversed(graph.nodes):
        g = acc.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            t.grad = np.ascontiguousarray(g) if t.grad is None else t.grad + g
            if t.op == "leaf" and not np.all(np.isfinite(t.grad)):
                raise NonFiniteError(f"non-finite gradient for leaf tensor {t.shape}")
        if t._vjp is None:
            continue
        for p, contrib in zip(t.parents, t._vjp(g)):
            if contrib is None or not p.requires_grad:
                continue
            k = id(p)
            acc[k] = contrib if k not in acc else acc[k] + contrib

    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
    return graph


# ---------------------------------------------------------------------------
# elementwise ops


def _as_operand(x):
    if isinstance(x, Tensor):
        return x
    return constant(np.asarray(x, dtype=F32))


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.astype(F32, copy=False)


def add(a, b) -> Tensor:
    a, b = _as_operand(a), _as_operand(b)
    return _node(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_operand(a), _as_operand(b)
    return _node(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_operand(a), _as_operand(b)
    return _node(a.data * b.data, "mul", (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.data.shape),
                            _unbroadcast(g * a.data, b.data.shape)))


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, "neg", (a,), lambda g: (-g,))


def absolute(a: Tensor) -> Tensor:
    return _node(np.abs(a.data), "abs", (a,),
                 lambda g: (g * np.sign(a.data),))


def relu(a: Tensor) -> Tensor:
    # subgradient 0 at the kink
    return _node(np.maximum(a.data, 0), "relu", (a,),
                 lambda g: (g * (a.data > 0),))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    s = F32(slope)
    return _node(np.where(a.data > 0, a.data, s * a.data), "leaky_relu", (a,),
                 lambda g: (g * np.where(a.data > 0, F32(1.0), s),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _node(y, "sigmoid", (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _node(y, "tanh", (a,), lambda g: (g * (1.0 - y * y),))


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return _node(a.data.reshape(shape), "reshape", (a,),
                 lambda g: (g.reshape(a.data.shape),))


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 4 or b.data.ndim != 4 or a.data.shape[0] != b.data.shape[0] \
            or a.data.shape[2:] != b.data.shape[2:]:
        raise ShapeError(f"concat_channels: incompatible shapes {a.shape} and {b.shape}")
    ca = a.data.shape[1]
    return _node(np.concatenate([a.data, b.data], axis=1), "concat", (a, b),
                 lambda g: (g[:, :ca], g[:, ca:]))


# ---------------------------------------------------------------------------
# linear maps


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return _node(a.data @ b.data, "matmul", (a, b),
                 lambda g: (g @ b.data.T if a.requires_grad else None,
                            a.data.T @ g if b.requires_grad else None))


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (B, m, k) @ (B, k, n)."""
    if a.data.ndim != 3 or b.data.ndim != 3 or a.data.shape[0] != b.data.shape[0] \
            or a.data.shape[2] != b.data.shape[1]:
        raise ShapeError(f"bmm: {a.shape} @ {b.shape}")
    return _node(np.matmul(a.data, b.data), "bmm", (a, b),
                 lambda g: (np.matmul(g, b.data.swapaxes(1, 2)),
                            np.matmul(a.data.swapaxes(1, 2), g)))


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Dense affine map: y = x @ w.T (+ b). x is (B, in), w is (out, in)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"affine: x {x.shape} vs w {w.shape}")
    y = x.data @ w.data.T
    if b is None:
        return _node(y, "affine", (x, w),
                     lambda g: (g @ w.data if x.requires_grad else None,
                                g.T @ x.data if w.requires_grad else None))
    if b.data.shape != (w.data.shape[0],):
        raise ShapeError(f"affine: bias {b.shape} vs w {w.shape}")
    return _node(y + b.data, "affine", (x, w, b),
                 lambda g: (g @ w.data if x.requires_grad else None,
                            g.T @ x.data if w.requires_grad else None,
                            g.sum(axis=0) if b.requires_grad else None))


# ---------------------------------------------------------------------------
# convolution and pooling (NCHW, stride 1, zero padding to same size)


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Patches of ``x`` laid out (B, C*kh*kw, H*W); only clean slice copies."""
    b, c, h, w = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((b, c, kh * kw, h, w), dtype=F32)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i * kw + j] = xp[:, :, i:i + h, j:j + w]
    return cols.reshape(b, c * kh * kw, h * w)


def _col2im(gcols: np.ndarray, xshape, kh: int, kw: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add (B, C*kh*kw, H*W) back onto the input."""
    b, c, h, w = xshape
    ph, pw = kh // 2, kw // 2
    gp = np.zeros((b, c, h + 2 * ph, w + 2 * pw), dtype=F32)
    gc = gcols.reshape(b, c, kh * kw, h, w)
    for i in range(kh):
        for j in range(kw):
            gp[:, :, i:i + h, j:j + w] += gc[:, :, i * kw + j]
    return np.ascontiguousarray(gp[:, :, ph:ph + h, pw:pw + w])


def _check_conv(x, kshape):
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be (B, C, H, W), got {x.shape}")
    ko, kc, kh, kw = kshape
    if x.data.shape[1] != kc:
        raise ShapeError(f"conv2d: input has {x.data.shape[1]} channels, kernel expects {kc}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d kernel extents must be odd, got {kh}x{kw}")


def conv2d(x: Tensor, k: Tensor, b: Tensor | None = None) -> Tensor:
    """2-D convolution, stride 1, zero padded to the input size.

    ``k`` has shape (out, in, kh, kw); differentiable in x, k, and b.
    """
    if k.data.ndim != 4:
        raise ShapeError(f"conv2d kernel must be (O, C, kh, kw), got {k.shape}")
    _check_conv(x, k.data.shape)
    ko, kc, kh, kw = k.data.shape
    bsz, _, h, w = x.data.shape
    cols = _im2col(x.data, kh, kw)                      # (B, C*kh*kw, HW)
    kflat = k.data.reshape(ko, -1)
    y = np.matmul(kflat, cols)                          # (B, O, HW)
    if b is not None:
        if b.data.shape != (ko,):
            raise ShapeError(f"conv2d: bias {b.shape} vs kernel {k.shape}")
        y += b.data[:, None]
    out = y.reshape(bsz, ko, h, w)

    def vjp(g):
        gflat = g.reshape(bsz, ko, h * w)
        gk = None
        if k.requires_grad:
            gk = np.matmul(gflat, cols.swapaxes(1, 2)).sum(axis=0).reshape(k.data.shape)
        gx = None
        if x.requires_grad:
            gx = _col2im(np.matmul(kflat.T, gflat), x.data.shape, kh, kw)
        if b is None:
            return gx, gk
        return gx, gk, gflat.sum(axis=(0, 2)) if b.requires_grad else None

    parents = (x, k) if b is None else (x, k, b)
    return _node(out, "conv2d", parents, vjp)


def conv2d_per_sample(x: Tensor, kb: Tensor, b: Tensor | None = None) -> Tensor:
    """Convolution where each batch element has its own kernel.

    ``kb`` has shape (B, out, in, kh, kw).  Used to evaluate a whole batch of
    differently-shifted generators in one pass.
    """
    if kb.data.ndim != 5:
        raise ShapeError(f"per-sample kernel must be (B, O, C, kh, kw), got {kb.shape}")
    if kb.data.shape[0] != x.data.shape[0]:
        raise ShapeError(f"batch mismatch: x {x.shape} vs kernels {kb.shape}")
    _check_conv(x, kb.data.shape[1:])
    bsz, ko, kc, kh, kw = kb.data.shape
    _, _, h, w = x.data.shape
    cols = _im2col(x.data, kh, kw)                      # (B, C*kh*kw, HW)
    kflat = kb.data.reshape(bsz, ko, -1)
    y = np.matmul(kflat, cols)                          # (B, O, HW)
    if b is not None:
        if b.data.shape != (ko,):
            raise ShapeError(f"conv2d: bias {b.shape} vs kernel {kb.shape}")
        y += b.data[:, None]
    out = y.reshape(bsz, ko, h, w)

    def vjp(g):
        gflat = g.reshape(bsz, ko, h * w)
        gk = None
        if kb.requires_grad:
            gk = np.matmul(gflat, cols.swapaxes(1, 2)).reshape(kb.data.shape)
        gx = None
        if x.requires_grad:
            gx = _col2im(np.matmul(kflat.swapaxes(1, 2), gflat), x.data.shape, kh, kw)
        if b is None:
            return gx, gk
        return gx, gk, gflat.sum(axis=(0, 2)) if b.requires_grad else None

    parents = (x, kb) if b is None else (x, kb, b)
    return _node(out, "conv2d_per_sample", parents, vjp)


def upsample2x(a: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsample on (B, C, H, W)."""
    if a.data.ndim != 4:
        raise ShapeError(f"upsample2x expects (B, C, H, W), got {a.shape}")
    y = a.data.repeat(2, axis=2).repeat(2, axis=3)
    b, c, h, w = a.data.shape
    return _node(y, "upsample2x", (a,),
                 lambda g: (g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)),))


def avgpool2x(a: Tensor) -> Tensor:
    """2x2 average pooling on (B, C, H, W); extents must be even."""
    if a.data.ndim != 4 or a.data.shape[2] % 2 or a.data.shape[3] % 2:
        raise ShapeError(f"avgpool2x expects even (B, C, H, W), got {a.shape}")
    b, c, h, w = a.data.shape
    y = a.data.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return _node(y, "avgpool2x", (a,),
                 lambda g: ((g * F32(0.25)).repeat(2, axis=2).repeat(2, axis=3),))


def global_avg_pool(a: Tensor) -> Tensor:
    """Mean over the spatial extents: (B, C, H, W) -> (B, C)."""
    if a.data.ndim != 4:
        raise ShapeError(f"global_avg_pool expects (B, C, H, W), got {a.shape}")
    b, c, h, w = a.data.shape

    def vjp(g):
        out = np.empty(a.data.shape, dtype=F32)
        out[:] = (g / F32(h * w))[:, :, None, None]
        return (out,)

    return _node(a.data.mean(axis=(2, 3)), "global_avg_pool", (a,), vjp)


# ---------------------------------------------------------------------------
# reductions and losses


def tsum(a: Tensor) -> Tensor:
    return _node(np.asarray(a.data.sum(), dtype=F32), "sum", (a,),
                 lambda g: (np.full(a.data.shape, g, dtype=F32),))


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    return _node(np.asarray(a.data.mean(), dtype=F32), "mean", (a,),
                 lambda g: (np.full(a.data.shape, g / F32(n), dtype=F32),))


def squared_difference_mean(a: Tensor, b: Tensor) -> Tensor:
    """mean((a - b)^2), fused."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"squared_difference_mean: {a.shape} vs {b.shape}")
    d = a.data - b.data
    n = F32(d.size)
    val = np.asarray(np.mean(d * d), dtype=F32)
    return _node(val, "sq_diff_mean", (a, b),
                 lambda g: ((F32(2.0) * g / n) * d, (F32(-2.0) * g / n) * d))


def absolute_error_mean(a: Tensor, b: Tensor) -> Tensor:
    """mean(|a - b|), fused."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"absolute_error_mean: {a.shape} vs {b.shape}")
    d = a.data - b.data
    n = F32(d.size)
    s = np.sign(d)
    return _node(np.asarray(np.mean(np.abs(d)), dtype=F32), "abs_err_mean", (a, b),
                 lambda g: ((g / n) * s, (-g / n) * s))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under softmax(logits)."""
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy needs (B, K) logits, got {logits.shape}")
    labels = np.asarray(labels)
    bsz, k = logits.data.shape
    if labels.shape != (bsz,):
        raise ShapeError(f"labels shape {labels.shape} vs batch {bsz}")
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError(f"labels out of range for {k} classes")
    m = logits.data.max(axis=1, keepdims=True)
    ex = np.exp(logits.data - m)
    z = ex.sum(axis=1, keepdims=True)
    logp = (logits.data - m) - np.log(z)
    loss = np.asarray(-logp[np.arange(bsz), labels].mean(), dtype=F32)

    def vjp(g):
        p = ex / z
        p[np.arange(bsz), labels] -= 1.0
        return (p * (g / F32(bsz)),)

    return _node(loss, "softmax_ce", (logits,), vjp)
