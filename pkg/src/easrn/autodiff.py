"""Minimal reverse-mode autodiff over numpy arrays.

Every operation the deblurring graph and the losses need is defined
here as a function taking and returning :class:`Node`.  A node stores
its value, the nodes it was computed from, and a closure that pushes an
upstream gradient into its parents.  ``backprop`` runs the closures in
reverse topological order, after which ``node.grad`` holds d(root)/d(node).

Feature maps are (H, W, C) float arrays; conv filters are
(kh, kw, Cin, Cout) with separate (Cout,) biases.  Convolutions use
"same" zero padding.  Ops preserve the dtype of their inputs, so checks
can run in float64 while bulk forward evaluation can stay in float32.
"""

from __future__ import annotations

import numpy as np

from .pyramid import linear_coeffs


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_bwd")

    def __init__(self, value, parents=(), bwd=None):
        self.value = np.asarray(value)
        self.grad = None
        self._parents = tuple(parents)
        self._bwd = bwd

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Node(shape={self.value.shape}, dtype={self.value.dtype})"


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def _acc(node: Node, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def backprop(root: Node, seed=None) -> None:
    """Populate ``.grad`` on every node reachable from ``root``.

    ``seed`` is the upstream gradient of the root (defaults to ones,
    i.e. d(root)/d(root) for scalar roots).  Grads of reachable nodes
    are reset first so repeated calls do not accumulate stale values.
    """
    topo: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    for node in topo:
        node.grad = None
    root.grad = np.ones_like(root.value) if seed is None else np.asarray(seed, dtype=root.value.dtype)
    if root.grad.shape != root.value.shape:
        raise ValueError(f"seed gradient shape {root.grad.shape} != root shape {root.value.shape}")
    for node in reversed(topo):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


# --------------------------------------------------------------- arithmetic

def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shapes differ: {a.value.shape} vs {b.value.shape}")

    def bwd(g):
        _acc(a, g)
        _acc(b, g)

    return Node(a.value + b.value, (a, b), bwd)


def sub(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"sub shapes differ: {a.value.shape} vs {b.value.shape}")

    def bwd(g):
        _acc(a, g)
        _acc(b, -g)

    return Node(a.value - b.value, (a, b), bwd)


def mul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul shapes differ: {a.value.shape} vs {b.value.shape}")

    def bwd(g):
        _acc(a, g * b.value)
        _acc(b, g * a.value)

    return Node(a.value * b.value, (a, b), bwd)


def scale(x, c: float) -> Node:
    x = as_node(x)

    def bwd(g):
        _acc(x, g * c)

    return Node(x.value * c, (x,), bwd)


def div_by_scalar(x, s: Node) -> Node:
    """Elementwise x / s where s is a 0-d node (e.g. a reduced max)."""
    x, s = as_node(x), as_node(s)
    sv = float(s.value)

    def bwd(g):
        _acc(x, g / sv)
        _acc(s, np.asarray(-(g * x.value).sum() / sv**2, dtype=s.value.dtype))

    return Node(x.value / sv, (x, s), bwd)


def sub_scalar(x, s: Node) -> Node:
    """Elementwise x - s where s is a 0-d node (e.g. a percentile)."""
    x, s = as_node(x), as_node(s)

    def bwd(g):
        _acc(x, g)
        _acc(s, np.asarray(-g.sum(), dtype=s.value.dtype))

    return Node(x.value - float(s.value), (x, s), bwd)


def add_const(x, c: float) -> Node:
    x = as_node(x)

    def bwd(g):
        _acc(x, g)

    return Node(x.value + c, (x,), bwd)


# -------------------------------------------------------------- activations

def lrelu(x, slope: float = 0.2) -> Node:
    x = as_node(x)
    pos = x.value > 0

    def bwd(g):
        _acc(x, np.where(pos, g, slope * g))

    return Node(np.where(pos, x.value, slope * x.value), (x,), bwd)


def sigmoid(x) -> Node:
    x = as_node(x)
    s = 1.0 / (1.0 + np.exp(-x.value))

    def bwd(g):
        _acc(x, g * s * (1.0 - s))

    return Node(s, (x,), bwd)


def sqrt(x) -> Node:
    x = as_node(x)
    r = np.sqrt(x.value)

    def bwd(g):
        _acc(x, g * 0.5 / r)

    return Node(r, (x,), bwd)


# ------------------------------------------------------------- convolutions

def conv2d(x, w, b=None, stride: int = 1) -> Node:
    """Same-padded 2-D convolution; x (H,W,Cin), w (kh,kw,Cin,Cout)."""
    x, w = as_node(x), as_node(w)
    kh, kw, cin, cout = w.value.shape
    if x.value.ndim != 3 or x.value.shape[2] != cin:
        raise ValueError(f"conv input {x.value.shape} incompatible with filter {w.value.shape}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError("conv kernels must be odd-sized")
    ph, pw = kh // 2, kw // 2
    h, wdim = x.value.shape[:2]

    def cols_of(arr):
        xp = np.pad(arr, ((ph, ph), (pw, pw), (0, 0)))
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
        win = win[::stride, ::stride]  # (Ho, Wo, Cin, kh, kw)
        return win.transpose(0, 1, 3, 4, 2), xp.shape

    win, pad_shape = cols_of(x.value)
    ho, wo = win.shape[:2]
    cols = win.reshape(ho * wo, kh * kw * cin)
    wmat = w.value.reshape(kh * kw * cin, cout)
    y = (cols @ wmat).reshape(ho, wo, cout)
    parents = [x, w]
    if b is not None:
        b = as_node(b)
        if b.value.shape != (cout,):
            raise ValueError(f"bias shape {b.value.shape} != ({cout},)")
        y = y + b.value
        parents.append(b)

    def bwd(g):
        gmat = g.reshape(ho * wo, cout)
        win_b, _ = cols_of(x.value)
        cols_b = win_b.reshape(ho * wo, kh * kw * cin)
        _acc(w, (cols_b.T @ gmat).reshape(w.value.shape))
        gcols = (gmat @ wmat.T).reshape(ho, wo, kh, kw, cin)
        gxp = np.zeros(pad_shape, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                gxp[i:i + stride * ho:stride, j:j + stride * wo:stride] += gcols[:, :, i, j, :]
        _acc(x, gxp[ph:ph + h, pw:pw + wdim])
        if b is not None:
            _acc(b, g.sum(axis=(0, 1)))

    return Node(y, tuple(parents), bwd)


def deconv2x(x, w, b=None) -> Node:
    """Stride-2 transposed conv with a 3x3 filter; output dims double.

    Defined as the exact adjoint of a stride-2 same-padded 3x3
    convolution, so (H, W, Cin) maps to (2H, 2W, Cout) with filter
    (3, 3, Cin, Cout).
    """
    x, w = as_node(x), as_node(w)
    if w.value.shape[:2] != (3, 3):
        raise ValueError(f"deconv2x expects a 3x3 filter, got {w.value.shape}")
    h, wdim, cin = x.value.shape
    if w.value.shape[2] != cin:
        raise ValueError(f"deconv input {x.value.shape} incompatible with filter {w.value.shape}")
    cout = w.value.shape[3]
    yp = np.zeros((2 * h + 2, 2 * wdim + 2, cout), dtype=x.value.dtype)
    for di in range(3):
        for dj in range(3):
            yp[di:di + 2 * h:2, dj:dj + 2 * wdim:2] += x.value @ w.value[di, dj]
    y = yp[1:1 + 2 * h, 1:1 + 2 * wdim]
    parents = [x, w]
    if b is not None:
        b = as_node(b)
        if b.value.shape != (cout,):
            raise ValueError(f"bias shape {b.value.shape} != ({cout},)")
        y = y + b.value
        parents.append(b)

    def bwd(g):
        gp = np.zeros((2 * h + 2, 2 * wdim + 2, cout), dtype=g.dtype)
        gp[1:1 + 2 * h, 1:1 + 2 * wdim] = g
        gx = np.zeros_like(x.value)
        gw = np.zeros_like(w.value)
        for di in range(3):
            for dj in range(3):
                tap = gp[di:di + 2 * h:2, dj:dj + 2 * wdim:2]
                gx += tap @ w.value[di, dj].T
                gw[di, dj] = np.einsum("ijc,ijo->co", x.value, tap)
        _acc(x, gx)
        _acc(w, gw)
        if b is not None:
            _acc(b, g.sum(axis=(0, 1)))

    return Node(y, tuple(parents), bwd)


def maxpool2x(x) -> Node:
    """2x2 max pooling, stride 2; gradient routes to the argmax only."""
    x = as_node(x)
    h, w, c = x.value.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2x needs even dims, got {x.value.shape}")
    win = x.value.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3).reshape(h // 2, w // 2, c, 4)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        g4 = np.zeros((h // 2, w // 2, c, 4), dtype=g.dtype)
        np.put_along_axis(g4, idx[..., None], g[..., None], axis=-1)
        _acc(x, g4.reshape(h // 2, w // 2, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(h, w, c))

    return Node(y, (x,), bwd)


# ------------------------------------------------------------ shape plumbing

def concat_channels(*xs) -> Node:
    nodes = [as_node(x) for x in xs]
    sizes = [n.value.shape[2] for n in nodes]

    def bwd(g):
        start = 0
        for n, c in zip(nodes, sizes):
            _acc(n, g[:, :, start:start + c])
            start += c

    return Node(np.concatenate([n.value for n in nodes], axis=2), tuple(nodes), bwd)


def upsample_bilinear(x, out_hw) -> Node:
    """Half-pixel bilinear resize up one octave (same math as the
    pyramid's upsampler)."""
    x = as_node(x)
    h, w, _ = x.value.shape
    oh, ow = int(out_hw[0]), int(out_hw[1])
    ry = _interp_matrix(h, oh, x.value.dtype)
    cx = _interp_matrix(w, ow, x.value.dtype)
    y = np.tensordot(ry, x.value, axes=(1, 0))
    y = np.tensordot(y, cx, axes=(1, 1)).transpose(0, 2, 1)

    def bwd(g):
        gx = np.tensordot(ry.T, g, axes=(1, 0))
        _acc(x, np.tensordot(gx, cx, axes=(1, 0)).transpose(0, 2, 1))

    return Node(y, (x,), bwd)


def _interp_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    i0, i1, f = linear_coeffs(n_in, n_out)
    m = np.zeros((n_out, n_in), dtype=dtype)
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - f)
    np.add.at(m, (rows, i1), f)
    return m


def pad_mirror(x, top: int, bottom: int, left: int, right: int) -> Node:
    """Mirror-pad (edge sample included), e.g. for divisibility padding
    and for border-safe filtering in the edge detector."""
    x = as_node(x)
    h, w, _ = x.value.shape
    if top > h or bottom > h or left > w or right > w:
        raise ValueError(f"cannot mirror-pad {x.value.shape} by {(top, bottom, left, right)}")
    ry = np.concatenate([top - 1 - np.arange(top), np.arange(h), h - 1 - np.arange(bottom)])
    rx = np.concatenate([left - 1 - np.arange(left), np.arange(w), w - 1 - np.arange(right)])

    def bwd(g):
        t = np.zeros((h + top + bottom, w, g.shape[2]), dtype=g.dtype)
        np.add.at(t.transpose(1, 0, 2), rx, g.transpose(1, 0, 2))
        gx = np.zeros_like(x.value)
        np.add.at(gx, ry, t)
        _acc(x, gx)

    return Node(x.value[ry][:, rx], (x,), bwd)


def crop2d(x, top: int, left: int, h: int, w: int) -> Node:
    x = as_node(x)

    def bwd(g):
        gx = np.zeros_like(x.value)
        gx[top:top + h, left:left + w] = g
        _acc(x, gx)

    return Node(x.value[top:top + h, left:left + w], (x,), bwd)


def forward_diff(x, axis: int) -> Node:
    """Forward difference along axis 0 or 1, zero at the trailing edge."""
    x = as_node(x)
    d = np.zeros_like(x.value)
    if axis == 0:
        d[:-1] = x.value[1:] - x.value[:-1]
    elif axis == 1:
        d[:, :-1] = x.value[:, 1:] - x.value[:, :-1]
    else:
        raise ValueError("axis must be 0 or 1")

    def bwd(g):
        gx = np.zeros_like(x.value)
        if axis == 0:
            gx[1:] += g[:-1]
            gx[:-1] -= g[:-1]
        else:
            gx[:, 1:] += g[:, :-1]
            gx[:, :-1] -= g[:, :-1]
        _acc(x, gx)

    return Node(d, (x,), bwd)


def luma(x, weights) -> Node:
    """Weighted channel sum down to a single channel."""
    x = as_node(x)
    wv = np.asarray(weights, dtype=x.value.dtype)
    y = (x.value * wv[None, None, :]).sum(axis=2, keepdims=True)

    def bwd(g):
        _acc(x, g * wv[None, None, :])

    return Node(y, (x,), bwd)


# ----------------------------------------------------------------- reductions

def reduce_sum(x) -> Node:
    x = as_node(x)

    def bwd(g):
        _acc(x, np.full_like(x.value, float(g)))

    return Node(x.value.sum(), (x,), bwd)


def mean_abs(x) -> Node:
    x = as_node(x)
    n = x.value.size

    def bwd(g):
        _acc(x, (float(g) / n) * np.sign(x.value))

    return Node(np.abs(x.value).mean(), (x,), bwd)


def mean_sq(x) -> Node:
    x = as_node(x)
    n = x.value.size

    def bwd(g):
        _acc(x, (2.0 * float(g) / n) * x.value)

    return Node((x.value ** 2).mean(), (x,), bwd)


def sum_sq(x) -> Node:
    x = as_node(x)

    def bwd(g):
        _acc(x, 2.0 * float(g) * x.value)

    return Node((x.value ** 2).sum(), (x,), bwd)


def reduce_max(x) -> Node:
    x = as_node(x)
    flat_idx = int(np.argmax(x.value))

    def bwd(g):
        gx = np.zeros_like(x.value)
        gx.ravel()[flat_idx] = float(g)
        _acc(x, gx)

    return Node(x.value.max(), (x,), bwd)


def percentile(x, q: float) -> Node:
    """Linear-interpolated percentile; gradient flows to the two order
    statistics it interpolates between."""
    x = as_node(x)
    v = x.value.ravel()
    pos = q / 100.0 * (v.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, v.size - 1)
    f = pos - lo
    order = np.argsort(v, kind="stable")
    val = v[order[lo]] * (1.0 - f) + v[order[hi]] * f

    def bwd(g):
        gx = np.zeros_like(x.value)
        gx.ravel()[order[lo]] += float(g) * (1.0 - f)
        gx.ravel()[order[hi]] += float(g) * f
        _acc(x, gx)

    return Node(np.asarray(val), (x,), bwd)
