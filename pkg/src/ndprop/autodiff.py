"""Minimal reverse-mode differentiation over numpy arrays.

Values are computed eagerly when an op is recorded. Every node keeps a
closure mapping its output gradient to operand gradients; :meth:`Tape.backward`
walks the node list once in reverse order. Broadcasting is limited to
scalar <-> array and to adding a row vector onto a matrix (bias terms).

Ties in min/max (elementwise or along an axis) send the gradient to the first
operand, matching ``np.argmin``/``np.argmax``. With ``track_kinks`` the tape
also records the smallest non-zero gap seen at a min/max, which tells a
finite-difference check whether it is sitting next to a kink.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

SAFE_FLOOR = 1e-12


class ShapeError(ValueError):
    pass


class Var:
    """Handle to a tape node."""

    __slots__ = ("tape", "id", "value")
    __array_priority__ = 100

    def __init__(self, tape: "Tape", node_id: int, value: np.ndarray):
        self.tape = tape
        self.id = node_id
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var(id={self.id}, shape={self.value.shape})"

    def __add__(self, other):
        return self.tape.add(self, other)

    def __radd__(self, other):
        return self.tape.add(other, self)

    def __sub__(self, other):
        return self.tape.sub(self, other)

    def __rsub__(self, other):
        return self.tape.sub(other, self)

    def __mul__(self, other):
        return self.tape.mul(self, other)

    def __rmul__(self, other):
        return self.tape.mul(other, self)

    def __neg__(self):
        return self.tape.sub(0.0, self)

    def __getitem__(self, idx):
        return self.tape.gather(self, idx)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0:
        return np.asarray(g.sum())
    # row vector added onto a matrix
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, (gs, s) in enumerate(zip(g.shape, shape)):
        if s == 1 and gs != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray):
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    big, small = (a, b) if a.ndim >= b.ndim else (b, a)
    if small.ndim == 1 and big.ndim == 2 and big.shape[1] == small.shape[0]:
        return
    raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")


class Tape:
    """Append-only record of operations.

    With ``record=False`` values are still computed but no backward closures
    are kept, which is what evaluation runs use.
    """

    def __init__(self, record: bool = True, track_kinks: bool = False):
        self.record = record
        self.nodes: list[tuple[str, tuple[int, ...], Callable | None]] = []
        self.clamp_events = 0
        self.track_kinks = track_kinks
        self.kink_margin = float("inf")

    def note_gap(self, gap: np.ndarray):
        gap = gap[gap > 0]
        if gap.size:
            self.kink_margin = min(self.kink_margin, float(gap.min()))

    # -- node construction ---------------------------------------------------

    def _push(self, kind, value, operands=(), backward=None) -> Var:
        value = np.asarray(value, dtype=float)
        nid = len(self.nodes)
        if self.record:
            self.nodes.append((kind, tuple(o.id for o in operands), backward))
        else:
            self.nodes.append((kind, (), None))
        return Var(self, nid, value)

    def _lift(self, x) -> Var:
        if isinstance(x, Var):
            if x.tape is not self:
                raise ValueError("operand belongs to another tape")
            return x
        return self.const(x)

    def leaf(self, value) -> Var:
        return self._push("leaf", np.array(value, dtype=float))

    def const(self, value) -> Var:
        return self._push("const", np.array(value, dtype=float))

    # -- elementwise -------------------------------------------------------------

    def add(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        sa, sb = a.value.shape, b.value.shape
        return self._push("add", a.value + b.value, (a, b),
                          lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))

    def sub(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        sa, sb = a.value.shape, b.value.shape
        return self._push("sub", a.value - b.value, (a, b),
                          lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))

    def mul(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        av, bv = a.value, b.value
        return self._push("mul", av * bv, (a, b),
                          lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))

    def div_safe(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        clamped = b.value < SAFE_FLOOR
        if np.any(clamped):
            self.clamp_events += int(np.sum(clamped))
        bv = np.maximum(b.value, SAFE_FLOOR)
        av = a.value
        out = av / bv

        def back(g):
            gb = np.where(clamped, 0.0, -g * av / (bv * bv))
            return _unbroadcast(g / bv, av.shape), _unbroadcast(gb, b.value.shape)

        return self._push("div", out, (a, b), back)

    def minimum(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        if self.track_kinks:
            self.note_gap(np.abs(a.value - b.value))
        first = a.value <= b.value
        sa, sb = a.value.shape, b.value.shape
        return self._push("min", np.where(first, a.value, b.value), (a, b),
                          lambda g: (_unbroadcast(np.where(first, g, 0.0), sa),
                                     _unbroadcast(np.where(first, 0.0, g), sb)))

    def maximum(self, a, b) -> Var:
        a, b = self._lift(a), self._lift(b)
        _check_broadcast(a.value, b.value)
        if self.track_kinks:
            self.note_gap(np.abs(a.value - b.value))
        first = a.value >= b.value
        sa, sb = a.value.shape, b.value.shape
        return self._push("max", np.where(first, a.value, b.value), (a, b),
                          lambda g: (_unbroadcast(np.where(first, g, 0.0), sa),
                                     _unbroadcast(np.where(first, 0.0, g), sb)))

    def clamp01(self, a) -> Var:
        a = self._lift(a)
        inside = (a.value >= 0.0) & (a.value <= 1.0)
        return self._push("clamp01", np.clip(a.value, 0.0, 1.0), (a,),
                          lambda g: (np.where(inside, g, 0.0),))

    def sigmoid(self, a) -> Var:
        a = self._lift(a)
        s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
        return self._push("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))

    def tanh(self, a) -> Var:
        a = self._lift(a)
        t = np.tanh(a.value)
        return self._push("tanh", t, (a,), lambda g: (g * (1.0 - t * t),))

    def log_safe(self, a) -> Var:
        a = self._lift(a)
        clamped = a.value < SAFE_FLOOR
        if np.any(clamped):
            self.clamp_events += int(np.sum(clamped))
        x = np.maximum(a.value, SAFE_FLOOR)
        return self._push("log", np.log(x), (a,), lambda g: (np.where(clamped, 0.0, g / x),))

    # -- linear algebra / structure ----------------------------------------------

    def affine(self, x, w, b=None) -> Var:
        """``x @ w + b``; ``x`` is a vector or a row-batched matrix."""
        x, w = self._lift(x), self._lift(w)
        xv, wv = x.value, w.value
        if wv.ndim != 2 or xv.shape[-1] != wv.shape[0]:
            raise ShapeError(f"affine: cannot multiply {xv.shape} by {wv.shape}")
        out = xv @ wv
        ops = [x, w]
        if b is not None:
            b = self._lift(b)
            if b.value.shape not in ((wv.shape[1],), ()):
                raise ShapeError(f"affine: bias shape {b.value.shape} vs output {out.shape}")
            out = out + b.value
            ops.append(b)
        bshape = None if b is None else b.value.shape

        def back(g):
            gx = g @ wv.T
            gw = np.outer(xv, g) if xv.ndim == 1 else xv.T @ g
            if bshape is None:
                return gx, gw
            return gx, gw, _unbroadcast(g, bshape)

        return self._push("affine", out, tuple(ops), back)

    def concat(self, parts: Sequence, axis: int = 0) -> Var:
        parts = [self._lift(p) for p in parts]
        vals = [np.atleast_1d(p.value) if p.value.ndim == 0 else p.value for p in parts]
        out = np.concatenate(vals, axis=axis)
        sizes = np.cumsum([v.shape[axis] for v in vals])[:-1]
        shapes = [p.value.shape for p in parts]

        def back(g):
            pieces = np.split(g, sizes, axis=axis)
            return tuple(pc.reshape(s) for pc, s in zip(pieces, shapes))

        return self._push("concat", out, tuple(parts), back)

    def stack(self, parts: Sequence, axis: int = -1) -> Var:
        parts = [self._lift(p) for p in parts]
        out = np.stack([p.value for p in parts], axis=axis)

        def back(g):
            return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

        return self._push("stack", out, tuple(parts), back)

    def gather(self, a, idx) -> Var:
        """Fancy indexing along the first axis (or any numpy index on a vector)."""
        a = self._lift(a)
        av = a.value
        out = av[idx]

        def back(g):
            grad = np.zeros_like(av)
            if isinstance(idx, np.ndarray) and idx.dtype.kind in "iu" and av.ndim == 1:
                grad += np.bincount(idx.ravel(), weights=g.ravel(), minlength=av.shape[0])
            else:
                np.add.at(grad, idx, g)
            return (grad,)

        return self._push("gather", out, (a,), back)

    def sum(self, a, axis=None) -> Var:
        a = self._lift(a)
        shape = a.value.shape

        def back(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

        return self._push("sum", a.value.sum(axis=axis), (a,), back)

    def mean(self, a, axis=None) -> Var:
        a = self._lift(a)
        count = a.value.size if axis is None else a.value.shape[axis]
        s = self.sum(a, axis=axis)
        return self.mul(s, 1.0 / max(count, 1))

    def reduce_min(self, a, axis=-1) -> Var:
        return self._reduce_arg(a, axis, np.argmin, "reduce_min")

    def reduce_max(self, a, axis=-1) -> Var:
        return self._reduce_arg(a, axis, np.argmax, "reduce_max")

    def _reduce_arg(self, a, axis, argf, kind) -> Var:
        a = self._lift(a)
        av = a.value
        arg = argf(av, axis=axis)
        if self.track_kinks and av.ndim and av.shape[axis] > 1:
            srt = np.sort(av, axis=axis)
            lo, hi = (0, 1) if kind == "reduce_min" else (-2, -1)
            self.note_gap(np.abs(np.take(srt, hi, axis=axis) - np.take(srt, lo, axis=axis)))
        out = np.take_along_axis(av, np.expand_dims(arg, axis), axis=axis).squeeze(axis)

        def back(g):
            grad = np.zeros_like(av)
            np.put_along_axis(grad, np.expand_dims(arg, axis), np.expand_dims(g, axis), axis=axis)
            return (grad,)

        return self._push(kind, out, (a,), back)

    def reduce_prod(self, a, axis=-1) -> Var:
        """Product along ``axis`` with zero-safe leave-one-out gradients."""
        a = self._lift(a)
        av = np.moveaxis(a.value, axis, -1)
        k = av.shape[-1]
        ones = np.ones(av.shape[:-1] + (1,))
        prefix = np.concatenate([ones, np.cumprod(av, axis=-1)[..., :-1]], axis=-1)
        suffix = np.concatenate([np.cumprod(av[..., ::-1], axis=-1)[..., ::-1][..., 1:], ones], axis=-1)
        loo = np.moveaxis(prefix * suffix, -1, axis)
        out = av.prod(axis=-1) if k else np.ones(av.shape[:-1])

        def back(g):
            return (np.expand_dims(g, axis) * loo,)

        return self._push("reduce_prod", out, (a,), back)

    def segment_sum(self, a, segments: np.ndarray, num_segments: int) -> Var:
        a = self._lift(a)
        out = np.bincount(segments, weights=a.value, minlength=num_segments)
        return self._push("segment_sum", out, (a,), lambda g: (g[segments],))

    # -- gradients -----------------------------------------------------------------

    def backward(self, loss: Var) -> dict[int, np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. every leaf, keyed by node id."""
        if not self.record:
            raise RuntimeError("tape was created with record=False")
        if loss.value.size != 1:
            raise ShapeError("backward needs a scalar loss")
        grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.value)}
        leaves = {}
        for nid in range(loss.id, -1, -1):
            g = grads.pop(nid, None)
            if g is None:
                continue
            kind, operands, back = self.nodes[nid]
            if kind == "leaf":
                leaves[nid] = g
                continue
            if back is None:
                continue
            for oid, og in zip(operands, back(g)):
                if oid in grads:
                    grads[oid] = grads[oid] + og
                else:
                    grads[oid] = og
        return leaves


def grad_check(f: Callable[[Tape, Var], Var], point, h: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` receives a fresh tape and a leaf holding the (flat) point and must
    return a scalar Var.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x0 = np.array(point, dtype=float)
    tape = Tape()
    leaf = tape.leaf(x0)
    out = f(tape, leaf)
    analytic = tape.backward(out).get(leaf.id, np.zeros_like(x0))

    def value(x):
        t = Tape(record=False)
        return float(f(t, t.leaf(x)).value)

    numeric = np.zeros_like(x0)
    flat = numeric.reshape(-1)
    for i in range(x0.size):
        xp = x0.copy().reshape(-1)
        xm = x0.copy().reshape(-1)
        xp[i] += h
        xm[i] -= h
        flat[i] = (value(xp.reshape(x0.shape)) - value(xm.reshape(x0.shape))) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x0.size else 0.0
