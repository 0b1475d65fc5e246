"""Dense float64 tensors and a reverse-mode differentiation tape.

The tape is define-by-run: a fresh ``Tape`` is opened per forward pass,
every primitive executed inside its ``with`` block is recorded, and
``Tape.backward`` replays the records in reverse to accumulate exact
gradients.  Outside a tape context the same primitives run as plain
numpy computations, which is the evaluation path.

A ``Tensor`` is a value: its array is never modified in place, so tensors
can be shared freely between threads.  A ``Tape`` must stay on the thread
that created it for its whole forward+backward lifetime, and gradients
should be read before the tensors involved are recorded on another tape.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "record_op",
    "add",
    "mul",
    "tanh",
    "sigmoid",
    "matmul",
    "concat_features",
    "softmax",
    "pick",
    "softmax_cross_entropy",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested primitive."""


class Tensor:
    """Immutable dense array of 64-bit floats.

    ``data`` holds the value in row-major order.  The two extra slots are
    tape bookkeeping (which tape last recorded this tensor, and at which
    slot); they never affect the value.
    """

    __slots__ = ("data", "_tape", "_slot")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self._tape = None
        self._slot = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, data={self.data!r})"


_ACTIVE = threading.local()


def _active_tape():
    return getattr(_ACTIVE, "tape", None)


class Tape:
    """Ordered record of primitive operations with one gradient slot per value.

    Usage::

        with Tape() as tape:
            y = matmul(w, x)
            loss = softmax_cross_entropy(y, label)
        tape.backward(loss)
        g = tape.grad(w)

    Every tensor touched inside the context gets a slot; leaves that were
    never reached from the backward seed report an exact zero gradient.
    """

    __slots__ = ("_tensors", "_in_slots", "_backs", "_grads", "_outer")

    def __init__(self):
        self._tensors: list[Tensor] = []
        self._in_slots: list[tuple] = []
        self._backs: list = []
        self._grads = None
        self._outer = None

    def __enter__(self):
        self._outer = _active_tape()
        _ACTIVE.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE.tape = self._outer
        return False

    def _slot_for(self, t: Tensor) -> int:
        if t._tape is self:
            return t._slot
        slot = len(self._tensors)
        t._tape = self
        t._slot = slot
        self._tensors.append(t)
        self._in_slots.append(())
        self._backs.append(None)
        return slot

    def watch(self, t: Tensor) -> Tensor:
        """Ensure ``t`` has a gradient slot even if no op consumes it."""
        self._slot_for(t)
        return t

    def _record(self, out: Tensor, inputs, backward) -> None:
        tensors = self._tensors
        slots = []
        for t in inputs:
            if t._tape is self:
                slots.append(t._slot)
            else:
                slot = len(tensors)
                t._tape = self
                t._slot = slot
                tensors.append(t)
                self._in_slots.append(())
                self._backs.append(None)
                slots.append(slot)
        out._tape = self
        out._slot = len(tensors)
        tensors.append(out)
        self._in_slots.append(tuple(slots))
        self._backs.append(backward)

    def backward(self, seed: Tensor) -> None:
        """Reverse accumulation from a recorded scalar ``seed``."""
        if seed._tape is not self:
            raise ValueError("backward seed was not recorded on this tape")
        if seed.data.ndim != 0:
            raise ShapeError(
                f"backward seed must be a scalar, got shape {seed.data.shape}"
            )
        grads: list = [None] * len(self._tensors)
        grads[seed._slot] = np.ones(())
        in_slots = self._in_slots
        backs = self._backs
        for slot in range(seed._slot, -1, -1):
            g = grads[slot]
            if g is None or backs[slot] is None:
                continue
            for in_slot, contrib in zip(in_slots[slot], backs[slot](g)):
                if grads[in_slot] is None:
                    # copy: backward functions may return aliased views
                    grads[in_slot] = np.array(contrib)
                else:
                    grads[in_slot] += contrib
        self._grads = grads

    def grad(self, t: Tensor) -> np.ndarray:
        """Gradient of the backward seed w.r.t. ``t`` (zeros if unreachable)."""
        if t._tape is not self or self._grads is None:
            return np.zeros_like(t.data)
        g = self._grads[t._slot]
        if g is None:
            return np.zeros_like(t.data)
        return g


def record_op(out_data, inputs, backward) -> Tensor:
    """Wrap a computed array as a Tensor, recording it on the active tape.

    ``backward(g)`` must return one gradient array per input, in order.
    This is the extension point fused layer primitives are built on; when
    no tape is active the result is returned unrecorded.
    """
    out = Tensor(out_data)
    tape = _active_tape()
    if tape is not None:
        tape._record(out, inputs, backward)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; operands must have equal shapes."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add requires equal shapes, got {a.shape} and {b.shape}")
    return record_op(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product; operands must have equal shapes."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul requires equal shapes, got {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return record_op(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return record_op(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid_raw(z: np.ndarray) -> np.ndarray:
    """Plain-array logistic; saturates to exact 0.0 / 1.0 in the far tails.

    Written so the exponent is always nonpositive, which cannot overflow.
    """
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0, e) / (1.0 + e)


def sigmoid(x: Tensor) -> Tensor:
    y = sigmoid_raw(x.data)
    return record_op(y, (x,), lambda g: (g * y * (1.0 - y),))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a 2-D left operand with a 2-D or 1-D right operand.

    ``(m, k) @ (k, n) -> (m, n)`` and ``(m, k) @ (k,) -> (m,)``.
    """
    ad, bd = a.data, b.data
    if ad.ndim != 2 or bd.ndim not in (1, 2):
        raise ShapeError(
            f"matmul expects 2-D @ (1-D or 2-D), got shapes {ad.shape} and {bd.shape}"
        )
    if ad.shape[1] != bd.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {ad.shape} vs {bd.shape}"
        )
    if bd.ndim == 2:
        back = lambda g: (g @ bd.T, ad.T @ g)
    else:
        back = lambda g: (g[:, None] * bd, ad.T @ g)
    return record_op(ad @ bd, (a, b), back)


def concat_features(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two feature vectors; backward splits the gradient."""
    if a.data.ndim != 1 or b.data.ndim != 1:
        raise ShapeError(
            f"concat_features expects rank-1 operands, got {a.shape} and {b.shape}"
        )
    d1 = a.data.shape[0]
    out = np.concatenate([a.data, b.data])
    return record_op(out, (a, b), lambda g: (g[:d1], g[d1:]))


def softmax(logits: Tensor) -> Tensor:
    """Stable softmax over a rank-1 logit vector."""
    if logits.data.ndim != 1:
        raise ShapeError(f"softmax expects a rank-1 vector, got {logits.shape}")
    z = logits.data - np.max(logits.data)
    e = np.exp(z)
    p = e / e.sum()
    return record_op(p, (logits,), lambda g: (p * (g - np.dot(g, p)),))


def pick(x: Tensor, index: int) -> Tensor:
    """Select one entry of a vector as a scalar."""
    if x.data.ndim != 1:
        raise ShapeError(f"pick expects a rank-1 vector, got {x.shape}")
    k = x.data.shape[0]
    if not 0 <= index < k:
        raise IndexError(f"pick index {index} out of range for length {k}")

    def back(g):
        out = np.zeros(k)
        out[index] = g
        return (out,)

    return record_op(np.asarray(x.data[index]), (x,), back)


def softmax_cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Scalar loss -log(softmax(logits)[label]), max-subtraction stabilized.

    The gradient w.r.t. the logits is softmax(logits) - onehot(label).
    """
    if logits.data.ndim != 1:
        raise ShapeError(
            f"softmax_cross_entropy expects rank-1 logits, got {logits.shape}"
        )
    k = logits.data.shape[0]
    if not 0 <= label < k:
        raise IndexError(f"label {label} out of range for {k} classes")
    z = logits.data - np.max(logits.data)
    lse = np.log(np.sum(np.exp(z)))
    loss = lse - z[label]
    p = np.exp(z - lse)

    def back(g):
        out = p.copy()
        out[label] -= 1.0
        out *= g
        return (out,)

    return record_op(np.asarray(loss), (logits,), back)
