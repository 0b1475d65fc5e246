"""Layer primitives: fully connected tanh layers, dropout, and an LSTM cell.

Parameter containers are mutable dataclasses whose fields are immutable
:class:`~avfusion.autodiff.Tensor` values; an optimizer updates a layer by
assigning fresh tensors to the fields.

The dense and LSTM forward passes are recorded as fused tape nodes with
hand-derived backward functions, which keeps the per-frame tape short;
their gradients are verified against finite differences in the test suite
exactly like the elementary primitives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, mul, record_op, sigmoid_raw

__all__ = [
    "DenseParams",
    "LstmParams",
    "LstmState",
    "init_dense",
    "init_lstm",
    "dense_tanh",
    "dense_linear",
    "dropout",
    "lstm_step",
    "lstm_sequence",
    "zero_state",
]


@dataclass
class DenseParams:
    """Weights of one fully connected layer: w is (out, in), b is (out,)."""

    w: Tensor
    b: Tensor

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    @property
    def n_out(self) -> int:
        return self.w.shape[0]


@dataclass
class LstmParams:
    """Per-gate LSTM weights.

    Each gate g in {input, forget, output, candidate} has an input map
    ``w_g`` (h, in), a recurrent map ``u_g`` (h, h) and a bias ``b_g`` (h,).
    All gates share the hidden width.
    """

    w_i: Tensor
    u_i: Tensor
    b_i: Tensor
    w_f: Tensor
    u_f: Tensor
    b_f: Tensor
    w_o: Tensor
    u_o: Tensor
    b_o: Tensor
    w_c: Tensor
    u_c: Tensor
    b_c: Tensor

    @property
    def n_in(self) -> int:
        return self.w_i.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_i.shape[0]

    def _stacked_ifc(self):
        """Input/forget/candidate weights stacked for shared matvecs.

        Cached by tensor identity: the optimizer assigns fresh tensors, so
        the cache invalidates exactly when the parameters change.
        """
        key = (self.w_i, self.w_f, self.w_c, self.u_i, self.u_f, self.u_c,
               self.b_i, self.b_f, self.b_c)
        cache = getattr(self, "_ifc_cache", None)
        if cache is not None and all(a is b for a, b in zip(cache[0], key)):
            return cache[1]
        stacked = (
            np.concatenate([self.w_i.data, self.w_f.data, self.w_c.data]),
            np.concatenate([self.u_i.data, self.u_f.data, self.u_c.data]),
            np.concatenate([self.b_i.data, self.b_f.data, self.b_c.data]),
        )
        self._ifc_cache = (key, stacked)
        return stacked


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


def zero_state(n_hidden: int) -> LstmState:
    return LstmState(h=Tensor(np.zeros(n_hidden)), c=Tensor(np.zeros(n_hidden)))


def _glorot(rng: np.random.Generator, n_out: int, n_in: int) -> Tensor:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return Tensor(rng.uniform(-bound, bound, size=(n_out, n_in)))


def init_dense(n_in: int, n_out: int, rng: np.random.Generator) -> DenseParams:
    """Scale-balanced uniform weights, zero bias."""
    return DenseParams(w=_glorot(rng, n_out, n_in), b=Tensor(np.zeros(n_out)))


def init_lstm(n_in: int, n_hidden: int, rng: np.random.Generator) -> LstmParams:
    """Fresh LSTM weights; the forget-gate bias starts at 1.0, others at 0."""
    def w(fan_in):
        return _glorot(rng, n_hidden, fan_in)

    return LstmParams(
        w_i=w(n_in), u_i=w(n_hidden), b_i=Tensor(np.zeros(n_hidden)),
        w_f=w(n_in), u_f=w(n_hidden), b_f=Tensor(np.ones(n_hidden)),
        w_o=w(n_in), u_o=w(n_hidden), b_o=Tensor(np.zeros(n_hidden)),
        w_c=w(n_in), u_c=w(n_hidden), b_c=Tensor(np.zeros(n_hidden)),
    )


def _check_vec(x: Tensor, dim: int, what: str) -> None:
    if x.data.shape != (dim,):
        raise ValueError(f"{what} has shape {x.data.shape}, expected ({dim},)")


def dense_tanh(x: Tensor, p: DenseParams) -> Tensor:
    """tanh(w @ x + b), one fused tape node."""
    _check_vec(x, p.n_in, "dense input")
    xd, wd = x.data, p.w.data
    y = np.tanh(wd @ xd + p.b.data)

    def back(g):
        dz = g * (1.0 - y * y)
        return (wd.T @ dz, dz[:, None] * xd, dz)

    return record_op(y, (x, p.w, p.b), back)


def dense_linear(x: Tensor, p: DenseParams) -> Tensor:
    """w @ x + b without a nonlinearity (the output layer)."""
    _check_vec(x, p.n_in, "dense input")
    xd, wd = x.data, p.w.data

    def back(g):
        return (wd.T @ g, g[:, None] * xd, g)

    return record_op(wd @ xd + p.b.data, (x, p.w, p.b), back)


def dropout(x: Tensor, p: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout.

    In train mode each entry is zeroed independently with probability ``p``
    and survivors are scaled by 1/(1-p), so the expected value matches the
    eval output.  The mask enters the tape as a constant factor, so backward
    reuses it automatically.  Eval mode is the identity.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if mode != "train":
        raise ValueError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = rng.random(x.shape) >= p
    mask = keep.astype(np.float64) / (1.0 - p)
    return mul(x, Tensor(mask))


def lstm_step(x: Tensor, state: LstmState, p: LstmParams) -> LstmState:
    """One LSTM update (forget-gate variant, no peepholes).

    i = sig(w_i x + u_i h + b_i)      f = sig(w_f x + u_f h + b_f)
    o = sig(w_o x + u_o h + b_o)      g = tanh(w_c x + u_c h + b_c)
    c' = f*c + i*g                    h' = o*tanh(c')

    Recorded as two fused nodes (the new cell, then the new hidden state)
    whose backward functions propagate to x, h, c and all gate parameters.
    """
    h, c = state.h, state.c
    nh = p.n_hidden
    _check_vec(x, p.n_in, "lstm input")
    _check_vec(h, nh, "lstm hidden state")
    _check_vec(c, nh, "lstm cell state")
    xd, hd, cd = x.data, h.data, c.data
    wo, uo, bo = p.w_o.data, p.u_o.data, p.b_o.data

    # the input/forget/candidate gates share two stacked matvecs
    w_ifc, u_ifc, b_ifc = p._stacked_ifc()
    z = w_ifc @ xd + u_ifc @ hd + b_ifc
    act = np.empty(3 * nh)
    act[:2 * nh] = sigmoid_raw(z[:2 * nh])
    act[2 * nh:] = np.tanh(z[2 * nh:])
    gi, gf, gg = act[:nh], act[nh:2 * nh], act[2 * nh:]
    c_data = gf * cd + gi * gg

    def back_cell(g):
        dz = np.empty(3 * nh)
        dz[:nh] = g * gg * gi * (1.0 - gi)
        dz[nh:2 * nh] = g * cd * gf * (1.0 - gf)
        dz[2 * nh:] = g * gi * (1.0 - gg * gg)
        dw = dz[:, None] * xd
        du = dz[:, None] * hd
        return (
            w_ifc.T @ dz, u_ifc.T @ dz, g * gf,
            dw[:nh], du[:nh], dz[:nh],
            dw[nh:2 * nh], du[nh:2 * nh], dz[nh:2 * nh],
            dw[2 * nh:], du[2 * nh:], dz[2 * nh:],
        )

    c_new = record_op(
        c_data,
        (x, h, c, p.w_i, p.u_i, p.b_i, p.w_f, p.u_f, p.b_f, p.w_c, p.u_c, p.b_c),
        back_cell,
    )

    go = sigmoid_raw(wo @ xd + uo @ hd + bo)
    tc = np.tanh(c_data)
    h_data = go * tc

    def back_hidden(g):
        do = g * tc * go * (1.0 - go)
        dc = g * go * (1.0 - tc * tc)
        return (
            dc, wo.T @ do, uo.T @ do,
            do[:, None] * xd, do[:, None] * hd, do,
        )

    h_new = record_op(
        h_data, (c_new, x, h, p.w_o, p.u_o, p.b_o), back_hidden,
    )
    return LstmState(h=h_new, c=c_new)


def lstm_sequence(xs: list[Tensor], p: LstmParams) -> list[Tensor]:
    """Unroll the cell from a zero state; returns every hidden state h_1..h_T."""
    if not xs:
        raise ValueError("lstm_sequence needs a nonempty input sequence")
    state = zero_state(p.n_hidden)
    hs = []
    for x in xs:
        state = lstm_step(x, state, p)
        hs.append(state.h)
    return hs
