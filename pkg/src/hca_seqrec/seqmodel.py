"""Forward pass of the hierarchical contextual-attention GRU.

One time step t does, in order:

    x^t   = X[item_t]                       pushed into the input window
    x_c^t = attention over the last w_x inputs
    h^t   = GRU cell fed with x^t and x_c^t (extra V_* terms)
            pushed into the hidden window
    h_c^t = attention over the last w_h hidden states
    h_o^t = tanh(E h^t + F h_c^t)           the user's overall interest

Only h^t is carried to step t+1; h_o^t is read out for scoring.

Attention over a window C (rows oldest -> newest, zero rows before the
sequence start):

    e = r . tanh(Q C^T),   a = softmax(e),   context = a C
"""
from dataclasses import dataclass, field, fields

import numpy as np

from .numerics import DTYPE, sigmoid, softmax

# Fixed parameter order: initialization draws and flattening both follow it.
PARAM_ORDER = (
    "X",
    "U_z", "U_r", "U_c",
    "W_z", "W_r", "W_c",
    "V_z", "V_r", "V_c",
    "b_z", "b_r", "b_c",
    "r_x", "Q_x",
    "r_h", "Q_h",
    "E", "F",
)
VECTOR_PARAMS = frozenset({"b_z", "b_r", "b_c", "r_x", "r_h"})
# Parameters the plain GRU baseline does not own (held at zero, never updated).
GRU_EXCLUDED = ("V_z", "V_r", "V_c", "r_x", "Q_x", "r_h", "Q_h", "E", "F")

MAX_WINDOW = 16


@dataclass(frozen=True)
class HyperParams:
    d: int
    w_x: int
    w_h: int
    n_items: int
    # "hca": full model.  "gru": plain GRU baseline sharing this code path,
    # w_x = w_h = 1, context/attention/fusion weights excluded, scores with h^t.
    variant: str = "hca"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        for name in ("w_x", "w_h"):
            w = getattr(self, name)
            if not 1 <= w <= MAX_WINDOW:
                raise ValueError(f"{name} must lie in [1, {MAX_WINDOW}], got {w}")
        if self.n_items < 2:
            raise ValueError("n_items must be >= 2")
        if self.variant not in ("hca", "gru"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "gru" and (self.w_x != 1 or self.w_h != 1):
            raise ValueError("the plain GRU variant requires w_x = w_h = 1")

    @property
    def fused(self):
        return self.variant == "hca"

    def excluded(self):
        return GRU_EXCLUDED if self.variant == "gru" else ()

    def active(self):
        skip = set(self.excluded())
        return tuple(n for n in PARAM_ORDER if n not in skip)

    def shape_of(self, name):
        if name == "X":
            return (self.n_items, self.d)
        if name in VECTOR_PARAMS:
            return (self.d,)
        return (self.d, self.d)


@dataclass
class ModelParams:
    X: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_c: np.ndarray
    W_z: np.ndarray
    W_r: np.ndarray
    W_c: np.ndarray
    V_z: np.ndarray
    V_r: np.ndarray
    V_c: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_c: np.ndarray
    r_x: np.ndarray
    Q_x: np.ndarray
    r_h: np.ndarray
    Q_h: np.ndarray
    E: np.ndarray
    F: np.ndarray

    @classmethod
    def zeros(cls, hyper):
        return cls(**{n: np.zeros(hyper.shape_of(n), dtype=DTYPE) for n in PARAM_ORDER})

    def items(self):
        for n in PARAM_ORDER:
            yield n, getattr(self, n)

    def copy(self):
        return ModelParams(**{n: a.copy() for n, a in self.items()})

    def zeros_like(self):
        return ModelParams(**{n: np.zeros_like(a) for n, a in self.items()})

    def sq_norm(self, names=PARAM_ORDER):
        return float(sum(np.sum(getattr(self, n) ** 2) for n in names))

    def flatten(self, names=PARAM_ORDER):
        return np.concatenate([getattr(self, n).ravel() for n in names])

    def with_flat(self, flat, names=PARAM_ORDER):
        """Copy with the ``names`` fields replaced by slices of ``flat``."""
        out = self.copy()
        pos = 0
        for n in names:
            a = getattr(out, n)
            a[...] = np.reshape(flat[pos:pos + a.size], a.shape)
            pos += a.size
        if pos != len(flat):
            raise ValueError("flat vector length does not match parameter sizes")
        return out

    def check_shapes(self, hyper):
        for n, a in self.items():
            if a.shape != hyper.shape_of(n):
                raise ValueError(f"parameter {n} has shape {a.shape}, expected {hyper.shape_of(n)}")


class ContextBuffer:
    """Fixed window of the ``w`` most recent vectors, zero-filled at start."""

    def __init__(self, w, d):
        self.rows = np.zeros((w, d), dtype=DTYPE)

    def push(self, v):
        self.rows[:-1] = self.rows[1:]
        self.rows[-1] = v

    def matrix(self):
        # oldest row first, newest last
        return self.rows.copy()

    def __len__(self):
        return len(self.rows)


@dataclass
class StepTrace:
    item: int
    x: np.ndarray
    h_prev: np.ndarray
    C_x: np.ndarray
    u_x: np.ndarray  # tanh(Q_x C_x^T)^T, one row per window slot
    e_x: np.ndarray
    a_x: np.ndarray
    x_c: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_tilde: np.ndarray
    h: np.ndarray
    C_h: np.ndarray
    u_h: np.ndarray
    e_h: np.ndarray
    a_h: np.ndarray
    h_c: np.ndarray
    h_o: np.ndarray = field(repr=False)


def _check_finite(**arrays):
    for name, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite value in gate {name}")


def _cell(x, x_c, h_prev, p):
    pre_z = p.U_z @ x + p.W_z @ h_prev + p.b_z
    pre_r = p.U_r @ x + p.W_r @ h_prev + p.b_r
    pre_c = p.U_c @ x + p.b_c
    if x_c is not None:
        pre_z += p.V_z @ x_c
        pre_r += p.V_r @ x_c
        pre_c += p.V_c @ x_c
    z = sigmoid(pre_z)
    r = sigmoid(pre_r)
    h_tilde = np.tanh(pre_c + p.W_c @ (r * h_prev))
    h = (1.0 - z) * h_prev + z * h_tilde
    if not np.all(np.isfinite(h)):
        _check_finite(update=z, reset=r, candidate=h_tilde, hidden=h)
    return z, r, h_tilde, h


def gru_cell(x, h_prev, params):
    """Plain GRU step.  Returns (z, r, h_tilde, h)."""
    return _cell(x, None, h_prev, params)


def hca_cell(x, x_c, h_prev, params):
    """GRU step with the contextual input x_c added to all three pre-activations."""
    return _cell(x, x_c, h_prev, params)


def _attend(C, r_vec, Q):
    if C.ndim != 2 or C.shape[1] != Q.shape[1] or r_vec.shape != (Q.shape[0],):
        raise ValueError(f"attention: context {C.shape} incompatible with Q {Q.shape}, r {r_vec.shape}")
    u = np.tanh(C @ Q.T)
    e = u @ r_vec
    a = softmax(e)
    return u, e, a, a @ C


def input_attention(C_x, r_x, Q_x):
    """Attention over the input window.  Returns (a_x, x_c)."""
    _, _, a, ctx = _attend(np.asarray(C_x, dtype=DTYPE), r_x, Q_x)
    return a, ctx


def hidden_attention(C_h, r_h, Q_h):
    """Attention over the hidden-state window.  Returns (a_h, h_c)."""
    _, _, a, ctx = _attend(np.asarray(C_h, dtype=DTYPE), r_h, Q_h)
    return a, ctx


def overall_interest(h, h_c, E, F):
    if E.shape[1] != h.shape[0] or F.shape[1] != h_c.shape[0]:
        raise ValueError("overall_interest: shape mismatch")
    return np.tanh(E @ h + F @ h_c)


def _check_items(items, n_items):
    items = [int(i) for i in items]
    if not items:
        raise ValueError("empty item sequence")
    for pos, i in enumerate(items):
        if not 0 <= i < n_items:
            raise IndexError(f"item index {i} at position {pos} is outside [0, {n_items})")
    return items


def forward_sequence(items, params, hyper):
    """Run the network over ``items`` from h^0 = 0; one StepTrace per step."""
    items = _check_items(items, hyper.n_items)
    p = params
    d = hyper.d
    xbuf = ContextBuffer(hyper.w_x, d)
    hbuf = ContextBuffer(hyper.w_h, d)
    h = np.zeros(d, dtype=DTYPE)
    traces = []
    for item in items:
        x = p.X[item].copy()
        xbuf.push(x)
        C_x = xbuf.matrix()
        u_x, e_x, a_x, x_c = _attend(C_x, p.r_x, p.Q_x)
        z, r, h_tilde, h_new = _cell(x, x_c, h, p)
        hbuf.push(h_new)
        C_h = hbuf.matrix()
        u_h, e_h, a_h, h_c = _attend(C_h, p.r_h, p.Q_h)
        h_o = np.tanh(p.E @ h_new + p.F @ h_c) if hyper.fused else h_new
        traces.append(StepTrace(item, x, h, C_x, u_x, e_x, a_x, x_c, z, r, h_tilde,
                                h_new, C_h, u_h, e_h, a_h, h_c, h_o))
        h = h_new
    return traces
