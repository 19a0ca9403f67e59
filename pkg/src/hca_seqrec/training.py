"""BPR training of the sequence model with hand-derived BPTT gradients.

At every step t of a user's training prefix (except the last) the model's
overall interest h_o^t is asked to rank the true next item p above a sampled
negative q:

    xhat = h_o^t . (X[p] - X[q]),    loss = -ln sigmoid(xhat)

A whole user sequence is one mini-batch: its triple gradients are summed and
one SGD step (with L2 on every parameter) follows.
"""
import logging
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .numerics import DTYPE, make_rng, sigmoid, softplus
from .seqmodel import (
    PARAM_ORDER,
    ContextBuffer,
    ModelParams,
    _attend,
    _cell,
    _check_items,
    forward_sequence,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    l2: float = 0.001
    epochs: int = 1
    init_range: float = 0.5
    seed: int = 0
    average: bool = False  # average instead of sum triple gradients per sequence
    max_norm: float = None  # optional global gradient-norm clip

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


class Triple(NamedTuple):
    u: int
    p: int
    q: int
    t: int


def init_params(hyper, cfg, rng=None):
    """Uniform(-init_range, init_range) for every entry, drawn in PARAM_ORDER."""
    rng = make_rng(cfg.seed) if rng is None else rng
    lim = cfg.init_range
    params = ModelParams(**{
        n: rng.uniform(-lim, lim, size=hyper.shape_of(n)).astype(DTYPE)
        for n in PARAM_ORDER
    })
    for n in hyper.excluded():
        getattr(params, n)[...] = 0.0
    return params


def negative_pool(history, n_items):
    """Items a user never interacted with, ascending."""
    pool = np.setdiff1d(np.arange(n_items), np.asarray(list(history), dtype=np.int64))
    if pool.size == 0:
        raise ValueError("user has interacted with every item; no negative exists")
    return pool


def sample_negative(history, n_items, rng, size=None):
    """Uniform draw(s) from the items outside ``history``."""
    pool = negative_pool(history, n_items)
    return pool[rng.integers(pool.size, size=size)]


def preference(h_o, x_p, x_q):
    return float(h_o @ (x_p - x_q))


def bpr_loss(xhat, l2=0.0, params=None):
    """-ln sigmoid(xhat) + l2/2 * ||params||^2."""
    loss = float(softplus(-xhat))
    if l2 and params is not None:
        loss += 0.5 * l2 * params.sq_norm()
    return loss


def sequence_loss(items, positives, negatives, params, hyper):
    """Summed triple loss of one sequence (no regularization)."""
    traces = forward_sequence(items, params, hyper)
    total = 0.0
    for t, (p, q) in enumerate(zip(positives, negatives)):
        total += float(softplus(-(traces[t].h_o @ (params.X[p] - params.X[q]))))
    return total


def _attend_backward(g_ctx, C, u, a, r_vec, Q, g_r, g_Q):
    """Backprop through context = softmax(r . tanh(Q C^T)) C, batched over steps.

    Shapes: g_ctx (T, d), C and u (T, w, d), a (T, w).  Accumulates into
    g_r / g_Q and returns the gradient w.r.t. C, shape (T, w, d).
    """
    g_a = np.einsum("twd,td->tw", C, g_ctx)
    g_e = a * (g_a - np.sum(a * g_a, axis=1, keepdims=True))
    g_C = a[:, :, None] * g_ctx[:, None, :]
    g_r += np.einsum("tw,twd->d", g_e, u)
    g_s = g_e[:, :, None] * r_vec * (1.0 - u * u)
    d = C.shape[2]
    g_Q += g_s.reshape(-1, d).T @ C.reshape(-1, d)
    g_C += g_s @ Q
    return g_C


def _scatter_window(g_rows, g_C):
    """Add window-slot gradients back onto the per-step rows they came from.

    Slot j of the window at step t holds row t - (w - 1 - j); slots before the
    sequence start were zero padding and receive nothing.
    """
    T, w, _ = g_C.shape
    for j in range(w):
        lag = w - 1 - j
        if lag < T:
            g_rows[:T - lag] += g_C[lag:, j]


def backprop_sequence(traces, positives, negatives, params, hyper):
    """Exact gradient of sum_t -ln sigmoid(xhat^t) w.r.t. every parameter.

    ``positives[t]`` / ``negatives[t]`` are the targets scored with h_o^t.
    Returns (gradients as ModelParams, summed loss).  Excluded parameters of
    the plain-GRU variant get zero gradient.

    Only the hidden-state recurrence is walked step by step; everything that
    does not feed back into it (scoring, fusion, both attentions, weight
    gradients) is computed for all steps at once.
    """
    n = len(traces)
    m = len(positives)
    if m != len(negatives) or m > n:
        raise ValueError("need one (positive, negative) pair per scored step")
    p = params
    g = params.zeros_like()
    stack = lambda name: np.array([getattr(tr, name) for tr in traces])  # noqa: E731
    H, H_prev, H_o = stack("h"), stack("h_prev"), stack("h_o")
    Z, R, H_tilde = stack("z"), stack("r"), stack("h_tilde")
    Xs, X_c = stack("x"), stack("x_c")
    pos = np.asarray(positives, dtype=np.int64)
    neg = np.asarray(negatives, dtype=np.int64)

    # scoring: xhat_t = h_o^t . (X[p_t] - X[q_t])
    diff = p.X[pos] - p.X[neg]
    H_om = H_o[:m]
    xhat = np.einsum("td,td->t", H_om, diff)
    total = float(np.sum(softplus(-xhat)))
    coef = -sigmoid(-xhat)[:, None]
    np.add.at(g.X, pos, coef * H_om)
    np.add.at(g.X, neg, -coef * H_om)
    g_ho = coef * diff

    g_h = np.zeros_like(H)
    if hyper.fused:
        g_pre = g_ho * (1.0 - H_om * H_om)
        g.E += g_pre.T @ H[:m]
        g.F += g_pre.T @ stack("h_c")[:m]
        g_h[:m] += g_pre @ p.E
        g_C = _attend_backward(g_pre @ p.F, stack("C_h")[:m], stack("u_h")[:m],
                               stack("a_h")[:m], p.r_h, p.Q_h, g.r_h, g.Q_h)
        _scatter_window(g_h, g_C)
    else:
        g_h[:m] += g_ho

    # BPTT through the GRU recurrence
    G_z = np.empty_like(H)
    G_r = np.empty_like(H)
    G_c = np.empty_like(H)
    W_cT, W_zT, W_rT = p.W_c.T, p.W_z.T, p.W_r.T
    carry = np.zeros(hyper.d)
    for t in range(n - 1, -1, -1):
        gh = g_h[t] + carry
        z, r, ht, hp = Z[t], R[t], H_tilde[t], H_prev[t]
        g_pc = gh * z * (1.0 - ht * ht)
        g_pz = gh * (ht - hp) * z * (1.0 - z)
        g_rh = W_cT @ g_pc
        g_pr = g_rh * hp * r * (1.0 - r)
        G_z[t], G_r[t], G_c[t] = g_pz, g_pr, g_pc
        carry = gh * (1.0 - z) + g_rh * r + W_zT @ g_pz + W_rT @ g_pr

    g.U_z += G_z.T @ Xs
    g.U_r += G_r.T @ Xs
    g.U_c += G_c.T @ Xs
    g.V_z += G_z.T @ X_c
    g.V_r += G_r.T @ X_c
    g.V_c += G_c.T @ X_c
    g.W_z += G_z.T @ H_prev
    g.W_r += G_r.T @ H_prev
    g.W_c += G_c.T @ (R * H_prev)
    g.b_z += G_z.sum(axis=0)
    g.b_r += G_r.sum(axis=0)
    g.b_c += G_c.sum(axis=0)

    g_x = G_z @ p.U_z + G_r @ p.U_r + G_c @ p.U_c
    g_xc = G_z @ p.V_z + G_r @ p.V_r + G_c @ p.V_c
    g_C = _attend_backward(g_xc, stack("C_x"), stack("u_x"), stack("a_x"),
                           p.r_x, p.Q_x, g.r_x, g.Q_x)
    _scatter_window(g_x, g_C)
    np.add.at(g.X, [tr.item for tr in traces], g_x)

    for name in hyper.excluded():
        getattr(g, name)[...] = 0.0
    for name, a in g.items():
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    return g, total


def sgd_step(params, grads, cfg, frozen=()):
    """theta <- theta - lr * (grad + l2 * theta), in place; returns params."""
    skip = set(frozen)
    for name, theta in params.items():
        if name in skip:
            continue
        theta -= cfg.lr * (getattr(grads, name) + cfg.l2 * theta)
    return params


def _clip(grads, max_norm):
    norm = np.sqrt(grads.sq_norm())
    if norm > max_norm:
        for _, a in grads.items():
            a *= max_norm / norm


def train(corpus, hyper, cfg, params=None, on_epoch=None):
    """SGD/BPTT over the corpus training prefixes.

    Returns (params, loss_log) with one (epoch, mean triple loss, seconds)
    row per epoch.  The whole run is a pure function of cfg.seed.
    """
    rng = make_rng(cfg.seed)
    if params is None:
        params = init_params(hyper, cfg, rng)
    else:
        params = params.copy()
    params.check_shapes(hyper)
    users = [(seq.train, negative_pool(seq.history, hyper.n_items))
             for seq in corpus.users if len(seq.train) >= 1]
    frozen = hyper.excluded()
    loss_log = []
    start = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for u in rng.permutation(len(users)):
            items, pool = users[u]
            if len(items) < 2:
                continue
            positives = items[1:]
            negatives = pool[rng.integers(pool.size, size=len(positives))]
            traces = forward_sequence(items, params, hyper)
            grads, loss = backprop_sequence(traces, positives, negatives, params, hyper)
            if cfg.average:
                for _, a in grads.items():
                    a /= len(positives)
            if cfg.max_norm is not None:
                _clip(grads, cfg.max_norm)
            sgd_step(params, grads, cfg, frozen)
            total += loss
            count += len(positives)
        mean = total / max(count, 1)
        row = (epoch, mean, time.perf_counter() - start)
        loss_log.append(row)
        log.info("epoch %d  mean loss %.6f", epoch, mean)
        if on_epoch is not None:
            on_epoch(row)
    return params, loss_log


def format_loss_log(loss_log):
    return "".join(f"{e}\t{loss!r}\t{sec:.3f}\n" for e, loss, sec in loss_log)


def final_interest(items, params, hyper):
    """h_o at the last step of ``items``, as used for test-time ranking.

    The input-side attention and GRU run at every step; the hidden-side
    attention and fusion only at the final step.
    """
    if len(items) == 0:
        raise ValueError("cannot compute the final interest of an empty prefix")
    items = _check_items(items, hyper.n_items)
    p = params
    xbuf = ContextBuffer(hyper.w_x, hyper.d)
    hbuf = ContextBuffer(hyper.w_h, hyper.d)
    h = np.zeros(hyper.d, dtype=DTYPE)
    for item in items:
        x = p.X[item].copy()
        xbuf.push(x)
        _, _, _, x_c = _attend(xbuf.matrix(), p.r_x, p.Q_x)
        h = _cell(x, x_c, h, p)[3]
        hbuf.push(h)
    if not hyper.fused:
        return h
    _, _, _, h_c = _attend(hbuf.matrix(), p.r_h, p.Q_h)
    return np.tanh(p.E @ h + p.F @ h_c)
