"""Comparison methods: Random, POP, BPR-MF and the plain GRU.

Every model exposes ``score_items(user_index, user_sequence) -> scores`` so
the evaluator treats them all alike.
"""
import logging
import time
from dataclasses import dataclass

import numpy as np

from .numerics import DTYPE, make_rng, sigmoid, softplus
from .seqmodel import HyperParams
from .training import Triple, TrainConfig, final_interest, negative_pool, train

log = logging.getLogger(__name__)


@dataclass
class RandomModel:
    n_items: int
    seed: int = 0

    def score_items(self, u, seq=None):
        # independent stream per user, so results do not depend on visiting order
        return random_scores(self.n_items, make_rng([self.seed, u]))


def random_scores(n_items, rng):
    """I.i.d. uniform scores for one user."""
    return rng.random(n_items)


@dataclass
class PopModel:
    counts: np.ndarray

    @classmethod
    def fit(cls, corpus):
        counts = np.zeros(corpus.n_items, dtype=np.int64)
        for seq in corpus.users:
            np.add.at(counts, seq.train, 1)
        return cls(counts)

    def score_items(self, u=None, seq=None):
        return self.counts.astype(DTYPE)


def pop_scores(model):
    return model.score_items()


@dataclass
class MfModel:
    user_factors: np.ndarray
    item_factors: np.ndarray

    def score_items(self, u, seq=None):
        return self.item_factors @ self.user_factors[u]


def init_mf(n_users, n_items, d, cfg, rng=None):
    rng = make_rng(cfg.seed) if rng is None else rng
    lim = cfg.init_range
    users = rng.uniform(-lim, lim, size=(n_users, d))
    items = rng.uniform(-lim, lim, size=(n_items, d))
    return MfModel(users, items)


def mf_triple_loss(model, t):
    xhat = model.user_factors[t.u] @ (model.item_factors[t.p] - model.item_factors[t.q])
    return float(softplus(-xhat))


def mf_triple_grad(model, t):
    """Gradient of -ln sigmoid(xhat_upq) w.r.t. (user_u, item_p, item_q)."""
    w = model.user_factors[t.u]
    diff = model.item_factors[t.p] - model.item_factors[t.q]
    coef = -float(sigmoid(-(w @ diff)))
    return coef * diff, coef * w, -coef * w


def train_bpr_mf(corpus, d, cfg):
    """Order-free BPR: one SGD update per (u, p, q) triple, L2 on the touched rows."""
    rng = make_rng(cfg.seed)
    n_users = len(corpus.users)
    model = init_mf(n_users, corpus.n_items, d, cfg, rng)
    pools = [negative_pool(seq.history, corpus.n_items) for seq in corpus.users]
    U, V = model.user_factors, model.item_factors
    lr, l2 = cfg.lr, cfg.l2
    loss_log = []
    start = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for u in rng.permutation(n_users):
            train_items = corpus.users[u].train
            negs = pools[u][rng.integers(pools[u].size, size=len(train_items))]
            for t, (p, q) in enumerate(zip(train_items, negs)):
                tri = Triple(int(u), int(p), int(q), t)
                total += mf_triple_loss(model, tri)
                g_u, g_p, g_q = mf_triple_grad(model, tri)
                U[u] -= lr * (g_u + l2 * U[u])
                V[p] -= lr * (g_p + l2 * V[p])
                V[q] -= lr * (g_q + l2 * V[q])
                count += 1
        loss_log.append((epoch, total / max(count, 1), time.perf_counter() - start))
        log.info("bpr-mf epoch %d  mean loss %.6f", epoch, loss_log[-1][1])
    return model, loss_log


@dataclass
class SequenceModel:
    """Trained HCA-GRU (or plain GRU): scores items by h_o^n . X[i]."""
    params: object
    hyper: HyperParams

    def final_interest(self, seq):
        return final_interest(seq.train, self.params, self.hyper)

    def score_items(self, u, seq):
        return self.params.X @ self.final_interest(seq)


def plain_gru_hyper(d, n_items):
    return HyperParams(d=d, w_x=1, w_h=1, n_items=n_items, variant="gru")


def plain_gru(corpus, d, cfg=TrainConfig()):
    """Train the GRU baseline through the shared sequence-model code path.

    Scoring uses h^n directly (no fusion); the context, attention and fusion
    weights are held at zero and excluded from updates and regularization.
    """
    hyper = plain_gru_hyper(d, corpus.n_items)
    params, loss_log = train(corpus, hyper, cfg)
    return SequenceModel(params, hyper), loss_log
