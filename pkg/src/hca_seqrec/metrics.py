"""Top-k ranking and the Recall / MAP / NDCG / AUC measures.

Conventions used throughout:

* rankings: higher score first, ties broken by ascending item index;
* candidates: every item except the user's training items (unless
  ``rank_over_all``);
* MAP@k normalizes by min(|test|, k); NDCG@k uses binary relevance, log2
  discounts and an ideal list with min(|test|, k) hits;
* AUC counts tied (positive, negative) pairs as one half;
* corpus figures are macro averages over evaluated users.
"""
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

DEFAULT_K = (5, 10, 15, 20)
FORMAT_VERSION = 1


def rank_items(h_o, X, excluded=()):
    """Items outside ``excluded`` ordered by h_o . X[i], best first."""
    return rank_scores(X @ h_o, excluded)


def rank_scores(scores, excluded=()):
    scores = np.asarray(scores, dtype=np.float64)
    keep = np.ones(scores.size, dtype=bool)
    keep[list(excluded)] = False
    cand = np.flatnonzero(keep)
    if cand.size == 0:
        raise ValueError("every item is excluded; nothing to rank")
    return cand[np.lexsort((cand, -scores[cand]))]


def _check_test(test_set):
    if len(test_set) == 0:
        raise ValueError("empty test set")


def recall_at_k(ranking, test_set, k):
    _check_test(test_set)
    test = set(test_set)
    hits = sum(1 for i in ranking[:k] if i in test)
    return hits / len(test)


def map_at_k(ranking, test_set, k):
    _check_test(test_set)
    test = set(test_set)
    hits, total = 0, 0.0
    for pos, i in enumerate(ranking[:k], 1):
        if i in test:
            hits += 1
            total += hits / pos
    return total / min(len(test), k)


def ndcg_at_k(ranking, test_set, k):
    _check_test(test_set)
    test = set(test_set)
    dcg = sum(1.0 / math.log2(pos + 1) for pos, i in enumerate(ranking[:k], 1) if i in test)
    idcg = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(len(test), k) + 1))
    return dcg / idcg


def auc(scores, test_set, candidate_set):
    """Fraction of (positive, negative) candidate pairs ordered correctly.

    Returns None when either side is empty (the user is then skipped).
    """
    scores = np.asarray(scores, dtype=np.float64)
    cand = np.asarray(sorted(set(candidate_set)), dtype=np.int64)
    is_pos = np.isin(cand, list(set(test_set)))
    pos, neg = scores[cand[is_pos]], np.sort(scores[cand[~is_pos]])
    if pos.size == 0 or neg.size == 0:
        return None
    below = np.searchsorted(neg, pos, side="left")
    tied = np.searchsorted(neg, pos, side="right") - below
    return float(np.sum(below + 0.5 * tied) / (pos.size * neg.size))


@dataclass
class UserEval:
    user: str
    ranking: np.ndarray  # best-first candidates, truncated to max(k)
    recall: dict
    map: dict
    ndcg: dict
    auc: float = None


@dataclass
class RankedEval:
    k_list: tuple
    users: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (user id, reason)

    def mean(self, metric, k=None):
        if metric == "auc":
            vals = [u.auc for u in self.users if u.auc is not None]
        else:
            vals = [getattr(u, metric)[k] for u in self.users]
        return float(np.mean(vals)) if vals else float("nan")

    def summary(self):
        out = {"users": len(self.users), "skipped": len(self.skipped),
               "auc": self.mean("auc"), "at": {}}
        for k in self.k_list:
            out["at"][str(k)] = {m: self.mean(m, k) for m in ("recall", "map", "ndcg")}
        return out


def _threads():
    try:
        return max(1, int(os.environ.get("HCA_SEQREC_THREADS", "1")))
    except ValueError:
        return 1


def evaluate_user(model, u, seq, n_items, k_list, rank_over_all=False):
    test = seq.test
    if not test:
        return None, "empty test set"
    scores = model.score_items(u, seq)
    excluded = () if rank_over_all else sorted(set(seq.train))
    ranking = rank_scores(scores, excluded)
    kmax = max(k_list)
    cand = set(range(n_items)).difference(excluded)
    return UserEval(
        user=seq.user_id,
        ranking=ranking[:kmax],
        recall={k: recall_at_k(ranking, test, k) for k in k_list},
        map={k: map_at_k(ranking, test, k) for k in k_list},
        ndcg={k: ndcg_at_k(ranking, test, k) for k in k_list},
        auc=auc(scores, test, cand),
    ), None


def evaluate(model, corpus, k_list=DEFAULT_K, rank_over_all=False, threads=None):
    """Score every user with ``model.score_items(user_index, user_sequence)``.

    Per-user work may fan out over ``HCA_SEQREC_THREADS`` threads; results
    are reduced in corpus order so output does not depend on the thread count.
    """
    k_list = tuple(sorted(set(int(k) for k in k_list)))
    if not k_list or k_list[0] < 1:
        raise ValueError("k values must be positive")
    n = corpus.n_items
    job = lambda pair: evaluate_user(model, pair[0], pair[1], n, k_list, rank_over_all)  # noqa: E731
    threads = threads or _threads()
    pairs = list(enumerate(corpus.users))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, pairs))
    else:
        results = [job(p) for p in pairs]
    ev = RankedEval(k_list)
    for (_, seq), (ue, reason) in zip(pairs, results):
        if ue is None:
            ev.skipped.append((seq.user_id, reason))
        else:
            ev.users.append(ue)
    return ev


def report_document(results):
    """Structured metrics report: {method: summary}, ``results`` maps name -> RankedEval."""
    doc = {"format_version": FORMAT_VERSION,
           "methods": {name: ev.summary() for name, ev in results.items()}}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


TSV_HEADER = "method\tk\trecall\tmap\tndcg\tauc\n"


def report_tsv(results):
    lines = [TSV_HEADER]
    for name, ev in results.items():
        a = ev.mean("auc")
        for k in ev.k_list:
            lines.append(f"{name}\t{k}\t{ev.mean('recall', k)!r}\t{ev.mean('map', k)!r}"
                         f"\t{ev.mean('ndcg', k)!r}\t{a!r}\n")
    return "".join(lines)


def parse_tsv(text):
    rows = []
    for line in text.splitlines()[1:]:
        if not line:
            continue
        method, k, rec, mp, nd, a = line.split("\t")
        rows.append((method, int(k), float(rec), float(mp), float(nd), float(a)))
    return rows


def format_table(results):
    """Percent table: 4 decimals for Recall/MAP/NDCG, 3 for AUC."""
    names = list(results)
    k_list = results[names[0]].k_list if names else ()
    head = f"{'method':<18}" + "".join(f"{'@' + str(k):^27}" for k in k_list) + f"{'AUC':>9}"
    sub = f"{'':<18}" + "".join(f"{'Recall':>9}{'MAP':>9}{'NDCG':>9}" for _ in k_list)
    lines = [head, sub]
    for name in names:
        ev = results[name]
        cells = "".join(f"{100 * ev.mean('recall', k):>9.4f}{100 * ev.mean('map', k):>9.4f}"
                        f"{100 * ev.mean('ndcg', k):>9.4f}" for k in ev.k_list)
        lines.append(f"{name:<18}{cells}{100 * ev.mean('auc'):>9.3f}")
    return "\n".join(lines) + "\n"
