import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import bf_auc, bf_map, bf_ndcg, bf_ranking, bf_recall

from hca_seqrec.corpus import synth
from hca_seqrec.metrics import (
    auc,
    evaluate,
    map_at_k,
    ndcg_at_k,
    parse_tsv,
    rank_items,
    rank_scores,
    recall_at_k,
    report_tsv,
)


def test_rank_items_examples():
    X = np.array([[2.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    assert rank_items(np.array([1.0, 0.0]), X).tolist() == [2, 0, 1]
    assert rank_items(np.zeros(2), X).tolist() == [0, 1, 2]
    assert rank_items(np.array([1.0, 0.0]), X, excluded={2}).tolist() == [0, 1]
    with pytest.raises(ValueError):
        rank_items(np.zeros(2), X, excluded={0, 1, 2})


def test_recall_examples():
    ranking = [0, 5, 2, 7, 9, 1]
    assert recall_at_k(ranking, [0, 2, 3], 5) == pytest.approx(2 / 3)
    assert recall_at_k(ranking, [1, 9], 10) == 1.0
    assert recall_at_k(ranking, [4], 5) == 0.0
    with pytest.raises(ValueError):
        recall_at_k(ranking, [], 5)


def test_map_examples():
    assert map_at_k([3, 1, 2], [3], 5) == 1.0
    assert map_at_k([1, 3, 2], [3], 2) == 0.5
    assert map_at_k([4, 0, 5, 6], [4, 5], 3) == pytest.approx(0.8333, abs=1e-4)


def test_ndcg_examples():
    assert ndcg_at_k([1, 2, 3], [1, 2], 3) == 1.0
    assert ndcg_at_k([4, 0, 5], [4, 5], 3) == pytest.approx(0.91972, abs=1e-4)
    assert ndcg_at_k([0, 1, 2], [9], 3) == 0.0


def test_auc_examples():
    scores = np.array([0.9, 0.5, 0.95])
    assert auc(np.array([1.0, 0.2, 0.3]), [0], [0, 1, 2]) == 1.0
    assert auc(scores, [0], [0, 1, 2]) == 0.5
    assert auc(np.ones(4), [1], range(4)) == 0.5
    assert auc(scores, [0, 1, 2], [0, 1, 2]) is None


rankings = st.integers(3, 25).flatmap(
    lambda n: st.tuples(st.permutations(list(range(n))),
                        st.sets(st.integers(0, n - 1), min_size=1, max_size=n),
                        st.integers(1, n + 2)))


@given(rankings)
def test_metrics_match_definitions(case):
    ranking, test, k = case
    assert recall_at_k(ranking, test, k) == pytest.approx(bf_recall(ranking, test, k), abs=1e-12)
    assert map_at_k(ranking, test, k) == pytest.approx(bf_map(ranking, test, k), abs=1e-12)
    assert ndcg_at_k(ranking, test, k) == pytest.approx(bf_ndcg(ranking, test, k), abs=1e-12)


@given(rankings)
def test_metrics_bounded_and_recall_monotone(case):
    ranking, test, k = case
    for fn in (recall_at_k, map_at_k, ndcg_at_k):
        a, b = fn(ranking, test, k), fn(ranking, test, k + 1)
        assert 0.0 <= a <= 1.0 and 0.0 <= b <= 1.0
    assert recall_at_k(ranking, test, k + 1) >= recall_at_k(ranking, test, k)


@given(st.lists(st.integers(0, 3), min_size=4, max_size=20), st.data())
def test_auc_matches_pair_counting(values, data):
    scores = np.array(values, dtype=float)  # few distinct values -> many ties
    n = len(scores)
    test = data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n - 1))
    got = auc(scores, test, range(n))
    assert got == pytest.approx(bf_auc(scores, test, range(n)), abs=1e-12)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.sets(st.integers(0, 29)))
def test_rank_scores_matches_sort(values, excluded):
    excluded = {e for e in excluded if e < len(values)}
    if len(excluded) == len(values):
        return
    assert rank_scores(values, excluded).tolist() == bf_ranking(values, excluded)


def test_swapping_hit_forward_raises_ndcg():
    ranking = [5, 6, 1, 7, 8]
    better = [5, 1, 6, 7, 8]
    assert ndcg_at_k(better, [1], 5) > ndcg_at_k(ranking, [1], 5)


def test_random_auc_converges():
    rng = np.random.default_rng(0)
    scores = rng.random(200_000)
    test = set(range(0, 200_000, 2))
    # 10^5 positives against 10^5 negatives
    assert auc(scores, test, range(200_000)) == pytest.approx(0.5, abs=0.01)


class Oracle:
    """Scores a periodic-corpus user's test items first."""

    def __init__(self, corpus):
        self.corpus = corpus

    def score_items(self, u, seq):
        s = np.zeros(self.corpus.n_items)
        s[seq.test] = 1.0
        return s


def test_evaluate_perfect_oracle_periodic():
    corpus = synth(20, 50, 30, "periodic", seed=1)
    ev = evaluate(Oracle(corpus), corpus, (5, 10), rank_over_all=True)
    assert all(len(s.test) <= 5 for s in corpus.users)
    assert ev.mean("recall", 5) == 1.0 and ev.mean("ndcg", 5) == 1.0
    # with training items excluded the repeated motif cannot be recommended
    ev_ex = evaluate(Oracle(corpus), corpus, (5,))
    assert ev_ex.mean("recall", 5) == 0.0


class Shuffled:
    def __init__(self, n, seed):
        self.n, self.seed = n, seed

    def score_items(self, u, seq):
        return np.random.default_rng([self.seed, u]).integers(0, 4, self.n).astype(float)


def test_evaluate_matches_oracle_script():
    corpus = synth(30, 25, 15, "markov1", seed=6)
    model = Shuffled(25, 3)
    ev = evaluate(model, corpus, (5, 10))
    for u, (seq, ue) in enumerate(zip(corpus.users, ev.users)):
        scores = model.score_items(u, seq)
        ranking = bf_ranking(scores, set(seq.train))
        cand = [i for i in range(25) if i not in set(seq.train)]
        for k in (5, 10):
            assert ue.recall[k] == pytest.approx(bf_recall(ranking, seq.test, k), abs=1e-12)
            assert ue.map[k] == pytest.approx(bf_map(ranking, seq.test, k), abs=1e-12)
            assert ue.ndcg[k] == pytest.approx(bf_ndcg(ranking, seq.test, k), abs=1e-12)
        pos = [i for i in seq.test if i in cand]
        if pos and len(pos) < len(cand):
            assert ue.auc == pytest.approx(bf_auc(scores, pos, cand), abs=1e-12)


def test_evaluate_thread_count_does_not_matter():
    corpus = synth(30, 25, 15, "markov1", seed=6)
    a = report_tsv({"m": evaluate(Shuffled(25, 1), corpus, (5,), threads=1)})
    b = report_tsv({"m": evaluate(Shuffled(25, 1), corpus, (5,), threads=4)})
    assert a == b
    rows = parse_tsv(a)
    assert rows[0][0] == "m" and rows[0][1] == 5


def test_evaluate_skips_empty_test():
    from hca_seqrec.corpus import Corpus, UserSequence
    corpus = Corpus(["a", "b", "c"], [UserSequence("solo", [0], 1), UserSequence("x", [0, 1, 2], 2)])
    ev = evaluate(Shuffled(3, 0), corpus, (1,))
    assert ev.skipped == [("solo", "empty test set")]
    assert len(ev.users) == 1
