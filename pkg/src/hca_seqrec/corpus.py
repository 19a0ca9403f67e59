"""Event logs -> per-user item sequences with an 80/20 train/test split.

Input format: UTF-8 text, one event per line, ``user_id<TAB>item_id<TAB>timestamp``
(integer epoch seconds).  Blank lines and lines starting with ``#`` are ignored.

Each retained user's events are sorted by timestamp (file order breaks ties);
the first floor(0.8 n) events (at least one) train, the rest test, and
repeated items in the test part are dropped keeping the first occurrence.
"""
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .numerics import make_rng

FORMAT_VERSION = 1
PATTERNS = ("markov1", "periodic", "gift-noise")


class CorpusError(ValueError):
    pass


def train_length(n):
    return max(1, (4 * n) // 5)


def dedup(seq):
    seen = set()
    out = []
    for i in seq:
        if i not in seen:
            seen.add(i)
            out.append(i)
    return out


@dataclass
class UserSequence:
    user_id: str
    sequence: list
    split: int

    @property
    def train(self):
        return self.sequence[:self.split]

    @property
    def test(self):
        return dedup(self.sequence[self.split:])

    @property
    def history(self):
        return set(self.sequence)


@dataclass
class Corpus:
    items: list  # index -> original item id
    users: list  # UserSequence, sorted by user id
    min_len: int = 1
    max_len: int = None
    meta: dict = field(default_factory=dict)
    truth: list = field(default=None, repr=False)  # synthetic ground truth, not serialized

    @property
    def n_items(self):
        return len(self.items)

    def item_index(self):
        return {iid: k for k, iid in enumerate(self.items)}

    def user(self, user_id):
        for seq in self.users:
            if seq.user_id == user_id:
                return seq
        raise KeyError(f"unknown user id {user_id!r}")

    def to_json(self):
        doc = {
            "format_version": FORMAT_VERSION,
            "min_len": self.min_len,
            "max_len": self.max_len,
            "meta": self.meta,
            "items": self.items,
            "users": [{"id": s.user_id, "split": s.split, "sequence": s.sequence}
                      for s in self.users],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise CorpusError(f"unsupported corpus format_version {doc.get('format_version')!r}")
        users = [UserSequence(u["id"], [int(i) for i in u["sequence"]], int(u["split"]))
                 for u in doc["users"]]
        corpus = cls(list(doc["items"]), users, doc["min_len"], doc["max_len"], doc.get("meta", {}))
        n = corpus.n_items
        for s in users:
            if any(not 0 <= i < n for i in s.sequence):
                raise CorpusError(f"user {s.user_id!r} references an item outside the vocabulary")
        return corpus

    def save(self, path):
        from .files import atomic_write
        atomic_write(path, self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def read_events(path):
    """Yield (user_id, item_id, timestamp) from an event-log file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
            user, item, ts = parts
            if not user or not item:
                raise CorpusError(f"line {lineno}: empty user or item id")
            try:
                ts = int(ts)
            except ValueError:
                raise CorpusError(f"line {lineno}: timestamp {ts!r} is not an integer") from None
            yield user, item, ts


def build_corpus(raw, min_len=1, max_len=None, meta=None):
    """Split and index ``raw``: {user_id: [item_id, ...]} already time-ordered."""
    kept = {u: seq for u, seq in raw.items()
            if len(seq) >= min_len and (max_len is None or len(seq) <= max_len)}
    if not kept:
        raise CorpusError("empty result: no user passes the length filter")
    order = sorted(kept)
    index = {}
    for part in ("train", "test"):
        for u in order:
            seq = kept[u]
            k = train_length(len(seq))
            for iid in (seq[:k] if part == "train" else seq[k:]):
                index.setdefault(iid, len(index))
    users = [UserSequence(u, [index[i] for i in kept[u]], train_length(len(kept[u])))
             for u in order]
    items = sorted(index, key=index.get)
    return Corpus(items, users, min_len, max_len, meta or {})


def ingest(path, min_len=1, max_len=300):
    events = {}
    for user, item, ts in read_events(path):
        events.setdefault(user, []).append((ts, item))
    # list.sort is stable, so equal timestamps keep file order
    raw = {u: [item for _, item in sorted(ev, key=lambda e: e[0])] for u, ev in events.items()}
    return build_corpus(raw, min_len, max_len, meta={"source": "ingest"})


def _single_cycle(rng, m):
    order = rng.permutation(m)
    succ = np.empty(m, dtype=np.int64)
    succ[order] = np.roll(order, -1)
    return succ


def synth(n_users, n_items, seq_len, pattern, seed, concentration=0.9,
          epsilon=0.1, period=None, gift_items=None):
    """Seeded synthetic corpus with planted sequential structure.

    markov1     every item has one preferred successor (a single cycle through
                all items) taken with probability ``concentration``; otherwise
                the next item is uniform over the other items.
    periodic    each user repeats a motif of 3-5 distinct items (or ``period``).
    gift-noise  markov1 over a "taste" pool, plus, at each step with probability
                ``epsilon``, an inserted "gift" item drawn uniformly from a
                separate pool; gifts do not move the user's chain state.

    ``corpus.truth[u]`` lists, for each position t >= 1 of user u's sequence,
    the generator's next-item distribution as {"t", "item", "peak", "peak_prob",
    "state", "noise"}; see :func:`truth_distribution`.
    """
    if pattern not in PATTERNS:
        raise CorpusError(f"unknown pattern {pattern!r}; choose from {', '.join(PATTERNS)}")
    if n_users < 1 or seq_len < 2 or n_items < 2:
        raise CorpusError("need n_users >= 1, seq_len >= 2 and n_items >= 2")
    rng = make_rng(seed)
    meta = {"source": "synth", "pattern": pattern, "seed": seed, "n_items": n_items,
            "seq_len": seq_len}
    if pattern == "gift-noise":
        n_gift = gift_items if gift_items is not None else max(1, n_items // 5)
        n_chain = n_items - n_gift
        if n_chain < 2:
            raise CorpusError("gift-noise needs at least two non-gift items")
        meta.update(epsilon=epsilon, gift_start=n_chain)
    else:
        n_chain, n_gift = n_items, 0
    if pattern in ("markov1", "gift-noise"):
        succ = _single_cycle(rng, n_chain)
        meta.update(concentration=concentration, chain_items=n_chain,
                    successor=succ.tolist())
    elif period is not None and not 1 <= period <= n_items:
        raise CorpusError("period must lie in [1, n_items]")
    width = len(str(n_users - 1))
    users, truth = [], []
    for u in range(n_users):
        seq, recs = [], []
        if pattern == "periodic":
            length = period if period is not None else int(rng.integers(3, 6))
            motif = rng.choice(n_items, size=min(length, n_items), replace=False)
            seq = [int(motif[t % len(motif)]) for t in range(seq_len)]
            recs = [{"t": t, "item": seq[t], "peak": seq[t], "peak_prob": 1.0,
                     "state": None, "noise": False} for t in range(1, seq_len)]
        else:
            pp = concentration * (1.0 - epsilon) if n_gift else concentration
            state = int(rng.integers(n_chain))
            seq.append(state)
            for t in range(1, seq_len):
                peak = int(succ[state])
                rec = {"t": t, "peak": peak, "peak_prob": pp, "state": state, "noise": False}
                if n_gift and rng.random() < epsilon:
                    item = n_chain + int(rng.integers(n_gift))
                    rec["noise"] = True
                else:
                    if rng.random() < concentration:
                        item = peak
                    else:
                        item = int(rng.integers(n_chain - 1))
                        item += item >= peak  # uniform over chain items other than peak
                    state = item
                rec["item"] = item
                seq.append(item)
                recs.append(rec)
        users.append(UserSequence(f"u{u:0{width}d}", seq, train_length(seq_len)))
        truth.append(recs)
    items = [f"i{k}" for k in range(n_items)]
    return Corpus(items, users, min_len=seq_len, max_len=None, meta=meta, truth=truth)


def truth_distribution(meta, record):
    """Dense next-item distribution for one ``corpus.truth`` record."""
    n = meta["n_items"]
    probs = np.zeros(n)
    if meta["pattern"] == "periodic":
        probs[record["peak"]] = 1.0
        return probs
    c = meta["concentration"]
    m = meta["chain_items"]
    probs[:m] = (1.0 - c) / (m - 1)
    probs[record["peak"]] = c
    if meta["pattern"] == "gift-noise":
        eps = meta["epsilon"]
        probs *= 1.0 - eps
        probs[m:] = eps / (n - m)
    return probs


def truth_document(corpus):
    users = [{"id": s.user_id, "split": s.split, "positions": recs}
             for s, recs in zip(corpus.users, corpus.truth)]
    doc = {"format_version": FORMAT_VERSION, "meta": corpus.meta, "users": users}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def stats(corpus):
    n_users = len(corpus.users)
    if n_users == 0:
        raise CorpusError("empty corpus")
    feedbacks = sum(len(s.sequence) for s in corpus.users)
    sparsity = 1.0 - feedbacks / (n_users * corpus.n_items)
    if sparsity < 0:
        warnings.warn(f"sparsity is negative ({sparsity:.4f}): more feedbacks than user-item cells",
                      stacklevel=2)
    return {"users": n_users, "items": corpus.n_items, "feedbacks": feedbacks,
            "avg_len": feedbacks / n_users, "sparsity": sparsity}


def format_stats(st, name="corpus"):
    head = f"{'Dataset':<12}{'#users':>10}{'#items':>10}{'#feedbacks':>12}{'#avg. seq. len.':>17}{'sparsity (%)':>14}"
    row = (f"{name:<12}{st['users']:>10,}{st['items']:>10,}{st['feedbacks']:>12,}"
           f"{st['avg_len']:>17.2f}{100 * st['sparsity']:>14.4f}")
    return head + "\n" + row + "\n"
