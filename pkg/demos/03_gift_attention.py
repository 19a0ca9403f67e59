"""
Where does the attention go when a gift sneaks in?
==================================================

In the gift-noise corpus about one event in ten is an item bought for
someone else: it comes from a separate pool and says nothing about what
follows.  After training we show the last-step attention layout of the
first user whose window holds such a gift.
"""
from hca_seqrec import HyperParams, SequenceModel, TrainConfig, synth, train
from hca_seqrec.experiments import attention_layout, format_layout

corpus = synth(200, 100, 40, "gift-noise", seed=7, epsilon=0.1)
gifts = set(range(corpus.meta["gift_start"], corpus.n_items))
hyper = HyperParams(d=16, w_x=2, w_h=3, n_items=corpus.n_items)
params, _ = train(corpus, hyper, TrainConfig(epochs=30, seed=0))

for seq in corpus.users:
    rows = attention_layout(seq.train, params, hyper)
    if any(i in gifts for r in rows for i in r.items if i is not None):
        break
print(f"user {seq.user_id}; gift items are i{min(gifts)}..i{max(gifts)}")
print(format_layout(rows, len(seq.train), corpus.items))
