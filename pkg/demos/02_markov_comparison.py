"""
HCA-GRU against the baselines on a Markov corpus
================================================

Each synthetic user follows a hidden successor chain with probability 0.9.
We train all five methods and print the ranking table.  Pass a number of
epochs as the first argument; 100 reproduces the acceptance setting and
takes a few minutes.
"""
import sys

from hca_seqrec import (
    HyperParams,
    PopModel,
    RandomModel,
    SequenceModel,
    TrainConfig,
    evaluate,
    format_table,
    plain_gru,
    synth,
    train,
    train_bpr_mf,
)

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 20
corpus = synth(200, 100, 40, "markov1", seed=7, concentration=0.9)
cfg = TrainConfig(epochs=epochs, seed=0)

models = {"random": RandomModel(corpus.n_items, 0), "pop": PopModel.fit(corpus)}
models["bprmf"], _ = train_bpr_mf(corpus, 16, cfg)
models["gru"], _ = plain_gru(corpus, 16, cfg)

hyper = HyperParams(d=16, w_x=2, w_h=3, n_items=corpus.n_items)
params, loss_log = train(corpus, hyper, cfg)
models["hca-x2-h3"] = SequenceModel(params, hyper)
print(f"HCA-GRU mean BPR loss: epoch 1 {loss_log[0][1]:.4f}, epoch {epochs} {loss_log[-1][1]:.4f}")

results = {name: evaluate(m, corpus, (5, 10)) for name, m in models.items()}
print(format_table(results))
