"""
One forward pass, step by step
==============================

A tiny model reads a five-item sequence.  At every step we print the input
attention weights, the hidden attention weights and the overall interest.
"""
import numpy as np

from hca_seqrec import HyperParams, TrainConfig, forward_sequence, init_params

np.set_printoptions(precision=4, suppress=True)

# d=4, the input window sees 2 items, the hidden window 3 states
hyper = HyperParams(d=4, w_x=2, w_h=3, n_items=8)
params = init_params(hyper, TrainConfig(seed=0))

items = [3, 1, 4, 1, 5]
for t, tr in enumerate(forward_sequence(items, params, hyper)):
    # the first slots of each window are zero padding while t is small
    print(f"t={t} item={tr.item}  a_x={tr.a_x}  a_h={tr.a_h}")
    print(f"      h_o={tr.h_o}")

# scores for the next item are dot products with the item embeddings
scores = params.X @ tr.h_o
print("ranking after the sequence:", np.argsort(-scores, kind="stable"))
