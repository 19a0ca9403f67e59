"""
From a raw event log to ranking metrics
=======================================

Writes a small tab-separated log, ingests it, prints the corpus statistics,
then scores the users with item popularity.
"""
import os
import tempfile

import numpy as np

from hca_seqrec import PopModel, evaluate, format_table, ingest
from hca_seqrec.corpus import format_stats, stats

rng = np.random.default_rng(1)
path = os.path.join(tempfile.mkdtemp(), "events.tsv")
with open(path, "w") as fh:
    fh.write("# user\titem\ttimestamp\n")
    for u in range(30):
        for t in range(int(rng.integers(8, 25))):
            # a skewed item distribution so popularity carries signal
            item = min(int(rng.zipf(1.6)), 40)
            fh.write(f"user{u}\tsku{item}\t{1_600_000_000 + 60 * t}\n")

# users with fewer than 10 events are dropped
corpus = ingest(path, min_len=10)
print(format_stats(stats(corpus)))

# popular items the user already bought are excluded from the ranking
pop = PopModel.fit(corpus)
print(format_table({"pop": evaluate(pop, corpus, (5, 10))}))
