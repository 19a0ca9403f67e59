"""Sequential recommendation with a hierarchical contextual-attention GRU."""
from .baselines import MfModel, PopModel, RandomModel, SequenceModel, plain_gru, train_bpr_mf
from .corpus import Corpus, UserSequence, ingest, stats, synth
from .metrics import evaluate, format_table
from .seqmodel import HyperParams, ModelParams, forward_sequence
from .training import TrainConfig, final_interest, init_params, train

__version__ = "0.1.0"
