import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hca_seqrec.seqmodel import HyperParams  # noqa: E402
from hca_seqrec.training import TrainConfig, init_params  # noqa: E402


@pytest.fixture
def small_model():
    hyper = HyperParams(d=4, w_x=2, w_h=2, n_items=10)
    return hyper, init_params(hyper, TrainConfig(seed=11))


def random_params(hyper, seed, scale=0.5):
    return init_params(hyper, TrainConfig(seed=seed, init_range=scale))


def as_dict(params):
    return {n: a for n, a in params.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
