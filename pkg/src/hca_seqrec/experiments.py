"""Window-width sweeps and attention-weight inspection."""
import logging
from dataclasses import dataclass

import numpy as np

from .baselines import SequenceModel
from .metrics import evaluate
from .seqmodel import HyperParams, forward_sequence
from .training import train

log = logging.getLogger(__name__)

SWEEP_MODES = ("input-only", "hidden-only", "grid", "fixed-best")


def parse_range(text):
    """'2..5' -> [2, 3, 4, 5]; '3' -> [3]; '1,3,5' -> [1, 3, 5]."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(v) for v in text.split(".."))
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(v) for v in text.split(",")]


def config_name(wx, wh):
    return f"HCA-GRU-x{wx}-h{wh}"


@dataclass
class SweepRow:
    stage: str
    wx: int
    wh: int
    result: object  # RankedEval


def selection_key(ev):
    """Best = highest MAP at the largest k, NDCG at the largest k breaks ties."""
    k = max(ev.k_list)
    return (ev.mean("map", k), ev.mean("ndcg", k))


def run_sweep(corpus, wx_range, wh_range, mode, d, cfg, k_list, rank_over_all=False):
    """Train and evaluate HCA-GRU over window widths.

    input-only   w_h = 1, w_x over wx_range
    hidden-only  w_x = 1, w_h over wh_range
    grid         every (w_x, w_h) pair
    fixed-best   both single-level sweeps, then fix w_h at its best value and
                 vary w_x, then fix w_x at its best value and vary w_h

    Returns (rows, best_row).  Identical configurations are trained once.
    """
    if mode not in SWEEP_MODES:
        raise ValueError(f"unknown sweep mode {mode!r}")
    cache = {}

    def run(stage, wx, wh):
        if (wx, wh) not in cache:
            hyper = HyperParams(d=d, w_x=wx, w_h=wh, n_items=corpus.n_items)
            params, loss_log = train(corpus, hyper, cfg)
            cache[wx, wh] = evaluate(SequenceModel(params, hyper), corpus, k_list, rank_over_all)
            log.info("%s: final loss %.5f", config_name(wx, wh),
                     loss_log[-1][1] if loss_log else float("nan"))
        return SweepRow(stage, wx, wh, cache[wx, wh])

    rows = []
    if mode == "grid":
        rows = [run("grid", wx, wh) for wx in wx_range for wh in wh_range]
    if mode in ("input-only", "fixed-best"):
        rows += [run("input", wx, 1) for wx in wx_range]
    if mode in ("hidden-only", "fixed-best"):
        rows += [run("hidden", 1, wh) for wh in wh_range]
    if mode == "fixed-best":
        best_x = max((r for r in rows if r.stage == "input"), key=lambda r: selection_key(r.result)).wx
        best_h = max((r for r in rows if r.stage == "hidden"), key=lambda r: selection_key(r.result)).wh
        rows += [run(f"fix-h{best_h}", wx, best_h) for wx in wx_range]
        rows += [run(f"fix-x{best_x}", best_x, wh) for wh in wh_range]
    best = max(rows, key=lambda r: selection_key(r.result))
    return rows, best


@dataclass
class AttentionRow:
    step: int  # 0-based position of h^s in the prefix
    hidden_weight: float
    positions: list  # item positions covered by the input window (negative = padding)
    items: list  # item index per slot, None for padding
    input_weights: np.ndarray


def attention_layout(items, params, hyper):
    """Last-step hidden weights and, per covered step, its input weights.

    Row j covers h^{n-w_h+1+j}; its input weights run over x^{s-w_x+1}..x^s.
    Steps before the sequence start (zero padding) keep a row with
    ``step < 0`` and no input weights.
    """
    traces = forward_sequence(items, params, hyper)
    n = len(traces)
    a_h = traces[-1].a_h
    rows = []
    for j in range(hyper.w_h):
        s = n - hyper.w_h + j
        if s < 0:
            rows.append(AttentionRow(s, float(a_h[j]), [], [], np.array([])))
            continue
        pos = list(range(s - hyper.w_x + 1, s + 1))
        rows.append(AttentionRow(s, float(a_h[j]), pos,
                                 [items[p] if p >= 0 else None for p in pos],
                                 traces[s].a_x.copy()))
    return rows


def format_layout(rows, n, vocabulary=None):
    """Text table: one line per hidden step, input weights under item columns."""
    first = min([p for r in rows for p in r.positions] + [n - 1])
    cols = list(range(first, n))

    def label(p):
        return "x^n" if p == n - 1 else f"x^(n-{n - 1 - p})"

    out = [f"{'':<12}{'a_h':>8}  " + "".join(f"{label(p):>10}" for p in cols)]
    item_line = [f"{'item':<12}{'':>8}  "]
    for p in cols:
        if p < 0:
            name = "pad"
        else:
            name = None
            for r in rows:
                if p in r.positions:
                    it = r.items[r.positions.index(p)]
                    name = vocabulary[it] if vocabulary is not None else str(it)
                    break
            name = name if name is not None else ""
        item_line.append(f"{name:>10}")
    out.append("".join(item_line))
    for r in rows:
        s = r.step
        lab = "h^n" if s == n - 1 else f"h^(n-{n - 1 - s})"
        cells = []
        for p in cols:
            if p in r.positions:
                cells.append(f"{r.input_weights[r.positions.index(p)]:>10.4f}")
            else:
                cells.append(f"{'':>10}")
        out.append(f"{lab:<12}{r.hidden_weight:>8.4f}  " + "".join(cells))
    return "\n".join(out) + "\n"
