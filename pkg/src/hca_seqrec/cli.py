"""Command-line entry point: ``hca-seqrec <command> ...``.

Commands: synth, ingest, train, evaluate, sweep, inspect-attention.
Every command is deterministic given its inputs, flags and seed; only the run
manifest records wall-clock time.  Files are written via temp file + rename.
"""
import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone

from . import checkpoint
from .baselines import PopModel, RandomModel, SequenceModel, plain_gru_hyper, train_bpr_mf
from .corpus import PATTERNS, Corpus, CorpusError, format_stats, ingest, stats, synth, truth_document
from .experiments import (
    SWEEP_MODES,
    attention_layout,
    config_name,
    format_layout,
    parse_range,
    run_sweep,
)
from .files import atomic_write, git_blob_hash, sha256_file
from .metrics import evaluate, format_table, report_document, report_tsv
from .seqmodel import HyperParams
from .training import TrainConfig, format_loss_log, train

log = logging.getLogger("hca_seqrec")

DEFAULT_WX, DEFAULT_WH = 2, 3


class UsageError(Exception):
    pass


def _topk(text):
    try:
        ks = [int(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --topk list {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("--topk needs positive integers")
    return ks


def cmd_synth(args):
    corpus = synth(args.users, args.items, args.len, args.pattern, args.seed,
                   concentration=args.concentration, epsilon=args.epsilon, period=args.period)
    corpus.save(args.out)
    atomic_write(args.out + ".truth.json", truth_document(corpus))
    sys.stdout.write(format_stats(stats(corpus), args.pattern))


def cmd_ingest(args):
    corpus = ingest(args.input, args.min_len, args.max_len)
    corpus.save(args.out)
    sys.stdout.write(format_stats(stats(corpus)))


def _train_config(args):
    return TrainConfig(lr=args.lr, l2=args.l2, epochs=args.epochs, init_range=args.init_range,
                       seed=args.seed, average=args.average, max_norm=args.max_norm)


def cmd_train(args):
    if args.model != "hca" and (args.wx is not None or args.wh is not None):
        raise UsageError(f"--wx/--wh only apply to --model hca, not {args.model}")
    corpus = Corpus.load(args.corpus)
    cfg = _train_config(args)
    started = time.perf_counter()
    loss_log = []
    users = None
    if args.model == "hca":
        hyper = HyperParams(args.dim, args.wx or DEFAULT_WX, args.wh or DEFAULT_WH, corpus.n_items)
        params, loss_log = train(corpus, hyper, cfg)
        model = SequenceModel(params, hyper)
    elif args.model == "gru":
        hyper = plain_gru_hyper(args.dim, corpus.n_items)
        params, loss_log = train(corpus, hyper, cfg)
        model = SequenceModel(params, hyper)
    elif args.model == "bprmf":
        model, loss_log = train_bpr_mf(corpus, args.dim, cfg)
        users = [s.user_id for s in corpus.users]
    elif args.model == "pop":
        model = PopModel.fit(corpus)
    else:
        model = RandomModel(corpus.n_items, args.seed)
    config = asdict(cfg)
    config.update(model=args.model, dim=args.dim)
    text = checkpoint.to_document(args.model, model, corpus.items, config, users)
    atomic_write(args.out, text)
    loss_path = args.out + ".loss.tsv"
    atomic_write(loss_path, format_loss_log(loss_log))
    manifest = {
        "seed": cfg.seed,
        "corpus": args.corpus,
        "corpus_digest": "sha256:" + sha256_file(args.corpus),
        "config": config,
        "checkpoint_hash": git_blob_hash(text),
        "loss_log": loss_path,
        "wallclock_seconds": round(time.perf_counter() - started, 3),
        "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    atomic_write(args.out + ".manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    if loss_log:
        print(f"epoch {loss_log[-1][0]}: mean loss {loss_log[-1][1]:.6f}")
    print(f"checkpoint {args.out} ({manifest['checkpoint_hash']})")


def _check_vocab(doc, corpus):
    if doc["vocabulary"] != corpus.items:
        raise UsageError("checkpoint vocabulary does not match the corpus")
    if doc["model"] == "bprmf" and doc["users"] != [s.user_id for s in corpus.users]:
        raise UsageError("checkpoint users do not match the corpus")


def cmd_evaluate(args):
    corpus = Corpus.load(args.corpus)
    kind, model, doc = checkpoint.load(args.ckpt)
    _check_vocab(doc, corpus)
    name = args.name or kind
    ev = evaluate(model, corpus, args.topk, rank_over_all=args.rank_over_all)
    results = {name: ev}
    prefix = args.out or args.ckpt
    atomic_write(prefix + ".metrics.json", report_document(results))
    atomic_write(prefix + ".metrics.tsv", report_tsv(results))
    sys.stdout.write(format_table(results))
    if ev.skipped:
        print(f"skipped {len(ev.skipped)} user(s) with an empty test set")


def cmd_sweep(args):
    corpus = Corpus.load(args.corpus)
    cfg = _train_config(args)
    rows, best = run_sweep(corpus, parse_range(args.wx_range), parse_range(args.wh_range),
                           args.mode, args.dim, cfg, args.topk, args.rank_over_all)
    results = {}
    for r in rows:
        results[f"{r.stage}:{config_name(r.wx, r.wh)}"] = r.result
    if args.with_gru:
        hyper = plain_gru_hyper(args.dim, corpus.n_items)
        params, _ = train(corpus, hyper, cfg)
        results["reference:GRU"] = evaluate(SequenceModel(params, hyper), corpus, args.topk,
                                            args.rank_over_all)
    sys.stdout.write(format_table(results))
    print(f"best: {config_name(best.wx, best.wh)}")
    if args.out:
        doc = json.loads(report_document(results))
        doc["best"] = {"wx": best.wx, "wh": best.wh, "name": config_name(best.wx, best.wh)}
        atomic_write(args.out + ".sweep.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
        atomic_write(args.out + ".sweep.tsv", report_tsv(results))


def cmd_inspect_attention(args):
    corpus = Corpus.load(args.corpus)
    kind, model, doc = checkpoint.load(args.ckpt)
    if kind not in ("hca", "gru"):
        raise UsageError(f"a {kind} checkpoint has no attention weights")
    _check_vocab(doc, corpus)
    try:
        seq = corpus.user(args.user)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    rows = attention_layout(seq.train, model.params, model.hyper)
    print(f"user {seq.user_id}: {config_name(model.hyper.w_x, model.hyper.w_h)}, "
          f"n = {len(seq.train)}")
    sys.stdout.write(format_layout(rows, len(seq.train), corpus.items))


def build_parser():
    p = argparse.ArgumentParser(prog="hca-seqrec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--users", type=int, required=True)
    s.add_argument("--items", type=int, required=True)
    s.add_argument("--len", type=int, required=True, help="events per user")
    s.add_argument("--pattern", choices=PATTERNS, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--concentration", type=float, default=0.9,
                   help="probability of the preferred successor (markov1, gift-noise)")
    s.add_argument("--epsilon", type=float, default=0.1, help="gift insertion rate (gift-noise)")
    s.add_argument("--period", type=int, default=None, help="fixed motif length (periodic)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="build a corpus from a user/item/timestamp TSV log")
    s.add_argument("--input", required=True)
    s.add_argument("--min-len", type=int, default=10,
                   help="drop users with fewer events (default %(default)s)")
    s.add_argument("--max-len", type=int, default=300,
                   help="drop users with more events (default %(default)s)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    def training_flags(s):
        s.add_argument("--dim", type=int, default=20, help="latent dimension (default %(default)s)")
        s.add_argument("--lr", type=float, default=0.01, help="SGD learning rate (default %(default)s)")
        s.add_argument("--l2", type=float, default=0.001, help="L2 weight on all parameters (default %(default)s)")
        s.add_argument("--init-range", type=float, default=0.5,
                       help="half-width of the uniform init (default %(default)s)")
        s.add_argument("--epochs", type=int, required=True, help="number of passes over the users; no default")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--average", action="store_true",
                       help="average instead of sum triple gradients per user sequence")
        s.add_argument("--max-norm", type=float, default=None, help="clip gradient norm (off)")

    s = sub.add_parser("train", help="train a model and write a checkpoint")
    s.add_argument("--corpus", required=True)
    s.add_argument("--model", choices=checkpoint.MODEL_KINDS, default="hca")
    s.add_argument("--wx", type=int, default=None, help=f"input window (hca only, default {DEFAULT_WX})")
    s.add_argument("--wh", type=int, default=None, help=f"hidden window (hca only, default {DEFAULT_WH})")
    training_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="Recall/MAP/NDCG@k and AUC of a checkpoint")
    s.add_argument("--corpus", required=True)
    s.add_argument("--ckpt", required=True)
    s.add_argument("--topk", type=_topk, default=[5, 10, 15, 20])
    s.add_argument("--rank-over-all", action="store_true",
                   help="keep the user's training items among the candidates")
    s.add_argument("--name", default=None, help="method name in the report")
    s.add_argument("--out", default=None, help="report path prefix (default: the checkpoint path)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="window-width sweep")
    s.add_argument("--corpus", required=True)
    s.add_argument("--wx-range", default="1..5")
    s.add_argument("--wh-range", default="1..5")
    s.add_argument("--mode", choices=SWEEP_MODES, default="fixed-best")
    training_flags(s)
    s.add_argument("--topk", type=_topk, default=[5, 10, 15, 20])
    s.add_argument("--rank-over-all", action="store_true")
    s.add_argument("--with-gru", action="store_true", help="add a plain-GRU reference row")
    s.add_argument("--out", default=None, help="report path prefix")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("inspect-attention", help="print last-step attention weights of one user")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--corpus", required=True)
    s.add_argument("--user", required=True)
    s.set_defaults(func=cmd_inspect_attention)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (CorpusError, checkpoint.CheckpointError, ValueError, KeyError, OSError) as exc:
        print(f"hca-seqrec {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
