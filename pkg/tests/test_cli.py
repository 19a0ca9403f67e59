import json

import pytest

from hca_seqrec import checkpoint
from hca_seqrec.cli import main
from hca_seqrec.files import git_blob_hash
from hca_seqrec.metrics import parse_tsv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def corpus_path(tmp_path):
    path = tmp_path / "c.json"
    assert run("synth", "--users", 12, "--items", 15, "--len", 12, "--pattern", "markov1",
               "--seed", 3, "--out", path) == 0
    return path


def train_eval(tmp, corpus_path, model="hca", *extra):
    ckpt = tmp / f"{model}.ckpt"
    assert run("train", "--corpus", corpus_path, "--model", model, "--dim", 4, "--epochs", 2,
               "--seed", 1, "--out", ckpt, *extra) == 0
    assert run("evaluate", "--corpus", corpus_path, "--ckpt", ckpt, "--topk", "5,10") == 0
    return ckpt


def test_synth_writes_corpus_and_truth(corpus_path, capsys):
    assert corpus_path.exists()
    truth = json.loads((corpus_path.parent / "c.json.truth.json").read_text())
    assert truth
    assert run("synth", "--users", 12, "--items", 15, "--len", 12, "--pattern", "markov1",
               "--seed", 3, "--out", corpus_path.parent / "d.json") == 0
    assert (corpus_path.parent / "d.json").read_bytes() == corpus_path.read_bytes()


@pytest.mark.parametrize("model", ["hca", "gru", "bprmf", "pop", "random"])
def test_train_evaluate_each_model(tmp_path, corpus_path, model):
    ckpt = train_eval(tmp_path, corpus_path, model)
    rows = parse_tsv((tmp_path / f"{model}.ckpt.metrics.tsv").read_text())
    assert [(r[0], r[1]) for r in rows] == [(model, 5), (model, 10)]
    manifest = json.loads((tmp_path / f"{model}.ckpt.manifest.json").read_text())
    assert manifest["checkpoint_hash"] == git_blob_hash(ckpt.read_text())
    kind, _, _ = checkpoint.load(ckpt)
    assert kind == model


def test_end_to_end_is_byte_identical(tmp_path, corpus_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    ca, cb = train_eval(a, corpus_path), train_eval(b, corpus_path)
    assert ca.read_bytes() == cb.read_bytes()
    for suffix in (".metrics.tsv", ".metrics.json", ".loss.tsv"):
        fa, fb = (str(c) + suffix for c in (ca, cb))
        if suffix == ".loss.tsv":
            # the third column is wall-clock seconds
            strip = lambda p: [l.split("\t")[:2] for l in open(p)]
            assert strip(fa) == strip(fb)
        else:
            assert open(fa, "rb").read() == open(fb, "rb").read()


def test_checkpoint_round_trip(tmp_path, corpus_path):
    ckpt = train_eval(tmp_path, corpus_path)
    text = ckpt.read_text()
    kind, model, doc = checkpoint.from_document(text)
    again = checkpoint.to_document(kind, model, doc["vocabulary"], doc["config"])
    assert again == text


def test_single_k_block(tmp_path, corpus_path, capsys):
    ckpt = train_eval(tmp_path, corpus_path, "pop")
    capsys.readouterr()
    assert run("evaluate", "--corpus", corpus_path, "--ckpt", ckpt, "--topk", "10") == 0
    out = capsys.readouterr().out
    assert "@10" in out and "@5" not in out


def test_window_flags_rejected_for_other_models(tmp_path, corpus_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("train", "--corpus", corpus_path, "--model", "pop", "--wx", 3, "--epochs", 1,
            "--out", tmp_path / "x")
    assert exc.value.code == 2
    assert "--wx/--wh" in capsys.readouterr().err


def test_epochs_required(tmp_path, corpus_path):
    with pytest.raises(SystemExit):
        run("train", "--corpus", corpus_path, "--out", tmp_path / "x")


def test_missing_files_report_one_line(tmp_path, capsys):
    assert run("evaluate", "--corpus", tmp_path / "nope.json", "--ckpt", tmp_path / "x") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("hca-seqrec evaluate: error:")


def test_vocabulary_mismatch(tmp_path, corpus_path):
    ckpt = train_eval(tmp_path, corpus_path, "pop")
    other = tmp_path / "o.json"
    run("synth", "--users", 5, "--items", 9, "--len", 10, "--pattern", "periodic", "--out", other)
    with pytest.raises(SystemExit):
        run("evaluate", "--corpus", other, "--ckpt", ckpt)


def test_ingest(tmp_path, capsys):
    log = tmp_path / "log.tsv"
    log.write_text("".join(f"u{k % 2}\ti{k % 7}\t{k}\n" for k in range(40)))
    assert run("ingest", "--input", log, "--min-len", 10, "--out", tmp_path / "c.json") == 0
    assert "20" in capsys.readouterr().out


def test_inspect_attention_layout(tmp_path, corpus_path, capsys):
    ckpt = tmp_path / "m.ckpt"
    run("train", "--corpus", corpus_path, "--dim", 4, "--wx", 2, "--wh", 3, "--epochs", 1,
        "--out", ckpt)
    capsys.readouterr()
    assert run("inspect-attention", "--ckpt", ckpt, "--corpus", corpus_path, "--user", "u00") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("user u00: HCA-GRU-x2-h3")
    rows = [l for l in lines if l.startswith("h^")]
    assert len(rows) == 3 and rows[-1].startswith("h^n ")
    for r in rows:
        weights = [float(v) for v in r.split()[2:]]
        assert len(weights) == 2 and sum(weights) == pytest.approx(1.0, abs=2e-4)
    pop = train_eval(tmp_path, corpus_path, "pop")
    with pytest.raises(SystemExit):
        run("inspect-attention", "--ckpt", pop, "--corpus", corpus_path, "--user", "u00")


def test_sweep_small(tmp_path, corpus_path, capsys):
    out = tmp_path / "sw"
    assert run("sweep", "--corpus", corpus_path, "--wx-range", "1..2", "--wh-range", "1..2",
               "--mode", "fixed-best", "--dim", 4, "--epochs", 1, "--topk", "5",
               "--with-gru", "--out", out) == 0
    doc = json.loads((tmp_path / "sw.sweep.json").read_text())
    assert doc["best"]["name"].startswith("HCA-GRU-x")
    assert "reference:GRU" in (tmp_path / "sw.sweep.tsv").read_text()
    assert "best: HCA-GRU-x" in capsys.readouterr().out
