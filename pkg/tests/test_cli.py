"""Command line surface."""

import json

import pytest
from click.testing import CliRunner

from chromarec.cli import main
from chromarec.color import quantize_lab
from chromarec.document import parse_document
from chromarec.model import load_checkpoint
from chromarec.palette import extract_multi_palette
from chromarec.sequence import load_corpus, save_corpus


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def checkpoint_path(demo_checkpoint, tmp_path_factory):
    from chromarec.model import save_checkpoint

    path = tmp_path_factory.mktemp("model") / "demo.ckpt"
    save_checkpoint(demo_checkpoint, path)
    return path


@pytest.fixture(scope="module")
def corpus_dir(runner, tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    result = runner.invoke(
        main, ["synth-data", "--docs", "56", "--seed", "5", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture(scope="module")
def document_path(demo_corpus, tmp_path_factory):
    from chromarec.document import serialize_document

    path = tmp_path_factory.mktemp("docs") / "sample.json"
    path.write_text(json.dumps(serialize_document(demo_corpus.test_docs[0])))
    return path


def test_synth_data_writes_splits(runner, corpus_dir):
    for name in ("train.jsonl", "val.jsonl", "test.jsonl", "spec.json"):
        assert (corpus_dir / name).exists()
    spec = json.loads((corpus_dir / "spec.json").read_text())
    assert spec["splits"]["train"] == len(load_corpus(corpus_dir / "train.jsonl"))


def test_synth_data_with_documents(runner, tmp_path):
    result = runner.invoke(
        main,
        ["synth-data", "--docs", "30", "--seed", "5", "--out", str(tmp_path),
         "--with-documents"],
    )
    assert result.exit_code == 0, result.output
    files = sorted((tmp_path / "documents" / "train").glob("*.json"))
    assert files
    parse_document(files[0].read_bytes())


def test_build_vocab(runner, corpus_dir, tmp_path):
    out = tmp_path / "vocab.json"
    result = runner.invoke(
        main, ["build-vocab", "--corpus", str(corpus_dir / "train.jsonl"), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["bins_per_axis"] == 16
    assert len(data["codes"]) == len(data["counts"]) > 0


def test_train_and_reload(runner, corpus_dir, tmp_path):
    out = tmp_path / "tiny.ckpt"
    result = runner.invoke(
        main,
        ["train", "--corpus", str(corpus_dir / "train.jsonl"), "--out", str(out),
         "--epochs", "2", "--d-model", "16", "--heads", "2", "--layers", "1",
         "--format", "json"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert len(payload["history"]) == 2
    checkpoint = load_checkpoint(out)
    assert checkpoint.config.d_model == 16


def test_evaluate_writes_report(runner, checkpoint_path, demo_corpus, tmp_path):
    corpus_path = tmp_path / "test.jsonl"
    save_corpus(demo_corpus.test[:40], corpus_path)
    report_dir = tmp_path / "report"
    result = runner.invoke(
        main,
        ["evaluate", "--model", str(checkpoint_path), "--corpus", str(corpus_path),
         "--report", str(report_dir), "--max-masked", "2", "--format", "json"],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["violations"] == []
    assert payload["accuracy"]["1"] > 0.8
    for name in ("metrics.csv", "per_mask_count.csv", "report.json", "accuracy.png"):
        assert (report_dir / name).exists()


def test_evaluate_text_table(runner, checkpoint_path, demo_corpus, tmp_path):
    corpus_path = tmp_path / "test.jsonl"
    save_corpus(demo_corpus.test[:10], corpus_path)
    result = runner.invoke(
        main,
        ["evaluate", "--model", str(checkpoint_path), "--corpus", str(corpus_path),
         "--max-masked", "1"],
    )
    assert result.exit_code == 0, result.output
    assert "accuracy" in result.output
    assert "hidden=1" in result.output


def test_recommend_json_and_text(runner, checkpoint_path, document_path):
    result = runner.invoke(
        main,
        ["recommend", "--model", str(checkpoint_path), "--document", str(document_path),
         "--slot", "svg:1", "--slot", "text:0", "-n", "3", "--format", "json"],
    )
    assert result.exit_code == 0, result.output
    recs = json.loads(result.output)
    assert [r["slot"] for r in recs] == ["svg:1", "text:0"]
    assert all(len(r["candidates"]) == 3 for r in recs)

    text = runner.invoke(
        main,
        ["recommend", "--model", str(checkpoint_path), "--document", str(document_path),
         "--slot", "svg:1"],
    )
    assert text.exit_code == 0
    assert "#" in text.output


def test_recommend_model_from_environment(runner, checkpoint_path, document_path):
    result = runner.invoke(
        main,
        ["recommend", "--document", str(document_path), "--slot", "svg:1",
         "--format", "json"],
        env={"CHROMAREC_CHECKPOINT": str(checkpoint_path)},
    )
    assert result.exit_code == 0, result.output

    missing = runner.invoke(
        main, ["recommend", "--document", str(document_path), "--slot", "svg:1"]
    )
    assert missing.exit_code != 0


def test_recolor_roundtrip(runner, document_path, tmp_path):
    out = tmp_path / "recolored.json"
    preview = tmp_path / "preview.png"
    result = runner.invoke(
        main,
        ["recolor", "--document", str(document_path), "--slot", "svg:1",
         "--code", "9_5_11", "--out", str(out), "--preview", str(preview)],
    )
    assert result.exit_code == 0, result.output
    doc = parse_document(out.read_bytes())
    palettes = extract_multi_palette(doc)
    assert quantize_lab(palettes.svg.colors[1]).text() == "9_5_11"
    assert preview.read_bytes()[:4] == b"\x89PNG"


def test_serve_dump_openapi(runner, checkpoint_path, tmp_path):
    out = tmp_path / "openapi.json"
    result = runner.invoke(
        main,
        ["serve", "--model", str(checkpoint_path), "--dump-openapi", str(out)],
    )
    assert result.exit_code == 0, result.output
    schema = json.loads(out.read_text())
    assert "/documents/{doc_id}/recommend" in schema["paths"]
