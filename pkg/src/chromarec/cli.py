"""Command line entry points.

Everything the library does is reachable here: corpus generation, vocab
inspection, training, evaluation with file reports, one-off suggestions,
recoloring, and the HTTP server.  Commands accept --format json when the
output feeds another tool.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .color import ColorCode, build_vocabulary
from .document import parse_document, render_preview, serialize_document
from .evaluation import evaluate
from .model import (
    ModelConfig,
    TrainSettings,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    train,
)
from .recolor import apply_color
from .recommend import recommend
from .report import write_report
from .sequence import load_corpus, save_corpus
from .synth import synth_corpus

FORMAT = click.option(
    "--format", "fmt", type=click.Choice(["text", "json"]), default="text",
    show_default=True, help="output style"
)
MODEL = click.option(
    "--model", "model_path", envvar="CHROMAREC_CHECKPOINT", required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="trained checkpoint (or set CHROMAREC_CHECKPOINT)",
)


@click.group()
@click.version_option(package_name="chromarec")
def main():
    """Color recommendations for layered graphic documents."""


@main.command("synth-data")
@click.option("--docs", default=560, show_default=True, help="documents to generate")
@click.option("--seed", default=11, show_default=True, help="rule seed for the themes")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--with-documents", is_flag=True, help="also write each document as JSON")
def synth_data(docs, seed, out, with_documents):
    """Generate a themed corpus split into train/val/test."""
    corpus = synth_corpus(docs, rule_seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    for split in ("train", "val", "test"):
        save_corpus(getattr(corpus, split), out / f"{split}.jsonl")
    (out / "spec.json").write_text(json.dumps(corpus.spec, indent=2) + "\n")
    if with_documents:
        for split in ("train", "val", "test"):
            split_dir = out / "documents" / split
            split_dir.mkdir(parents=True, exist_ok=True)
            for i, doc in enumerate(getattr(corpus, f"{split}_docs")):
                path = split_dir / f"{i:05d}.json"
                path.write_text(json.dumps(serialize_document(doc)) + "\n")
    counts = corpus.spec["splits"]
    click.echo(f"wrote {counts['train']}/{counts['val']}/{counts['test']} sequences to {out}")


@main.command("build-vocab")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True)
def build_vocab(corpus_path, out):
    """Collect the color codes of a corpus into a vocabulary file."""
    sequences = load_corpus(corpus_path)
    vocab = build_vocabulary(sequences)
    out.write_text(vocab.to_json() + "\n")
    click.echo(f"{len(vocab.codes)} codes ({vocab.size} ids) -> {out}")


@main.command("train")
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="training sequences (jsonl)")
@click.option("--val", "val_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="validation sequences; defaults to a held-out tenth")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--epochs", default=30, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--restarts", default=1, show_default=True,
              help="independent runs; the best validation loss wins")
@click.option("--d-model", default=64, show_default=True)
@click.option("--layers", default=2, show_default=True)
@click.option("--heads", default=4, show_default=True)
@click.option("--no-segments", is_flag=True, help="drop palette identity embeddings")
@click.option("--positions", is_flag=True, help="add within-palette position embeddings")
@FORMAT
def train_command(corpus_path, val_path, out, epochs, batch_size, learning_rate,
                  seed, restarts, d_model, layers, heads, no_segments, positions, fmt):
    """Train a masked color model and save the checkpoint."""
    sequences = load_corpus(corpus_path)
    val_sequences = load_corpus(val_path) if val_path else None
    config = ModelConfig(
        d_model=d_model, n_layers=layers, n_heads=heads,
        use_segment_embeddings=not no_segments,
        use_position_embeddings=positions,
    )
    settings = TrainSettings(
        learning_rate=learning_rate, batch_size=batch_size,
        epochs=epochs, seed=seed, restarts=restarts,
    )
    checkpoint, history = train(sequences, config, settings, val_sequences=val_sequences)
    save_checkpoint(checkpoint, out)
    if fmt == "json":
        click.echo(json.dumps({"checkpoint": str(out), "history": history}))
        return
    for record in history:
        line = f"epoch {record['epoch']:3d}  train {record['train_loss']:.4f}"
        if "val_loss" in record:
            line += f"  val {record['val_loss']:.4f}"
        click.echo(line)
    click.echo(f"saved {out}")


@main.command("evaluate")
@MODEL
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="evaluation sequences (jsonl)")
@click.option("--report", "report_dir", type=click.Path(file_okay=False, path_type=Path),
              help="write CSVs, JSON, and figures here")
@click.option("--repeats", default=1, show_default=True)
@click.option("--max-masked", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@FORMAT
def evaluate_command(model_path, corpus_path, report_dir, repeats, max_masked, seed, fmt):
    """Score a checkpoint over a corpus; optionally write a report."""
    checkpoint = load_checkpoint(model_path)
    sequences = load_corpus(corpus_path, bins=checkpoint.vocab.config.bins_per_axis)
    report = evaluate(
        lambda masked, n: predict_batch(checkpoint, masked, n),
        sequences, max_masked=max_masked, repeats=repeats, seed=seed,
    )
    if report_dir is not None:
        created = write_report(report_dir, report)
    else:
        created = []
    violations = report.monotonicity_violations()
    if fmt == "json":
        payload = report.to_dict()
        payload["violations"] = violations
        payload["files"] = [str(p) for p in created]
        click.echo(json.dumps(payload))
    else:
        click.echo(f"{report.n_sequences} sequences, {report.n_events} events"
                   + (f", {report.skipped} skipped" if report.skipped else ""))
        click.echo("N        " + "".join(f"{n:>8d}" for n in report.levels))
        click.echo("accuracy " + "".join(f"{report.accuracy[n]:8.3f}" for n in report.levels))
        click.echo("distance " + "".join(f"{report.similarity[n]:8.2f}" for n in report.levels))
        for m, row in sorted(report.per_mask_count.items()):
            click.echo(f"hidden={m}  top1 {row['accuracy'][1]:.3f}  over {row['events']} events")
        for path in created:
            click.echo(f"wrote {path}")
        for v in violations:
            click.echo(f"warning: {v}", err=True)
    if violations:
        sys.exit(1)


@main.command("recommend")
@MODEL
@click.option("--document", "doc_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--slot", "slots", multiple=True, required=True,
              help="palette slot like svg:1; repeat for several")
@click.option("-n", "--top", default=5, show_default=True)
@click.option("--mode", type=click.Choice(["simultaneous", "iterative"]),
              default="simultaneous", show_default=True)
@click.option("--exclude", multiple=True, help="codes to leave out")
@click.option("--frequency-penalty", default=0.0, show_default=True)
@FORMAT
def recommend_command(model_path, doc_path, slots, top, mode, exclude,
                      frequency_penalty, fmt):
    """Suggest colors for palette slots of a document."""
    checkpoint = load_checkpoint(model_path)
    doc = parse_document(doc_path.read_bytes(), base_dir=doc_path.parent)
    recs = recommend(checkpoint, doc, list(slots), n=top, mode=mode,
                     exclude=list(exclude), frequency_penalty=frequency_penalty)
    if fmt == "json":
        click.echo(json.dumps([r.to_dict() for r in recs]))
        return
    for rec in recs:
        click.echo(f"{rec.slot.text()} (now {rec.current.text()})")
        for cand in rec.candidates:
            click.echo(
                f"  {cand.rank}. {cand.code.text():<10s} {cand.rgb.to_hex()}"
                f"  {cand.probability:.4f}"
            )


@main.command("recolor")
@click.option("--document", "doc_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--slot", required=True, help="palette slot like svg:1")
@click.option("--code", required=True, help="target color code like 9_5_11")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--preview", type=click.Path(dir_okay=False, path_type=Path),
              help="also render the result to a PNG")
def recolor_command(doc_path, slot, code, out, preview):
    """Apply a code to a palette slot and write the updated document."""
    doc = parse_document(doc_path.read_bytes(), base_dir=doc_path.parent)
    updated = apply_color(doc, slot, ColorCode.parse(code))
    out.write_text(json.dumps(serialize_document(updated)) + "\n")
    if preview is not None:
        preview.write_bytes(render_preview(updated).to_png())
        click.echo(f"wrote {out} and {preview}")
    else:
        click.echo(f"wrote {out}")


@main.command("serve")
@MODEL
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, show_default=True)
@click.option("--frontend", type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="static files to serve at /")
@click.option("--ttl", default=3600.0, show_default=True,
              help="seconds a document survives without being touched")
@click.option("--dump-openapi", type=click.Path(dir_okay=False, path_type=Path),
              help="write the schema and exit without serving")
def serve_command(model_path, host, port, frontend, ttl, dump_openapi):
    """Serve the HTTP interface (and optionally the browser UI)."""
    from .service import create_app

    checkpoint = load_checkpoint(model_path)
    app = create_app(checkpoint, frontend_dir=frontend, ttl_seconds=ttl)
    if dump_openapi is not None:
        dump_openapi.write_text(json.dumps(app.openapi(), indent=2) + "\n")
        click.echo(f"wrote {dump_openapi}")
        return
    import uvicorn

    uvicorn.run(app, host=host, port=port)
