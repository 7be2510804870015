"""Unified command line: ingest, serve, query, eval, replay."""

from __future__ import annotations

import json

import click

from .errors import GroundedQAError


class _ErrorHandlingGroup(click.Group):
    """Convert package errors into clean CLI error messages."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except GroundedQAError as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_ErrorHandlingGroup)
def main() -> None:
    """Hybrid retrieval QA with citation grounding and a SQL planner."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path())
@click.option("--window", default=1000, show_default=True)
@click.option("--overlap", default=150, show_default=True)
@click.option("--tokenizer", default="simple", show_default=True)
def ingest(input_path: str, store_path: str, window: int, overlap: int, tokenizer: str) -> None:
    """Chunk a JSONL corpus into an overlapping-window chunk store."""
    from .ingest import ChunkPolicy, ingest_corpus

    policy = ChunkPolicy(window_tokens=window, overlap_tokens=overlap, tokenizer_id=tokenizer)
    stats = ingest_corpus(input_path, policy, store_path)
    click.echo(json.dumps(stats.to_dict()))


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--port", default=None, type=int)
@click.option("--host", default=None)
def serve(config_path: str | None, port: int | None, host: str | None) -> None:
    """Run the HTTP service with SSE query streaming."""
    import uvicorn

    from .service import AppContext, create_app, load_config

    config = load_config(config_path)
    ctx = AppContext(config)
    app = create_app(ctx)
    uvicorn.run(app, host=host or config.service.host, port=port or config.service.port)


@main.command()
@click.option("--question", required=True)
@click.option("--mode", default="standard", type=click.Choice(["standard", "strict"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--store", "store_path", default=None, type=click.Path(exists=True),
              help="Chunk store to build the retrieval index from.")
@click.option("--datasource", default=None,
              help="Datasource for SQL questions, e.g. fixture:logistics.")
@click.option("--session", "session_id", default="cli")
def query(question, mode, config_path, store_path, datasource, session_id) -> None:
    """Answer one question end to end and print the assembled result."""
    from .ingest import ChunkStore
    from .retrieval import build_indexes
    from .service import AppContext, load_config

    ctx = AppContext(load_config(config_path), data_dir=None)
    if store_path:
        store = ChunkStore.load(store_path)
        ctx.index = build_indexes(store, ctx.providers.embedder, ctx.config.retrieval)
    ds_name = None
    if datasource:
        ds_name = "cli-datasource"
        ctx.register_datasource(ds_name, datasource)

    done_payload = None
    for event in ctx.event_stream(session_id, question, mode, ds_name):
        if event.event == "done":
            done_payload = event.data
        elif event.event == "error":
            raise click.ClickException(str(event.data.get("message")))
    if done_payload is None:
        raise click.ClickException("stream ended without a final answer")
    click.echo(done_payload["text"])
    for ref in done_payload.get("references", []):
        click.echo(f"  [{ref['n']}] {ref['source_uri'] or ref['doc_id']} "
                   f"(chars {ref['start_char']}-{ref['end_char']})")
    if done_payload.get("table"):
        click.echo(json.dumps(done_payload["table"]))
    if done_payload.get("narrative"):
        click.echo(done_payload["narrative"])


@main.command("eval")
@click.option("--run", "run_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--ks", default="1,2,4,8,16,50", show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def eval_command(run_path, gold_path, store_path, ks, out_path) -> None:
    """Score a retrieval run against gold annotations."""
    from .evalkit import RetrievalRun, ablation_report, load_gold
    from .ingest import ChunkStore

    k_values = [int(k) for k in ks.split(",") if k.strip()]
    report = ablation_report(
        {"run": RetrievalRun.load(run_path)},
        load_gold(gold_path),
        ChunkStore.load(store_path),
        k_values,
    )
    click.echo(report["text"])
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report["json"], fh, indent=2)


@main.command()
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
def replay(state_path: str) -> None:
    """Rebuild the final answer from a persisted pipeline-state snapshot."""
    from .orchestrator import replay_final_answer

    answer = replay_final_answer(state_path)
    click.echo(json.dumps(answer.to_dict(), ensure_ascii=False, indent=2))


if __name__ == "__main__":
    main()
