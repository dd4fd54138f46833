"""Umbrella command line: corpus ingestion, embedding, indexing, the HTTP
service, an interactive chat loop, and the evaluation harness."""

from __future__ import annotations

import json
import pathlib
import sys
from datetime import datetime, timezone

import click

from . import corpus as cp
from . import embedding as emb
from . import evalharness as ev
from . import index as ix
from . import vectors as vc
from .datasets import load_labs
from .embedding import EmbeddingProviderConfig
from .providers import LlmProviderConfig, make_provider
from .session import NoAnswer, NotInCorpus, Orchestrator, Stage


@click.group()
def main():
    """Personalized lab-test normal range retrieval."""


@main.command()
@click.option("--from-urls", "url_file", type=click.Path(exists=True),
              help="File with one URL per line; fetches over the network.")
@click.option("--from-fixtures", "fixture_dir", type=click.Path(exists=True),
              help="Directory of saved .html pages; no network.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--rate", default=1.0, show_default=True,
              help="Crawl rate limit, requests per second.")
@click.option("--tag", default=None, help="Corpus source tag.")
def ingest(url_file, fixture_dir, out_path, rate, tag):
    """Parse encyclopedia pages and write a corpus JSONL file."""
    if bool(url_file) == bool(fixture_dir):
        raise click.UsageError("pass exactly one of --from-urls / --from-fixtures")
    pages = []
    failures = []
    if url_file:
        urls = [l.strip() for l in open(url_file, encoding="utf-8") if l.strip()]
        report = cp.crawl(urls, rate_limit=rate)
        pages = report.pages
        failures = report.failures
    else:
        now = datetime.now(timezone.utc).replace(microsecond=0)
        for path in sorted(pathlib.Path(fixture_dir).glob("*.html")):
            pages.append(cp.RawPage(url=f"https://fixtures.local/{path.name}",
                                    html=path.read_text("utf-8"), fetched_at=now))
    docs = []
    for page in pages:
        try:
            doc = cp.parse_page(page)
        except (cp.MalformedHtml, cp.EmptySection) as exc:
            failures.append((page.url, str(exc)))
            continue
        if doc is not None:
            docs.append(doc)
    default_tag = f"snapshot-{datetime.now(timezone.utc):%Y%m%d}"
    corpus = cp.Corpus(documents=tuple(docs), source_tag=tag or default_tag)
    cp.write_corpus(corpus, out_path)
    click.echo(f"wrote {len(corpus)} documents to {out_path}")
    for url, reason in failures:
        click.echo(f"skipped {url}: {reason}", err=True)


def _embed_cfg(provider: str, dim: int | None, endpoint: str) -> EmbeddingProviderConfig:
    kwargs = {"kind": provider}
    if dim:
        kwargs["dim"] = dim
    if provider == "remote":
        kwargs["endpoint_url"] = endpoint
    return EmbeddingProviderConfig(**kwargs)


@main.command("embed")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--provider", type=click.Choice(["local-hash", "remote"]),
              default="local-hash", show_default=True)
@click.option("--dim", type=int, default=None)
@click.option("--endpoint", default="", help="Remote embedding endpoint URL.")
def embed_cmd(corpus_path, out_path, provider, dim, endpoint):
    """Embed every corpus document and write a vector file."""
    corpus = cp.read_corpus(corpus_path)
    cfg = _embed_cfg(provider, dim, endpoint)
    texts = [cp.format_document(d) for d in corpus.documents]
    vecs = emb.embed_batch(texts, cfg)
    vc.save_vectors(out_path, list(zip((d.doc_id for d in corpus.documents), vecs)))
    click.echo(f"wrote {len(vecs)} vectors (dim {cfg.dim}) to {out_path}")


@main.command("index")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--vectors", "vec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def index_cmd(corpus_path, vec_path, out_path):
    """Build the searchable index from a corpus and its vectors."""
    corpus = cp.read_corpus(corpus_path)
    dim, tag, vecs = vc.load_vectors(vec_path)
    entries = []
    for doc in corpus.documents:
        if doc.doc_id not in vecs:
            raise click.ClickException(f"no vector for doc {doc.doc_id} ({doc.lab_name})")
        vec = emb.EmbeddingVector(values=tuple(vecs[doc.doc_id]), dim=dim,
                                  provider_tag=tag)
        entries.append(ix.IndexEntry(doc_id=doc.doc_id, vector=vec,
                                     text=cp.format_document(doc), url=doc.url))
    built = ix.build_index(entries)
    ix.save(built, out_path)
    click.echo(f"wrote index of {len(built)} entries to {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app, load_config

    config = load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port,
                log_level=config.log_level.lower())


def _make_engine(index_path, provider, dataset, transcript, endpoint, model):
    built = ix.load(index_path)
    embed_cfg = EmbeddingProviderConfig(kind="local-hash", dim=built.dim)
    llm_cfg = LlmProviderConfig(kind=provider, transcript_path=transcript or "",
                                endpoint_url=endpoint, model_name=model)
    labs = load_labs(dataset) if provider == "oracle" else None
    return Orchestrator(built, embed_cfg, make_provider(llm_cfg, labs=labs))


@main.command()
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--provider", type=click.Choice(["oracle", "replay", "remote-chat"]),
              default="oracle", show_default=True)
@click.option("--dataset", type=click.Path(exists=True), default=None,
              help="Ground-truth dataset for the oracle provider.")
@click.option("--transcript", type=click.Path(), default=None,
              help="Replay transcript path.")
@click.option("--endpoint", default="", help="Remote chat endpoint URL.")
@click.option("--model", default="gpt-4-turbo", show_default=True)
def chat(index_path, provider, dataset, transcript, endpoint, model):
    """Interactive terminal conversation."""
    engine = _make_engine(index_path, provider, dataset, transcript, endpoint, model)
    click.echo("Ask about a lab test (empty line to quit).")
    while True:
        question = click.prompt("you", default="", show_default=False).strip()
        if not question:
            return
        try:
            session = engine.start_session(question)
            engine.retrieve_factors(session)
        except (NotInCorpus, NoAnswer):
            click.echo("labrag: I could not find that lab test. Try another name.")
            continue
        if session.stage is Stage.AWAITING_FACTORS:
            answers = {}
            for fq in session.pending_questions:
                if fq.allows_free_text:
                    answers[fq.factor] = click.prompt(f"  {fq.factor}")
                else:
                    menu = ", ".join(f"{i}. {c}" for i, c in enumerate(fq.choices, 1))
                    pick = click.prompt(f"  {fq.factor} ({menu})", type=int)
                    answers[fq.factor] = fq.choices[pick - 1]
            try:
                engine.submit_answers(session, answers)
            except NoAnswer:
                pass
        if session.stage is Stage.ANSWERED:
            click.echo(f"labrag: {session.answer.text}")
            click.echo(f"        source: {session.answer.source_url}")
        else:
            click.echo(f"labrag: sorry, no answer ({session.failure_reason}).")


def _report_out(report, out_path):
    report.write(out_path)
    click.echo(f"precision={report.precision:.3f} recall={report.recall:.3f} "
               f"f1={report.f1:.3f} qla={report.qla:.3f} lla={report.lla:.3f}"
               + (" [incomplete]" if report.incomplete else ""))
    click.echo(f"report written to {out_path}")


@main.command("eval-factors")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--provider", default="oracle", show_default=True,
              type=click.Choice(["oracle", "replay", "remote-chat"]))
@click.option("--transcript", type=click.Path(), default=None)
@click.option("--endpoint", default="")
@click.option("--model", default="gpt-4-turbo", show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_factors(index_path, dataset, provider, transcript, endpoint, model, report_path):
    """Score factor retrieval over the ground-truth labs."""
    engine = _make_engine(index_path, provider, dataset, transcript, endpoint, model)
    labs = load_labs(dataset)
    _report_out(ev.run_factor_eval(engine, labs), report_path)


@main.command("eval-ranges")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--provider", default="oracle", show_default=True,
              type=click.Choice(["oracle", "replay", "remote-chat"]))
@click.option("--transcript", type=click.Path(), default=None)
@click.option("--endpoint", default="")
@click.option("--model", default="gpt-4-turbo", show_default=True)
@click.option("--mode", type=click.Choice(["exact", "any-reference"]),
              default="exact", show_default=True)
@click.option("--references", "ref_path", type=click.Path(exists=True), default=None,
              help="JSONL of {lab_name, references[]} for any-reference mode.")
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_ranges(index_path, dataset, provider, transcript, endpoint, model,
                mode, ref_path, report_path):
    """Score normal-range retrieval over the ground-truth questions."""
    engine = _make_engine(index_path, provider, dataset, transcript, endpoint, model)
    labs = load_labs(dataset)
    references = None
    if ref_path:
        references = {}
        for line in open(ref_path, encoding="utf-8"):
            if line.strip():
                rec = json.loads(line)
                references[rec["lab_name"]] = rec["references"]
    _report_out(ev.run_range_eval(engine, labs, mode=mode, references=references),
                report_path)


if __name__ == "__main__":
    sys.exit(main())
