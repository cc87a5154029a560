"""Command-line driver: verify documents, score reports, serve the API."""

from __future__ import annotations

import json
import pathlib
import sys

import click

from .dataset import (
    ForeignKey,
    load_csv,
    load_schema_sidecar,
    parse_data_dictionary,
)
from .errors import ClaimCheckError, InputError
from .fragments import SynonymProvider
from .lexicon import load_synonyms_tsv, load_wordlist
from .queries import parse_canonical_sql
from .runner import VerifyConfig, load_dataset, verify
from .textdoc import DistanceProvider, ingest_document, load_parse_sidecar
from .verdicts import Report, emit_markup, load_ground_truth, precision_recall_f1

ROUNDING_MODES = {"any": "any_sig_digits", "claim": "claim_precision"}


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Check numerical claims in a text document against CSV data."""


def _load_bundle(data_paths, schema_path, dict_path, wordlist_path, synonyms_path):
    tables = []
    fks: list[ForeignKey] = []
    by_stem = {}
    for path in data_paths:
        p = pathlib.Path(path)
        table = load_csv(p.read_bytes(), p.stem)
        tables.append(table)
        by_stem[p.stem] = table
    if schema_path:
        paths, fks = load_schema_sidecar(pathlib.Path(schema_path).read_bytes())
        for extra in paths:
            p = pathlib.Path(schema_path).parent / extra
            if p.stem not in by_stem:
                table = load_csv(p.read_bytes(), p.stem)
                tables.append(table)
                by_stem[p.stem] = table
    synonyms = SynonymProvider(
        load_synonyms_tsv(pathlib.Path(synonyms_path).read_text())
        if synonyms_path else None
    )
    wordlist = (load_wordlist(pathlib.Path(wordlist_path).read_text())
                if wordlist_path else set())

    from .dataset import build_schema
    schema = build_schema(tables, fks)
    dictionary = None
    if dict_path:
        dictionary = parse_data_dictionary(pathlib.Path(dict_path).read_bytes(), schema)
    return load_dataset(tables, fks, dictionary, synonyms, wordlist)


def _config_from_flags(p_t, hits, m_preds, budget, rounding, rule, timings=False):
    return VerifyConfig(
        p_true=p_t,
        hits_k=hits,
        m_preds=m_preds,
        budget=budget,
        rounding_mode=ROUNDING_MODES[rounding],
        decision_rule=rule,
        include_timings=timings,
    )


data_option = click.option("--data", "data_paths", multiple=True, required=True,
                           type=click.Path(exists=True, dir_okay=False),
                           help="CSV table file (repeatable).")
schema_option = click.option("--schema", "schema_path", default=None,
                             type=click.Path(exists=True, dir_okay=False),
                             help="Schema sidecar JSON with foreign keys.")
dict_option = click.option("--dict", "dict_path", default=None,
                           type=click.Path(exists=True, dir_okay=False),
                           help="Data dictionary TSV (table.column<TAB>description).")
doc_option = click.option("--doc", "doc_path", required=True,
                          type=click.Path(exists=True, dir_okay=False),
                          help="Document to verify (HTML or structured text).")
parses_option = click.option("--parses", "parses_path", default=None,
                             type=click.Path(exists=True, dir_okay=False),
                             help="Dependency-parse sidecar JSON.")
wordlist_option = click.option("--wordlist", "wordlist_path", default=None,
                               type=click.Path(exists=True, dir_okay=False),
                               help="Wordlist for column-name decomposition.")
synonyms_option = click.option("--synonyms", "synonyms_path", default=None,
                               type=click.Path(exists=True, dir_okay=False),
                               help="Synonym lexicon TSV (term<TAB>synonym).")


@main.command(name="verify")
@data_option
@schema_option
@dict_option
@doc_option
@parses_option
@wordlist_option
@synonyms_option
@click.option("--p-t", default=0.999, show_default=True,
              help="Assumed prior probability that a claim is true.")
@click.option("--hits", default=20, show_default=True,
              help="Fragments retrieved per category per claim.")
@click.option("--m-preds", default=3, show_default=True,
              help="Maximum predicates per candidate query.")
@click.option("--budget", default=10_000_000, show_default=True,
              help="Evaluation budget in row passes.")
@click.option("--rounding", type=click.Choice(["any", "claim"]), default="any",
              show_default=True, help="Rounding-match rule.")
@click.option("--rule", type=click.Choice(["top1", "any"]), default="top1",
              show_default=True, help="Verification decision rule.")
@click.option("--trace", "trace_path", default=None, type=click.Path(dir_okay=False),
              help="Write the EM iteration trace to this JSON file.")
@click.option("--html", "html_path", default=None, type=click.Path(dir_okay=False),
              help="Write the annotated document HTML to this file.")
@click.option("--dump-cubes", "cubes_path", default=None,
              type=click.Path(dir_okay=False),
              help="Write every cached cube entry to this CSV (diagnostics).")
@click.option("--timings", is_flag=True, default=False,
              help="Record wall-clock time in the report (non-deterministic).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Report output path.")
def verify_cmd(data_paths, schema_path, dict_path, doc_path, parses_path,
               wordlist_path, synonyms_path, p_t, hits, m_preds, budget,
               rounding, rule, trace_path, html_path, cubes_path, timings,
               out_path):
    """Verify a document against a dataset and write a report."""
    try:
        bundle = _load_bundle(data_paths, schema_path, dict_path,
                              wordlist_path, synonyms_path)
        doc = ingest_document(pathlib.Path(doc_path).read_bytes())
        dist = (load_parse_sidecar(pathlib.Path(parses_path).read_bytes())
                if parses_path else DistanceProvider())
        config = _config_from_flags(p_t, hits, m_preds, budget, rounding, rule,
                                    timings)
        artifacts = verify(bundle, doc, dist, config,
                           dataset_id=";".join(sorted(
                               pathlib.Path(p).stem for p in data_paths)),
                           document_id=pathlib.Path(doc_path).stem)
    except InputError as exc:
        _fail(str(exc), 2)
    except ClaimCheckError as exc:
        _fail(str(exc), 3)
    pathlib.Path(out_path).write_text(artifacts.report.to_json())
    if trace_path:
        pathlib.Path(trace_path).write_text(
            json.dumps(artifacts.report.priors_trace, indent=2, sort_keys=True) + "\n")
    if html_path:
        pathlib.Path(html_path).write_text(
            emit_markup(artifacts.document, artifacts.verdicts))
    if cubes_path and artifacts.cube_cache is not None:
        from .cube import dump_cube_csv

        pathlib.Path(cubes_path).write_text(dump_cube_csv(artifacts.cube_cache))
    counts = {"verified": 0, "flagged": 0, "nocandidate": 0}
    for v in artifacts.verdicts:
        counts[v.status] += 1
    click.echo(json.dumps({"claims": len(artifacts.verdicts), **counts}))


@main.command()
@click.option("--report", "report_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@data_option
@schema_option
@click.option("--k", "k_values", default="1,5,10", show_default=True,
              help="Comma-separated coverage depths.")
@click.option("--flag-nocandidate", is_flag=True, default=False,
              help="Treat claims without candidates as flagged.")
def metrics(report_path, truth_path, data_paths, schema_path, k_values,
            flag_nocandidate):
    """Score a report against ground truth; prints coverage and P/R/F1."""
    try:
        bundle = _load_bundle(data_paths, schema_path, None, None, None)
        report = Report.from_json(pathlib.Path(report_path).read_text())
        truth = load_ground_truth(pathlib.Path(truth_path).read_text(),
                                  bundle.schema, parse_canonical_sql)
        ks = [int(k.strip()) for k in k_values.split(",") if k.strip()]
        verdicts = _rebind_candidates(report, bundle.schema)
        result = precision_recall_f1(verdicts, truth, ks,
                                     flag_nocandidate=flag_nocandidate)
    except InputError as exc:
        _fail(str(exc), 2)
    except ClaimCheckError as exc:
        _fail(str(exc), 3)
    click.echo(json.dumps(result.to_dict(), indent=2, sort_keys=True))


def _rebind_candidates(report: Report, schema):
    """Reparse the report's SQL strings so coverage can canonically compare
    candidates with the ground truth."""
    for verdict in report.verdicts:
        for entry in verdict.top_k:
            try:
                entry.candidate = parse_canonical_sql(entry.sql, schema)
            except ClaimCheckError:
                entry.candidate = None
    return report.verdicts


@main.command()
@click.option("--listen", default="127.0.0.1:8000", show_default=True,
              help="host:port to bind.")
@click.option("--data-dir", "data_dir", required=True,
              type=click.Path(file_okay=False),
              help="Directory for uploaded datasets, documents and runs.")
def serve(listen, data_dir):
    """Run the HTTP verification service."""
    import uvicorn

    from .service import create_app

    host, _, port = listen.partition(":")
    app = create_app(pathlib.Path(data_dir))
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000),
                log_level="warning")


@main.group()
def inspect():
    """Inspect pipeline internals."""


@inspect.command()
@data_option
@schema_option
@dict_option
@doc_option
@parses_option
@wordlist_option
@synonyms_option
@click.option("--claim", "claim_id", required=True, type=int,
              help="Claim index (detection order).")
@click.option("--hits", default=20, show_default=True)
def fragments(data_paths, schema_path, dict_path, doc_path, parses_path,
              wordlist_path, synonyms_path, claim_id, hits):
    """Print one claim's scoped fragments and relevance scores."""
    try:
        bundle = _load_bundle(data_paths, schema_path, dict_path,
                              wordlist_path, synonyms_path)
        doc = ingest_document(pathlib.Path(doc_path).read_bytes())
        dist = (load_parse_sidecar(pathlib.Path(parses_path).read_bytes())
                if parses_path else DistanceProvider())
        config = VerifyConfig(hits_k=hits, max_iterations=1)
        artifacts = verify(bundle, doc, dist, config)
    except InputError as exc:
        _fail(str(exc), 2)
    except ClaimCheckError as exc:
        _fail(str(exc), 3)
    if claim_id not in artifacts.claim_scopes:
        _fail(f"no claim {claim_id}; document has claims "
              f"{sorted(artifacts.claim_scopes)}", 2)
    scope = artifacts.claim_scopes[claim_id]
    out = {
        "claim": claim_id,
        "surface": artifacts.claims[claim_id].surface(artifacts.document),
        "relevance": {
            category: {
                _fragment_label(frag): score
                for frag, score in sorted(scope.relevance.category(category).items(),
                                          key=lambda kv: -kv[1])
            }
            for category in ("function", "target", "predicate")
        },
        "marginals": artifacts.marginals.get(claim_id, {}),
    }
    click.echo(json.dumps(out, indent=2, sort_keys=True))


def _fragment_label(frag) -> str:
    from .queries import AggColumnFragment, FunctionFragment, PredicateFragment

    if isinstance(frag, FunctionFragment):
        return frag.func.value
    if isinstance(frag, AggColumnFragment):
        return "*" if frag.is_star else f"{frag.table}.{frag.column}"
    if isinstance(frag, PredicateFragment):
        return f"{frag.table}.{frag.column}={frag.literal}"
    return str(frag)


if __name__ == "__main__":
    main()
