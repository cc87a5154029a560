"""HTTP service: dataset/document upload, verification runs, feedback.

Uploads are content-addressed on disk; runs execute on a worker thread
(one active run per dataset+document pair, later requests queue on the
pair's lock) and persist an immutable report. Feedback never mutates an
existing run: it pins or removes a claim and launches a successor run
that inherits all pins.
"""

from __future__ import annotations

import hashlib
import json
import pathlib
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import JSONResponse

from .dataset import build_schema, load_csv, load_schema_sidecar, parse_data_dictionary
from .errors import ClaimCheckError, InputError
from .fragments import SynonymProvider
from .lexicon import load_synonyms_tsv, load_wordlist
from .queries import (
    AggColumnFragment,
    AggFunction,
    PredicateFragment,
    QueryCandidate,
    STAR,
)
from .runner import VerifyConfig, load_dataset, verify
from .textdoc import DistanceProvider, ingest_document, load_parse_sidecar
from .verdicts import emit_markup

CONFIG_FIELDS = {
    "p_true": float,
    "hits_k": int,
    "m_preds": int,
    "budget": int,
    "rounding_mode": str,
    "decision_rule": str,
    "max_iterations": int,
    "tolerance": float,
}


@dataclass
class RunState:
    run_id: str
    dataset_id: str
    document_id: str
    status: str = "pending"  # pending | running | done | failed
    error: str | None = None
    config: dict = field(default_factory=dict)
    pins: dict = field(default_factory=dict)  # claim_id -> candidate descriptor
    removed: list = field(default_factory=list)
    artifacts: object = None
    progress: dict = field(default_factory=dict)


class ServiceState:
    def __init__(self, data_dir: pathlib.Path):
        self.data_dir = data_dir
        self.runs: dict[str, RunState] = {}
        self.lock = threading.Lock()
        self.pair_locks: dict[tuple[str, str], threading.Lock] = {}

    def pair_lock(self, dataset_id: str, document_id: str) -> threading.Lock:
        with self.lock:
            key = (dataset_id, document_id)
            if key not in self.pair_locks:
                self.pair_locks[key] = threading.Lock()
            return self.pair_locks[key]


def _sha(parts: list[bytes]) -> str:
    digest = hashlib.sha256()
    for part in parts:
        digest.update(hashlib.sha256(part).digest())
    return digest.hexdigest()[:16]


def _candidate_descriptor(candidate: QueryCandidate) -> dict:
    return {
        "function": candidate.func.value,
        "target": ("*" if candidate.target.is_star
                   else f"{candidate.target.table}.{candidate.target.column}"),
        "predicates": [
            {"table": p.table, "column": p.column, "literal": p.literal}
            for p in candidate.predicates
        ],
    }


def _candidate_from_descriptor(desc: dict, schema) -> QueryCandidate:
    try:
        func = AggFunction(desc["function"])
    except ValueError:
        raise InputError(f"unknown function {desc.get('function')!r}")
    target_text = desc.get("target", "*")
    if target_text in ("*", "", None):
        target = STAR
    else:
        tname, _, cname = target_text.partition(".")
        table = schema.table(tname)
        target = AggColumnFragment(table=table.name, column=table.column(cname).name)
    predicates = []
    for p in desc.get("predicates", []):
        table = schema.table(p["table"])
        column = table.column(p["column"])
        literal = p["literal"]
        if column.is_numeric and isinstance(literal, str):
            try:
                literal = float(literal)
            except ValueError:
                raise InputError(f"literal {literal!r} is not numeric")
        if literal not in column.values:
            raise InputError(
                f"literal {literal!r} does not occur in {p['table']}.{p['column']}")
        predicates.append(PredicateFragment(table=table.name, column=column.name,
                                            literal=literal))
    cols = [p.column_key for p in predicates]
    if len(set(cols)) != len(cols):
        raise InputError("at most one predicate per column")
    if func is AggFunction.CONDITIONAL_PROBABILITY and not predicates:
        raise InputError("conditional probability needs at least one predicate")
    return QueryCandidate(func=func, target=target, predicates=tuple(predicates))


def create_app(data_dir: pathlib.Path,
               frontend_dir: pathlib.Path | None = None) -> FastAPI:
    data_dir = pathlib.Path(data_dir)
    (data_dir / "datasets").mkdir(parents=True, exist_ok=True)
    (data_dir / "documents").mkdir(parents=True, exist_ok=True)
    (data_dir / "runs").mkdir(parents=True, exist_ok=True)
    state = ServiceState(data_dir)
    app = FastAPI(title="claimcheck")

    if frontend_dir is None:
        frontend_dir = pathlib.Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if frontend_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True),
                  name="ui")

    def _dataset_dir(dataset_id: str) -> pathlib.Path:
        path = data_dir / "datasets" / dataset_id
        if not path.exists():
            raise HTTPException(status_code=404, detail="unknown dataset_id")
        return path

    def _document_dir(document_id: str) -> pathlib.Path:
        path = data_dir / "documents" / document_id
        if not path.exists():
            raise HTTPException(status_code=404, detail="unknown document_id")
        return path

    def _load_bundle(dataset_id: str):
        base = _dataset_dir(dataset_id)
        manifest = json.loads((base / "manifest.json").read_text())
        tables = []
        for name in manifest["tables"]:
            tables.append(load_csv((base / f"{name}.csv").read_bytes(), name))
        fks = []
        if manifest.get("schema_sidecar"):
            _, fks = load_schema_sidecar((base / "schema.json").read_bytes())
        synonyms = SynonymProvider(
            load_synonyms_tsv((base / "synonyms.tsv").read_text())
            if manifest.get("synonyms") else None)
        wordlist = (load_wordlist((base / "wordlist.txt").read_text())
                    if manifest.get("wordlist") else set())
        schema = build_schema(tables, fks)
        dictionary = None
        if manifest.get("dictionary"):
            dictionary = parse_data_dictionary((base / "dictionary.tsv").read_bytes(),
                                               schema)
        return load_dataset(tables, fks, dictionary, synonyms, wordlist)

    def _load_document(document_id: str):
        base = _document_dir(document_id)
        doc = ingest_document((base / "document.txt").read_bytes())
        parse_path = base / "parses.json"
        dist = (load_parse_sidecar(parse_path.read_bytes())
                if parse_path.exists() else DistanceProvider())
        return doc, dist

    def _execute(run: RunState):
        pair = state.pair_lock(run.dataset_id, run.document_id)
        with pair:
            run.status = "running"
            try:
                bundle = _load_bundle(run.dataset_id)
                doc, dist = _load_document(run.document_id)
                config = VerifyConfig(**run.config) if run.config else VerifyConfig()
                pins = {
                    int(cid): _candidate_from_descriptor(desc, bundle.schema)
                    for cid, desc in run.pins.items()
                }
                def on_progress(counters: dict) -> None:
                    run.progress = counters

                artifacts = verify(
                    bundle, doc, dist, config,
                    pins=pins,
                    removed_claims=set(run.removed),
                    dataset_id=run.dataset_id,
                    document_id=run.document_id,
                    progress=on_progress,
                )
                run.artifacts = artifacts
                run_dir = data_dir / "runs" / run.run_id
                run_dir.mkdir(parents=True, exist_ok=True)
                (run_dir / "report.json").write_text(artifacts.report.to_json())
                (run_dir / "meta.json").write_text(json.dumps({
                    "dataset_id": run.dataset_id,
                    "document_id": run.document_id,
                    "config": run.config,
                    "pins": run.pins,
                    "removed": run.removed,
                }, indent=2, sort_keys=True))
                run.status = "done"
            except ClaimCheckError as exc:
                run.status = "failed"
                run.error = str(exc)
            except Exception as exc:  # pragma: no cover - defensive
                run.status = "failed"
                run.error = f"internal error: {exc}"

    def _start_run(dataset_id: str, document_id: str, config: dict,
                   pins: dict, removed: list) -> str:
        run_id = uuid.uuid4().hex[:12]
        run = RunState(run_id=run_id, dataset_id=dataset_id,
                       document_id=document_id, config=config,
                       pins=pins, removed=removed)
        with state.lock:
            state.runs[run_id] = run
        thread = threading.Thread(target=_execute, args=(run,), daemon=True)
        thread.start()
        return run_id

    def _get_run(run_id: str) -> RunState:
        run = state.runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail="unknown run_id")
        return run

    def _require_done(run: RunState) -> RunState:
        if run.status != "done":
            raise HTTPException(status_code=409,
                                detail=f"run is {run.status}, not done")
        return run

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.post("/datasets")
    async def upload_dataset(
        files: list[UploadFile] = File(...),
        schema_sidecar: UploadFile | None = File(default=None, alias="schema"),
        dictionary: UploadFile | None = File(default=None),
        synonyms: UploadFile | None = File(default=None),
        wordlist: UploadFile | None = File(default=None),
    ):
        try:
            blobs = []
            tables = []
            for f in files:
                content = await f.read()
                name = pathlib.Path(f.filename or "table.csv").stem
                tables.append((name, content))
                blobs.append(content)
            extras = {}
            for label, upload in (("schema", schema_sidecar),
                                  ("dictionary", dictionary),
                                  ("synonyms", synonyms), ("wordlist", wordlist)):
                if upload is not None:
                    content = await upload.read()
                    extras[label] = content
                    blobs.append(content)
            dataset_id = _sha(blobs)

            loaded = [load_csv(content, name) for name, content in tables]
            fks = []
            if "schema" in extras:
                _, fks = load_schema_sidecar(extras["schema"])
            built = build_schema(loaded, fks)
            if "dictionary" in extras:
                parse_data_dictionary(extras["dictionary"], built)

            base = data_dir / "datasets" / dataset_id
            base.mkdir(parents=True, exist_ok=True)
            for name, content in tables:
                (base / f"{name}.csv").write_bytes(content)
            if "schema" in extras:
                (base / "schema.json").write_bytes(extras["schema"])
            if "dictionary" in extras:
                (base / "dictionary.tsv").write_bytes(extras["dictionary"])
            if "synonyms" in extras:
                (base / "synonyms.tsv").write_bytes(extras["synonyms"])
            if "wordlist" in extras:
                (base / "wordlist.txt").write_bytes(extras["wordlist"])
            (base / "manifest.json").write_text(json.dumps({
                "tables": [name for name, _ in tables],
                "schema_sidecar": "schema" in extras,
                "dictionary": "dictionary" in extras,
                "synonyms": "synonyms" in extras,
                "wordlist": "wordlist" in extras,
            }, indent=2, sort_keys=True))
            return {"dataset_id": dataset_id}
        except InputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/documents")
    async def upload_document(
        document: UploadFile = File(...),
        parses: UploadFile | None = File(default=None),
    ):
        try:
            content = await document.read()
            blobs = [content]
            parse_content = None
            if parses is not None:
                parse_content = await parses.read()
                blobs.append(parse_content)
            document_id = _sha(blobs)
            ingest_document(content)  # validate before persisting
            base = data_dir / "documents" / document_id
            base.mkdir(parents=True, exist_ok=True)
            (base / "document.txt").write_bytes(content)
            if parse_content is not None:
                (base / "parses.json").write_bytes(parse_content)
            return {"document_id": document_id}
        except InputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/runs")
    def create_run(body: dict):
        dataset_id = body.get("dataset_id")
        document_id = body.get("document_id")
        if not dataset_id or not document_id:
            raise HTTPException(status_code=422,
                                detail="dataset_id and document_id required")
        _dataset_dir(dataset_id)
        _document_dir(document_id)
        config = {}
        for key, value in (body.get("config") or {}).items():
            if key not in CONFIG_FIELDS:
                raise HTTPException(status_code=422, detail=f"unknown config key {key}")
            config[key] = CONFIG_FIELDS[key](value)
        run_id = _start_run(dataset_id, document_id, config,
                            body.get("pins") or {}, body.get("removed") or [])
        return {"run_id": run_id}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        run = _get_run(run_id)
        payload = {
            "run_id": run.run_id,
            "status": run.status,
            "dataset_id": run.dataset_id,
            "document_id": run.document_id,
        }
        if run.status == "failed":
            payload["error"] = run.error
        if run.status == "done":
            payload["report"] = run.artifacts.report.to_dict()
            payload["pins"] = run.pins
            payload["removed"] = run.removed
        else:
            payload["progress"] = run.progress
        return payload

    @app.get("/runs/{run_id}/document")
    def get_document_view(run_id: str):
        run = _require_done(_get_run(run_id))
        artifacts = run.artifacts
        return {"html": emit_markup(artifacts.document, artifacts.verdicts)}

    @app.get("/runs/{run_id}/claims/{claim_id}/candidates")
    def get_candidates(run_id: str, claim_id: int, k: int = 5):
        run = _require_done(_get_run(run_id))
        artifacts = run.artifacts
        verdict = next((v for v in artifacts.verdicts if v.claim_id == claim_id), None)
        if verdict is None:
            raise HTTPException(status_code=404, detail="unknown claim_id")
        out = []
        for i, entry in enumerate(verdict.top_k[:k]):
            item = entry.to_dict()
            item["index"] = i
            item["descriptor"] = (
                _candidate_descriptor(entry.candidate) if entry.candidate else None
            )
            out.append(item)
        return {"claim_id": claim_id, "candidates": out}

    @app.get("/runs/{run_id}/claims/{claim_id}/fragments")
    def get_fragments(run_id: str, claim_id: int):
        run = _require_done(_get_run(run_id))
        artifacts = run.artifacts
        if claim_id not in artifacts.claims:
            raise HTTPException(status_code=404, detail="unknown claim_id")
        marginals = artifacts.marginals.get(claim_id, {})
        scope = artifacts.claim_scopes[claim_id]
        predicates = [
            {"table": p.table, "column": p.column, "literal": p.literal,
             "marginal": marginals.get("predicates", {}).get(
                 f"{p.table}.{p.column}={p.literal}", 0.0)}
            for p in scope.predicates
        ]
        predicates.sort(key=lambda p: -p["marginal"])
        functions = sorted(
            ({"function": f.value,
              "marginal": marginals.get("functions", {}).get(f.value, 0.0)}
             for f in AggFunction),
            key=lambda f: -f["marginal"],
        )
        targets = []
        for t in scope.targets:
            label = "*" if t.is_star else f"{t.table}.{t.column}"
            targets.append({"target": label,
                            "marginal": marginals.get("targets", {}).get(label, 0.0)})
        targets.sort(key=lambda t: -t["marginal"])
        return {"claim_id": claim_id, "functions": functions,
                "targets": targets, "predicates": predicates}

    @app.post("/runs/{run_id}/claims/{claim_id}/feedback")
    def feedback(run_id: str, claim_id: int, body: dict):
        run = _require_done(_get_run(run_id))
        artifacts = run.artifacts
        pins = {str(k): v for k, v in run.pins.items()}
        removed = list(run.removed)

        if body.get("not_a_claim"):
            if claim_id not in artifacts.claims:
                raise HTTPException(status_code=404, detail="unknown claim_id")
            if claim_id not in removed:
                removed.append(claim_id)
            pins.pop(str(claim_id), None)
        elif "select" in body:
            verdict = next((v for v in artifacts.verdicts
                            if v.claim_id == claim_id), None)
            if verdict is None:
                raise HTTPException(status_code=404, detail="unknown claim_id")
            index = int(body["select"])
            if not 0 <= index < len(verdict.top_k):
                raise HTTPException(status_code=422,
                                    detail=f"select index {index} out of range")
            candidate = verdict.top_k[index].candidate
            pins[str(claim_id)] = _candidate_descriptor(candidate)
        elif "custom" in body:
            bundle = _load_bundle(run.dataset_id)
            try:
                candidate = _candidate_from_descriptor(body["custom"], bundle.schema)
            except InputError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            pins[str(claim_id)] = _candidate_descriptor(candidate)
        else:
            raise HTTPException(
                status_code=422,
                detail="feedback must contain select, custom or not_a_claim")

        new_run_id = _start_run(run.dataset_id, run.document_id, run.config,
                                pins, removed)
        return {"run_id": new_run_id}

    return app
