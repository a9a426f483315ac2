"""HTTP facade for the annotation workbench.

One session over one dataset: browse examples, preview how an explanation
would parse and filter against the current state, commit accepted
explanations (persisted to the same JSON Lines file the CLI reads), and
trigger full pipeline runs. Previews never mutate state; mutations are
serialized through one lock; at most one pipeline run is in flight.

Endpoints (JSON bodies, errors as {code, message, detail}):

    GET  /examples?offset&limit      GET  /examples/{id}
    POST /explanations/preview       POST /explanations
    GET  /explanations               POST /run
    GET  /run/latest                 GET  /report

Static workbench assets, when built, are served at /.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import Dataset, Example, Explanation, example_to_record, explanation_to_record
from .execution import EvalContext, coverage, execute_on_context
from .filterbank import (
    compute_signatures,
    semantic_filter,
)
from .grammar import build_default_grammar
from .lf import describe_lf, lf_to_sexpr
from .parsing import ChartParser, TokenizeError, tokenize_explanation
from .pipeline import PipelineConfig, PipelineError, RunReport, load_dataset, run_on_dataset

__all__ = ["ServiceConfig", "ServiceState", "create_app"]


@dataclass
class ServiceConfig:
    pipeline: PipelineConfig
    static_dir: str | None = None
    dataset: Dataset | None = None  # tests may hand a dataset directly


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.detail = detail


class PreviewRequest(BaseModel):
    example_id: str
    label: int
    text: str


@dataclass
class ServiceState:
    config: ServiceConfig
    dataset: Dataset
    revision: int = 0
    run_status: str = "idle"  # idle | running | done | error
    run_error: str = ""
    latest_report: Optional[RunReport] = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    run_thread: Optional[threading.Thread] = None

    def __post_init__(self) -> None:
        self.grammar = build_default_grammar(
            self.dataset.aliases,
            max_skip=self.config.pipeline.max_skip,
            beam=self.config.pipeline.beam,
        )
        self.parser = ChartParser(self.grammar)
        self.examples_by_id = {ex.id: ex for ex in self.dataset.unlabeled_pool}
        for ex, _ in self.dataset.labeled_subset:
            self.examples_by_id.setdefault(ex.id, ex)

    # -- preview ----------------------------------------------------------

    def accepted_signatures(self) -> list[tuple[str, tuple[int, ...]]]:
        cached = getattr(self, "_sig_cache", None)
        if cached is not None and cached[0] == self.revision:
            return cached[1]
        pool = list(self.dataset.unlabeled_pool)
        out = []
        for ex, expl in self.dataset.labeled_subset:
            candidates = self.parser.parse_tokens(tokenize_explanation(expl.text), expl.label)
            kept, _ = semantic_filter(candidates, ex, expl.label)
            if not kept:
                continue
            sigs = compute_signatures(kept[:1], pool)
            out.append((expl.id, sigs[0]))
        self._sig_cache = (self.revision, out)
        return out

    def preview(self, example_id: str, label: int, text: str) -> dict:
        if example_id not in self.examples_by_id:
            raise ApiError(404, "unknown_example", f"no example with id {example_id!r}")
        if label not in (-1, 1):
            raise ApiError(422, "bad_label", "label must be -1 or +1")
        if not text.strip():
            raise ApiError(422, "empty_text", "explanation text is empty")
        try:
            tokens = tokenize_explanation(text)
        except (TokenizeError, ValueError) as exc:
            return {
                "example_id": example_id,
                "candidates": [],
                "survivor_count": 0,
                "diagnostic": f"no parse: {exc}",
            }
        candidates = self.parser.parse_tokens(tokens, label)
        if not candidates:
            return {
                "example_id": example_id,
                "candidates": [],
                "survivor_count": 0,
                "diagnostic": "no parse",
            }

        example = self.examples_by_id[example_id]
        pool = list(self.dataset.unlabeled_pool)
        kept, _ = semantic_filter(candidates, example, label)
        kept_set = set(kept)
        sigs = compute_signatures(candidates, pool)
        accepted = self.accepted_signatures()

        records = []
        # verdicts mirror the filter bank: semantic, constant, duplicate, dominated
        sig_by_lf = {}
        survivors = []
        for lf, sig in zip(candidates, sigs):
            verdict = "kept"
            duplicate_of = None
            if lf not in kept_set:
                verdict = "semantic_fail"
            elif len(set(sig)) <= 1:
                verdict = "constant"
            else:
                for expl_id, acc_sig in accepted:
                    if sig == acc_sig:
                        verdict = "duplicate"
                        duplicate_of = expl_id
                        break
            sig_by_lf[lf] = sig
            if verdict == "kept":
                survivors.append(lf)
            records.append((lf, sig, verdict, duplicate_of))

        # dominance: only the lowest-coverage survivor would be kept
        if survivors:
            ranked = sorted(
                survivors,
                key=lambda lf: (coverage(sig_by_lf[lf]), lf.skipped, lf.size, lf_to_sexpr(lf)),
            )
            winner = ranked[0]
        else:
            winner = None

        out_candidates = []
        survivor_count = 0
        for lf, sig, verdict, duplicate_of in records:
            if verdict == "kept" and lf is not winner:
                verdict = "dominated"
            if verdict == "kept":
                survivor_count += 1
            rec = {
                "lf": lf_to_sexpr(lf),
                "rendered": describe_lf(lf),
                "verdict": verdict,
                "skipped": lf.skipped,
                "size": lf.size,
                "coverage": coverage(sig),
                "conflict_rate": self._conflict_rate(sig, accepted),
            }
            if duplicate_of:
                rec["duplicate_of"] = duplicate_of
            out_candidates.append(rec)
        return {
            "example_id": example_id,
            "candidates": out_candidates,
            "survivor_count": survivor_count,
            "diagnostic": "",
        }

    @staticmethod
    def _conflict_rate(sig, accepted) -> float:
        if not sig or not accepted:
            return 0.0
        n = len(sig)
        conflicts = 0
        for j in range(n):
            if sig[j] == 0:
                continue
            if any(acc_sig[j] != 0 and acc_sig[j] != sig[j] for _, acc_sig in accepted):
                conflicts += 1
        return conflicts / n

    # -- mutations ----------------------------------------------------------

    def commit(self, example_id: str, label: int, text: str) -> dict:
        with self.lock:
            preview = self.preview(example_id, label, text)
            if preview["survivor_count"] < 1:
                raise ApiError(
                    422,
                    "no_survivors",
                    "explanation yields no surviving labeling function",
                    detail=preview,
                )
            expl_id = f"expl-{len(self.dataset.labeled_subset):04d}-r{self.revision + 1}"
            expl = Explanation(id=expl_id, example_id=example_id, label=label, text=text)
            example = self.examples_by_id[example_id]
            self.dataset = Dataset(
                labeled_subset=self.dataset.labeled_subset + ((example, expl),),
                unlabeled_pool=self.dataset.unlabeled_pool,
                dev=self.dataset.dev,
                test=self.dataset.test,
                aliases=self.dataset.aliases,
            )
            self.revision += 1
            self._persist(expl)
            return {"revision": self.revision, "explanation_id": expl_id}

    def _persist(self, expl: Explanation) -> None:
        path = self.config.pipeline.explanations
        if not path:
            return
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(explanation_to_record(expl), ensure_ascii=False) + "\n")

    def trigger_run(self) -> dict:
        with self.lock:
            if self.run_status == "running":
                raise ApiError(409, "run_in_progress", "a pipeline run is already in flight")
            if not self.dataset.labeled_subset:
                raise ApiError(422, "no_explanations", "commit at least one explanation first")
            self.run_status = "running"
            snapshot = self.dataset
            revision = self.revision

        def work() -> None:
            try:
                out_dir = None
                if self.config.pipeline.out_dir:
                    out_dir = Path(self.config.pipeline.out_dir)
                    out_dir.mkdir(parents=True, exist_ok=True)
                report, _ = run_on_dataset(snapshot, self.config.pipeline, out_dir=out_dir)
                with self.lock:
                    self.latest_report = report
                    self.run_status = "done"
            except PipelineError as exc:
                with self.lock:
                    self.run_status = "error"
                    self.run_error = str(exc)
            except Exception as exc:  # pragma: no cover
                with self.lock:
                    self.run_status = "error"
                    self.run_error = str(exc)

        thread = threading.Thread(target=work, daemon=True)
        self.run_thread = thread
        thread.start()
        return {"status": "running", "revision": revision}


def create_app(config: ServiceConfig) -> FastAPI:
    dataset = config.dataset if config.dataset is not None else load_dataset(config.pipeline)
    state = ServiceState(config=config, dataset=dataset)
    app = FastAPI(title="babble workbench service")
    app.state.session = state

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": str(exc), "detail": exc.detail},
        )

    @app.get("/examples")
    def list_examples(offset: int = 0, limit: int = 50):
        pool = state.dataset.unlabeled_pool
        page = pool[offset : offset + limit]
        return {
            "total": len(pool),
            "offset": offset,
            "examples": [example_to_record(ex) for ex in page],
        }

    @app.get("/examples/{example_id}")
    def get_example(example_id: str):
        ex = state.examples_by_id.get(example_id)
        if ex is None:
            raise ApiError(404, "unknown_example", f"no example with id {example_id!r}")
        return example_to_record(ex)

    @app.post("/explanations/preview")
    def preview(body: PreviewRequest):
        return state.preview(body.example_id, body.label, body.text)

    @app.post("/explanations")
    def commit(body: PreviewRequest):
        return state.commit(body.example_id, body.label, body.text)

    @app.get("/explanations")
    def list_explanations():
        return {
            "revision": state.revision,
            "explanations": [explanation_to_record(e) for e in state.dataset.explanations],
        }

    @app.post("/run")
    def run():
        return state.trigger_run()

    @app.get("/run/latest")
    def run_latest():
        with state.lock:
            body = {"status": state.run_status, "revision": state.revision}
            if state.run_status == "error":
                body["error"] = state.run_error
            if state.latest_report is not None:
                body["report"] = state.latest_report.to_dict()
            return body

    @app.get("/report")
    def report():
        with state.lock:
            if state.latest_report is None:
                raise ApiError(404, "no_report", "no completed run yet")
            return state.latest_report.to_dict()

    static = config.static_dir
    if static and Path(static).is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="workbench")
    return app
