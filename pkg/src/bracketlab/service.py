"""HTTP service wrapping the lab.

Each endpoint has a pydantic request/response pair and a plain handler
function (`handle_*`) that the CLI also calls in-process, so the service and
the command line share one code path. File-writing endpoints resolve paths on
the machine the handlers run on.
"""

from __future__ import annotations

import json
import os

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import brackets, experiments, theorem, training
from .lrn import (
    DEFAULT_EPSILON,
    DEFAULT_INDICATOR_TOL,
    CANONICAL,
    LrnParams,
    exact_params,
    indicators,
)

app = FastAPI(
    title="bracketlab",
    description="Counting-condition verification and training experiments for a single-cell linear RNN",
)


# ---------------------------------------------------------------------------
# verify


class VerifyRequest(BaseModel):
    params: list[float] | None = Field(
        default=None, description="(w_open, w_close, u, w_b) to inspect instead of the full sweep"
    )
    max_len: int = theorem.DEFAULT_MAX_LEN
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_INDICATOR_TOL
    deviation_floor: float = theorem.DEFAULT_DEVIATION_FLOOR
    samples: int = 1000
    seed: int = 0
    closed_form_increments: list[float] = Field(default=[1.0, -3.5])
    closed_form_max_len: int = 10
    out: str | None = None


class IndicatorModel(BaseModel):
    ab_ratio: float | None
    u_value: float
    ab_deviation: float | None
    u_deviation: float
    holds: bool
    tol: float


class CaseModel(BaseModel):
    case_id: int
    sequence: str
    required: str
    observed_h: float
    satisfied: bool


class ParamsReport(BaseModel):
    params: dict[str, float]
    indicators: IndicatorModel
    cases: list[CaseModel]
    counterexample: str | None
    verdict: str


class CanonicalModel(BaseModel):
    min_len: int
    max_len: int
    epsilon: float
    sequences_checked: int
    mismatches: int
    first_mismatch: str | None
    closed_form_exact: bool


class SweepModel(BaseModel):
    n_samples: int
    max_len: int
    epsilon: float
    tol: float
    deviation_floor: float
    verdicts: dict[str, int]
    max_counterexample_len: int
    inconsistent: list[dict]


class ClosedFormModel(BaseModel):
    increment: float
    max_len: int
    ok: bool


class VerifyResponse(BaseModel):
    ok: bool
    inconsistencies: int
    canonical: CanonicalModel
    sweep: SweepModel
    closed_form: list[ClosedFormModel]
    params_report: ParamsReport | None = None
    report_path: str | None = None


def handle_verify(req: VerifyRequest) -> VerifyResponse:
    canonical = theorem.exhaustive_agreement(CANONICAL, max_len=req.max_len, epsilon=req.epsilon)
    sweep = theorem.falsification_sweep(
        n_samples=req.samples,
        seed=req.seed,
        max_len=req.max_len,
        epsilon=req.epsilon,
        tol=req.tol,
        deviation_floor=req.deviation_floor,
    )
    closed_form = [
        ClosedFormModel(
            increment=a,
            max_len=req.closed_form_max_len,
            ok=theorem.check_closed_form(exact_params(a), max_len=req.closed_form_max_len),
        )
        for a in req.closed_form_increments
    ]

    params_report = None
    if req.params is not None:
        if len(req.params) != 4:
            raise ValueError("params must be four numbers: w_open,w_close,u,w_b")
        p = LrnParams(*req.params)
        equiv = theorem.verify_equivalence(p, max_len=req.max_len, epsilon=req.epsilon, tol=req.tol)
        params_report = ParamsReport(
            params=p.to_dict(),
            indicators=IndicatorModel(**indicators(p, req.tol).to_dict()),
            cases=[CaseModel(**c.to_dict()) for c in theorem.table1_cases(p, req.epsilon)],
            counterexample=None if equiv.counterexample is None else equiv.counterexample.text,
            verdict=equiv.verdict,
        )

    inconsistencies = sweep.n_inconsistent
    if canonical.mismatches > 0 or not canonical.closed_form_exact:
        inconsistencies += 1
    inconsistencies += sum(0 if c.ok else 1 for c in closed_form)
    if params_report is not None and params_report.verdict == theorem.INCONSISTENT:
        inconsistencies += 1

    response = VerifyResponse(
        ok=inconsistencies == 0,
        inconsistencies=inconsistencies,
        canonical=CanonicalModel(**canonical.to_dict()),
        sweep=SweepModel(**sweep.to_dict()),
        closed_form=closed_form,
        params_report=params_report,
    )
    if req.out is not None:
        os.makedirs(req.out, exist_ok=True)
        path = os.path.join(req.out, "verify_report.json")
        with open(path, "w", encoding="ascii") as fh:
            json.dump(response.model_dump(exclude={"report_path"}), fh, indent=2, sort_keys=True)
            fh.write("\n")
        response.report_path = path
    return response


# ---------------------------------------------------------------------------
# train


class TrainRequest(BaseModel):
    task: str = training.BINARY
    bias: str = training.BIAS_OFF
    train_length: int = 8
    epochs: int = 100
    runs: int = 10
    seed: int = 0
    lr: float | None = None  # None -> per-task default
    batch_size: int | None = None
    eval_lengths: list[int] = Field(default=[20, 50])
    eval_samples: int = 500
    out: str = "."
    log_name: str | None = None

    def to_config(self) -> training.TrainConfig:
        return training.TrainConfig(
            task=self.task,
            bias_mode=self.bias,
            train_length=self.train_length,
            epochs=self.epochs,
            n_runs=self.runs,
            seed=self.seed,
            learning_rate=self.lr,
            batch_size=self.batch_size,
            eval_lengths=tuple(self.eval_lengths),
            eval_samples=self.eval_samples,
        )


class TrainResponse(BaseModel):
    log_path: str
    summary: str
    row: dict
    diverged: int


def handle_train(req: TrainRequest) -> TrainResponse:
    config = req.to_config()
    os.makedirs(req.out, exist_ok=True)
    log_path = os.path.join(req.out, req.log_name or experiments.config_log_name(config))
    records = experiments.run_config(config, log_path)
    row = experiments.summarize_records(records)[0]
    return TrainResponse(
        log_path=log_path,
        summary=experiments.summary_line(row),
        row=row.to_dict(),
        diverged=row.n_diverged,
    )


class SuiteRequest(BaseModel):
    seed: int = 0
    train_lengths: list[int] = Field(default=list(experiments.DEFAULT_TRAIN_LENGTHS))
    epochs: int = 100
    runs: int = 10
    lr: float | None = None  # None -> per-task default
    batch_size: int | None = None
    eval_lengths: list[int] = Field(default=[20, 50])
    eval_samples: int = 500
    out: str = "."


class SuiteResponse(BaseModel):
    manifest_path: str
    log_paths: list[str]
    summaries: list[str]
    rows: list[dict]
    diverged: int


def handle_suite(req: SuiteRequest) -> SuiteResponse:
    configs = experiments.default_suite(
        master_seed=req.seed,
        train_lengths=tuple(req.train_lengths),
        epochs=req.epochs,
        n_runs=req.runs,
        learning_rate=req.lr,
        batch_size=req.batch_size,
        eval_lengths=tuple(req.eval_lengths),
        eval_samples=req.eval_samples,
    )
    manifest_path, results = experiments.run_suite(configs, req.out, master_seed=req.seed)
    all_records = [r for _, _, records in results for r in records]
    rows = experiments.summarize_records(all_records)
    return SuiteResponse(
        manifest_path=manifest_path,
        log_paths=[log_path for _, log_path, _ in results],
        summaries=[experiments.summary_line(row) for row in rows],
        rows=[row.to_dict() for row in rows],
        diverged=sum(row.n_diverged for row in rows),
    )


# ---------------------------------------------------------------------------
# eval


class EvalRequest(BaseModel):
    log: str
    run_index: int = 0
    lengths: list[int] = Field(default=[20, 50])
    samples: int = 500
    seed: int = 0


class EvalResponse(BaseModel):
    task: str
    bias: str
    train_length: int
    run_index: int
    accuracies: dict[str, float]


def handle_eval(req: EvalRequest) -> EvalResponse:
    records = experiments.read_run_log(req.log)
    by_index = {r.run_index: r for r in records}
    if req.run_index not in by_index:
        raise ValueError(f"run index {req.run_index} not in log (have {sorted(by_index)})")
    record = by_index[req.run_index]
    if record.status != training.STATUS_OK:
        raise ValueError(f"run {req.run_index} did not finish (status {record.status!r})")
    model = record.final_model()
    task = record.config["task"]
    accuracies = {
        str(length): training.evaluate(
            model, task, length, req.samples, np.random.default_rng((req.seed, req.run_index, length))
        )
        for length in req.lengths
    }
    return EvalResponse(
        task=task,
        bias=record.config["bias_mode"],
        train_length=record.config["train_length"],
        run_index=req.run_index,
        accuracies=accuracies,
    )


# ---------------------------------------------------------------------------
# report


class ReportRequest(BaseModel):
    logs: list[str]
    out: str | None = None


class ReportResponse(BaseModel):
    table: str
    rows: list[dict]
    histograms: list[dict]
    paths: dict[str, str] | None = None


def handle_report(req: ReportRequest) -> ReportResponse:
    records = []
    for path in req.logs:
        records.extend(experiments.read_run_log(path))
    if not records:
        raise ValueError("no run records in the given logs")
    rows = experiments.summarize_records(records)
    table = experiments.accuracy_table_csv(rows)
    histograms = experiments.indicator_histograms(records)
    paths = None
    if req.out is not None:
        paths = experiments.write_report(req.out, records)["paths"]
    return ReportResponse(
        table=table,
        rows=[row.to_dict() for row in rows],
        histograms=histograms,
        paths=paths,
    )


# ---------------------------------------------------------------------------
# enumerate


class EnumerateRow(BaseModel):
    text: str
    diff: int
    binary: str
    ternary: str
    balanced: bool


class EnumerateResponse(BaseModel):
    length: int
    count: int
    rows: list[EnumerateRow]


def handle_enumerate(length: int) -> EnumerateResponse:
    rows = []
    for seq in brackets.enumerate_all(length):
        st = brackets.stats(seq)
        rows.append(
            EnumerateRow(
                text=seq.text,
                diff=st.diff,
                binary=brackets.label_binary(seq),
                ternary=brackets.label_ternary(seq),
                balanced=brackets.in_bb(seq),
            )
        )
    return EnumerateResponse(length=length, count=len(rows), rows=rows)


# ---------------------------------------------------------------------------
# endpoints


def _wrap(handler, request):
    try:
        return handler(request)
    except (ValueError, FileNotFoundError) as exc:
        raise HTTPException(status_code=400, detail=str(exc))


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/verify", response_model=VerifyResponse)
def verify_endpoint(req: VerifyRequest):
    return _wrap(handle_verify, req)


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest):
    return _wrap(handle_train, req)


@app.post("/suite", response_model=SuiteResponse)
def suite_endpoint(req: SuiteRequest):
    return _wrap(handle_suite, req)


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest):
    return _wrap(handle_eval, req)


@app.post("/report", response_model=ReportResponse)
def report_endpoint(req: ReportRequest):
    return _wrap(handle_report, req)


@app.get("/enumerate", response_model=EnumerateResponse)
def enumerate_endpoint(length: int):
    try:
        return handle_enumerate(length)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
