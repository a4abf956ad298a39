"""HTTP/JSON API for conducting trials: design registry, enrollment,
outcome capture, stage transition and reporting.

Requests for one trial are serialized behind a per-trial lock; every
mutation appends to that trial's event log before the response returns.
Errors use problem-details style bodies.
"""

from __future__ import annotations

import os
from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .boin import decision_table
from .conduct import NotFound, QuotaExhausted, StateError, TrialStore
from .config import ConfigError, design_from_dict
from .events import ReplayError


class DesignIn(BaseModel):
    design: dict
    design_id: Optional[str] = None


class TrialIn(BaseModel):
    design_id: str
    seed: int = 0
    trial_id: Optional[str] = None
    cohort_size: int = 3


class PatientIn(BaseModel):
    covariates: list[int] = Field(min_length=1)
    eligible: bool = True


class OutcomeIn(BaseModel):
    patient_id: str
    dlt: bool
    response: Optional[bool] = None
    amend: bool = False


class AdvanceIn(BaseModel):
    d_low: Optional[int] = None   # 1-based dose levels
    d_high: Optional[int] = None


def _problem(status: int, title: str, detail: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"type": "about:blank", "title": title, "status": status, "detail": detail},
        media_type="application/problem+json",
    )


def create_app(data_dir: str = None, api_token: Optional[str] = None) -> FastAPI:
    data_dir = data_dir or os.environ.get("BARD_DATA_DIR", "./bard-data")
    api_token = api_token if api_token is not None else os.environ.get("BARD_API_TOKEN")
    store = TrialStore(data_dir)
    app = FastAPI(title="dose-optimization trial conduct", version="0.1.0")

    def auth(x_api_token: Optional[str] = Header(default=None)):
        if api_token and x_api_token != api_token:
            raise HTTPException(status_code=401, detail="missing or invalid API token")

    @app.exception_handler(StateError)
    async def _state(_: Request, exc: StateError):
        status = 409 if isinstance(exc, QuotaExhausted) else 409
        return _problem(status, "invalid trial state", str(exc))

    @app.exception_handler(NotFound)
    async def _nf(_: Request, exc: NotFound):
        return _problem(404, "not found", str(exc).strip("'\""))

    @app.exception_handler(ConfigError)
    async def _cfg(_: Request, exc: ConfigError):
        return _problem(422, "invalid design", str(exc))

    @app.exception_handler(ReplayError)
    async def _replay(_: Request, exc: ReplayError):
        return _problem(500, "event log replay failed", str(exc))

    @app.exception_handler(ValueError)
    async def _val(_: Request, exc: ValueError):
        return _problem(422, "invalid value", str(exc))

    @app.post("/designs", status_code=201, dependencies=[Depends(auth)])
    def post_design(body: DesignIn):
        design = design_from_dict(body.design)
        design_id = store.save_design(design, body.design_id)
        return {"design_id": design_id}

    @app.get("/designs", dependencies=[Depends(auth)])
    def list_designs():
        return {"design_ids": store.design_ids()}

    @app.get("/designs/{design_id}/boundaries", dependencies=[Depends(auth)])
    def get_boundaries(design_id: str):
        design = store.load_design(design_id)
        if design.engine != "boin":
            raise StateError("decision boundaries are defined for the interval engine only")
        n_max = design.n_cap + 3
        rows = decision_table(design.boin, n_max)
        return {
            "phi": design.boin.phi,
            "lambda_e": design.boin.lambda_e,
            "lambda_d": design.boin.lambda_d,
            "elimination_cutoff": design.boin.elimination_cutoff,
            "rows": rows,
        }

    @app.post("/trials", status_code=201, dependencies=[Depends(auth)])
    def post_trial(body: TrialIn):
        design = store.load_design(body.design_id)
        machine = store.create_trial(design, body.seed, body.trial_id, body.cohort_size)
        return {"trial_id": machine.trial_id, "state": machine.state_view()}

    @app.get("/trials", dependencies=[Depends(auth)])
    def list_trials():
        return {"trial_ids": store.trial_ids()}

    @app.post("/trials/{trial_id}/patients", dependencies=[Depends(auth)])
    def post_patient(trial_id: str, body: PatientIn):
        with store.lock(trial_id):
            machine = store.load(trial_id)
            events, result = machine.enroll(body.covariates, body.eligible)
            store.commit(trial_id, events)
            return {"result": result, "decision": machine.decision_summary()}

    @app.post("/trials/{trial_id}/outcomes", dependencies=[Depends(auth)])
    def post_outcome(trial_id: str, body: OutcomeIn):
        with store.lock(trial_id):
            machine = store.load(trial_id)
            events, summary = machine.record_outcome(
                body.patient_id, body.dlt, body.response, body.amend
            )
            store.commit(trial_id, events)
            return {"decision": summary}

    @app.post("/trials/{trial_id}/advance", dependencies=[Depends(auth)])
    def post_advance(trial_id: str, body: AdvanceIn):
        with store.lock(trial_id):
            machine = store.load(trial_id)
            override = None
            if body.d_high is not None:
                low = body.d_low - 1 if body.d_low is not None else None
                override = (low, body.d_high - 1)
            events, result = machine.advance(override)
            store.commit(trial_id, events)
            return result

    @app.get("/trials/{trial_id}/state", dependencies=[Depends(auth)])
    def get_state(trial_id: str):
        with store.lock(trial_id):
            return store.load(trial_id).state_view()

    @app.get("/trials/{trial_id}/report", dependencies=[Depends(auth)])
    def get_report(trial_id: str):
        with store.lock(trial_id):
            return store.load(trial_id).obd_report()

    return app
