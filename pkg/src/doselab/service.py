"""HTTP facade for recommendations, what-if curves, and diagnostics.

One immutable model snapshot serves every request; hot-swapping replaces the
whole snapshot atomically so concurrent readers see either the old or the
new model, never a mix. Every response carries the snapshot's version hash
so clients can detect model changes.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from .cadr import CadrModel, cadr_curve, deserialize_cadr
from .domain import CaseFeatures, DoseGrid, Sex, SURGERY_TYPES, Treatment, UtilityWeights
from .recommendation import recommend_dose
from .validation import OverlapDiagnostic


@dataclass(frozen=True)
class ModelSnapshot:
    """Everything a request needs, loaded once and never mutated."""

    model: CadrModel
    version_hash: str
    diagnostics: OverlapDiagnostic | None = None
    default_weights: UtilityWeights = UtilityWeights()


def load_snapshot(
    model_path: Path | str,
    diagnostics_path: Path | str | None = None,
    default_weights: UtilityWeights = UtilityWeights(),
    grid_override: "DoseGrid | None" = None,
) -> ModelSnapshot:
    """Read a model artifact; the version hash covers all artifact bytes.

    ``grid_override`` re-grids curve evaluation and argmax search without
    touching the fitted models (recommendations off the trained dose support
    surface as extrapolation warnings via diagnostics).
    """
    import dataclasses

    data = Path(model_path).read_bytes()
    version_hash = hashlib.sha256(data).hexdigest()
    model = deserialize_cadr(data)
    if grid_override is not None:
        model = dataclasses.replace(model, grid=grid_override)
    diagnostics = None
    if diagnostics_path is not None:
        diagnostics = OverlapDiagnostic.from_dict(
            json.loads(Path(diagnostics_path).read_text())
        )
    return ModelSnapshot(model=model, version_hash=version_hash,
                         diagnostics=diagnostics, default_weights=default_weights)


class FeaturesBody(BaseModel):
    age: int = Field(ge=18, description="adult patients only")
    weight_kg: float = Field(gt=0)
    sex: Literal["female", "male"]
    asa_class: int = Field(ge=1, le=5)
    surgery_duration_min: float = Field(gt=0)
    surgery_type: int = Field(ge=0, le=len(SURGERY_TYPES) - 1)
    chronic_opioid_use: bool
    comorbidity_score: float = Field(ge=0)

    def to_domain(self) -> CaseFeatures:
        return CaseFeatures(
            age=self.age,
            weight_kg=self.weight_kg,
            sex=Sex(self.sex),
            asa_class=self.asa_class,
            surgery_duration_min=self.surgery_duration_min,
            surgery_type=self.surgery_type,
            chronic_opioid_use=self.chronic_opioid_use,
            comorbidity_score=self.comorbidity_score,
        )


class WeightsBody(BaseModel):
    w_pain: float = Field(ge=0)
    w_orades: float = Field(ge=0)

    @model_validator(mode="after")
    def _not_both_zero(self):
        if self.w_pain + self.w_orades <= 0:
            raise ValueError("w_pain and w_orades must not both be zero")
        return self

    def to_domain(self) -> UtilityWeights:
        return UtilityWeights(w_pain=self.w_pain, w_orades=self.w_orades)


class WhatIfBody(BaseModel):
    features: FeaturesBody
    weights: WeightsBody | None = None
    treatment: str | None = None


class LoadBody(BaseModel):
    model_path: str
    diagnostics_path: str | None = None


def create_app(snapshot: ModelSnapshot | None = None) -> FastAPI:
    app = FastAPI(title="doselab", version="0.1.0")
    app.state.snapshot = snapshot
    app.state.started_at = time.monotonic()

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        errors = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"),
             "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": errors})

    def _snapshot() -> ModelSnapshot | None:
        return app.state.snapshot

    def _no_model() -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": "no model loaded"})

    def _resolve(body: WhatIfBody, snap: ModelSnapshot):
        """Map a request body onto domain objects, or an error response."""
        x = body.features.to_domain()
        w = (snap.default_weights if body.weights is None
             else body.weights.to_domain())
        if body.treatment is None:
            t = snap.model.default_treatment()
        else:
            if body.treatment not in snap.model.registry:
                return None, JSONResponse(
                    status_code=400,
                    content={"errors": [{"field": "treatment",
                                         "message": f"unknown opiate {body.treatment!r}"}]},
                )
            t = Treatment(opiate_id=snap.model.registry.index(body.treatment),
                          registry=snap.model.registry)
        return (x, w, t), None

    @app.get("/v1/health")
    def health():
        return {"status": "ok",
                "uptime_s": time.monotonic() - app.state.started_at}

    @app.get("/v1/model")
    def model_info():
        snap = _snapshot()
        if snap is None:
            return _no_model()
        m = snap.model
        return {
            "version_hash": snap.version_hash,
            "grid": {"min_meq": m.grid.min_meq, "max_meq": m.grid.max_meq,
                     "step_meq": m.grid.step_meq, "n_points": m.grid.n_points},
            "registry": list(m.registry),
            "pain_learner": m.pain_model.kind.value,
            "orade_learner": m.orade_model.kind.value,
            "pain_timepoint": m.pain_timepoint.value,
            "warnings": list(m.warnings),
            "default_weights": {"w_pain": snap.default_weights.w_pain,
                                "w_orades": snap.default_weights.w_orades},
        }

    @app.get("/v1/diagnostics")
    def diagnostics():
        snap = _snapshot()
        if snap is None or snap.diagnostics is None:
            return JSONResponse(status_code=409,
                                content={"error": "no diagnostics loaded"})
        return {"version_hash": snap.version_hash,
                "overlap": snap.diagnostics.to_dict()}

    @app.post("/v1/recommend")
    def recommend(body: WhatIfBody):
        snap = _snapshot()
        if snap is None:
            return _no_model()
        resolved, err = _resolve(body, snap)
        if err is not None:
            return err
        x, w, t = resolved
        rec = recommend_dose(snap.model, x, t=t, w=w, diagnostics=snap.diagnostics)
        return {"version_hash": snap.version_hash, **rec.to_dict()}

    @app.post("/v1/curve")
    def curve(body: WhatIfBody):
        snap = _snapshot()
        if snap is None:
            return _no_model()
        resolved, err = _resolve(body, snap)
        if err is not None:
            return err
        x, w, t = resolved
        c = cadr_curve(snap.model, x, t=t, w=w)
        return {
            "version_hash": snap.version_hash,
            "weights": {"w_pain": w.w_pain, "w_orades": w.w_orades},
            "doses": list(c.doses),
            "pain_hat": list(c.pain_hat),
            "orade_hat": list(c.orade_hat),
            "utility": list(c.utility),
            "pain_spread": None if c.pain_spread is None else list(c.pain_spread),
            "orade_spread": None if c.orade_spread is None else list(c.orade_spread),
        }

    @app.post("/v1/admin/load")
    def admin_load(body: LoadBody):
        snap = _snapshot()
        weights = snap.default_weights if snap else UtilityWeights()
        try:
            new_snapshot = load_snapshot(body.model_path, body.diagnostics_path,
                                         default_weights=weights)
        except OSError as exc:
            return JSONResponse(status_code=400,
                                content={"errors": [{"field": "model_path",
                                                     "message": str(exc)}]})
        app.state.snapshot = new_snapshot  # single assignment: atomic swap
        return {"version_hash": new_snapshot.version_hash}

    return app
