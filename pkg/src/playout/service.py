"""Stateless HTTP/JSON service over the sampler: generation, editing,
inpainting, extraction, and metadata.

Every response echoes the request; all noise derives from client-supplied
seeds, so identical payloads produce byte-identical responses and the server
keeps no session state. The JSON field names are frozen in docs/api.md.
"""

from __future__ import annotations

from typing import Any

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .guidelines import extract_guidelines
from .layout import Element, GuidelineSet, Guideline, Layout, ValidationError
from .diffusion import LdmModel
from .render import render_svg
from .sampler import (
    GenerationRequest,
    NoiseTrajectory,
    edit_guidelines,
    generate_variations,
    inpaint,
    sample_layout,
    _resolve_count,
)


class GuidelineBody(BaseModel):
    axis: str
    pos: int


class ElementBody(BaseModel):
    class_name: str = Field(alias="class")
    ix_min: int
    iy_min: int
    ix_max: int
    iy_max: int

    model_config = {"populate_by_name": True}


class LayoutBody(BaseModel):
    id: str | None = None
    dataset: str | None = None
    elements: list[ElementBody]


class GenerateBody(BaseModel):
    guidelines: list[GuidelineBody] = Field(default_factory=list)
    n: int | None = None
    w: float = 1.5
    seed: int = 0
    checkpoint_id: str | None = None


class VariationBody(BaseModel):
    layout: LayoutBody
    subset_method: str = "all"
    count: int = 1
    seeds: list[int] = Field(default_factory=list)
    w: float = 1.5


class EditBody(BaseModel):
    original_request: GenerateBody
    new_guidelines: list[GuidelineBody]
    n: int | None = None


class InpaintBody(BaseModel):
    layout: LayoutBody
    idx_mask: list[int]
    guidelines: list[GuidelineBody] = Field(default_factory=list)
    seed: int = 0
    w: float = 1.5


class ExtractBody(BaseModel):
    layout: LayoutBody


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "field": field},
    )


def _parse_guidelines(items: list[GuidelineBody]) -> GuidelineSet:
    return GuidelineSet.of(Guideline(g.axis, g.pos) for g in items)


def _parse_layout(body: LayoutBody, model: LdmModel) -> Layout:
    elements = tuple(
        Element(
            class_id=model.vocab.index_of(e.class_name),
            x_min=e.ix_min,
            y_min=e.iy_min,
            x_max=e.ix_max,
            y_max=e.iy_max,
        )
        for e in body.elements
    )
    return Layout(
        elements, source_id=body.id, dataset_tag=body.dataset or model.dataset_tag
    )


def _layout_json(layout: Layout, model: LdmModel) -> dict:
    return {
        "id": layout.source_id,
        "dataset": layout.dataset_tag,
        "elements": [
            {
                "class": model.vocab.names[el.class_id],
                "ix_min": el.x_min,
                "iy_min": el.y_min,
                "ix_max": el.x_max,
                "iy_max": el.y_max,
            }
            for el in layout
        ],
    }


def _request_from_body(body: GenerateBody, model: LdmModel) -> GenerationRequest:
    if body.checkpoint_id is not None and body.checkpoint_id != model.checkpoint_id:
        raise ValidationError(
            f"checkpoint_id {body.checkpoint_id!r} does not match loaded "
            f"{model.checkpoint_id!r}"
        )
    return GenerationRequest(
        guidelines=_parse_guidelines(body.guidelines),
        n=body.n,
        w=body.w,
        seed=body.seed,
        checkpoint_id=body.checkpoint_id,
    )


def create_app(model: LdmModel | None, cors_origins: list[str] | None = None) -> FastAPI:
    app = FastAPI(title="playout service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.model = model

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        err = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(p) for p in err.get("loc", ()) if p != "body") or None
        return _error(400, "invalid_payload", err.get("msg", "invalid payload"), field)

    @app.exception_handler(ValidationError)
    async def on_domain_error(request: Request, exc: ValidationError):
        return _error(400, "invalid_payload", str(exc))

    def require_model() -> LdmModel | JSONResponse:
        if app.state.model is None:
            return _error(503, "model_not_loaded", "no checkpoint is loaded")
        return app.state.model

    @app.get("/meta")
    async def meta() -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        return {
            "checkpoint_id": m.checkpoint_id,
            "vocab": {
                "dataset": m.vocab.dataset,
                "classes": [
                    {"index": i, "name": n, "color": c}
                    for i, (n, c) in enumerate(zip(m.vocab.names, m.vocab.colors))
                ],
            },
            "grid": {"width": 36, "height": 64},
            "T": m.schedule.T,
            "w_default": 1.5,
            "p_n": m.p_n.tolist(),
            "max_trained_elements": m.max_trained_elements,
        }

    @app.post("/generate")
    async def generate(body: GenerateBody) -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        req = _request_from_body(body, m)
        layout, _, _ = sample_layout(req, m)
        n = _resolve_count(req, m)
        return {
            "layout": _layout_json(layout, m),
            "latent_meta": {"seed": body.seed, "n": n, "w": body.w},
            "svg": render_svg(layout, m.vocab),
            "request": body.model_dump(),
        }

    @app.post("/extract")
    async def extract(body: ExtractBody) -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        layout = _parse_layout(body.layout, m)
        gs = extract_guidelines(layout)
        return {"guidelines": [{"axis": g.axis, "pos": g.position} for g in gs]}

    @app.post("/variation")
    async def variation(body: VariationBody) -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        layout = _parse_layout(body.layout, m)
        layouts = generate_variations(
            layout, body.subset_method, body.count, body.seeds, m, w=body.w
        )
        return {
            "layouts": [_layout_json(l, m) for l in layouts],
            "request": body.model_dump(),
        }

    @app.post("/edit")
    async def edit(body: EditBody) -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        req = _request_from_body(body.original_request, m)
        n = _resolve_count(req, m)
        if body.n is not None and body.n != n:
            return _error(
                409,
                "element_count_mismatch",
                f"edit requested n={body.n} but the original request resolves to n={n}",
                "n",
            )
        traj = NoiseTrajectory(req.seed, n, m.vae.latent_dim, m.schedule.T)
        layout = edit_guidelines(traj, req, _parse_guidelines(body.new_guidelines), m)
        return {
            "layout": _layout_json(layout, m),
            "svg": render_svg(layout, m.vocab),
            "request": body.model_dump(),
        }

    @app.post("/inpaint")
    async def inpaint_endpoint(body: InpaintBody) -> Any:
        m = require_model()
        if isinstance(m, JSONResponse):
            return m
        layout = _parse_layout(body.layout, m)
        result = inpaint(
            layout, body.idx_mask, _parse_guidelines(body.guidelines), body.seed, m, w=body.w
        )
        return {
            "layout": _layout_json(result, m),
            "svg": render_svg(result, m.vocab),
            "request": body.model_dump(),
        }

    return app
