"""FastAPI service wrapping the probing pipeline.

Every operation the CLI exposes goes through these endpoints, so a single
long-running service can evaluate many stores/manifests for many clients.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..corpus import Dataset, default_directional_cues, filter_directional, parse_manifest
from ..errors import (
    DegenerateSampleError,
    ManifestError,
    MissingEmbeddingError,
    NoKneeError,
    PanoProbeError,
    ServiceTransportError,
    StoreFormatError,
    TransformError,
    ValidationError,
)
from ..finetune_math import derive_lambda, read_loss_curve
from ..probes import ProbeConfig, ProbeReport, compare_reports, probe_textual, probe_visual
from ..report import boxplot_summary, render_table
from ..scoring import (
    KIND_IMAGE,
    KIND_TEXT,
    PROMPT_ORIG,
    ServiceProvider,
    clip_score,
    store_read,
)
from ..transforms import (
    VARIANT_FLIP,
    VARIANT_ORIG,
    VariantIndex,
    materialize_variants,
    shift_schedule,
)
from .models import (
    BoxplotRequest,
    BoxplotResponse,
    CompareRequest,
    CompareResponse,
    HealthResponse,
    LambdaRequest,
    LambdaResponse,
    ProbeResponse,
    TextualProbeRequest,
    VariantsRequest,
    VariantsResponse,
    VisualProbeRequest,
)

_STATUS_BY_ERROR = (
    (MissingEmbeddingError, 404),
    (ServiceTransportError, 502),
    (TransformError, 422),
    (ManifestError, 422),
    (StoreFormatError, 422),
    (ValidationError, 422),
    (DegenerateSampleError, 422),
    (NoKneeError, 422),
)


def _load_dataset(manifest: str, filter_cues: bool) -> Dataset:
    dataset = parse_manifest(manifest)
    if filter_cues:
        dataset = filter_directional(dataset, default_directional_cues())
    return dataset


def _manifest_format_cue(manifest: str) -> str:
    try:
        doc = json.loads(Path(manifest).read_text(encoding="utf-8"))
        return str(doc.get("format_cue", ""))
    except (OSError, json.JSONDecodeError):
        return ""


def _build_provider(req, dataset: Dataset, generic_cues=()):
    if req.store:
        return store_read(req.store)
    if req.service_url:
        index = VariantIndex.read(req.variant_index) if req.variant_index else None
        return ServiceProvider(
            req.service_url, dataset, variant_index=index, generic_cues=generic_cues
        )
    raise ValidationError("request needs either 'store' or 'service_url'")


def create_app() -> FastAPI:
    app = FastAPI(title="pano-probe", version=__version__)

    @app.exception_handler(PanoProbeError)
    async def handle_pipeline_error(request: Request, exc: PanoProbeError):
        status = 500
        for err_type, code in _STATUS_BY_ERROR:
            if isinstance(exc, err_type):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"detail": str(exc), "error_type": type(exc).__name__},
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/variants", response_model=VariantsResponse)
    def variants(req: VariantsRequest):
        dataset = _load_dataset(req.manifest, req.filter_directional)
        schedule = shift_schedule(dataset.width, req.divisions)
        index = materialize_variants(dataset, schedule, req.out_dir)
        index_path = index.write()
        variant_count = sum(len(v) for v in index.pairs.values())
        return VariantsResponse(
            index=index.to_dict(),
            index_path=str(index_path),
            pair_count=len(index.pairs),
            variant_count=variant_count,
        )

    def _probe_response(report: ProbeReport) -> ProbeResponse:
        return ProbeResponse(
            report=report.to_dict(),
            csv=render_table(report, "csv"),
            markdown=render_table(report, "markdown"),
        )

    @app.post("/probe/textual", response_model=ProbeResponse)
    def textual(req: TextualProbeRequest):
        dataset = _load_dataset(req.manifest, req.filter_directional)
        provider = _build_provider(req, dataset, generic_cues=req.generic_cues)
        config = ProbeConfig(
            alpha=req.alpha,
            generic_cues=tuple(req.generic_cues),
            format_cue=_manifest_format_cue(req.manifest),
        )
        return _probe_response(probe_textual(dataset, provider, config))

    @app.post("/probe/visual", response_model=ProbeResponse)
    def visual(req: VisualProbeRequest):
        dataset = _load_dataset(req.manifest, req.filter_directional)
        provider = _build_provider(req, dataset)
        config = ProbeConfig(
            alpha=req.alpha,
            divisions=req.divisions,
            bound_override=req.bound_override,
            format_cue=_manifest_format_cue(req.manifest),
        )
        return _probe_response(probe_visual(dataset, provider, config))

    @app.post("/lambda", response_model=LambdaResponse, response_model_by_alias=True)
    def lambda_endpoint(req: LambdaRequest):
        curve1 = read_loss_curve(req.curve_lambda1, lambda_setting=1.0)
        curve0 = read_loss_curve(req.curve_lambda0, lambda_setting=0.0)
        record = derive_lambda(curve1, curve0)
        return LambdaResponse(
            knee_epoch=record["knee_epoch"],
            l1_knee=record["l1_knee"],
            l0_knee=record["l0_knee"],
            **{"lambda": record["lambda"]},
        )

    @app.post("/boxplot", response_model=BoxplotResponse)
    def boxplot(req: BoxplotRequest):
        dataset = _load_dataset(req.manifest, req.filter_directional)
        provider = _build_provider(req, dataset)

        def score(pair, variant):
            image = provider.fetch(pair.id, KIND_IMAGE, variant)
            text = provider.fetch(pair.id, KIND_TEXT, PROMPT_ORIG)
            return clip_score(image, text)

        if req.metric == "orig-scores":
            values = [score(p, VARIANT_ORIG) for p in dataset.pairs]
        elif req.metric == "flip-diffs":
            values = [
                abs(score(p, VARIANT_ORIG) - score(p, VARIANT_FLIP))
                for p in dataset.pairs
            ]
        elif req.metric.startswith("shift-diffs:"):
            variant = "shift:" + req.metric.split(":", 1)[1]
            values = [
                abs(score(p, VARIANT_ORIG) - score(p, variant))
                for p in dataset.pairs
            ]
        else:
            raise ValidationError(f"unknown boxplot metric {req.metric!r}")
        return BoxplotResponse(summary=boxplot_summary(values, req.metric).to_dict())

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest):
        before = ProbeReport.from_dict(req.before)
        after = ProbeReport.from_dict(req.after)
        return CompareResponse(delta=compare_reports(before, after))

    return app
