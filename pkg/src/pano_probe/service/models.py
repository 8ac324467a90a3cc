"""Request/response schemas for the probe service.

File-path fields are resolved on the service host; the bundled CLI resolves
them to absolute paths before sending, so in-process and same-host use is
transparent.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class VariantsRequest(BaseModel):
    manifest: str
    out_dir: str
    divisions: int = 8
    filter_directional: bool = False


class VariantsResponse(BaseModel):
    index: dict
    index_path: str
    pair_count: int
    variant_count: int


class ProbeRequestBase(BaseModel):
    manifest: str
    store: str | None = None
    service_url: str | None = None
    variant_index: str | None = None
    alpha: float = 0.01
    filter_directional: bool = False


class TextualProbeRequest(ProbeRequestBase):
    generic_cues: list[str] = Field(
        default_factory=lambda: ["", "image, ", "photo, ", "picture, "]
    )


class VisualProbeRequest(ProbeRequestBase):
    divisions: int = 8
    bound_override: float | None = None


class ProbeResponse(BaseModel):
    report: dict
    csv: str
    markdown: str


class LambdaRequest(BaseModel):
    curve_lambda1: str
    curve_lambda0: str


class LambdaResponse(BaseModel):
    knee_epoch: int
    l1_knee: float
    l0_knee: float
    lambda_: float = Field(alias="lambda")

    model_config = {"populate_by_name": True}


class BoxplotRequest(BaseModel):
    manifest: str
    store: str | None = None
    service_url: str | None = None
    variant_index: str | None = None
    # "orig-scores", "flip-diffs" or "shift-diffs:<delta>"
    metric: str = "orig-scores"
    filter_directional: bool = False


class BoxplotResponse(BaseModel):
    summary: dict


class CompareRequest(BaseModel):
    before: dict
    after: dict


class CompareResponse(BaseModel):
    delta: dict
