"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool


class ModelInfo(BaseModel):
    k_layers: int
    dim: int
    tanh: bool
    k_neighbors: int
    contamination: float
    delta: float
    n_train: int


class LoadRequest(BaseModel):
    path: str


class FitRequest(BaseModel):
    train_path: str
    model_path: str | None = None
    k_neighbors: int = 5
    contamination: float = 0.01
    tanh: bool = True
    calibrate_w: bool = True
    ridge0: float = 1e-6


class DecideRequest(BaseModel):
    embeddings: list[list[list[float]]] = Field(
        description="n x k_layers x dim pooled embeddings"
    )
    logits: list[list[float]] | None = None
    delta_override: float | None = None


class Decision(BaseModel):
    index: int
    label: int | None
    rejection_score: float


class DecideResponse(BaseModel):
    delta: float
    decisions: list[Decision]


class EvaluateRequest(BaseModel):
    test_path: str


class SynthRequest(BaseModel):
    config: dict = Field(default_factory=dict, description="SynthConfig field names")
    out_train: str
    out_test: str


class SetSummary(BaseModel):
    n: int
    k_layers: int
    dim: int
    num_classes: int


class SynthResponse(BaseModel):
    train: SetSummary
    test: SetSummary
