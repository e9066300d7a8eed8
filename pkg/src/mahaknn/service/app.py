"""FastAPI wrapper around the pipeline layer.

One fitted model is held in application state at a time; /model/fit and
/model/load swap it atomically (the artifact itself is immutable, so
concurrent scoring against the current model is safe). File-based
endpoints read and write paths on the server's filesystem.

Run with: uvicorn mahaknn.service.app:app
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException, Request

from .. import pipeline
from ..detector import knn_score_batch
from ..errors import DataError, DimensionMismatch, MahaknnError
from ..featurizer import featurize
from ..synth import SynthConfig, generate
from ..tensorio import (
    EmbeddingSet,
    ModelArtifact,
    load_model,
    read_embeddings,
    save_model,
    write_embeddings,
)
from .schemas import (
    DecideRequest,
    DecideResponse,
    Decision,
    EvaluateRequest,
    FitRequest,
    HealthResponse,
    LoadRequest,
    ModelInfo,
    SetSummary,
    SynthRequest,
    SynthResponse,
)


def _model_info(artifact: ModelArtifact) -> ModelInfo:
    return ModelInfo(
        k_layers=artifact.layer_stats.k_layers,
        dim=artifact.layer_stats.dim,
        tanh=artifact.layer_stats.tanh_enabled,
        k_neighbors=artifact.knn.k_neighbors,
        contamination=artifact.knn.contamination,
        delta=artifact.knn.delta,
        n_train=artifact.knn.n_train,
    )


def _current_model(request: Request) -> ModelArtifact:
    artifact = getattr(request.app.state, "artifact", None)
    if artifact is None:
        raise HTTPException(status_code=409, detail="no model loaded; POST /model/fit or /model/load first")
    return artifact


def create_app() -> FastAPI:
    app = FastAPI(
        title="mahaknn",
        description="Multi-layer Mahalanobis + KNN open-set rejection service",
    )
    app.state.artifact = None

    @app.exception_handler(MahaknnError)
    async def mahaknn_error(request: Request, exc: MahaknnError):
        from fastapi.responses import JSONResponse

        status = 400 if isinstance(exc, DataError) else 500
        return JSONResponse(
            status_code=status,
            content={"error": exc.__class__.__name__, "detail": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    async def health(request: Request) -> HealthResponse:
        return HealthResponse(
            status="ok", model_loaded=request.app.state.artifact is not None
        )

    @app.get("/model", response_model=ModelInfo)
    async def model_info(request: Request) -> ModelInfo:
        return _model_info(_current_model(request))

    @app.post("/model/load", response_model=ModelInfo)
    async def model_load(body: LoadRequest, request: Request) -> ModelInfo:
        artifact = load_model(body.path)
        request.app.state.artifact = artifact
        return _model_info(artifact)

    @app.post("/model/fit", response_model=ModelInfo)
    async def model_fit(body: FitRequest, request: Request) -> ModelInfo:
        train = read_embeddings(body.train_path)
        artifact = pipeline.fit_model(
            train,
            k_neighbors=body.k_neighbors,
            contamination=body.contamination,
            tanh=body.tanh,
            calibrate_w=body.calibrate_w,
            ridge0=body.ridge0,
        )
        if body.model_path is not None:
            save_model(artifact, body.model_path)
        request.app.state.artifact = artifact
        return _model_info(artifact)

    @app.post("/decide", response_model=DecideResponse)
    async def decide(body: DecideRequest, request: Request) -> DecideResponse:
        artifact = _current_model(request)
        try:
            dataset = EmbeddingSet.create(
                np.asarray(body.embeddings, dtype=np.float32),
                None if body.logits is None else np.asarray(body.logits, dtype=np.float32),
                None,
            )
        except ValueError as exc:  # ragged nested lists
            raise DimensionMismatch(f"malformed embeddings payload: {exc}") from exc
        features = featurize(artifact.layer_stats, dataset)
        scores = knn_score_batch(artifact.knn, features)
        delta = artifact.knn.delta if body.delta_override is None else body.delta_override
        decisions = []
        for i, g in enumerate(scores):
            label = None
            if dataset.logits is not None:
                label = (
                    int(np.argmax(dataset.logits[i]))
                    if g <= delta
                    else dataset.num_classes
                )
            decisions.append(
                Decision(index=i, label=label, rejection_score=float(g))
            )
        return DecideResponse(delta=float(delta), decisions=decisions)

    @app.post("/evaluate")
    async def evaluate(body: EvaluateRequest, request: Request) -> dict:
        artifact = _current_model(request)
        test = read_embeddings(body.test_path)
        return pipeline.evaluate_artifact(artifact, test).to_dict()

    @app.post("/synth", response_model=SynthResponse)
    async def synth(body: SynthRequest) -> SynthResponse:
        config = SynthConfig.from_dict(dict(body.config))
        train, test = generate(config)
        write_embeddings(train, body.out_train)
        write_embeddings(test, body.out_test)
        return SynthResponse(
            train=SetSummary(
                n=train.n, k_layers=train.k_layers, dim=train.dim,
                num_classes=train.num_classes,
            ),
            test=SetSummary(
                n=test.n, k_layers=test.k_layers, dim=test.dim,
                num_classes=test.num_classes,
            ),
        )

    return app


app = create_app()
