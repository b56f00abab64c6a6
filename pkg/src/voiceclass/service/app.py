"""FastAPI application: `/models` REST endpoint and the `/session` socket.

Models are loaded once at startup and shared read-only; each WebSocket
connection owns one Session whose frames are processed strictly in
arrival order.  Sessions never see each other's state.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .. import gda
from ..errors import RangeError, VoiceClassError
from .schemas import (
    ChunkMetaFrame,
    ErrorFrame,
    ModelInfo,
    ModelInfoFrame,
    ModelsResponse,
    PosteriorFrame,
    SilenceFrame,
    StartFrame,
)
from .session import Session, decode_chunk, ingest_chunk


def _model_info(task: str, model: gda.ClassModel) -> ModelInfo:
    return ModelInfo(
        task=task,
        d=model.d,
        frequencies_hz=[float(f) for f in model.frequencies.frequencies_hz],
        class_labels=list(model.class_names),
        fingerprint=gda.model_fingerprint(model),
    )


def _probs(model: gda.ClassModel, probs) -> dict[str, float]:
    return {name: float(p) for name, p in zip(model.class_names, probs)}


def create_app(models: dict[str, str | Path] | dict[str, gda.ClassModel]) -> FastAPI:
    """Build the service around a task -> model-file (or model) mapping."""
    loaded: dict[str, gda.ClassModel] = {}
    for task, source in models.items():
        model = source if isinstance(source, gda.ClassModel) else gda.load_model(source)
        if model.pipeline is None or model.frequencies is None:
            raise VoiceClassError(f"model for task {task!r} is not pipeline-complete")
        loaded[task] = model

    app = FastAPI(title="voiceclass live service", version="1")
    app.state.models = loaded

    @app.get("/models", response_model=ModelsResponse)
    def get_models() -> ModelsResponse:
        return ModelsResponse(
            models={t: _model_info(t, m) for t, m in loaded.items()}
        )

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        session: Session | None = None
        try:
            while True:
                message = await ws.receive()
                if message.get("type") == "websocket.disconnect":
                    break
                if message.get("text") is not None:
                    session = await _handle_text(ws, session, message["text"])
                elif message.get("bytes") is not None:
                    await _handle_chunk(ws, session, message["bytes"])
        except WebSocketDisconnect:
            pass

    async def _handle_text(ws: WebSocket, session, text: str):
        import json

        try:
            frame = json.loads(text)
        except json.JSONDecodeError:
            await ws.send_text(ErrorFrame(message="malformed frame").model_dump_json())
            return session
        kind = frame.get("type")
        if kind == "start":
            try:
                start = StartFrame.model_validate(frame)
            except ValueError as exc:
                await ws.send_text(ErrorFrame(message=f"bad start frame: {exc}")
                                   .model_dump_json())
                return session
            unknown = [t for t in start.tasks if t not in loaded]
            if unknown:
                await ws.send_text(ErrorFrame(
                    message=f"unknown tasks: {unknown}; loaded: {sorted(loaded)}"
                ).model_dump_json())
                return session
            if not start.tasks:
                await ws.send_text(ErrorFrame(message="no tasks requested")
                                   .model_dump_json())
                return session
            for t in start.tasks:
                cfg = loaded[t].pipeline
                if cfg.f_max > start.sample_rate / 2:
                    await ws.send_text(ErrorFrame(
                        message=(f"model {t!r} needs spectra to {cfg.f_max} Hz; "
                                 f"sample rate {start.sample_rate} is too low")
                    ).model_dump_json())
                    return session
            session = Session(sample_rate=start.sample_rate, tasks=list(start.tasks),
                              models={t: loaded[t] for t in start.tasks})
            await ws.send_text(ModelInfoFrame(
                session_id=session.session_id,
                models={t: _model_info(t, loaded[t]) for t in start.tasks},
            ).model_dump_json())
        elif kind == "chunk_meta":
            if session is None:
                await ws.send_text(ErrorFrame(message="no session; send start first")
                                   .model_dump_json())
            else:
                meta = ChunkMetaFrame.model_validate(frame)
                session.chunk_counter = meta.chunk_index
        else:
            await ws.send_text(ErrorFrame(message=f"unknown frame type {kind!r}")
                               .model_dump_json())
        return session

    async def _handle_chunk(ws: WebSocket, session, payload: bytes):
        if session is None:
            await ws.send_text(ErrorFrame(message="no session; send start first")
                               .model_dump_json())
            return
        samples = decode_chunk(payload)
        try:
            results = ingest_chunk(session, samples)
        except (ValueError, RangeError) as exc:
            await ws.send_text(ErrorFrame(message=str(exc),
                                          session_id=session.session_id)
                               .model_dump_json())
            return
        index = session.chunk_counter - 1
        if results is None:
            await ws.send_text(SilenceFrame(session_id=session.session_id,
                                            chunk_index=index).model_dump_json())
            return
        for res in results:
            model = session.models[res.task]
            await ws.send_text(PosteriorFrame(
                session_id=session.session_id,
                chunk_index=index,
                task=res.task,
                instant=_probs(model, res.instant),
                averaged=_probs(model, res.averaged),
                map_label=model.class_names[res.map_index],
            ).model_dump_json())

    return app
