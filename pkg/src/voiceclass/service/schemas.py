"""Wire-format models for the streaming protocol and the REST API.

Every text frame is a JSON object with a `type` field; audio chunks are
binary frames of little-endian 16-bit PCM.  See docs/protocol.md for the
full contract.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class StartFrame(BaseModel):
    """Client -> server: opens a session (first frame on the socket)."""

    type: str = "start"
    tasks: list[str]
    sample_rate: int = Field(gt=0)


class ChunkMetaFrame(BaseModel):
    """Client -> server: optional index resynchronization before a chunk."""

    type: str = "chunk_meta"
    chunk_index: int = Field(ge=0)


class ModelInfo(BaseModel):
    task: str
    d: int
    frequencies_hz: list[float]
    class_labels: list[str]
    fingerprint: str


class ModelInfoFrame(BaseModel):
    """Server -> client: session accepted; describes the models in play."""

    type: str = "model_info"
    session_id: str
    models: dict[str, ModelInfo]


class PosteriorFrame(BaseModel):
    """Server -> client: one task's inference result for one chunk."""

    type: str = "posterior"
    session_id: str
    chunk_index: int
    task: str
    instant: dict[str, float]
    averaged: dict[str, float]
    map_label: str


class SilenceFrame(BaseModel):
    """Server -> client: the chunk was silent and did not enter the ring."""

    type: str = "silence"
    session_id: str
    chunk_index: int


class ErrorFrame(BaseModel):
    type: str = "error"
    message: str
    session_id: str | None = None


class ModelsResponse(BaseModel):
    models: dict[str, ModelInfo]
