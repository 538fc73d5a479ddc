"""Wire schemas for the HTTP service.

These models mirror the pattern document JSON layout one-to-one; requests
are converted into core documents (which run the real validators) and never
interpreted independently.
"""

from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UnitModel(_Strict):
    address: int
    x: float = 0.0
    y: float = 0.0


class AssignmentModel(_Strict):
    chain: int
    address: int
    waveform: str
    t_start_ms: float
    t_end_ms: float


class OscillatorNode(_Strict):
    type: Literal["oscillator"] = "oscillator"
    shape: str = "SINE"
    # scalar Hz or a [[t_ms, hz], ...] sweep
    freq_hz: Union[float, list[list[float]]] = 170.0
    amplitude: float = 1.0
    phase: float = 0.0


class EnvelopeNode(_Strict):
    type: Literal["envelope"] = "envelope"
    kind: str
    keyframes: Optional[list[list[float]]] = None


class CombinatorNode(_Strict):
    type: Literal["combinator"] = "combinator"
    op: str
    children: list["WaveformNode"]


WaveformNode = Annotated[
    Union[OscillatorNode, EnvelopeNode, CombinatorNode],
    Field(discriminator="type"),
]

CombinatorNode.model_rebuild()


class DocumentModel(_Strict):
    version: int = 1
    chains: list[list[UnitModel]] = Field(default_factory=list)
    assignments: list[AssignmentModel] = Field(default_factory=list)
    waveforms: dict[str, WaveformNode] = Field(default_factory=dict)


class PatternCreateRequest(_Strict):
    document: DocumentModel


class PatternUpdateRequest(_Strict):
    document: DocumentModel
    expected_revision: int


class PatternResource(BaseModel):
    id: str
    revision: int
    unit_count: int
    document: DocumentModel


class PatternList(BaseModel):
    patterns: list[PatternResource]


class CommandModel(BaseModel):
    t_ms: float
    chain: int
    address: int
    action: str
    intensity: Optional[int] = None
    frequency_index: Optional[int] = None
    waveform: Optional[str] = None


class CompileResponse(BaseModel):
    count: int
    commands: list[CommandModel]


class PlayRequest(_Strict):
    from_ms: float = 0.0


class PlayResponse(BaseModel):
    session_id: str
    status: str
    frame_count: int
    end_ms: float


class SessionStatus(BaseModel):
    session_id: str
    status: str
    cursor_ms: float


class ScrubRequest(_Strict):
    t_ms: float


class UnitRefModel(BaseModel):
    chain: int
    addr: int


class ScrubResponse(BaseModel):
    t_ms: float
    units: list[UnitRefModel]


class DeleteResponse(BaseModel):
    deleted: bool
