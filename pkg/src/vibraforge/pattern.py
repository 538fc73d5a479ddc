"""Pattern documents: waveform trees, unit layout, timeline, compilation.

A document mirrors the physical build: chains of addressed units placed on
a canvas, plus a library of composable waveforms and timed assignments of
waveforms to units.  Compilation samples each assignment, segments it into
5 ms frames, and emits change-only START commands plus STOPs, producing a
time-sorted stream ready for the scheduler.
"""

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Union

import numpy as np

from .errors import (
    AliasingError,
    CapacityError,
    OverlapError,
    ParseError,
    RangeError,
    ValidationError,
)
from .protocol import Action, VibrationCommand, WaveShape
from .segmentation import (
    CARRIER_THRESHOLD_HZ,
    FRAME_PERIOD_MS,
    SampledWaveform,
    read_waveform_csv,
    segment,
    write_waveform_csv,
)

MAX_CHAINS = 8
MAX_CHAIN_LENGTH = 16
COMPILE_SAMPLE_RATE_HZ = 44_100.0
DEFAULT_CARRIER_HZ = 170.0  # resonant drive used when no frequency is given

DOCUMENT_SCHEMA_VERSION = 1


class Shape(Enum):
    SINE = "SINE"
    SQUARE = "SQUARE"
    TRIANGLE = "TRIANGLE"
    SAW = "SAW"


class EnvelopeKind(Enum):
    RAMP = "RAMP"
    COS2 = "COS2"
    KEYFRAMES = "KEYFRAMES"


class CombineOp(Enum):
    MULTIPLY = "MULTIPLY"
    CONCAT = "CONCAT"


def _check_keyframes(frames, what: str):
    if not frames:
        raise ValidationError(f"{what} needs at least one keyframe")
    last_t = None
    for t_ms, value in frames:
        if last_t is not None and t_ms <= last_t:
            raise ValidationError(
                f"{what} keyframe times must be strictly increasing"
            )
        last_t = t_ms


@dataclass(frozen=True)
class Oscillator:
    """Periodic source.  freq_hz is a constant or (t_ms, hz) keyframes."""

    shape: Shape = Shape.SINE
    freq_hz: Union[float, tuple] = DEFAULT_CARRIER_HZ
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValidationError(
                f"amplitude must be 0..1, got {self.amplitude}"
            )
        if isinstance(self.freq_hz, (int, float)):
            if self.freq_hz <= 0:
                raise ValidationError("frequency must be positive")
        else:
            frames = tuple((float(t), float(hz)) for t, hz in self.freq_hz)
            object.__setattr__(self, "freq_hz", frames)
            _check_keyframes(frames, "frequency")
            for _, hz in frames:
                if hz <= 0:
                    raise ValidationError("frequency must be positive")

    def max_freq_hz(self) -> float:
        if isinstance(self.freq_hz, tuple):
            return max(hz for _, hz in self.freq_hz)
        return float(self.freq_hz)


@dataclass(frozen=True)
class Envelope:
    """Slow 0..1 shape over the rendered duration."""

    kind: EnvelopeKind
    keyframes: tuple = ()

    def __post_init__(self):
        if self.kind is EnvelopeKind.KEYFRAMES:
            frames = tuple(
                (float(t), float(v)) for t, v in self.keyframes
            )
            object.__setattr__(self, "keyframes", frames)
            _check_keyframes(frames, "amplitude")
            for _, value in frames:
                if not 0.0 <= value <= 1.0:
                    raise ValidationError(
                        f"keyframe value must be 0..1, got {value}"
                    )
        elif self.keyframes:
            raise ValidationError(f"{self.kind.value} takes no keyframes")


@dataclass(frozen=True)
class Combinator:
    op: CombineOp
    children: tuple = ()

    def __post_init__(self):
        children = tuple(self.children)
        object.__setattr__(self, "children", children)
        if not children:
            raise ValidationError("combinator needs at least one child")
        for child in children:
            if not isinstance(child, (Oscillator, Envelope, Combinator)):
                raise ValidationError(f"bad waveform node {child!r}")


Waveform = Union[Oscillator, Envelope, Combinator]


def max_oscillator_freq(w: Waveform) -> float:
    if isinstance(w, Oscillator):
        return w.max_freq_hz()
    if isinstance(w, Combinator):
        return max(max_oscillator_freq(c) for c in w.children)
    return 0.0


def has_square_carrier(w: Waveform) -> bool:
    """True when a square oscillator above the carrier threshold appears."""
    if isinstance(w, Oscillator):
        return w.shape is Shape.SQUARE \
            and w.max_freq_hz() > CARRIER_THRESHOLD_HZ
    if isinstance(w, Combinator):
        return any(has_square_carrier(c) for c in w.children)
    return False


def _render(w: Waveform, rate_hz: float, n: int) -> np.ndarray:
    t = np.arange(n) / rate_hz
    if isinstance(w, Oscillator):
        if isinstance(w.freq_hz, tuple):
            times = np.array([kf[0] for kf in w.freq_hz]) / 1000.0
            values = np.array([kf[1] for kf in w.freq_hz])
            inst = np.interp(t, times, values)
            # integrate the instantaneous frequency for the phase
            dt = 1.0 / rate_hz
            phase = w.phase + 2.0 * np.pi * (
                np.concatenate(([0.0], np.cumsum(inst[:-1] * dt)))
            )
        else:
            phase = w.phase + 2.0 * np.pi * w.freq_hz * t
        if w.shape is Shape.SINE:
            out = np.sin(phase)
        elif w.shape is Shape.SQUARE:
            out = np.where(np.sin(phase) >= 0.0, 1.0, -1.0)
        elif w.shape is Shape.TRIANGLE:
            out = (2.0 / np.pi) * np.arcsin(np.sin(phase))
        else:
            out = 2.0 * ((phase / (2.0 * np.pi)) % 1.0) - 1.0
        return w.amplitude * out
    if isinstance(w, Envelope):
        duration_s = n / rate_hz
        if w.kind is EnvelopeKind.RAMP:
            if n <= 1:
                return np.ones(n)
            return t / duration_s
        if w.kind is EnvelopeKind.COS2:
            return np.sin(np.pi * t / duration_s) ** 2
        times = np.array([kf[0] for kf in w.keyframes]) / 1000.0
        values = np.array([kf[1] for kf in w.keyframes])
        return np.interp(t, times, values)
    if w.op is CombineOp.MULTIPLY:
        out = np.ones(n)
        for child in w.children:
            out = out * _render(child, rate_hz, n)
        return out
    # CONCAT: children split the sample budget as evenly as possible
    k = len(w.children)
    base, extra = divmod(n, k)
    parts = []
    for i, child in enumerate(w.children):
        child_n = base + (1 if i < extra else 0)
        parts.append(_render(child, rate_hz, child_n))
    return np.concatenate(parts) if parts else np.zeros(0)


def sample(w: Waveform, rate_hz: float, duration_ms: float) -> SampledWaveform:
    """Render a waveform tree to samples, clipped to [-1, 1]."""
    if rate_hz <= 0:
        raise RangeError(f"sample rate must be positive, got {rate_hz}")
    if duration_ms <= 0:
        raise RangeError(f"duration must be positive, got {duration_ms}")
    top = max_oscillator_freq(w)
    if rate_hz < 2.0 * top:
        raise AliasingError(
            f"rate {rate_hz} Hz cannot represent {top} Hz content"
        )
    n = round(duration_ms / 1000.0 * rate_hz)
    return SampledWaveform(np.clip(_render(w, rate_hz, n), -1.0, 1.0),
                           rate_hz)


# --- document model ---------------------------------------------------------


class UnitRef(NamedTuple):
    address: int
    canvas_x: float = 0.0
    canvas_y: float = 0.0


class Assignment(NamedTuple):
    chain_id: int
    address: int
    waveform_id: str
    t_start_ms: float
    t_end_ms: float


class TimedCommand(NamedTuple):
    t_ms: float
    chain_id: int
    command: VibrationCommand


@dataclass(frozen=True)
class PatternDocument:
    chains: tuple = ()
    assignments: tuple = ()
    waveform_library: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "chains",
            tuple(tuple(UnitRef(*u) for u in chain) for chain in self.chains),
        )
        object.__setattr__(self, "assignments",
                           tuple(Assignment(*a) for a in self.assignments))
        object.__setattr__(self, "waveform_library",
                           dict(self.waveform_library))

    def validate(self):
        if len(self.chains) > MAX_CHAINS:
            raise CapacityError(f"{len(self.chains)} chains, limit {MAX_CHAINS}")
        for c, chain in enumerate(self.chains):
            if len(chain) > MAX_CHAIN_LENGTH:
                raise CapacityError(
                    f"chain {c} has {len(chain)} units, "
                    f"limit {MAX_CHAIN_LENGTH}"
                )
            for i, unit in enumerate(chain):
                if unit.address != i:
                    raise ValidationError(
                        f"chain {c} unit {i} has address {unit.address}; "
                        "addresses must equal position"
                    )
        per_unit = {}
        for a in self.assignments:
            if not 0 <= a.chain_id < len(self.chains) \
                    or not 0 <= a.address < len(self.chains[a.chain_id]):
                raise ValidationError(
                    f"assignment targets missing unit "
                    f"({a.chain_id}, {a.address})"
                )
            if a.t_start_ms < 0 or not a.t_start_ms < a.t_end_ms:
                raise ValidationError(
                    f"bad assignment interval [{a.t_start_ms}, {a.t_end_ms})"
                )
            if a.waveform_id not in self.waveform_library:
                raise ValidationError(f"unknown waveform {a.waveform_id!r}")
            per_unit.setdefault((a.chain_id, a.address), []).append(a)
        for key, items in per_unit.items():
            items.sort(key=lambda a: a.t_start_ms)
            for prev, nxt in zip(items, items[1:]):
                if nxt.t_start_ms < prev.t_end_ms:
                    raise OverlapError(
                        f"unit {key} has overlapping assignments at "
                        f"{nxt.t_start_ms} ms"
                    )


def create_chain_grid(doc: PatternDocument, chain_len: int,
                      origin=(0.0, 0.0), spacing: float = 1.0
                      ) -> PatternDocument:
    """Append a chain of chain_len units laid out along one grid row."""
    if not 1 <= chain_len <= MAX_CHAIN_LENGTH:
        raise CapacityError(
            f"chain length {chain_len} outside 1..{MAX_CHAIN_LENGTH}"
        )
    if len(doc.chains) >= MAX_CHAINS:
        raise CapacityError(f"document already has {MAX_CHAINS} chains")
    x0, y0 = origin
    row = len(doc.chains)
    units = tuple(
        UnitRef(address=i, canvas_x=x0 + i * spacing, canvas_y=y0)
        for i in range(chain_len)
    )
    return replace(doc, chains=doc.chains + (units,))


def active_units_at(doc: PatternDocument, t_ms: float) -> set:
    """Units whose assignment interval contains t; intervals are half-open."""
    out = set()
    for a in doc.assignments:
        if a.t_start_ms <= t_ms < a.t_end_ms:
            out.add((a.chain_id, a.address))
    return out


def compile(doc: PatternDocument) -> list:
    """Flatten a document to a time-sorted list of TimedCommands.

    Each assignment is sampled and segmented; a START is emitted for every
    frame whose (intensity, frequency) differs from the running state, a
    STOP when the signal falls silent mid-assignment, and a final STOP at
    the assignment end if still active.
    """
    doc.validate()
    out = []
    for a in doc.assignments:
        w = doc.waveform_library[a.waveform_id]
        duration = a.t_end_ms - a.t_start_ms
        rendered = sample(w, COMPILE_SAMPLE_RATE_HZ, duration)
        stream = segment(rendered)
        wave_sel = WaveShape.SQUARE if has_square_carrier(w) else WaveShape.SINE
        running = None
        for k, frame in enumerate(stream.frames):
            t = a.t_start_ms + k * FRAME_PERIOD_MS
            if frame.active:
                drive = (frame.intensity, frame.frequency_index)
                if drive != running:
                    out.append(TimedCommand(t, a.chain_id, VibrationCommand(
                        a.address, Action.START, frame.intensity,
                        frame.frequency_index, wave_sel)))
                    running = drive
            elif running is not None:
                out.append(TimedCommand(
                    t, a.chain_id, VibrationCommand(a.address, Action.STOP)))
                running = None
        if running is not None:
            out.append(TimedCommand(
                a.t_end_ms, a.chain_id,
                VibrationCommand(a.address, Action.STOP)))
    out.sort(key=lambda tc: (tc.t_ms, tc.chain_id, tc.command.address))
    return out


# --- importers --------------------------------------------------------------


def import_keyframes(document) -> Waveform:
    """Build a waveform from the keyframe-JSON subset.

    Schema: {"amp": [[t_ms, value], ...], "freq": [[t_ms, hz], ...]?}.
    amp is required and non-empty; freq is optional (the resonant default
    carrier is used without it).  Values outside 0..1 are refused.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad keyframe document: {exc.msg}",
                             offset=exc.lineno) from None
    else:
        doc = document
    if not isinstance(doc, dict):
        raise ParseError("keyframe document must be an object")
    if "amp" not in doc or not doc["amp"]:
        raise ParseError("keyframe document needs a non-empty amp list")
    try:
        amp = tuple((float(t), float(v)) for t, v in doc["amp"])
    except (TypeError, ValueError):
        raise ParseError("amp entries must be [t_ms, value] pairs") from None
    if "freq" in doc and doc["freq"]:
        try:
            freq = tuple((float(t), float(hz)) for t, hz in doc["freq"])
        except (TypeError, ValueError):
            raise ParseError(
                "freq entries must be [t_ms, hz] pairs") from None
        osc = Oscillator(shape=Shape.SINE, freq_hz=freq)
    else:
        osc = Oscillator(shape=Shape.SINE, freq_hz=DEFAULT_CARRIER_HZ)
    env = Envelope(kind=EnvelopeKind.KEYFRAMES, keyframes=amp)
    return Combinator(op=CombineOp.MULTIPLY, children=(osc, env))


def import_csv(source) -> SampledWaveform:
    """Verbatim sample import; see the waveform CSV format."""
    return read_waveform_csv(source)


def export_csv(waveform: SampledWaveform, target):
    write_waveform_csv(waveform, target)


# --- document persistence ---------------------------------------------------


def _waveform_to_json(w: Waveform):
    if isinstance(w, Oscillator):
        freq = list(list(kf) for kf in w.freq_hz) \
            if isinstance(w.freq_hz, tuple) else w.freq_hz
        return {"type": "oscillator", "shape": w.shape.value,
                "freq_hz": freq, "amplitude": w.amplitude, "phase": w.phase}
    if isinstance(w, Envelope):
        out = {"type": "envelope", "kind": w.kind.value}
        if w.kind is EnvelopeKind.KEYFRAMES:
            out["keyframes"] = [list(kf) for kf in w.keyframes]
        return out
    return {"type": "combinator", "op": w.op.value,
            "children": [_waveform_to_json(c) for c in w.children]}


def _waveform_from_json(node) -> Waveform:
    if not isinstance(node, dict) or "type" not in node:
        raise ParseError("waveform node must be an object with a type")
    kind = node["type"]
    try:
        if kind == "oscillator":
            freq = node.get("freq_hz", DEFAULT_CARRIER_HZ)
            if isinstance(freq, list):
                freq = tuple(tuple(kf) for kf in freq)
            return Oscillator(
                shape=Shape(node.get("shape", "SINE")), freq_hz=freq,
                amplitude=node.get("amplitude", 1.0),
                phase=node.get("phase", 0.0),
            )
        if kind == "envelope":
            return Envelope(
                kind=EnvelopeKind(node["kind"]),
                keyframes=tuple(tuple(kf)
                                for kf in node.get("keyframes", [])),
            )
        if kind == "combinator":
            return Combinator(
                op=CombineOp(node["op"]),
                children=tuple(_waveform_from_json(c)
                               for c in node.get("children", [])),
            )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad waveform node: {exc}") from None
    raise ParseError(f"unknown waveform node type {kind!r}")


def document_to_json(doc: PatternDocument) -> str:
    body = {
        "version": DOCUMENT_SCHEMA_VERSION,
        "chains": [
            [{"address": u.address, "x": u.canvas_x, "y": u.canvas_y}
             for u in chain]
            for chain in doc.chains
        ],
        "assignments": [
            {"chain": a.chain_id, "address": a.address,
             "waveform": a.waveform_id, "t_start_ms": a.t_start_ms,
             "t_end_ms": a.t_end_ms}
            for a in doc.assignments
        ],
        "waveforms": {
            wid: _waveform_to_json(w)
            for wid, w in sorted(doc.waveform_library.items())
        },
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def document_from_json(text) -> PatternDocument:
    if isinstance(text, (str, bytes)):
        try:
            body = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad document: {exc.msg}",
                             offset=exc.lineno) from None
    else:
        body = text
    if not isinstance(body, dict):
        raise ParseError("document must be a JSON object")
    version = body.get("version")
    if version != DOCUMENT_SCHEMA_VERSION:
        raise ParseError(f"unsupported document version {version!r}")
    try:
        chains = tuple(
            tuple(UnitRef(u["address"], u.get("x", 0.0), u.get("y", 0.0))
                  for u in chain)
            for chain in body.get("chains", [])
        )
        assignments = tuple(
            Assignment(a["chain"], a["address"], a["waveform"],
                       a["t_start_ms"], a["t_end_ms"])
            for a in body.get("assignments", [])
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad document field: {exc}") from None
    library = {
        wid: _waveform_from_json(node)
        for wid, node in body.get("waveforms", {}).items()
    }
    doc = PatternDocument(chains=chains, assignments=assignments,
                          waveform_library=library)
    doc.validate()
    return doc
