"""Two-byte command codec for daisy-chained vibrotactile units.

Wire format (one command, most significant bit first):

    byte 1:  [ address : 7 ][ start : 1 ]
    byte 2:  [ intensity : 4 ][ frequency : 3 ][ waveform : 1 ]

A START command (start bit = 1) carries both bytes; a STOP command is byte 1
alone with the start bit clear.  Every byte travels as a 9-bit frame: the 8
data bits plus one even-parity bit, carried out of band by ``FrameByte``.

The address is a hop count.  Each unit that receives byte 1 consumes the
command when the address is zero and otherwise forwards it with the address
decremented (and the parity bit recomputed).
"""

from dataclasses import dataclass
from enum import Enum

from .errors import ParityError, RangeError, TruncationError

# Renderable carrier frequencies, index 0..7.  Neighbouring levels sit at a
# just-noticeable ratio of about 1.18.
FREQUENCIES_HZ = (123.0, 145.0, 170.0, 200.0, 235.0, 275.0, 322.0, 384.0)

MAX_ADDRESS = 127
MAX_INTENSITY = 15
MAX_FREQUENCY_INDEX = 7
INTENSITY_LEVELS = 16


class Action(Enum):
    START = "start"
    STOP = "stop"


class WaveShape(Enum):
    SINE = "sine"
    SQUARE = "square"


def duty_fraction(level: int) -> float:
    """Drive duty cycle for an intensity level: (level + 1) / 16."""
    if not 0 <= level <= MAX_INTENSITY:
        raise RangeError(f"intensity level {level} outside 0..{MAX_INTENSITY}")
    return (level + 1) / INTENSITY_LEVELS


def even_parity(data: int) -> int:
    """Parity bit making the 9-bit frame carry an even number of ones."""
    return data.bit_count() & 1


@dataclass(frozen=True)
class FrameByte:
    """One 8-bit data byte plus its even-parity sidecar bit."""

    data: int
    parity: int

    def __post_init__(self):
        if not 0 <= self.data <= 0xFF:
            raise RangeError(f"frame data {self.data:#x} outside one byte")
        if self.parity not in (0, 1):
            raise RangeError(f"parity bit must be 0 or 1, got {self.parity}")

    @classmethod
    def from_data(cls, data: int) -> "FrameByte":
        return cls(data, even_parity(data))

    def parity_ok(self) -> bool:
        return self.parity == even_parity(self.data)

    def with_bit_flipped(self, bit: int) -> "FrameByte":
        """Corrupt one of the nine bits (0..7 data, 8 parity)."""
        if not 0 <= bit <= 8:
            raise RangeError(f"bit index {bit} outside 0..8")
        if bit == 8:
            return FrameByte(self.data, self.parity ^ 1)
        return FrameByte(self.data ^ (1 << bit), self.parity)


@dataclass(frozen=True)
class VibrationCommand:
    """One addressed command.

    STOP commands carry no payload; the payload fields are normalized to
    None.  START commands require intensity and frequency_index, and default
    to a sine drive.
    """

    address: int
    action: Action
    intensity: int | None = None
    frequency_index: int | None = None
    waveform: WaveShape | None = None

    def __post_init__(self):
        if not 0 <= self.address <= MAX_ADDRESS:
            raise RangeError(f"address {self.address} outside 0..{MAX_ADDRESS}")
        if self.action is Action.STOP:
            object.__setattr__(self, "intensity", None)
            object.__setattr__(self, "frequency_index", None)
            object.__setattr__(self, "waveform", None)
            return
        if self.intensity is None or self.frequency_index is None:
            raise RangeError("START command requires intensity and frequency_index")
        if not 0 <= self.intensity <= MAX_INTENSITY:
            raise RangeError(f"intensity {self.intensity} outside 0..{MAX_INTENSITY}")
        if not 0 <= self.frequency_index <= MAX_FREQUENCY_INDEX:
            raise RangeError(
                f"frequency index {self.frequency_index} outside 0..{MAX_FREQUENCY_INDEX}"
            )
        if self.waveform is None:
            object.__setattr__(self, "waveform", WaveShape.SINE)


def encode(command: VibrationCommand) -> list[FrameByte]:
    """Encode a command to its wire frames (two for START, one for STOP)."""
    byte1 = (command.address << 1) | (1 if command.action is Action.START else 0)
    frames = [FrameByte.from_data(byte1)]
    if command.action is Action.START:
        byte2 = (
            (command.intensity << 4)
            | (command.frequency_index << 1)
            | (1 if command.waveform is WaveShape.SQUARE else 0)
        )
        frames.append(FrameByte.from_data(byte2))
    return frames


def decode(frames: list[FrameByte], check_parity: bool = True) -> VibrationCommand:
    """Decode wire frames back to a command.

    Raises ParityError on a bad parity bit and TruncationError when a START
    command is missing its second byte.
    """
    if not frames:
        raise TruncationError("no frames to decode")
    if check_parity:
        for i, frame in enumerate(frames):
            if not frame.parity_ok():
                raise ParityError(f"parity failure on frame {i}")
    byte1 = frames[0].data
    address = byte1 >> 1
    if not byte1 & 0x01:
        if len(frames) != 1:
            raise ValueError(f"STOP command carries {len(frames)} frames, expected 1")
        return VibrationCommand(address, Action.STOP)
    if len(frames) < 2:
        raise TruncationError("START command missing its second byte")
    if len(frames) > 2:
        raise ValueError(f"START command carries {len(frames)} frames, expected 2")
    byte2 = frames[1].data
    return VibrationCommand(
        address=address,
        action=Action.START,
        intensity=byte2 >> 4,
        frequency_index=(byte2 >> 1) & 0x07,
        waveform=WaveShape.SQUARE if byte2 & 0x01 else WaveShape.SINE,
    )


class HopAction(Enum):
    CONSUME = "consume"
    FORWARD = "forward"


@dataclass(frozen=True)
class HopDecision:
    action: HopAction
    forwarded: FrameByte | None = None


def apply_hop(byte1: FrameByte) -> HopDecision:
    """Decrement-and-forward rule applied by every unit to byte 1.

    Address zero is consumed locally; anything else is forwarded with the
    address decremented and the parity recomputed.
    """
    if not byte1.parity_ok():
        raise ParityError("parity failure on addressed byte")
    address = byte1.data >> 1
    if address == 0:
        return HopDecision(HopAction.CONSUME)
    decremented = ((address - 1) << 1) | (byte1.data & 0x01)
    return HopDecision(HopAction.FORWARD, FrameByte.from_data(decremented))


def expects_second_byte(byte1: FrameByte) -> bool:
    """True when the addressed byte opens a two-byte START command."""
    return bool(byte1.data & 0x01)
