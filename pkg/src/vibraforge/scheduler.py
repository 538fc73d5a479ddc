"""Tick scheduler and pluggable delivery transports.

Timed commands bin into 5 ms transport ticks of at most five commands
each, the batch size one radio write can carry.  A tick that would
exceed the limit keeps STOP commands in preference to STARTs and carries
the remainder into the next tick, never reordering any single unit's own
commands; each displaced command is reported as a spill diagnostic
rather than an error.  Delivery endpoints hand finished packets to a
simulator, a bit-exact binary record file, or a length-prefixed byte
stream, and a record file replays into any endpoint with its original
tick timing and parity bits verbatim.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import (
    PacketOverflowError,
    ParityError,
    ParseError,
    RangeError,
    TransportError,
    TruncationError,
    ValidationError,
)
from .pattern import TimedCommand
from .protocol import FrameByte, decode, encode
from .simulator import SimState, inject_frames

TICK_MS = 5.0
TICK_US = 5_000
MAX_COMMANDS_PER_PACKET = 5
MAX_CHAIN_ID = 7


class PacketEntry(NamedTuple):
    """One chain-tagged command, already encoded to wire frames."""

    chain_id: int
    frames: tuple

    @property
    def address(self) -> int:
        return self.frames[0].data >> 1

    @property
    def is_stop(self) -> bool:
        # STOP is the only single-frame command.
        return len(self.frames) == 1


class SpillDiagnostic(NamedTuple):
    """One command displaced from one tick to the next by overflow."""

    stream_index: int
    chain_id: int
    address: int
    from_tick: int
    to_tick: int


@dataclass(frozen=True)
class Packet:
    """Up to five encoded commands sharing one 5 ms transport tick.

    Commands scheduled for the tick's window land here directly; a
    command displaced by overflow lands in a later tick than its
    requested time, never an earlier one.
    """

    tick_index: int
    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if self.tick_index < 0:
            raise RangeError(f"tick index must be >= 0, got {self.tick_index}")
        if len(self.entries) > MAX_COMMANDS_PER_PACKET:
            raise PacketOverflowError(
                f"{len(self.entries)} commands in one packet, "
                f"limit {MAX_COMMANDS_PER_PACKET}"
            )
        for entry in self.entries:
            if not isinstance(entry, PacketEntry):
                raise ValidationError("packet entries must be PacketEntry")
            if not 0 <= entry.chain_id <= MAX_CHAIN_ID:
                raise RangeError(f"chain id out of range: {entry.chain_id}")
            if not 1 <= len(entry.frames) <= 2:
                raise RangeError(
                    f"command must be 1 or 2 frames, got {len(entry.frames)}"
                )
            for frame in entry.frames:
                if not isinstance(frame, FrameByte):
                    raise ValidationError("frames must be FrameByte values")

    @property
    def send_time_us(self) -> int:
        return self.tick_index * TICK_US


@dataclass(frozen=True)
class ScheduleResult:
    """Packets plus overflow accounting."""

    packets: tuple
    spills: tuple
    max_backlog: int


class DeliveryReport(NamedTuple):
    kind: str
    packets: int = 0
    commands: int = 0
    bytes_written: int = 0


def _tick_of(t_ms: float) -> int:
    # Times sit on the 5 ms grid; the epsilon absorbs float dust.
    return int(math.floor(t_ms / TICK_MS + 1e-9))


def schedule_report(stream) -> ScheduleResult:
    """Bin a time-sorted command stream into packets, reporting overflow.

    Selection per tick is two passes over the queue of due commands:
    first keep STOP commands whose unit has no earlier unkept command,
    then fill remaining capacity front to back.  Kept commands leave in
    queue order, so no unit's commands ever reorder, and a STOP loses a
    slot to a START only when its own unit's earlier command spilled.
    """
    items = []
    last_t = None
    for index, (t_ms, chain_id, command) in enumerate(stream):
        if t_ms < 0:
            raise RangeError(f"command time must be >= 0, got {t_ms}")
        if last_t is not None and t_ms < last_t:
            raise ValidationError("command stream must be sorted by time")
        last_t = t_ms
        entry = PacketEntry(chain_id, tuple(encode(command)))
        if not 0 <= chain_id <= MAX_CHAIN_ID:
            raise RangeError(f"chain id out of range: {chain_id}")
        items.append((_tick_of(t_ms), index, entry))

    packets = []
    spills = []
    max_backlog = 0
    pending = []
    pos = 0
    tick = items[0][0] if items else 0
    while pos < len(items) or pending:
        if not pending and pos < len(items) and items[pos][0] > tick:
            tick = items[pos][0]
        while pos < len(items) and items[pos][0] == tick:
            pending.append(items[pos][1:])
            pos += 1

        keep = [False] * len(pending)
        kept = 0
        blocked = set()
        for j, (_, entry) in enumerate(pending):
            unit = (entry.chain_id, entry.address)
            if kept < MAX_COMMANDS_PER_PACKET and entry.is_stop \
                    and unit not in blocked:
                keep[j] = True
                kept += 1
            else:
                blocked.add(unit)
        for j in range(len(pending)):
            if kept == MAX_COMMANDS_PER_PACKET:
                break
            if not keep[j]:
                keep[j] = True
                kept += 1

        packets.append(
            Packet(tick, tuple(e for j, (_, e) in enumerate(pending) if keep[j]))
        )
        remaining = [pending[j] for j in range(len(pending)) if not keep[j]]
        for index, entry in remaining:
            spills.append(
                SpillDiagnostic(index, entry.chain_id, entry.address,
                                tick, tick + 1)
            )
        max_backlog = max(max_backlog, len(remaining))
        pending = remaining
        tick += 1

    return ScheduleResult(tuple(packets), tuple(spills), max_backlog)


def schedule(stream) -> list:
    """Bin a time-sorted command stream into 5 ms packets."""
    return list(schedule_report(stream).packets)


# ---------------------------------------------------------------------------
# endpoints

class TransportEndpoint:
    """Sequential single-writer delivery target."""

    kind = "?"

    def __init__(self):
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    def _check_open(self):
        if self._closed:
            raise TransportError(f"{self.kind} endpoint is closed")

    def close(self):
        self._closed = True

    def deliver(self, packets) -> DeliveryReport:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class SimLoopback(TransportEndpoint):
    """Inject packets into a simulator at send time tick x 5 ms."""

    kind = "SIM_LOOPBACK"

    def __init__(self, sim: SimState):
        super().__init__()
        self.sim = sim

    def deliver(self, packets) -> DeliveryReport:
        self._check_open()
        packets = list(packets)
        last_tick = None
        for packet in packets:
            if last_tick is not None and packet.tick_index <= last_tick:
                raise ValidationError("packets must have increasing ticks")
            last_tick = packet.tick_index
        commands = 0
        for packet in packets:
            by_chain = {}
            for entry in packet.entries:
                by_chain.setdefault(entry.chain_id, []).append(entry.frames)
            for chain_id, seqs in by_chain.items():
                inject_frames(self.sim, chain_id, seqs, packet.send_time_us)
            commands += len(packet.entries)
        return DeliveryReport(self.kind, len(packets), commands, 0)


class RecordFile(TransportEndpoint):
    """Write packets to a binary record file, bit-exact."""

    kind = "RECORD_FILE"

    def __init__(self, target):
        super().__init__()
        if hasattr(target, "write"):
            self._fh = target
            self._owns = False
        else:
            self._fh = open(target, "wb")
            self._owns = True

    def deliver(self, packets) -> DeliveryReport:
        self._check_open()
        n_packets = 0
        n_commands = 0
        n_bytes = 0
        for packet in packets:
            blob = packet_to_bytes(packet)
            self._fh.write(blob)
            n_packets += 1
            n_commands += len(packet.entries)
            n_bytes += len(blob)
        self._fh.flush()
        return DeliveryReport(self.kind, n_packets, n_commands, n_bytes)

    def close(self):
        if not self._closed and self._owns:
            self._fh.close()
        super().close()


class Stream(TransportEndpoint):
    """Write length-prefixed packets to a binary byte stream."""

    kind = "STREAM"

    def __init__(self, writer):
        super().__init__()
        self._fh = writer

    def deliver(self, packets) -> DeliveryReport:
        self._check_open()
        n_packets = 0
        n_commands = 0
        n_bytes = 0
        for packet in packets:
            body = packet_to_bytes(packet)
            blob = struct.pack("<I", len(body)) + body
            self._fh.write(blob)
            n_packets += 1
            n_commands += len(packet.entries)
            n_bytes += len(blob)
        self._fh.flush()
        return DeliveryReport(self.kind, n_packets, n_commands, n_bytes)


def dispatch(packets, endpoint: TransportEndpoint) -> DeliveryReport:
    """Deliver packets, in order, through one endpoint."""
    return endpoint.deliver(packets)


# ---------------------------------------------------------------------------
# binary record format

def packet_to_bytes(packet: Packet) -> bytes:
    """Record layout: u64le tick, u8 count, then per command u8 chain,
    u8 frame count, the raw frame bytes, and one flag byte whose bit i is
    frame i's parity bit."""
    out = bytearray(struct.pack("<Q", packet.tick_index))
    out.append(len(packet.entries))
    for entry in packet.entries:
        out.append(entry.chain_id)
        out.append(len(entry.frames))
        for frame in entry.frames:
            out.append(frame.data)
        flags = 0
        for i, frame in enumerate(entry.frames):
            flags |= frame.parity << i
        out.append(flags)
    return bytes(out)


def _parse_packet(data: bytes, pos: int):
    """Parse one packet record at pos; return (packet, next_pos)."""
    end = len(data)

    def need(count: int, what: str):
        if pos + count > end:
            raise ParseError(f"truncated {what}", offset=end)

    need(8, "tick index")
    (tick_index,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    need(1, "command count")
    count = data[pos]
    if count > MAX_COMMANDS_PER_PACKET:
        raise ParseError(f"command count {count} exceeds "
                         f"{MAX_COMMANDS_PER_PACKET}", offset=pos)
    pos += 1
    entries = []
    for _ in range(count):
        need(1, "chain id")
        chain_id = data[pos]
        if chain_id > MAX_CHAIN_ID:
            raise ParseError(f"chain id {chain_id} out of range", offset=pos)
        pos += 1
        need(1, "frame count")
        frame_count = data[pos]
        if frame_count not in (1, 2):
            raise ParseError(f"frame count must be 1 or 2, got {frame_count}",
                             offset=pos)
        fc_pos = pos
        pos += 1
        need(frame_count, "frame bytes")
        raw = data[pos:pos + frame_count]
        # Bit 0 of the first byte says whether a second byte follows.
        if (raw[0] & 1 == 1) != (frame_count == 2):
            raise ParseError("frame count does not match start bit",
                             offset=fc_pos)
        pos += frame_count
        need(1, "parity flags")
        flags = data[pos]
        if flags >> frame_count:
            raise ParseError("stray parity flag bits", offset=pos)
        pos += 1
        frames = tuple(
            FrameByte(raw[i], (flags >> i) & 1) for i in range(frame_count)
        )
        entries.append(PacketEntry(chain_id, frames))
    return Packet(tick_index, tuple(entries)), pos


def read_record_packets(source) -> list:
    """Parse a whole record file (path or binary file object)."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    packets = []
    pos = 0
    while pos < len(data):
        packet, pos = _parse_packet(data, pos)
        packets.append(packet)
    return packets


def replay(source, endpoint: TransportEndpoint) -> DeliveryReport:
    """Re-dispatch a record file with its original tick timing.

    Frames go out exactly as recorded, parity bits included, so the
    target sees the same byte stream the recorder saw.
    """
    return dispatch(read_record_packets(source), endpoint)


def iter_stream_packets(reader):
    """Yield packets from a length-prefixed byte stream until EOF."""
    offset = 0
    while True:
        head = reader.read(4)
        if not head:
            return
        if len(head) < 4:
            raise ParseError("truncated length prefix",
                             offset=offset + len(head))
        (length,) = struct.unpack("<I", head)
        offset += 4
        body = reader.read(length)
        if len(body) < length:
            raise ParseError("truncated packet body",
                             offset=offset + len(body))
        packet, consumed = _parse_packet(body, 0)
        if consumed != length:
            raise ParseError("length prefix does not match packet size",
                             offset=offset)
        offset += length
        yield packet


# ---------------------------------------------------------------------------
# command stream text format

def write_command_lines(commands, sink) -> int:
    """Export timed commands one per line: ``t_ms chain frame:parity ...``.

    sink is a path or an open text file.  Returns the line count.  The
    format is deterministic, so equal streams serialize byte-identically.
    """
    if hasattr(sink, "write"):
        return _write_command_lines(commands, sink)
    with open(sink, "w", encoding="utf-8") as fh:
        return _write_command_lines(commands, fh)


def _write_command_lines(commands, fh) -> int:
    count = 0
    for t_ms, chain_id, command in commands:
        t = float(t_ms)
        t_text = str(int(t)) if t.is_integer() else repr(t)
        parts = [t_text, str(chain_id)]
        parts.extend(f"{f.data:02x}:{f.parity}" for f in encode(command))
        fh.write(" ".join(parts) + "\n")
        count += 1
    return count


def read_command_lines(source) -> list:
    """Parse the text command format back into TimedCommand values.

    ParseError carries the 1-based line number as its offset.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    commands = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 3 or len(parts) > 4:
            raise ParseError(f"expected 't_ms chain frames...', got {line!r}",
                             offset=lineno)
        try:
            t_ms = float(parts[0])
            chain_id = int(parts[1])
        except ValueError as exc:
            raise ParseError(f"bad number on line {lineno}: {exc}",
                             offset=lineno)
        frames = []
        for token in parts[2:]:
            try:
                data_text, parity_text = token.split(":")
                frames.append(FrameByte(int(data_text, 16), int(parity_text)))
            except (ValueError, RangeError) as exc:
                raise ParseError(f"bad frame token {token!r} on line "
                                 f"{lineno}: {exc}", offset=lineno)
        try:
            command = decode(frames)
        except (ParityError, TruncationError, RangeError) as exc:
            raise ParseError(f"bad command on line {lineno}: {exc}",
                             offset=lineno)
        commands.append(TimedCommand(t_ms, chain_id, command))
    return commands
