"""Discrete-event simulation of daisy-chained vibration units.

One control unit drives up to 8 chains of up to 16 units each.  Commands
enter a chain at its head after a radio delay, then hop unit to unit; each
hop decrements the address byte and re-derives parity.  The simulator
tracks per-unit state machines, per-link serialization, one-shot fault
injection, wire voltage drops on the shared three-wire harness, and bulk
power draw.  Given identical inputs and seed, event logs and traces are
byte-identical.
"""

import heapq
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Union

from .errors import (
    PacketOverflowError,
    RangeError,
    TopologyError,
)
from .protocol import (
    FREQUENCIES_HZ,
    Action,
    FrameByte,
    HopAction,
    WaveShape,
    apply_hop,
    decode,
    duty_fraction,
    encode,
    expects_second_byte,
)

MAX_CHAINS = 8
MAX_CHAIN_LENGTH = 16

MCU_IDLE_CURRENT_A = 0.0025
ACTUATOR_CURRENT_A = 0.150
CONTROL_UNIT_CURRENT_A = 0.106

DEFAULT_SUPPLY_V = 5.0
MCU_MIN_V = 2.3
ACTUATOR_MIN_V = 0.9

# Midpoint of the feasible per-segment resistance interval found by the
# calibration search in calibrate_sweep_resistance().
DEFAULT_SEGMENT_RESISTANCE_OHM = 0.11553008499633007

AWAIT_TIMEOUT_US = 10_000
DEFAULT_SEED = 0


class LoopMode(Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"


class Phase(Enum):
    IDLE = "IDLE"
    AWAIT_SECOND_BYTE = "AWAIT_SECOND_BYTE"
    ACTIVE = "ACTIVE"


@dataclass(frozen=True)
class Topology:
    """Chain layout plus electrical parameters of the wire harness.

    The constructor accepts any positive chain lengths so that over-length
    chains can be analysed electrically; build() enforces the 8-chain,
    16-unit operating limits.
    """

    chains: tuple
    loop_modes: tuple = ()
    wire_resistance_per_segment_ohm: float = DEFAULT_SEGMENT_RESISTANCE_OHM
    supply_voltage_v: float = DEFAULT_SUPPLY_V

    def __post_init__(self):
        chains = tuple(int(n) for n in self.chains)
        object.__setattr__(self, "chains", chains)
        for n in chains:
            if n < 1:
                raise TopologyError(f"chain length must be positive, got {n}")
        modes = tuple(self.loop_modes)
        if not modes:
            modes = tuple(LoopMode.OPEN for _ in chains)
        if len(modes) != len(chains):
            raise TopologyError(
                f"{len(modes)} loop modes for {len(chains)} chains"
            )
        object.__setattr__(self, "loop_modes", modes)
        if not self.wire_resistance_per_segment_ohm > 0:
            raise TopologyError("segment resistance must be positive")
        if not self.supply_voltage_v > 0:
            raise TopologyError("supply voltage must be positive")

    @property
    def unit_count(self) -> int:
        return sum(self.chains)

    def validate_for_build(self):
        if len(self.chains) == 0:
            raise TopologyError("at least one chain is required")
        if len(self.chains) > MAX_CHAINS:
            raise TopologyError(
                f"{len(self.chains)} chains exceeds the {MAX_CHAINS}-chain limit"
            )
        for i, n in enumerate(self.chains):
            if n > MAX_CHAIN_LENGTH:
                raise TopologyError(
                    f"chain {i} has {n} units, limit {MAX_CHAIN_LENGTH}"
                )


@dataclass(frozen=True)
class LatencyModel:
    ble_one_way_ms: float = 14.0
    hop_us: float = 125.0
    ble_processing_ms: float = 2.96

    def __post_init__(self):
        for name in ("ble_one_way_ms", "hop_us", "ble_processing_ms"):
            if getattr(self, name) < 0:
                raise RangeError(f"{name} must be non-negative")


class BitFlip(NamedTuple):
    """Flip one bit of one frame of the next command reaching a hop.

    frame is 1 or 2; bit 0..7 selects a data bit, bit 8 the parity bit.
    """

    chain: int
    hop: int
    frame: int
    bit: int


class Drop(NamedTuple):
    """Discard the next command reaching a hop."""

    chain: int
    hop: int


Fault = Union[BitFlip, Drop]


class EventRecord(NamedTuple):
    t_us: int
    chain: int
    unit: int
    kind: str
    detail: str


class TraceSegment(NamedTuple):
    start_us: int
    end_us: Optional[int]
    intensity: int
    frequency_index: int
    waveform: WaveShape


@dataclass
class UnitState:
    phase: Phase = Phase.IDLE
    drive: Optional[tuple] = None  # (intensity, freq_idx, waveform) when on
    await_generation: int = 0

    @property
    def actuator_current_a(self) -> float:
        return ACTUATOR_CURRENT_A if self.drive is not None else 0.0

    @property
    def mcu_current_a(self) -> float:
        return MCU_IDLE_CURRENT_A


class _Transit(NamedTuple):
    """A command in flight toward one unit."""

    frames: tuple
    hop: int


@dataclass
class SimState:
    topology: Topology
    latency: LatencyModel
    rng_seed: int = DEFAULT_SEED
    clock_us: int = 0
    units: list = field(default_factory=list)
    log: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)
    injected: int = 0
    consumed: int = 0
    dropped: int = 0
    exited: int = 0
    _queue: list = field(default_factory=list)
    _seq: int = 0
    _link_free_us: list = field(default_factory=list)
    _faults: dict = field(default_factory=dict)

    def pending_events(self) -> int:
        return len(self._queue)


def build(topology: Topology, latency: LatencyModel = None,
          seed: int = DEFAULT_SEED) -> SimState:
    topology.validate_for_build()
    if latency is None:
        latency = LatencyModel()
    sim = SimState(topology=topology, latency=latency, rng_seed=seed)
    for n in topology.chains:
        sim.units.append([UnitState() for _ in range(n)])
        # link 0 is control unit -> head; link h is unit h-1 -> unit h
        sim._link_free_us.append([0] * n)
    for c, n in enumerate(topology.chains):
        for u in range(n):
            sim.traces[(c, u)] = []
    return sim


def _push(sim: SimState, t_us: int, chain: int, kind: str, payload):
    heapq.heappush(sim._queue, (t_us, chain, sim._seq, kind, payload))
    sim._seq += 1


def _log(sim: SimState, t_us: int, chain: int, unit: int, kind: str,
         detail: str = "-") -> EventRecord:
    rec = EventRecord(t_us, chain, unit, kind, detail)
    sim.log.append(rec)
    return rec


def inject_frames(sim: SimState, chain_id: int, frame_seqs, send_time_us: int):
    """Queue up to 5 pre-encoded commands toward one chain, frames verbatim.

    The radio leg adds a fixed one-way delay; the serial leg serializes
    commands onto the head link in order, one hop time each.  Parity bits
    travel exactly as given, so corrupted recordings replay corrupted.
    """
    if not 0 <= chain_id < len(sim.topology.chains):
        raise TopologyError(f"no chain {chain_id}")
    frame_seqs = [tuple(seq) for seq in frame_seqs]
    if len(frame_seqs) > 5:
        raise PacketOverflowError(
            f"{len(frame_seqs)} commands in one packet, limit 5"
        )
    if send_time_us < sim.clock_us:
        raise RangeError("cannot inject into the past")
    for frames in frame_seqs:
        if not 1 <= len(frames) <= 2:
            raise RangeError(f"command must be 1 or 2 frames, got {len(frames)}")
    ble_us = round(sim.latency.ble_one_way_ms * 1000.0)
    hop_us = round(sim.latency.hop_us)
    for frames in frame_seqs:
        start = max(send_time_us, sim._link_free_us[chain_id][0])
        sim._link_free_us[chain_id][0] = start + hop_us
        arrival = start + hop_us + ble_us
        _push(sim, arrival, chain_id, "arrival", _Transit(frames, 0))
        sim.injected += 1


def inject_packet(sim: SimState, chain_id: int, commands, send_time_us: int):
    """Queue up to 5 commands toward one chain (encoded on the way in)."""
    inject_frames(
        sim, chain_id, [tuple(encode(cmd)) for cmd in commands], send_time_us
    )


def inject_fault(sim: SimState, fault: Fault):
    if not 0 <= fault.chain < len(sim.topology.chains):
        raise TopologyError(f"no chain {fault.chain}")
    if not 0 <= fault.hop < sim.topology.chains[fault.chain]:
        raise TopologyError(f"no hop {fault.hop} on chain {fault.chain}")
    if isinstance(fault, BitFlip):
        if fault.frame not in (1, 2):
            raise RangeError("frame must be 1 or 2")
        if not 0 <= fault.bit <= 8:
            raise RangeError("bit must be 0..8")
    sim._faults.setdefault((fault.chain, fault.hop), []).append(fault)


def _take_fault(sim: SimState, chain: int, hop: int) -> Optional[Fault]:
    pending = sim._faults.get((chain, hop))
    if pending:
        return pending.pop(0)
    return None


def _close_trace(sim: SimState, chain: int, unit: int, t_us: int):
    segs = sim.traces[(chain, unit)]
    if segs and segs[-1].end_us is None:
        segs[-1] = segs[-1]._replace(end_us=t_us)


def _apply_command(sim: SimState, t_us: int, chain: int, unit: int,
                   frames: tuple):
    state = sim.units[chain][unit]
    cmd = decode(list(frames))
    state.await_generation += 1
    if cmd.action is Action.STOP:
        if state.drive is not None:
            _close_trace(sim, chain, unit, t_us)
        state.drive = None
        state.phase = Phase.IDLE
        _log(sim, t_us, chain, unit, "DEACTIVATE")
    else:
        new_drive = (cmd.intensity, cmd.frequency_index, cmd.waveform)
        if state.drive != new_drive:
            _close_trace(sim, chain, unit, t_us)
            sim.traces[(chain, unit)].append(
                TraceSegment(t_us, None, cmd.intensity, cmd.frequency_index,
                             cmd.waveform)
            )
        state.drive = new_drive
        state.phase = Phase.ACTIVE
        _log(
            sim, t_us, chain, unit, "ACTIVATE",
            f"intensity={cmd.intensity},freq_idx={cmd.frequency_index},"
            f"wave={cmd.waveform.name}",
        )
    sim.consumed += 1


def _handle_arrival(sim: SimState, t_us: int, chain: int, transit: _Transit):
    hop = transit.hop
    frames = list(transit.frames)
    fault = _take_fault(sim, chain, hop)
    if isinstance(fault, Drop):
        sim.dropped += 1
        _log(sim, t_us, chain, hop, "FAULT_DROP")
        return
    if isinstance(fault, BitFlip):
        if fault.frame <= len(frames):
            frames[fault.frame - 1] = frames[fault.frame - 1].with_bit_flipped(
                fault.bit
            )
        else:
            _log(sim, t_us, chain, hop, "FAULT_NOOP", "frame=absent")
    byte1 = frames[0]
    if not byte1.parity_ok():
        sim.dropped += 1
        _log(sim, t_us, chain, hop, "PARITY_DROP", "frame=1")
        return
    decision = apply_hop(byte1)
    state = sim.units[chain][hop]
    if decision.action is HopAction.CONSUME:
        if expects_second_byte(byte1):
            byte2 = frames[1]
            if not byte2.parity_ok():
                # The first byte committed this unit to a command that
                # never arrived intact; hold until the reception timeout.
                sim.dropped += 1
                state.phase = Phase.AWAIT_SECOND_BYTE
                state.await_generation += 1
                _log(sim, t_us, chain, hop, "PARITY_DROP", "frame=2")
                _push(sim, t_us + AWAIT_TIMEOUT_US, chain, "timeout",
                      (hop, state.await_generation))
                return
        _apply_command(sim, t_us, chain, hop, tuple(frames))
        return
    # forward with the decremented address byte
    if hop + 1 >= sim.topology.chains[chain]:
        sim.exited += 1
        _log(sim, t_us, chain, hop, "EXIT_END",
             f"addr_remaining={decision.forwarded.data >> 1}")
        return
    hop_us = round(sim.latency.hop_us)
    link = hop + 1
    start = max(t_us, sim._link_free_us[chain][link])
    sim._link_free_us[chain][link] = start + hop_us
    _push(sim, start + hop_us, chain, "arrival",
          _Transit((decision.forwarded,) + tuple(frames[1:]), link))


def _handle_timeout(sim: SimState, t_us: int, chain: int, payload):
    unit, generation = payload
    state = sim.units[chain][unit]
    if state.phase is Phase.AWAIT_SECOND_BYTE \
            and state.await_generation == generation:
        state.phase = Phase.ACTIVE if state.drive is not None else Phase.IDLE
        _log(sim, t_us, chain, unit, "AWAIT_TIMEOUT")


def run_until(sim: SimState, t_us: int) -> list:
    """Apply every queued event with timestamp <= t_us, in order."""
    if t_us < sim.clock_us:
        raise RangeError("cannot run backwards")
    start = len(sim.log)
    while sim._queue and sim._queue[0][0] <= t_us:
        ev_t, chain, _, kind, payload = heapq.heappop(sim._queue)
        sim.clock_us = ev_t
        if kind == "arrival":
            _handle_arrival(sim, ev_t, chain, payload)
        else:
            _handle_timeout(sim, ev_t, chain, payload)
    sim.clock_us = t_us
    return sim.log[start:]


def drain(sim: SimState) -> list:
    """Run until no pending events remain."""
    out = []
    while sim._queue:
        out.extend(run_until(sim, sim._queue[0][0]))
    return out


def drive_at(sim: SimState, chain: int, unit: int, t_us: int):
    """Drive tuple in effect at a past instant, from the recorded trace."""
    found = None
    for seg in sim.traces[(chain, unit)]:
        if seg.start_us <= t_us and (seg.end_us is None or t_us < seg.end_us):
            found = seg
    return found


def active_units(sim: SimState, t_us: int) -> set:
    out = set()
    for key in sim.traces:
        if drive_at(sim, key[0], key[1], t_us) is not None:
            out.add(key)
    return out


def sample_acceleration(sim: SimState, unit, t_us: int) -> float:
    """Synthesized actuator output for the unit's current drive state."""
    chain, index = unit
    state = sim.units[chain][index]
    if state.drive is None:
        return 0.0
    intensity, freq_idx, wave = state.drive
    amp = duty_fraction(intensity)
    angle = 2.0 * math.pi * FREQUENCIES_HZ[freq_idx] * (t_us / 1e6)
    s = math.sin(angle)
    if wave is WaveShape.SQUARE:
        return amp * (1.0 if s >= 0 else -1.0)
    return amp * s


def format_event_log(sim: SimState) -> str:
    lines = [
        f"{r.t_us} {r.chain} {r.unit} {r.kind} {r.detail}" for r in sim.log
    ]
    return "\n".join(lines) + ("\n" if lines else "")


# --- wire harness electrical model -----------------------------------------
#
# Three wires run down each chain: an actuator supply at half the per-segment
# resistance, an MCU supply, and a shared ground returning both currents.
# The voltage seen by the last unit on a line is the supply minus the feed
# drop on that line's wire minus the shared ground drop.  With per-segment
# resistance r and 1-based positions p, the drop at the last node of a wire
# carrying per-unit currents I_p is r_wire * sum(p * I_p).  A CLOSED loop
# feeds each wire from both ends, which exactly halves the last-node drop.


class LineVoltages(NamedTuple):
    v_mcu_last: float
    v_actuator_last: float


def _weighted_load(flags, unit_current: float) -> float:
    return sum(p * unit_current for p, on in enumerate(flags, start=1) if on)


def last_node_voltages(topology: Topology, active_flags,
                       chain_id: int = 0) -> LineVoltages:
    n = topology.chains[chain_id]
    flags = list(active_flags)
    if len(flags) != n:
        raise TopologyError(
            f"{len(flags)} flags for a {n}-unit chain"
        )
    r = topology.wire_resistance_per_segment_ohm
    mcu_feed = _weighted_load([True] * n, MCU_IDLE_CURRENT_A) * r
    act_feed = _weighted_load(flags, ACTUATOR_CURRENT_A) * (r / 2.0)
    ground = (
        _weighted_load([True] * n, MCU_IDLE_CURRENT_A)
        + _weighted_load(flags, ACTUATOR_CURRENT_A)
    ) * r
    if topology.loop_modes[chain_id] is LoopMode.CLOSED:
        mcu_feed, act_feed, ground = (
            mcu_feed / 2.0, act_feed / 2.0, ground / 2.0
        )
    supply = topology.supply_voltage_v
    return LineVoltages(
        v_mcu_last=supply - mcu_feed - ground,
        v_actuator_last=supply - act_feed - ground,
    )


def voltage_sweep(topology: Topology, chain_id: int = 0) -> list:
    """Last-node voltages as the first k units run, k = 0..chain length."""
    n = topology.chains[chain_id]
    out = []
    for k in range(n + 1):
        flags = [True] * k + [False] * (n - k)
        out.append(last_node_voltages(topology, flags, chain_id))
    return out


def calibrate_chain_resistance(target_v: float, line: str, chain_len: int,
                               active_count: int,
                               mode: LoopMode = LoopMode.OPEN,
                               supply_v: float = DEFAULT_SUPPLY_V) -> float:
    """1-D bisection for the per-segment resistance hitting a target voltage.

    Last-node voltage is strictly decreasing in r, so bisection on
    [1e-6, 10] ohm converges to the unique solution.
    """
    if line not in ("mcu", "actuator"):
        raise RangeError(f"unknown line {line!r}")
    flags = [True] * active_count + [False] * (chain_len - active_count)

    def v(r: float) -> float:
        topo = Topology(
            chains=(chain_len,), loop_modes=(mode,),
            wire_resistance_per_segment_ohm=r, supply_voltage_v=supply_v,
        )
        volts = last_node_voltages(topo, flags)
        return volts.v_mcu_last if line == "mcu" else volts.v_actuator_last

    lo, hi = 1e-6, 10.0
    if not v(hi) <= target_v <= v(lo):
        raise RangeError(f"target {target_v} V unreachable on {line} line")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if v(mid) >= target_v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_sweep_resistance() -> float:
    """Resistance placing the sweep's threshold crossings at 17 and 18 units.

    On an 18-unit chain the MCU line must stay at or above 2.3 V with 16
    active but cross below at 17, while the actuator line must hold 0.9 V
    at 17 active and cross below at 18.  Each bound is one bisection; the
    midpoint of the feasible interval is returned.
    """
    r_min = calibrate_chain_resistance(MCU_MIN_V, "mcu", 18, 17)
    r_max = calibrate_chain_resistance(ACTUATOR_MIN_V, "actuator", 18, 17)
    return 0.5 * (r_min + r_max)


def estimate_power(topology: Topology, duty_profile=None,
                   capacity_mah: float = 500.0):
    """Bulk current draw and battery life for a duty-cycle profile.

    duty_profile maps (chain, unit) to the fraction of time the actuator
    runs; absent units idle.  Current is the control unit's constant draw
    plus per-unit MCU draw plus duty-weighted actuator draw.
    """
    duties = dict(duty_profile or {})
    for key, value in duties.items():
        chain, unit = key
        if not 0 <= chain < len(topology.chains) \
                or not 0 <= unit < topology.chains[chain]:
            raise TopologyError(f"no unit {key}")
        if not 0.0 <= value <= 1.0:
            raise RangeError(f"duty for {key} must be 0..1, got {value}")
    if capacity_mah <= 0:
        raise RangeError("capacity must be positive")
    current = (
        CONTROL_UNIT_CURRENT_A
        + MCU_IDLE_CURRENT_A * topology.unit_count
        + ACTUATOR_CURRENT_A * sum(duties.values())
    )
    hours = capacity_mah / 1000.0 / current
    return current, hours


def load_topology(source) -> tuple:
    """Read (Topology, LatencyModel) from a JSON config file or mapping.

    Schema: {"chains": [{"length": int, "loop": "OPEN"|"CLOSED"}, ...],
    "wire_resistance_per_segment_ohm": float, "supply_voltage_v": float,
    "latency": {"ble_one_way_ms": f, "hop_us": f, "ble_processing_ms": f}}.
    Only "chains" is required.
    """
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            doc = json.load(fh)
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = source
    if not isinstance(doc, dict) or "chains" not in doc:
        raise TopologyError("config must be an object with a chains list")
    lengths = []
    modes = []
    for entry in doc["chains"]:
        if isinstance(entry, dict):
            lengths.append(int(entry["length"]))
            modes.append(LoopMode(entry.get("loop", "OPEN")))
        else:
            lengths.append(int(entry))
            modes.append(LoopMode.OPEN)
    kwargs = {}
    if "wire_resistance_per_segment_ohm" in doc:
        kwargs["wire_resistance_per_segment_ohm"] = float(
            doc["wire_resistance_per_segment_ohm"]
        )
    if "supply_voltage_v" in doc:
        kwargs["supply_voltage_v"] = float(doc["supply_voltage_v"])
    topo = Topology(chains=tuple(lengths), loop_modes=tuple(modes), **kwargs)
    latency = LatencyModel(**doc.get("latency", {}))
    return topo, latency
