"""Frame synthesis for live playback.

Playback is a simulation replay: the pattern is compiled, scheduled, and
dispatched through the in-process loopback, then the recorded actuator
traces are sampled at the UI frame rate.  Frames therefore carry the real
transport latency instead of an idealized timeline.
"""

import math

from .. import pattern, scheduler, simulator
from ..protocol import Action, VibrationCommand
from ..simulator import Topology

FRAME_RATE_HZ = 30.0
FRAME_STEP_MS = 1000.0 / FRAME_RATE_HZ


def unit_grid(doc) -> list:
    """Every (chain, address) pair in document order."""
    return [(c, u.address)
            for c, chain in enumerate(doc.chains)
            for u in chain]


def _simulate(doc, commands):
    sim = simulator.build(Topology(tuple(len(c) for c in doc.chains)))
    result = scheduler.schedule_report(commands)
    with scheduler.SimLoopback(sim) as loop:
        scheduler.dispatch(result.packets, loop)
    simulator.drain(sim)
    return sim


def _frame(sim, units, t_ms: float) -> dict:
    t_us = int(round(t_ms * 1000.0))
    row = []
    for chain, addr in units:
        seg = simulator.drive_at(sim, chain, addr, t_us) if sim else None
        if seg is None:
            row.append({"chain": chain, "addr": addr, "active": False,
                        "intensity": 0, "freq_idx": 0})
        else:
            row.append({"chain": chain, "addr": addr, "active": True,
                        "intensity": seg.intensity,
                        "freq_idx": seg.frequency_index})
    return {"t_ms": round(t_ms, 3), "units": row}


def _sample(sim, units, from_ms: float, end_ms: float) -> list:
    # always at least one frame; the last one lands at or past end_ms,
    # where every trace has closed
    frames = []
    k = 0
    while True:
        t = from_ms + k * FRAME_STEP_MS
        frames.append(_frame(sim, units, t))
        if t >= end_ms:
            return frames
        k += 1


def build_frames(doc, from_ms: float) -> list:
    """30 Hz state frames for a full-pattern playback starting at from_ms."""
    units = unit_grid(doc)
    commands = pattern.compile(doc)
    if not units or not commands:
        return [_frame(None, units, from_ms)]
    sim = _simulate(doc, commands)
    return _sample(sim, units, from_ms, sim.clock_us / 1000.0)


def stop_frames(doc, from_ms: float, cursor_ms: float) -> list:
    """Frames for a playback halted at cursor_ms.

    History up to the cursor is replayed unchanged, commands past it are
    discarded, and every unit whose delivered end state is still active
    (in-flight starts included) receives a STOP on the next scheduler tick.
    With at most one packet of survivors that converges within one tick
    plus one transport latency.
    """
    units = unit_grid(doc)
    kept = [tc for tc in pattern.compile(doc) if tc.t_ms <= cursor_ms]
    if not units or not kept:
        return [_frame(None, units, cursor_ms)]
    base = _simulate(doc, kept)
    active = simulator.active_units(base, base.clock_us)
    stop_t = math.ceil(cursor_ms / scheduler.TICK_MS) * scheduler.TICK_MS
    stops = [pattern.TimedCommand(stop_t, chain, VibrationCommand(addr, Action.STOP))
             for chain, addr in sorted(active)]
    sim = _simulate(doc, kept + stops)
    return _sample(sim, units, from_ms, sim.clock_us / 1000.0)
