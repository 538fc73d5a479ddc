"""Machine-readable evaluation tables.

Four report kinds cover the system's operating envelope: the latency
breakdown down a chain, the sustained command bandwidth, battery life
for wearable configurations, and the voltage sag along a chain as more
actuators switch on.  Reports are pure functions of their inputs and
serialize as line-oriented ``key value`` text with a fixed row order, so
identical configurations produce byte-identical files.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from .errors import RangeError, ValidationError
from .protocol import Action, VibrationCommand
from .scheduler import SimLoopback, dispatch, schedule
from . import simulator
from .simulator import (
    ACTUATOR_MIN_V,
    LatencyModel,
    LoopMode,
    MCU_MIN_V,
    Topology,
)

# The eight-unit demonstration chain: open-loop sag from 5.0 V to 3.1 V
# pins the per-segment resistance of that rig.
DEMO_CHAIN_LENGTH = 8
DEMO_SEGMENT_RESISTANCE_OHM = 1.9 / 8.19


class ReportKind(Enum):
    LATENCY = "latency"
    BANDWIDTH = "bandwidth"
    POWER = "power"
    VOLTAGE_SWEEP = "voltage_sweep"


@dataclass(frozen=True)
class Report:
    """Ordered key/value rows plus a fingerprint of the configuration."""

    kind: ReportKind
    rows: tuple
    fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self.rows:
            raise ValidationError("a report must contain at least one row")
        for row in self.rows:
            if len(row) != 2:
                raise ValidationError("rows must be (key, value) pairs")


def config_fingerprint(topology: Topology,
                       latency: Optional[LatencyModel] = None) -> str:
    """Twelve hex digits identifying topology plus latency model."""
    latency = latency or LatencyModel()
    chains = ",".join(
        f"{length}:{mode.name}"
        for length, mode in zip(topology.chains, topology.loop_modes)
    )
    text = ";".join([
        chains,
        repr(topology.wire_resistance_per_segment_ohm),
        repr(topology.supply_voltage_v),
        repr(latency.ble_one_way_ms),
        repr(latency.hop_us),
        repr(latency.ble_processing_ms),
    ])
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def report_to_text(report: Report) -> str:
    lines = [f"kind {report.kind.value}", f"fingerprint {report.fingerprint}"]
    lines.extend(f"{key} {value}" for key, value in report.rows)
    return "\n".join(lines) + "\n"


def write_report(report: Report, sink) -> None:
    """Serialize to a path or an open text file."""
    text = report_to_text(report)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)


def latency_report(topology: Topology,
                   latency: Optional[LatencyModel] = None) -> Report:
    """Per-hop activation times along the longest chain.

    A single command addressed to unit h lands ble_one_way + (h+1) hop
    times after sending; the chain total is ble_one_way + length x hop.
    """
    latency = latency or LatencyModel()
    if not topology.chains:
        raise ValidationError("topology has no chains")
    n = max(topology.chains)
    ble_ms = latency.ble_one_way_ms
    hop_ms = latency.hop_us / 1000.0
    rows = [
        ("ble_one_way_ms", f"{ble_ms:.3f}"),
        ("hop_us", f"{latency.hop_us:.3f}"),
        ("chain_length", str(n)),
    ]
    for h in range(n):
        rows.append((f"unit_{h:02d}_ms", f"{ble_ms + (h + 1) * hop_ms:.3f}"))
    rows.append(("total_ms", f"{ble_ms + n * hop_ms:.3f}"))
    return Report(ReportKind.LATENCY, tuple(rows),
                  config_fingerprint(topology, latency))


def bandwidth_report(topology: Optional[Topology] = None,
                     latency: Optional[LatencyModel] = None) -> Report:
    """Sustained-throughput experiment: 1000 full packets at one per tick.

    Five commands go out every 5 ms tick for five seconds; the simulator
    then accounts for every command.  The tick budget covers the
    measured radio processing time with margin.
    """
    topology = topology or Topology((16,))
    latency = latency or LatencyModel()
    stream = []
    for tick in range(1000):
        for address in range(5):
            stream.append((
                5.0 * tick, 0,
                VibrationCommand(address, Action.START,
                                 (tick % 15) + 1, 2),
            ))
    packets = schedule(stream)
    sim = simulator.build(topology, latency)
    dispatch(packets, SimLoopback(sim))
    simulator.drain(sim)
    delivered = sim.consumed + sim.exited
    rows = [
        ("tick_ms", "5.000"),
        ("ble_processing_ms", f"{latency.ble_processing_ms:.3f}"),
        ("packet_rate_hz", "200.000"),
        ("commands_per_packet", "5"),
        ("command_rate_hz", "1000.000"),
        ("packets_sent", str(len(packets))),
        ("commands_sent", str(sim.injected)),
        ("commands_delivered", str(delivered)),
        ("commands_lost", str(sim.dropped)),
        ("duration_s", f"{len(packets) * 5.0 / 1000.0:.3f}"),
    ]
    return Report(ReportKind.BANDWIDTH, tuple(rows),
                  config_fingerprint(topology, latency))


class BatteryScenario(NamedTuple):
    """A wearable configuration: units on chains of 16, some always on."""

    name: str
    total_units: int
    active_units: int
    capacity_mah: float


DEFAULT_BATTERY_SCENARIOS = (
    BatteryScenario("units32_idle", 32, 0, 500.0),
    BatteryScenario("units32_active2", 32, 2, 500.0),
    BatteryScenario("units64_idle", 64, 0, 8200.0),
    BatteryScenario("units64_active8", 64, 8, 8200.0),
)


def _scenario_topology(total_units: int) -> Topology:
    lengths = [16] * (total_units // 16)
    if total_units % 16:
        lengths.append(total_units % 16)
    return Topology(tuple(lengths))


def battery_report(scenarios=()) -> Report:
    """Current draw and battery life, standard rows first.

    Each scenario runs its first active_units actuators at full duty on
    chains of sixteen.  Extra scenarios append after the standard four.
    """
    rows = []
    for scenario in tuple(DEFAULT_BATTERY_SCENARIOS) + tuple(scenarios):
        name, units, active, capacity = scenario
        if units < 0 or active < 0 or active > units:
            raise RangeError(f"bad scenario {name}: {active} of {units} active")
        topology = _scenario_topology(units)
        duty = {}
        remaining = active
        for chain, length in enumerate(topology.chains):
            for unit in range(min(length, remaining)):
                duty[(chain, unit)] = 1.0
            remaining -= min(length, remaining)
        current_a, hours = simulator.estimate_power(topology, duty, capacity)
        rows.extend([
            (f"{name}_units", str(units)),
            (f"{name}_active", str(active)),
            (f"{name}_capacity_mah", f"{capacity:.0f}"),
            (f"{name}_current_ma", f"{current_a * 1000.0:.1f}"),
            (f"{name}_hours", f"{hours:.2f}"),
        ])
    topology = _scenario_topology(DEFAULT_BATTERY_SCENARIOS[0].total_units)
    return Report(ReportKind.POWER, tuple(rows),
                  config_fingerprint(topology))


def voltage_sweep_report(topology: Optional[Topology] = None,
                         chain_id: int = 0) -> Report:
    """Last-node voltages as the first k units switch on, k = 0..length.

    Crossing rows give the first k that sags below each operating
    threshold.  The demo block reproduces the eight-unit rig: open loop
    sags the actuator line to 3.1 V, closing the loop recovers it.
    """
    topology = topology or Topology((18,))
    sweep = simulator.voltage_sweep(topology, chain_id)
    rows = [
        ("chain_length", str(topology.chains[chain_id])),
        ("loop_mode", topology.loop_modes[chain_id].name),
        ("wire_resistance_per_segment_ohm",
         repr(topology.wire_resistance_per_segment_ohm)),
        ("supply_v", f"{topology.supply_voltage_v:.4f}"),
        ("mcu_threshold_v", f"{MCU_MIN_V:.4f}"),
        ("actuator_threshold_v", f"{ACTUATOR_MIN_V:.4f}"),
    ]
    mcu_crossing = None
    act_crossing = None
    for k, volts in enumerate(sweep):
        rows.append((f"k_{k:02d}_mcu_v", f"{volts.v_mcu_last:.4f}"))
        rows.append((f"k_{k:02d}_actuator_v", f"{volts.v_actuator_last:.4f}"))
        if mcu_crossing is None and volts.v_mcu_last < MCU_MIN_V:
            mcu_crossing = k
        if act_crossing is None and volts.v_actuator_last < ACTUATOR_MIN_V:
            act_crossing = k
    rows.append(("mcu_crossing_k",
                 "none" if mcu_crossing is None else str(mcu_crossing)))
    rows.append(("actuator_crossing_k",
                 "none" if act_crossing is None else str(act_crossing)))

    demo_open = Topology((DEMO_CHAIN_LENGTH,),
                         wire_resistance_per_segment_ohm=
                         DEMO_SEGMENT_RESISTANCE_OHM)
    demo_closed = Topology((DEMO_CHAIN_LENGTH,), (LoopMode.CLOSED,),
                           wire_resistance_per_segment_ohm=
                           DEMO_SEGMENT_RESISTANCE_OHM)
    all_on = [True] * DEMO_CHAIN_LENGTH
    v_open = simulator.last_node_voltages(demo_open, all_on)
    v_closed = simulator.last_node_voltages(demo_closed, all_on)
    rows.extend([
        ("demo_chain_length", str(DEMO_CHAIN_LENGTH)),
        ("demo_wire_resistance_per_segment_ohm",
         repr(DEMO_SEGMENT_RESISTANCE_OHM)),
        ("demo_open_actuator_v", f"{v_open.v_actuator_last:.4f}"),
        ("demo_closed_actuator_v", f"{v_closed.v_actuator_last:.4f}"),
    ])
    return Report(ReportKind.VOLTAGE_SWEEP, tuple(rows),
                  config_fingerprint(topology))
