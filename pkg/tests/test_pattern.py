"""Waveform trees, documents, importers, compile semantics."""

import math
import random

import numpy as np
import pytest

from vibraforge import corpus
from vibraforge.errors import (
    AliasingError,
    CapacityError,
    OverlapError,
    ParseError,
    RangeError,
    ValidationError,
)
from vibraforge.pattern import (
    Assignment,
    Combinator,
    CombineOp,
    Envelope,
    EnvelopeKind,
    Oscillator,
    PatternDocument,
    Shape,
    TimedCommand,
    UnitRef,
    active_units_at,
    compile,
    create_chain_grid,
    document_from_json,
    document_to_json,
    has_square_carrier,
    import_csv,
    import_keyframes,
    export_csv,
    max_oscillator_freq,
    sample,
)
from vibraforge.protocol import Action, WaveShape
from vibraforge.simulator import (
    LatencyModel,
    Topology,
    build,
    drain,
    drive_at,
    inject_packet,
)

RATE = 44_100.0


def full_sine(freq=170.0):
    return Oscillator(Shape.SINE, freq)


class TestSample:
    def test_consonant_v_is_pointwise_product(self):
        w = Combinator(CombineOp.MULTIPLY, (
            Oscillator(Shape.SINE, 300.0), Oscillator(Shape.SINE, 8.0)))
        out = sample(w, RATE, 400.0)
        assert len(out.samples) == 17_640
        for i in (0, 1, 1000, 9999, 17_639):
            t = i / RATE
            want = math.sin(2 * math.pi * 300 * t) \
                * math.sin(2 * math.pi * 8 * t)
            assert out.samples[i] == pytest.approx(want, abs=1e-12)

    def test_zero_amplitude_renders_zeros(self):
        out = sample(Oscillator(Shape.SINE, 200.0, amplitude=0.0), RATE, 100)
        assert not np.any(out.samples)

    def test_cos2_peaks_mid_and_vanishes_at_ends(self):
        w = Combinator(CombineOp.MULTIPLY, (
            full_sine(170.0), Envelope(EnvelopeKind.COS2)))
        out = sample(w, RATE, 1000.0)
        n = len(out.samples)
        assert abs(out.samples[0]) < 1e-9
        edge = max(np.max(np.abs(out.samples[: n // 50])),
                   np.max(np.abs(out.samples[-n // 50:])))
        mid = np.max(np.abs(out.samples[n // 2 - n // 50: n // 2 + n // 50]))
        assert mid > 0.99
        assert edge < 0.05

    def test_ramp_rises_linearly(self):
        out = sample(Envelope(EnvelopeKind.RAMP), 1000.0, 1000.0)
        assert out.samples[0] == 0.0
        assert out.samples[500] == pytest.approx(0.5, abs=1e-9)
        assert out.samples[999] == pytest.approx(0.999, abs=1e-9)

    def test_aliasing_guard(self):
        with pytest.raises(AliasingError):
            sample(full_sine(300.0), 500.0, 100.0)
        sample(full_sine(300.0), 600.0, 100.0)

    def test_rate_and_duration_guards(self):
        with pytest.raises(RangeError):
            sample(full_sine(), 0.0, 100.0)
        with pytest.raises(RangeError):
            sample(full_sine(), RATE, 0.0)

    def test_square_takes_two_values(self):
        out = sample(Oscillator(Shape.SQUARE, 100.0, amplitude=0.5),
                     8000.0, 100.0)
        assert set(np.round(np.unique(out.samples), 9)) == {-0.5, 0.5}

    def test_triangle_and_saw_cover_range(self):
        tri = sample(Oscillator(Shape.TRIANGLE, 50.0), 8000.0, 1000.0)
        saw = sample(Oscillator(Shape.SAW, 50.0), 8000.0, 1000.0)
        assert np.max(tri.samples) == pytest.approx(1.0, abs=1e-3)
        assert np.min(tri.samples) == pytest.approx(-1.0, abs=1e-3)
        # the saw touches its extremes only at cycle edges, one sample wide
        assert np.max(saw.samples) == pytest.approx(1.0, abs=0.02)
        assert np.min(saw.samples) == pytest.approx(-1.0, abs=0.02)

    def test_phase_offset(self):
        out = sample(Oscillator(Shape.SINE, 100.0, phase=math.pi / 2),
                     8000.0, 10.0)
        assert out.samples[0] == pytest.approx(1.0, abs=1e-12)

    def test_keyframed_frequency_sweep(self):
        osc = Oscillator(Shape.SINE, freq_hz=((0.0, 100.0), (1000.0, 200.0)))
        assert max_oscillator_freq(osc) == 200.0
        out = sample(osc, 8000.0, 1000.0)
        # zero crossings approximate twice the 150 Hz average frequency
        crossings = int(np.sum(np.abs(np.diff(np.signbit(out.samples)))))
        assert abs(crossings - 300) <= 4

    def test_concat_splits_duration(self):
        a = Oscillator(Shape.SINE, 100.0)
        b = Oscillator(Shape.SINE, 200.0)
        both = sample(Combinator(CombineOp.CONCAT, (a, b)), 1000.0, 1000.0)
        first = sample(a, 1000.0, 500.0)
        assert len(both.samples) == 1000
        assert np.array_equal(both.samples[:500], first.samples)

    def test_concat_uneven_split(self):
        w = Combinator(CombineOp.CONCAT, (
            Envelope(EnvelopeKind.RAMP), Envelope(EnvelopeKind.RAMP)))
        out = sample(w, 1000.0, 5.0)
        assert len(out.samples) == 5  # 3 + 2 split

    def test_output_clipped(self):
        # two full-scale sines sum nowhere, but a keyframe envelope of 1
        # times a sine stays within bounds; force clipping via phase trick
        out = sample(full_sine(), RATE, 100.0)
        assert np.all(out.samples <= 1.0) and np.all(out.samples >= -1.0)


class TestWaveformValidation:
    def test_amplitude_range(self):
        with pytest.raises(ValidationError):
            Oscillator(Shape.SINE, 100.0, amplitude=1.5)
        with pytest.raises(ValidationError):
            Oscillator(Shape.SINE, 100.0, amplitude=-0.1)

    def test_frequency_positive(self):
        with pytest.raises(ValidationError):
            Oscillator(Shape.SINE, 0.0)
        with pytest.raises(ValidationError):
            Oscillator(Shape.SINE, freq_hz=((0.0, 100.0), (10.0, -5.0)))

    def test_keyframe_monotonicity(self):
        with pytest.raises(ValidationError):
            Envelope(EnvelopeKind.KEYFRAMES,
                     ((0.0, 0.0), (10.0, 1.0), (10.0, 0.5)))

    def test_keyframe_value_range(self):
        with pytest.raises(ValidationError):
            Envelope(EnvelopeKind.KEYFRAMES, ((0.0, 1.5),))

    def test_parametric_envelopes_take_no_keyframes(self):
        with pytest.raises(ValidationError):
            Envelope(EnvelopeKind.COS2, ((0.0, 1.0),))

    def test_combinator_needs_children(self):
        with pytest.raises(ValidationError):
            Combinator(CombineOp.MULTIPLY, ())

    def test_square_carrier_detection(self):
        assert has_square_carrier(Oscillator(Shape.SQUARE, 170.0))
        assert not has_square_carrier(Oscillator(Shape.SINE, 170.0))
        # a sub-threshold square modulator is not a carrier
        w = Combinator(CombineOp.MULTIPLY, (
            Oscillator(Shape.SINE, 300.0), Oscillator(Shape.SQUARE, 8.0)))
        assert not has_square_carrier(w)


class TestDocumentLayout:
    def test_grid_builds_phonemic_layout(self):
        doc = PatternDocument()
        for row in range(4):
            doc = create_chain_grid(doc, 6, origin=(0.0, float(row)),
                                    spacing=2.0)
        assert len(doc.chains) == 4
        for chain in doc.chains:
            assert [u.address for u in chain] == list(range(6))
        assert doc.chains[2][3].canvas_x == 6.0
        assert doc.chains[2][3].canvas_y == 2.0
        doc.validate()

    def test_ninth_chain_refused(self):
        doc = PatternDocument()
        for _ in range(8):
            doc = create_chain_grid(doc, 4)
        with pytest.raises(CapacityError):
            create_chain_grid(doc, 4)

    def test_seventeen_unit_chain_refused(self):
        with pytest.raises(CapacityError):
            create_chain_grid(PatternDocument(), 17)

    def test_address_must_match_position(self):
        doc = PatternDocument(chains=((UnitRef(1), UnitRef(0)),))
        with pytest.raises(ValidationError):
            doc.validate()

    def test_assignment_guards(self):
        doc = create_chain_grid(PatternDocument(), 4)
        lib = {"w": full_sine()}
        bad_unit = PatternDocument(doc.chains, (Assignment(0, 9, "w", 0, 100),), lib)
        with pytest.raises(ValidationError):
            bad_unit.validate()
        bad_interval = PatternDocument(
            doc.chains, (Assignment(0, 1, "w", 100, 100),), lib)
        with pytest.raises(ValidationError):
            bad_interval.validate()
        missing_wave = PatternDocument(
            doc.chains, (Assignment(0, 1, "nope", 0, 100),), lib)
        with pytest.raises(ValidationError):
            missing_wave.validate()

    def test_overlap_rejected_touching_allowed(self):
        doc = create_chain_grid(PatternDocument(), 4)
        lib = {"w": full_sine()}
        overlapping = PatternDocument(doc.chains, (
            Assignment(0, 1, "w", 0, 200), Assignment(0, 1, "w", 150, 300),
        ), lib)
        with pytest.raises(OverlapError):
            overlapping.validate()
        touching = PatternDocument(doc.chains, (
            Assignment(0, 1, "w", 0, 200), Assignment(0, 1, "w", 200, 300),
        ), lib)
        touching.validate()

    def test_active_units_half_open(self):
        doc = create_chain_grid(PatternDocument(), 4)
        doc = PatternDocument(doc.chains,
                              (Assignment(0, 2, "w", 100, 400),),
                              {"w": full_sine()})
        assert active_units_at(doc, 50) == set()
        assert active_units_at(doc, 100) == {(0, 2)}
        assert active_units_at(doc, 399.9) == {(0, 2)}
        assert active_units_at(doc, 400) == set()


def single_unit_doc(waveform, t_start=0.0, t_end=400.0):
    doc = create_chain_grid(PatternDocument(), 4)
    return PatternDocument(
        doc.chains, (Assignment(0, 0, "w", t_start, t_end),),
        {"w": waveform})


class TestCompile:
    def test_constant_tone_exactly_two_commands(self):
        cmds = compile(single_unit_doc(full_sine(170.0)))
        assert len(cmds) == 2
        first, last = cmds
        assert first.t_ms == 0.0
        assert first.command.action is Action.START
        assert first.command.intensity == 15
        assert first.command.frequency_index == 2
        assert last.t_ms == 400.0
        assert last.command.action is Action.STOP

    def test_empty_document(self):
        assert compile(PatternDocument()) == []

    def test_consonant_v_four_units(self):
        doc = PatternDocument()
        for row in range(4):
            doc = create_chain_grid(doc, 6, origin=(0.0, float(row)))
        w, duration = corpus.consonant_v()
        assignments = tuple(
            Assignment(c, 5, "v", 0.0, duration) for c in range(4))
        doc = PatternDocument(doc.chains, assignments, {"v": w})
        cmds = compile(doc)
        stops = [tc for tc in cmds if tc.command.action is Action.STOP]
        ends = [tc for tc in stops if tc.t_ms == duration]
        assert {tc.chain_id for tc in ends} == {0, 1, 2, 3}
        by_unit = {}
        for tc in cmds:
            by_unit.setdefault((tc.chain_id, tc.command.address),
                               []).append(tc)
        assert set(by_unit) == {(c, 5) for c in range(4)}
        for seq in by_unit.values():
            assert seq[0].command.action is Action.START
            assert seq[-1].command.action is Action.STOP
            assert all(0.0 <= tc.t_ms <= duration for tc in seq)

    def test_output_sorted(self):
        doc = PatternDocument()
        doc = create_chain_grid(doc, 4)
        doc = create_chain_grid(doc, 4)
        w, duration = corpus.beat_200x5()
        doc = PatternDocument(doc.chains, (
            Assignment(1, 2, "b", 0.0, 500.0),
            Assignment(0, 1, "b", 0.0, 500.0),
            Assignment(0, 3, "b", 250.0, 750.0),
        ), {"b": w})
        cmds = compile(doc)
        keys = [(tc.t_ms, tc.chain_id, tc.command.address) for tc in cmds]
        assert keys == sorted(keys)

    def test_every_start_followed_by_stop(self):
        w, duration = corpus.keyframe_swell_235()
        cmds = compile(single_unit_doc(w, 0.0, duration))
        open_units = set()
        for tc in cmds:
            key = (tc.chain_id, tc.command.address)
            if tc.command.action is Action.START:
                open_units.add(key)
            else:
                open_units.discard(key)
        assert open_units == set()
        assert cmds[-1].command.action is Action.STOP

    def test_change_only_emission(self):
        w, duration = corpus.beat_200x5()
        cmds = compile(single_unit_doc(w, 0.0, duration))
        last_drive = None
        for tc in cmds:
            if tc.command.action is Action.START:
                drive = (tc.command.intensity, tc.command.frequency_index)
                assert drive != last_drive
                last_drive = drive
            else:
                last_drive = None

    def test_mid_silence_stop_and_restart(self):
        w = Combinator(CombineOp.CONCAT, (
            full_sine(170.0),
            Oscillator(Shape.SINE, 170.0, amplitude=0.0),
            full_sine(170.0),
        ))
        cmds = compile(single_unit_doc(w, 0.0, 600.0))
        actions = [tc.command.action for tc in cmds]
        assert actions.count(Action.STOP) == 2
        stops = [tc.t_ms for tc in cmds if tc.command.action is Action.STOP]
        assert 150.0 < stops[0] < 300.0
        assert stops[1] == 600.0
        restarts = [tc.t_ms for tc in cmds
                    if tc.command.action is Action.START and tc.t_ms > 300]
        assert restarts

    def test_square_carrier_selects_square_drive(self):
        cmds = compile(single_unit_doc(Oscillator(Shape.SQUARE, 170.0)))
        starts = [tc for tc in cmds if tc.command.action is Action.START]
        assert all(tc.command.waveform is WaveShape.SQUARE for tc in starts)
        cmds = compile(single_unit_doc(full_sine(170.0)))
        starts = [tc for tc in cmds if tc.command.action is Action.START]
        assert all(tc.command.waveform is WaveShape.SINE for tc in starts)

    def test_overlap_rejected_at_compile(self):
        doc = create_chain_grid(PatternDocument(), 4)
        doc = PatternDocument(doc.chains, (
            Assignment(0, 0, "w", 0, 300), Assignment(0, 0, "w", 200, 500),
        ), {"w": full_sine()})
        with pytest.raises(OverlapError):
            compile(doc)


class TestCompileSimOracle:
    def test_randomized_documents_replay_on_simulator(self):
        rng = random.Random(4242)
        for _ in range(6):
            lengths = [rng.randint(1, 8)
                       for _ in range(rng.randint(1, 4))]
            doc = PatternDocument()
            for n in lengths:
                doc = create_chain_grid(doc, n)
            lib = {"w": full_sine(170.0)}
            taken = set()
            assignments = []
            for _ in range(rng.randint(1, 6)):
                chain = rng.randrange(len(lengths))
                addr = rng.randrange(lengths[chain])
                if (chain, addr) in taken:
                    continue
                taken.add((chain, addr))
                s = 5 * rng.randint(0, 60)
                e = s + 5 * rng.randint(10, 60)
                assignments.append(
                    Assignment(chain, addr, "w", float(s), float(e)))
            doc = PatternDocument(doc.chains, tuple(assignments), lib)
            cmds = compile(doc)

            sim = build(Topology(chains=tuple(lengths)))
            for tc in sorted(cmds, key=lambda tc: tc.t_ms):
                inject_packet(sim, tc.chain_id, [tc.command],
                              int(round(tc.t_ms * 1000)))
            drain(sim)

            transport_ms = 16.0
            for a in assignments:
                segs = sim.traces[(a.chain_id, a.address)]
                assert len(segs) == 1
                start_ms = segs[0].start_us / 1000.0
                end_ms = segs[0].end_us / 1000.0
                assert abs(start_ms - (a.t_start_ms + transport_ms)) <= 7.0
                assert abs(end_ms - (a.t_end_ms + transport_ms)) <= 7.0
            for key in sim.traces:
                if key not in taken:
                    assert sim.traces[key] == []
            for _ in range(10):
                t = rng.uniform(0, 700)
                if any(abs(t - b) < 12.0
                       for a in assignments
                       for b in (a.t_start_ms, a.t_end_ms)):
                    continue
                want = active_units_at(doc, t)
                got = {
                    key for key in sim.traces
                    if drive_at(sim, key[0], key[1],
                                int((t + transport_ms) * 1000)) is not None
                }
                assert got == want


class TestImportKeyframes:
    def test_triangle_envelope_document(self):
        w = import_keyframes(
            {"amp": [[0, 0], [100, 1], [400, 0]]})
        assert isinstance(w, Combinator)
        osc, env = w.children
        assert osc.freq_hz == 170.0
        assert env.keyframes == ((0.0, 0.0), (100.0, 1.0), (400.0, 0.0))
        out = sample(w, RATE, 400.0)
        peak_at = np.argmax(np.abs(out.samples)) / RATE * 1000.0
        assert 80.0 <= peak_at <= 120.0

    def test_frequency_list_honored(self):
        w = import_keyframes({
            "amp": [[0, 1]],
            "freq": [[0, 150], [500, 300]],
        })
        osc = w.children[0]
        assert osc.freq_hz == ((0.0, 150.0), (500.0, 300.0))

    def test_empty_amp_refused(self):
        with pytest.raises(ParseError):
            import_keyframes({"amp": []})
        with pytest.raises(ParseError):
            import_keyframes({})

    def test_out_of_range_amplitude_refused(self):
        with pytest.raises(ValidationError):
            import_keyframes({"amp": [[0, 1.5]]})

    def test_non_monotone_times_refused(self):
        with pytest.raises(ValidationError):
            import_keyframes({"amp": [[0, 0], [50, 1], [50, 0]]})

    def test_malformed_json_text(self):
        with pytest.raises(ParseError):
            import_keyframes("{not json")
        with pytest.raises(ParseError):
            import_keyframes("[1, 2, 3]")
        with pytest.raises(ParseError):
            import_keyframes({"amp": [[0]]})

    def test_json_text_accepted(self):
        w = import_keyframes('{"amp": [[0, 0], [200, 1]]}')
        assert isinstance(w, Combinator)


class TestCsvRoundTrip:
    def test_export_import_identity(self, tmp_path):
        w, duration = corpus.consonant_v()
        rendered = sample(w, 8000.0, duration)
        path = tmp_path / "wave.csv"
        with open(path, "w") as fh:
            export_csv(rendered, fh)
        with open(path) as fh:
            again = import_csv(fh)
        assert again.sample_rate_hz == rendered.sample_rate_hz
        assert np.array_equal(again.samples, rendered.samples)


class TestPersistence:
    def build_doc(self):
        doc = PatternDocument()
        doc = create_chain_grid(doc, 6, origin=(0.0, 0.0), spacing=1.5)
        doc = create_chain_grid(doc, 3, origin=(0.0, 2.0))
        lib = {
            "beat": corpus.beat_200x5()[0],
            "swell": corpus.keyframe_swell_235()[0],
            "sweep": Oscillator(Shape.SINE,
                                freq_hz=((0.0, 120.0), (800.0, 350.0))),
            "pulse": corpus.cos2_pulse_170()[0],
        }
        return PatternDocument(doc.chains, (
            Assignment(0, 2, "beat", 0.0, 500.0),
            Assignment(1, 1, "swell", 100.0, 900.0),
        ), lib)

    def test_round_trip_identity(self):
        doc = self.build_doc()
        text = document_to_json(doc)
        again = document_from_json(text)
        assert again == doc

    def test_version_check(self):
        with pytest.raises(ParseError):
            document_from_json('{"version": 99}')

    def test_bad_json(self):
        with pytest.raises(ParseError):
            document_from_json("{")
        with pytest.raises(ParseError):
            document_from_json('[]')

    def test_bad_waveform_node(self):
        with pytest.raises(ParseError):
            document_from_json(
                '{"version": 1, "chains": [], "assignments": [], '
                '"waveforms": {"x": {"type": "mystery"}}}')

    def test_validation_applies_on_load(self):
        text = ('{"version": 1, '
                '"chains": [[{"address": 1, "x": 0, "y": 0}]], '
                '"assignments": [], "waveforms": {}}')
        with pytest.raises(ValidationError):
            document_from_json(text)


class TestCorpus:
    def test_four_waveforms_render(self):
        entries = corpus.all_waveforms()
        assert set(entries) == {
            "beat_200x5", "consonant_v", "cos2_pulse_170",
            "keyframe_swell_235",
        }
        for name, (w, duration) in entries.items():
            rendered = sample(w, RATE, duration)
            assert len(rendered.samples) == round(duration / 1000.0 * RATE)
            assert np.max(np.abs(rendered.samples)) > 0.3
