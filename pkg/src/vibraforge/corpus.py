"""Built-in composed test waveforms.

Four fixtures spanning the composition features: an amplitude-modulated
beat, the consonant-V phonemic recipe, a cos^2 pulse, and a keyframed
swell.  Each entry is (waveform tree, duration_ms).
"""

from .pattern import (
    Assignment,
    Combinator,
    CombineOp,
    Envelope,
    EnvelopeKind,
    Oscillator,
    PatternDocument,
    Shape,
    Waveform,
    create_chain_grid,
)


def beat_200x5() -> tuple:
    w = Combinator(CombineOp.MULTIPLY, (
        Oscillator(Shape.SINE, 200.0),
        Oscillator(Shape.SINE, 5.0),
    ))
    return w, 2000.0


def consonant_v() -> tuple:
    w = Combinator(CombineOp.MULTIPLY, (
        Oscillator(Shape.SINE, 300.0),
        Oscillator(Shape.SINE, 8.0),
    ))
    return w, 400.0


def cos2_pulse_170() -> tuple:
    w = Combinator(CombineOp.MULTIPLY, (
        Oscillator(Shape.SINE, 170.0),
        Envelope(EnvelopeKind.COS2),
    ))
    return w, 1000.0


def keyframe_swell_235() -> tuple:
    w = Combinator(CombineOp.MULTIPLY, (
        Oscillator(Shape.SINE, 235.0),
        Envelope(EnvelopeKind.KEYFRAMES, (
            (0.0, 0.0), (300.0, 1.0), (900.0, 0.4), (1500.0, 0.0),
        )),
    ))
    return w, 1500.0


def all_waveforms() -> dict:
    """Name -> (waveform, duration_ms) for every corpus entry."""
    return {
        "beat_200x5": beat_200x5(),
        "consonant_v": consonant_v(),
        "cos2_pulse_170": cos2_pulse_170(),
        "keyframe_swell_235": keyframe_swell_235(),
    }


def consonant_v_document() -> PatternDocument:
    """Forearm display pattern: 4 rows of 6 units, the consonant-V burst
    on the sixth unit of every row for its first 400 ms."""
    doc = PatternDocument()
    for row in range(4):
        doc = create_chain_grid(doc, 6, origin=(0.0, float(row)))
    waveform, duration = consonant_v()
    assignments = tuple(
        Assignment(chain, 5, "consonant_v", 0.0, duration)
        for chain in range(4)
    )
    doc = PatternDocument(doc.chains, assignments,
                          {"consonant_v": waveform})
    doc.validate()
    return doc
