"""Audio-band signal analysis and 200 Hz command-frame segmentation.

A single-channel waveform is reduced to one frame per 5 ms carrying
(active, intensity 0..15, frequency index 0..7).  The carrier frequency
comes from a short-time spectrum (1024-sample Hann windows, parabolic peak
interpolation); the intensity from a rectified, low-passed amplitude
envelope normalized to the file-wide maximum.  Content without a carrier
above 100 Hz renders at the resonant default frequency.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import (
    BelowThresholdError,
    EmptyInputError,
    NormalizationError,
    ParseError,
    RangeError,
)
from .protocol import FREQUENCIES_HZ, MAX_INTENSITY

FRAME_RATE_HZ = 200
FRAME_PERIOD_MS = 1000.0 / FRAME_RATE_HZ
SILENCE_FLOOR = 0.02
CARRIER_THRESHOLD_HZ = 100.0
DEFAULT_FREQUENCY_INDEX = 2  # 170 Hz, the resonant default drive
DEFAULT_WINDOW_LEN = 1024
MIN_WINDOW_LEN = 256

_LOG_FREQUENCIES = np.log(np.asarray(FREQUENCIES_HZ))


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled single-channel signal."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise RangeError(f"expected a 1-D signal, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise RangeError("signal contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise RangeError(f"sample rate must be positive, got {self.sample_rate_hz}")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


class Frame(NamedTuple):
    active: bool
    intensity: int
    frequency_index: int


@dataclass
class SegmentedStream:
    """Per-5 ms command frames for one signal."""

    frames: list = field(default_factory=list)
    frame_rate_hz: int = FRAME_RATE_HZ


def quantize_frequency(hz: float) -> int:
    """Nearest table index in log-frequency; clamps outside the table range.

    Frequencies at or below 100 Hz are not renderable as a carrier and raise
    BelowThresholdError.
    """
    if not math.isfinite(hz) or hz <= 0:
        raise RangeError(f"frequency must be positive and finite, got {hz}")
    if hz <= CARRIER_THRESHOLD_HZ:
        raise BelowThresholdError(f"{hz} Hz is below the renderable carrier band")
    return int(np.argmin(np.abs(_LOG_FREQUENCIES - math.log(hz))))


def quantize_intensity(env_value: float, env_max: float) -> int:
    """Map an envelope value to a 0..15 level, rounding half up."""
    if env_max <= 0:
        raise NormalizationError(f"envelope maximum must be positive, got {env_max}")
    if env_value < 0:
        raise RangeError(f"envelope value must be non-negative, got {env_value}")
    level = math.floor(env_value / env_max * MAX_INTENSITY + 0.5)
    return min(max(level, 0), MAX_INTENSITY)


def _frame_starts(n: int, window_len: int, hop_len: int) -> range:
    if n <= window_len:
        return range(0, 1)
    last = (n - window_len) // hop_len
    return range(0, (last + 1) * hop_len, hop_len)


def dominant_frequency(
    waveform: SampledWaveform,
    window_len: int = DEFAULT_WINDOW_LEN,
    hop_len: Optional[int] = None,
) -> list:
    """Per-window dominant frequency in Hz, or None for silent windows.

    Windows are Hann-weighted; the peak bin is refined by parabolic
    interpolation of log magnitudes.  A window is silent when its RMS falls
    below the 2 % relative floor.
    """
    x = waveform.samples
    rate = waveform.sample_rate_hz
    if len(x) == 0:
        raise EmptyInputError("cannot analyse an empty signal")
    if window_len < MIN_WINDOW_LEN:
        raise RangeError(f"window must be at least {MIN_WINDOW_LEN} samples")
    if hop_len is None:
        hop_len = round(rate / FRAME_RATE_HZ)
    if hop_len < 1:
        raise RangeError(f"hop must be at least one sample, got {hop_len}")

    if len(x) < window_len:
        x = np.pad(x, (0, window_len - len(x)))
    window = np.hanning(window_len)
    starts = _frame_starts(len(x), window_len, hop_len)
    segments = np.stack([x[s : s + window_len] for s in starts])
    rms = np.sqrt(np.mean(segments**2, axis=1))
    floor = SILENCE_FLOOR * rms.max()

    spectra = np.abs(np.fft.rfft(segments * window, axis=1))
    result = []
    for i in range(len(starts)):
        if rms.max() == 0 or rms[i] <= floor:
            result.append(None)
            continue
        mags = spectra[i]
        peak = int(np.argmax(mags))
        delta = 0.0
        if 0 < peak < len(mags) - 1:
            with np.errstate(divide="ignore"):
                a, b, c = np.log(mags[peak - 1 : peak + 2] + 1e-300)
            denom = a - 2 * b + c
            if denom != 0:
                delta = 0.5 * (a - c) / denom
                delta = float(np.clip(delta, -0.5, 0.5))
        result.append((peak + delta) * rate / window_len)
    return result


ENVELOPE_CUTOFF_HZ = 40.0
ENVELOPE_ORDER = 4


def envelope(waveform: SampledWaveform) -> np.ndarray:
    """Amplitude envelope: rectify, zero-phase low-pass, correct the gain.

    Full-wave rectification of a sinusoidal carrier has mean 2/pi times the
    amplitude, so the smoothed series is scaled by pi/2 to read in carrier
    amplitude units.  Even-symmetric padding keeps the rectified signal
    non-negative across the filter edges; padlen must cover the filter's
    settling span, far longer than filtfilt's default.
    """
    x = waveform.samples
    n = len(x)
    if n == 0:
        raise EmptyInputError("cannot analyse an empty signal")
    rate = waveform.sample_rate_hz
    cutoff = min(ENVELOPE_CUTOFF_HZ, 0.45 * rate)
    b, a = butter(ENVELOPE_ORDER, cutoff / (rate / 2.0))
    padlen = int(min(n - 1, 3 * math.ceil(rate / cutoff)))
    env = (np.pi / 2.0) * filtfilt(b, a, np.abs(x), padtype="even", padlen=padlen)
    return np.maximum(env, 0.0)


def _debounce_indices(raw: list) -> list:
    """Frequency-index hysteresis: switch only after two consecutive frames agree."""
    out = []
    current = None
    previous = None
    for idx in raw:
        if idx is not None:
            if current is None:
                current = idx
            elif idx != current and idx == previous:
                current = idx
        previous = idx
        out.append(current)
    return out


def frame_count(waveform: SampledWaveform) -> int:
    """Number of 5 ms frames covering the signal: ceil(duration * 200)."""
    exact = len(waveform.samples) * FRAME_RATE_HZ / waveform.sample_rate_hz
    return max(1, math.ceil(round(exact, 9)))


def segment(waveform: SampledWaveform) -> SegmentedStream:
    """Full pipeline: envelope + dominant frequency -> 5 ms command frames."""
    x = waveform.samples
    rate = waveform.sample_rate_hz
    if len(x) == 0:
        raise EmptyInputError("cannot segment an empty signal")

    n_frames = frame_count(waveform)
    env = envelope(waveform)
    # The smoothing filter rings within its settle span at the edges, so a
    # steady tone would quantize to a different level on its first or last
    # frame.  Holding the outer half-settle region at the first interior
    # value pins edge frames to the steady level; genuinely varying
    # envelopes move little over that span (well under the filter period).
    settle = int(math.ceil(rate / ENVELOPE_CUTOFF_HZ))
    hold = min(settle // 2, len(env) // 4)
    if hold > 0:
        env[:hold] = env[hold]
        env[-hold:] = env[-hold - 1]
    # Normalize to the core maximum: edge values above it clamp to full
    # scale while interior levels stay exact.
    if len(env) > 3 * settle:
        env_max = float(env[settle:-settle].max())
    else:
        env_max = float(env.max())

    hop_len = max(1, round(rate / FRAME_RATE_HZ))
    window_len = min(DEFAULT_WINDOW_LEN, max(MIN_WINDOW_LEN, len(x)))
    raw_freqs = dominant_frequency(waveform, window_len=window_len, hop_len=hop_len)
    raw_indices = []
    for hz in raw_freqs:
        if hz is None or hz <= CARRIER_THRESHOLD_HZ:
            raw_indices.append(None)
        else:
            raw_indices.append(quantize_frequency(hz))
    raw_indices = _debounce_indices(raw_indices)
    # Window centres anchor raw analysis frames on the time axis.
    raw_times = (
        np.arange(len(raw_indices)) * hop_len + window_len / 2
    ) / rate

    frames = []
    for k in range(n_frames):
        t = k / FRAME_RATE_HZ
        sample_idx = min(len(env) - 1, round(t * rate))
        env_k = float(env[sample_idx])
        active = env_max > 0 and env_k >= SILENCE_FLOOR * env_max
        if active:
            intensity = quantize_intensity(env_k, env_max)
        else:
            intensity = 0
        nearest_raw = int(np.argmin(np.abs(raw_times - t)))
        idx = raw_indices[nearest_raw]
        frames.append(
            Frame(active, intensity, DEFAULT_FREQUENCY_INDEX if idx is None else idx)
        )
    return SegmentedStream(frames)


def read_waveform_csv(source) -> SampledWaveform:
    """Load a sample file: header line ``rate=<hz>``, then one sample per line.

    source is a path or an open text file.
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
        path = getattr(source, "name", "<stream>")
    else:
        path = source
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    if not lines:
        raise EmptyInputError(f"{path} is empty")
    header = lines[0].strip()
    if not header.startswith("rate="):
        raise ParseError(f"missing rate= header in {path}", offset=1)
    try:
        rate = float(header[len("rate=") :])
    except ValueError:
        raise ParseError(f"bad rate header {header!r}", offset=1) from None
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        text = line.strip()
        if not text:
            continue
        try:
            samples.append(float(text))
        except ValueError:
            raise ParseError(f"bad sample {text!r} on line {lineno}", offset=lineno) from None
    if not samples:
        raise EmptyInputError(f"{path} carries no samples")
    return SampledWaveform(np.asarray(samples), rate)


def write_waveform_csv(waveform: SampledWaveform, target) -> None:
    """Write the sample format; target is a path or an open text file."""
    if hasattr(target, "write"):
        _write_waveform_csv(waveform, target)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            _write_waveform_csv(waveform, fh)


def _write_waveform_csv(waveform: SampledWaveform, fh) -> None:
    fh.write(f"rate={waveform.sample_rate_hz:g}\n")
    for value in waveform.samples:
        fh.write(f"{float(value)!r}\n")


def format_stream_text(stream: SegmentedStream) -> str:
    """Line-oriented frame dump: ``frame_idx active intensity freq_idx``."""
    lines = [
        f"{k} {1 if fr.active else 0} {fr.intensity} {fr.frequency_index}"
        for k, fr in enumerate(stream.frames)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_stream_text(text: str) -> SegmentedStream:
    frames = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields on line {lineno}", offset=lineno)
        try:
            idx, active, intensity, freq = (int(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-integer field on line {lineno}", offset=lineno) from None
        if idx != len(frames):
            raise ParseError(f"frame index {idx} out of order on line {lineno}", offset=lineno)
        frames.append(Frame(bool(active), intensity, freq))
    return SegmentedStream(frames)
