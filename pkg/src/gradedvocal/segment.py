"""Dynamic-threshold and fixed-floor segmentation of recordings into vocal units."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, mel_spectrogram_db, pre_emphasis

log = logging.getLogger(__name__)

SEGMENT_HEADER = ["recording_id", "seg_index", "onset_s", "offset_s"]


@dataclass
class SegmentParams:
    n_fft: int = 2048
    win_length: int = 1024
    hop_length: int = 256
    n_mels: int = 64
    db_delta: float = 5.0
    ref_level_db: float = 20.0
    min_level_db: float = -60.0
    pre_emphasis: float = 0.97
    silence_threshold: float = 0.1
    min_silence_for_spec: float = 0.1
    max_vocal_for_spec: float = 1.0
    min_syllable_length_s: float = 0.01
    spectral_range: tuple[float, float] = (2000.0, 60000.0)


@dataclass
class SegmentTable:
    rows: list[tuple[str, int, float, float]] = field(default_factory=list)
    # set when no threshold satisfied the search constraints
    no_threshold: bool = False
    threshold_db: float | None = None

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def onsets(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([r[3] for r in self.rows])

    def extend(self, other: "SegmentTable"):
        self.rows.extend(other.rows)


def runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open ``(start, stop)`` index pairs of the True runs in ``mask``."""
    m = np.concatenate([[False], np.asarray(mask, bool), [False]])
    d = np.diff(m.astype(np.int8))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _spans_to_table(recording_id, spans_s, min_len) -> SegmentTable:
    rows = []
    for on, off in spans_s:
        if off - on >= min_len - 1e-12:
            rows.append((recording_id, len(rows), float(on), float(off)))
    return SegmentTable(rows)


def envelope_db(clip: AudioClip, params: SegmentParams) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-frame max of the dB mel spectrogram inside ``spectral_range``, each band
    taken relative to its own median over time (so a white floor sits near 0 dB).

    Returns the envelope, frame start times and the frame duration (s).
    """
    lo, hi = params.spectral_range
    hi = min(hi, clip.sample_rate / 2)
    emph = pre_emphasis(clip, params.pre_emphasis) if params.pre_emphasis else clip
    spec = mel_spectrogram_db(emph, params.n_fft, params.win_length, params.hop_length,
                              params.n_mels, lo, hi, median_normalize=False)
    db = spec.values - np.median(spec.values, axis=1, keepdims=True)
    env = db.max(axis=0)
    starts = np.arange(spec.n_frames) * params.hop_length / clip.sample_rate
    return env, starts, params.hop_length / clip.sample_rate


def _frames_to_seconds(span, starts, frame_dt, win_s):
    # a supra-threshold frame is attributed to the hop-wide slice at its window centre
    i0, i1 = span
    return starts[i0] + win_s / 2 - frame_dt / 2, starts[i1 - 1] + win_s / 2 + frame_dt / 2


def dynamic_threshold_segment(clip: AudioClip, params: SegmentParams | None = None,
                              recording_id: str = "") -> SegmentTable:
    """Segment ``clip`` with a threshold lowered from ``ref_level_db`` to ``min_level_db``.

    Candidate thresholds are visited in descending ``db_delta`` steps. The first
    one that yields at least one unit of ``min_syllable_length_s`` while keeping
    (a) a sub-threshold fraction >= ``silence_threshold``, (b) no supra-threshold
    run longer than ``max_vocal_for_spec`` and (c) some silent gap of at least
    ``min_silence_for_spec`` is used. If none qualifies the table is empty and
    ``no_threshold`` is set.
    """
    p = params or SegmentParams()
    if len(clip) < p.win_length:
        return SegmentTable(no_threshold=True)
    env, starts, frame_dt = envelope_db(clip, p)
    win_s = p.win_length / clip.sample_rate
    n = len(env)
    n_steps = int(np.floor((p.ref_level_db - p.min_level_db) / p.db_delta + 1e-9)) + 1
    for k in range(n_steps):
        thresh = p.ref_level_db - k * p.db_delta
        supra = env > thresh
        if not supra.any():
            continue
        loud = runs(supra)
        quiet = runs(~supra)
        longest_vocal = max(b - a for a, b in loud) * frame_dt
        longest_quiet = max((b - a for a, b in quiet), default=0) * frame_dt
        silent_frac = 1.0 - supra.sum() / n
        if silent_frac < p.silence_threshold or longest_vocal > p.max_vocal_for_spec:
            continue
        if longest_quiet < p.min_silence_for_spec:
            continue
        spans = [_frames_to_seconds(s, starts, frame_dt, win_s) for s in loud]
        table = _spans_to_table(recording_id, spans, p.min_syllable_length_s)
        if len(table):
            table.threshold_db = thresh
            return table
    log.warning("no threshold satisfied the segmentation constraints for %r", recording_id)
    return SegmentTable(no_threshold=True)


def amplitude_envelope_db(clip: AudioClip, win_length: int = 1024, hop_length: int = 256):
    """Frame RMS in dBFS (floored at -200)."""
    x = clip.samples
    if len(x) < win_length:
        return np.empty(0), np.empty(0)
    n = 1 + (len(x) - win_length) // hop_length
    idx = np.arange(win_length)[None, :] + hop_length * np.arange(n)[:, None]
    rms = np.sqrt(np.mean(x[idx] ** 2, axis=1))
    env = 20 * np.log10(np.maximum(rms, 1e-10))
    return env, np.arange(n) * hop_length / clip.sample_rate


def fixed_floor_segment(clip: AudioClip, floor_db: float, recording_id: str = "",
                        win_length: int = 1024, hop_length: int = 256,
                        min_syllable_length_s: float = 0.0) -> SegmentTable:
    """Spans where the RMS amplitude envelope (dBFS) exceeds a fixed floor."""
    if not np.isfinite(floor_db):
        raise ValueError("floor_db must be finite")
    env, starts = amplitude_envelope_db(clip, win_length, hop_length)
    if len(env) == 0:
        return SegmentTable()
    frame_dt = hop_length / clip.sample_rate
    win_s = win_length / clip.sample_rate
    spans = [_frames_to_seconds(s, starts, frame_dt, win_s) for s in runs(env > floor_db)]
    return _spans_to_table(recording_id, spans, min_syllable_length_s)


def write_segments(path, table: SegmentTable):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEGMENT_HEADER)
        for rid, i, on, off in table.rows:
            w.writerow([rid, i, repr(on), repr(off)])


def read_segments(path) -> SegmentTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SEGMENT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(SEGMENT_HEADER)}")
        rows = [(r["recording_id"], int(r["seg_index"]), float(r["onset_s"]), float(r["offset_s"]))
                for r in reader]
    return SegmentTable(rows)
