"""DSP front end: filtering, noise reduction, pre-emphasis and spectral features.

Defaults follow the preprocessing table used for the fruit-bat recordings
(250 kHz sampling, 256 Hz - 120 kHz band, 2048-point FFT, 64 mel bins).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal
from scipy.fft import dct, rfft
from scipy.io import wavfile

DEFAULT_SR = 250_000
DB_RANGE = 80.0


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SR

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {x.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio contains non-finite samples (NaN or Inf)")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def slice_seconds(self, onset_s: float, offset_s: float) -> "AudioClip":
        i0 = max(0, int(round(onset_s * self.sample_rate)))
        i1 = min(len(self.samples), int(round(offset_s * self.sample_rate)))
        return AudioClip(self.samples[i0:i1], self.sample_rate)


@dataclass(frozen=True)
class Spectrogram:
    """dB-scaled time-frequency matrix, shape ``[n_bins, n_frames]``."""

    values: np.ndarray
    bin_freqs: np.ndarray
    hop: int
    sample_rate: int
    scale: str = "linear"
    win_length: int = 0

    def __post_init__(self):
        if self.values.shape[0] != len(self.bin_freqs):
            raise ValueError("n_bins does not match bin_freqs")
        if self.scale not in ("linear", "mel"):
            raise ValueError(f"unknown scale {self.scale!r}")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def frame_times(self) -> np.ndarray:
        """Centre time (s) of every frame."""
        return (np.arange(self.n_frames) * self.hop + self.win_length / 2) / self.sample_rate


@dataclass(frozen=True)
class MfccMatrix:
    coeffs: np.ndarray  # [n_coeffs, n_frames]

    @property
    def n_coeffs(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[1]


@dataclass
class NoiseReduceParams:
    time_constant_s: float = 0.2
    time_mask_smooth_ms: float = 5.0
    freq_mask_smooth_hz: float = 256.0
    n_std_thresh: float = 1.5
    n_fft: int = 1024
    hop_length: int = 256
    sigmoid_slope: float = 10.0


@dataclass
class AudioParams:
    low_freq: float = 256.0
    high_freq: float = 120_000.0
    pre_emphasis: float = 0.97
    n_fft: int = 2048
    win_length: int = 1024
    hop_length: int = 256
    fmin: float = 256.0
    fmax: float = 120_000.0
    n_mels: int = 64
    n_mfcc: int = 13
    butter_order: int = 5
    noise: NoiseReduceParams = field(default_factory=NoiseReduceParams)


def read_wav(path) -> AudioClip:
    """Read a PCM WAV file as float samples in [-1, 1]; stereo is averaged."""
    sr, data = wavfile.read(path)
    if np.issubdtype(data.dtype, np.integer):
        data = data.astype(np.float64) / float(np.iinfo(data.dtype).max + 1)
    else:
        data = data.astype(np.float64)
    if data.ndim == 2:
        data = data.mean(axis=1)
    return AudioClip(data, int(sr))


def write_wav(path, clip: AudioClip, dtype="int16"):
    if dtype == "int16":
        data = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        data = clip.samples.astype(np.float32)
    wavfile.write(path, clip.sample_rate, data)


def pre_emphasis(clip: AudioClip, coeff: float = 0.97) -> AudioClip:
    if not 0 <= coeff < 1:
        raise ValueError(f"pre-emphasis coefficient must lie in [0, 1), got {coeff}")
    x = clip.samples
    y = x.copy()
    y[1:] = x[1:] - coeff * x[:-1]
    return AudioClip(y, clip.sample_rate)


def bandpass(clip: AudioClip, low: float = 256.0, high: float = 120_000.0, order: int = 5) -> AudioClip:
    """Zero-phase Butterworth band-pass (forward-backward second-order sections)."""
    nyq = clip.sample_rate / 2
    if not 0 < low < high < nyq:
        raise ValueError(f"invalid band [{low}, {high}] for Nyquist {nyq}")
    sos = signal.butter(order, [low, high], btype="bandpass", fs=clip.sample_rate, output="sos")
    if len(clip) == 0:
        return clip
    padlen = min(len(clip) - 1, 3 * (2 * len(sos) + 1))
    y = signal.sosfiltfilt(sos, clip.samples, padlen=max(padlen, 0))
    return AudioClip(y, clip.sample_rate)


def _frame(x: np.ndarray, win_length: int, hop_length: int) -> np.ndarray:
    n_frames = 1 + (len(x) - win_length) // hop_length
    idx = np.arange(win_length)[None, :] + hop_length * np.arange(n_frames)[:, None]
    return x[idx]


def n_stft_frames(n_samples: int, win_length: int, hop_length: int) -> int:
    return 1 + (n_samples - win_length) // hop_length


def power_spectrogram(clip: AudioClip, n_fft: int = 2048, win_length: int = 1024,
                      hop_length: int = 256) -> np.ndarray:
    """Magnitude-squared Hann STFT without centring, shape ``[n_fft // 2 + 1, n_frames]``."""
    if win_length > n_fft:
        raise ValueError("win_length must not exceed n_fft")
    if hop_length < 1:
        raise ValueError("hop_length must be >= 1")
    if len(clip) < win_length:
        raise ValueError(f"clip of {len(clip)} samples is shorter than one window ({win_length})")
    window = signal.get_window("hann", win_length, fftbins=True)
    frames = _frame(clip.samples, win_length, hop_length) * window
    spec = rfft(frames, n=n_fft, axis=1)
    return (spec.real ** 2 + spec.imag ** 2).T


def power_to_db(power: np.ndarray, top_db: float = DB_RANGE) -> np.ndarray:
    """10*log10 with a floor ``top_db`` below the maximum (silence maps to a flat floor)."""
    tiny = np.finfo(np.float64).tiny
    db = 10.0 * np.log10(np.maximum(power, tiny))
    return np.maximum(db, db.max() - top_db)


def stft_db(clip: AudioClip, n_fft: int = 2048, win_length: int = 1024, hop_length: int = 256,
            top_db: float = DB_RANGE) -> Spectrogram:
    power = power_spectrogram(clip, n_fft, win_length, hop_length)
    db = power_to_db(power, top_db)
    db = db - np.median(db)
    freqs = np.arange(n_fft // 2 + 1) * clip.sample_rate / n_fft
    return Spectrogram(db, freqs, hop_length, clip.sample_rate, "linear", win_length)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular filters spaced uniformly on the HTK mel scale, shape ``[n_mels, n_fft//2+1]``.

    Each filter peaks at 1. Filters narrower than the FFT bin spacing can end up
    with an empty support; callers floor the log output.
    """
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ValueError("mel band must satisfy 0 <= fmin < fmax <= Nyquist")
    fft_freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (fft_freqs[None, :] - lower) / (centre - lower)
    falling = (upper - fft_freqs[None, :]) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_spectrogram_db(clip: AudioClip, n_fft=2048, win_length=1024, hop_length=256, n_mels=64,
                       fmin=256.0, fmax=120_000.0, top_db=DB_RANGE, median_normalize=True) -> Spectrogram:
    power = power_spectrogram(clip, n_fft, win_length, hop_length)
    fb = mel_filterbank(clip.sample_rate, n_fft, n_mels, fmin, fmax)
    db = power_to_db(fb @ power, top_db)
    if median_normalize:
        db = db - np.median(db)
    centres = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))[1:-1]
    return Spectrogram(db, centres, hop_length, clip.sample_rate, "mel", win_length)


def mfcc_from_power(power: np.ndarray, filterbank: np.ndarray, n_coeffs: int,
                    top_db: float = DB_RANGE) -> np.ndarray:
    """Filterbank -> dB -> orthonormal DCT-II over the mel axis; first ``n_coeffs`` rows."""
    if n_coeffs > filterbank.shape[0]:
        raise ValueError("n_coeffs must not exceed the number of mel bands")
    log_mel = power_to_db(filterbank @ power, top_db)
    return dct(log_mel, type=2, norm="ortho", axis=0)[:n_coeffs]


def mfcc(clip: AudioClip, n_mels: int = 64, n_coeffs: int = 13, n_fft: int = 2048,
         win_length: int = 1024, hop_length: int = 256, fmin: float = 256.0,
         fmax: float = 120_000.0) -> MfccMatrix:
    if n_coeffs > n_mels:
        raise ValueError("n_coeffs must not exceed n_mels")
    power = power_spectrogram(clip, n_fft, win_length, hop_length)
    fb = mel_filterbank(clip.sample_rate, n_fft, n_mels, fmin, fmax)
    return MfccMatrix(mfcc_from_power(power, fb, n_coeffs))


def coarse_mel(clip: AudioClip, fft_size: int = 8192, fft_length: int = 16384, n_mels: int = 32,
               fmin: float = 500.0, fmax: float = 120_000.0, n_frames: int = 6,
               top_db: float = 120.0) -> np.ndarray:
    """Low-time-resolution log-mel image of a syllable, exactly ``[n_mels, n_frames]``.

    Frames do not overlap (hop == fft_size). Short clips are padded with the
    dB floor; long ones are truncated around their centre.
    """
    if len(clip) == 0:
        raise ValueError("empty clip")
    x = clip.samples
    if len(x) < fft_size:
        x = np.pad(x, (0, fft_size - len(x)))
    window = signal.get_window("hann", fft_size, fftbins=True)
    frames = _frame(x, fft_size, fft_size) * window
    spec = rfft(frames, n=fft_length, axis=1)
    power = (spec.real ** 2 + spec.imag ** 2).T
    fb = mel_filterbank(clip.sample_rate, fft_length, n_mels, fmin, min(fmax, clip.sample_rate / 2))
    db = power_to_db(fb @ power, top_db)
    have = db.shape[1]
    if have > n_frames:
        start = (have - n_frames) // 2
        db = db[:, start:start + n_frames]
    elif have < n_frames:
        left = (n_frames - have) // 2
        db = np.pad(db, ((0, 0), (left, n_frames - have - left)), constant_values=db.min())
    return db


def noise_reduce(clip: AudioClip, params: NoiseReduceParams | None = None) -> AudioClip:
    """Non-stationary spectral gating.

    The noise floor of each frequency bin is tracked by exponential smoothing
    over time; bins more than ``n_std_thresh`` residual standard deviations above
    it pass through a sigmoid mask, which is then smoothed over frequency and
    time before resynthesis.
    """
    p = params or NoiseReduceParams()
    if min(p.time_constant_s, p.time_mask_smooth_ms, p.freq_mask_smooth_hz, p.n_fft, p.hop_length) <= 0:
        raise ValueError("noise reduction parameters must be positive")
    n = len(clip)
    if n < p.n_fft:
        raise ValueError(f"clip of {n} samples is shorter than one analysis frame ({p.n_fft})")
    sr = clip.sample_rate
    noverlap = p.n_fft - p.hop_length
    _, _, Z = signal.stft(clip.samples, fs=sr, window="hann", nperseg=p.n_fft, noverlap=noverlap)
    mag = np.abs(Z)

    # one-pole smoother, forward in time
    frame_dt = p.hop_length / sr
    a = 1.0 - np.exp(-frame_dt / p.time_constant_s)
    floor = signal.lfilter([a], [1.0, a - 1.0], mag, axis=1, zi=(1 - a) * mag[:, :1])[0]

    resid = mag - floor
    thresh = floor + p.n_std_thresh * resid.std(axis=1, keepdims=True)
    scale = np.maximum(thresh, np.finfo(float).tiny)
    mask = 1.0 / (1.0 + np.exp(-np.clip(p.sigmoid_slope * (mag / scale - 1.0), -50, 50)))
    mask[thresh <= 0] = 0.0

    bin_hz = sr / p.n_fft
    f_size = max(1, int(round(p.freq_mask_smooth_hz / bin_hz)))
    t_size = max(1, int(round(p.time_mask_smooth_ms / 1000.0 / frame_dt)))
    mask = ndimage.uniform_filter(mask, size=(2 * f_size + 1, 2 * t_size + 1), mode="nearest")

    _, y = signal.istft(Z * mask, fs=sr, window="hann", nperseg=p.n_fft, noverlap=noverlap)
    y = y[:n]
    if len(y) < n:
        y = np.pad(y, (0, n - len(y)))
    return AudioClip(y, sr)


def preprocess(clip: AudioClip, params: AudioParams | None = None, denoise: bool = True) -> AudioClip:
    """Band-pass, optional spectral gating, then pre-emphasis."""
    p = params or AudioParams()
    high = min(p.high_freq, 0.999 * clip.sample_rate / 2)
    out = bandpass(clip, p.low_freq, high, p.butter_order)
    if denoise and len(out) >= p.noise.n_fft:
        out = noise_reduce(out, p.noise)
    return pre_emphasis(out, p.pre_emphasis)
