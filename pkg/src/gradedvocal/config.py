"""Sectioned ``key = value`` pipeline configuration.

Example::

    [run]
    master_seed = 7

    [segment]
    entry = units
    min_syllable_length_s = 0.01

Unknown sections or keys are rejected. Every stage draws its seed from
``derive_seed(master_seed, stage_name)``.
"""

from __future__ import annotations

import configparser
import zlib
from dataclasses import dataclass, field, fields

import numpy as np


@dataclass
class RunConfig:
    master_seed: int = 0
    annotations: str = "annotations.csv"
    audio_dir: str = "audio"
    n_jobs: int = 1


@dataclass
class AudioConfig:
    low_freq: float = 256.0
    high_freq: float = 120000.0
    denoise: bool = True
    time_constant_s: float = 0.2
    time_mask_smooth_ms: float = 5.0
    freq_mask_smooth_hz: float = 256.0
    n_std_thresh: float = 1.5
    pre_emphasis: float = 0.97
    n_fft: int = 2048
    win_length: int = 1024
    hop_length: int = 256
    fmin: float = 256.0
    fmax: float = 120000.0
    n_mels: int = 64
    n_mfcc: int = 13
    butter_order: int = 5


@dataclass
class SegmentConfig:
    method: str = "dynamic"  # dynamic | fixed
    entry: str = "recording"  # recording | units
    db_delta: float = 5.0
    ref_level_db: float = 20.0
    min_level_db: float = -60.0
    silence_threshold: float = 0.1
    min_silence_for_spec: float = 0.1
    max_vocal_for_spec: float = 1.0
    min_syllable_length_s: float = 0.01
    spectral_low: float = 2000.0
    spectral_high: float = 60000.0
    fixed_floor_db: float = -40.0


@dataclass
class LabelConfig:
    q: float = 0.05
    linkage: str = "average"
    grouping: str = "emitter"  # emitter | global
    dtw_band: int = -1  # negative: no band
    pca_components: int = 2


@dataclass
class SeqConfig:
    alpha: float = 0.5


@dataclass
class MaxrepConfig:
    min_support: int = 50
    min_length: int = 1
    grouping: str = "context"  # context | emitter


@dataclass
class StatsConfig:
    xmin: int = 1
    xmin_scan: bool = False
    fit_min_support: int = 2


@dataclass
class ClassifyConfig:
    n_trees: int = 300
    max_features: int = 5
    min_samples_leaf: int = 1
    k_folds: int = 5
    permutation_scope: str = "within"  # within | corpus


@dataclass
class NetgraphConfig:
    n_rand: int = 20
    swaps_per_edge: int = 10
    lattice_swaps_per_edge: int = 100


@dataclass
class SynthConfig:
    mode: str = "symbolic"  # symbolic | audio
    corpus: str = "associative"  # associative | combinatorial
    n_contexts: int = 4
    alphabet: int = 16
    n_seqs: int = 800
    min_len: int = 20
    max_len: int = 40
    emitters_per_context: int = 4
    noise_db: float = -60.0


@dataclass
class PipelineConfig:
    run: RunConfig = field(default_factory=RunConfig)
    audio: AudioConfig = field(default_factory=AudioConfig)
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    label: LabelConfig = field(default_factory=LabelConfig)
    seq: SeqConfig = field(default_factory=SeqConfig)
    maxrep: MaxrepConfig = field(default_factory=MaxrepConfig)
    stats: StatsConfig = field(default_factory=StatsConfig)
    classify: ClassifyConfig = field(default_factory=ClassifyConfig)
    netgraph: NetgraphConfig = field(default_factory=NetgraphConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def seed(self, stage: str) -> int:
        return derive_seed(self.run.master_seed, stage)


CHOICES = {
    ("segment", "method"): ("dynamic", "fixed"),
    ("segment", "entry"): ("recording", "units"),
    ("label", "linkage"): ("average", "single", "complete", "weighted"),
    ("label", "grouping"): ("emitter", "global"),
    ("maxrep", "grouping"): ("context", "emitter"),
    ("classify", "permutation_scope"): ("within", "corpus"),
    ("synth", "mode"): ("symbolic", "audio"),
    ("synth", "corpus"): ("associative", "combinatorial"),
}


def derive_seed(master_seed: int, stage: str) -> int:
    """32-bit stage seed from ``SeedSequence([master_seed, crc32(stage)])``."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


def _convert(raw: str, typ, where: str):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ValueError(f"{where}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}") from None


def set_value(cfg: PipelineConfig, section: str, key: str, raw: str):
    if not hasattr(cfg, section):
        raise ValueError(f"unknown config section [{section}]")
    sec = getattr(cfg, section)
    types = {f.name: f.type for f in fields(sec)}
    if key not in types:
        raise ValueError(f"unknown config key {section}.{key}")
    value = _convert(raw, types[key], f"{section}.{key}")
    allowed = CHOICES.get((section, key))
    if allowed and value not in allowed:
        raise ValueError(f"{section}.{key} must be one of {allowed}, got {value!r}")
    setattr(sec, key, value)


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Read an INI-style file (optional) then apply ``section.key=value`` overrides."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, raw in parser.items(section):
                set_value(cfg, section, key, raw)
    for item in overrides:
        name, sep, raw = item.partition("=")
        section, dot, key = name.partition(".")
        if not sep or not dot:
            raise ValueError(f"override {item!r} must look like section.key=value")
        set_value(cfg, section.strip(), key.strip(), raw)
    return cfg


def describe_defaults() -> str:
    cfg = PipelineConfig()
    lines = []
    for f in fields(cfg):
        lines.append(f"[{f.name}]")
        sec = getattr(cfg, f.name)
        for g in fields(sec):
            lines.append(f"  {g.name} = {getattr(sec, g.name)}")
    return "\n".join(lines)


def dump_config(cfg: PipelineConfig) -> str:
    out = []
    for f in fields(cfg):
        out.append(f"[{f.name}]")
        sec = getattr(cfg, f.name)
        out.extend(f"{g.name} = {getattr(sec, g.name)}" for g in fields(sec))
        out.append("")
    return "\n".join(out)
