"""File-based pipeline stages.

Every stage reads and writes plain files inside a work directory, so any stage
can be rerun on its own. Each primary output gets a stamp in ``.stamps/``
recording the producing stage, a digest of the config sections it depends on
and the stamps of its inputs. Reading an artifact whose stamp no longer
matches the current config raises :class:`PipelineError` naming the stage to
rerun.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import shutil
from collections import Counter, defaultdict
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import audio, classify, label, maxrep, netgraph, segment, seq, stats, synth
from .config import PipelineConfig

ANNOTATION_HEADER = ["recording_id", "wav_path", "emitter_id", "addressee_id", "context",
                     "onset_s", "offset_s"]

# artifact -> producing subcommand
PRODUCERS = {
    "annotations.csv": "synth",
    "ingested.csv": "ingest",
    "segments.csv": "segment",
    "features/index.csv": "featurize",
    "labels.csv": "label",
    "sequences.jsonl": "encode",
    "seqfeatures.csv": "seqfeat",
    "mr_summary.json": "mr",
    "mr_inventory.csv": "mr",
    "fits.json": "fit",
    "hp1.json": "test-hp1",
    "hp2.json": "test-hp2",
    "classify.json": "classify",
    "graph_metrics.csv": "network",
}

# config sections each stage depends on
STAGE_SECTIONS = {
    "synth": ["synth"],
    "ingest": [],
    "segment": ["audio", "segment"],
    "featurize": ["audio"],
    "label": ["label"],
    "encode": [],
    "seqfeat": ["seq"],
    "mr": ["maxrep"],
    "fit": ["stats"],
    "test-hp1": ["classify", "seq"],
    "test-hp2": [],
    "classify": ["classify"],
    "network": ["netgraph"],
    "report": [],
}


class PipelineError(RuntimeError):
    def __init__(self, message: str, producer: str | None = None, kind: str = "pipeline_error"):
        super().__init__(message)
        self.producer = producer
        self.kind = kind

    def to_dict(self) -> dict:
        d = {"error": self.kind, "message": str(self)}
        if self.producer:
            d["producer"] = self.producer
            d["hint"] = f"run `gradedvocal {self.producer}` first"
        return d


# --- serialisation helpers ------------------------------------------------

def _clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


class Workspace:
    """Work directory plus the stamp bookkeeping."""

    def __init__(self, root, cfg: PipelineConfig):
        self.root = Path(root)
        self.cfg = cfg
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name) -> Path:
        return self.root / name

    def _stamp_path(self, artifact) -> Path:
        return self.root / ".stamps" / (artifact.replace("/", "__") + ".json")

    def section_digest(self, stage: str) -> str:
        payload = {"master_seed": self.cfg.run.master_seed}
        for sec in STAGE_SECTIONS[stage]:
            payload[sec] = asdict(getattr(self.cfg, sec))
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def _digest(self, stage, input_stamps) -> str:
        h = hashlib.sha256(self.section_digest(stage).encode())
        for name in sorted(input_stamps):
            h.update(f"{name}={input_stamps[name]}".encode())
        return h.hexdigest()

    def stamp(self, artifact, stage, inputs=()):
        """Record that ``stage`` produced ``artifact`` from ``inputs``."""
        ins = {}
        for name in inputs:
            st = self._read_stamp(name)
            ins[name] = st["digest"] if st else "external"
        p = self._stamp_path(artifact)
        p.parent.mkdir(exist_ok=True)
        dump_json(p, {"producer": stage, "inputs": ins, "digest": self._digest(stage, ins)})

    def _read_stamp(self, artifact):
        p = self._stamp_path(artifact)
        return load_json(p) if p.exists() else None

    def require(self, artifact, _seen=None) -> Path:
        """Path of an upstream artifact; raises if it is missing or stale."""
        path = self.path(artifact)
        producer = PRODUCERS.get(artifact)
        if not path.exists():
            raise PipelineError(f"missing input {artifact}", producer, "missing_input")
        _seen = set() if _seen is None else _seen
        if artifact in _seen:
            return path
        _seen.add(artifact)
        st = self._read_stamp(artifact)
        if st is None:
            return path  # provided from outside the pipeline
        for name, digest in st["inputs"].items():
            if digest == "external":
                continue
            cur = self._read_stamp(name)
            if cur is None or cur["digest"] != digest:
                raise PipelineError(f"{artifact} was built from an older {name}; it is stale",
                                    st["producer"], "stale_input")
            self.require(name, _seen)
        if self._digest(st["producer"], st["inputs"]) != st["digest"]:
            raise PipelineError(f"{artifact} was built with different [{', '.join(STAGE_SECTIONS[st['producer']])}]"
                                " settings; it is stale", st["producer"], "stale_input")
        return path


# --- annotations ------------------------------------------------------------

def write_annotations(path, rows):
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(ANNOTATION_HEADER)
        for r in rows:
            w.writerow([r.get(k, "") if r.get(k) is not None else "" for k in ANNOTATION_HEADER])


def _opt_float(text, where):
    text = (text or "").strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        raise PipelineError(f"{where}: not a number: {text!r}", kind="malformed_row") from None
    if not math.isfinite(v) or v < 0:
        raise PipelineError(f"{where}: times must be finite and non-negative", kind="malformed_row")
    return v


def read_annotations(path, audio_dir) -> tuple[list[dict], dict]:
    """Validated annotation rows plus an exclusion report."""
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"annotation file {path} not found", "synth", "missing_input")
    rows, excluded, seen = [], Counter(), set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ANNOTATION_HEADER:
            raise PipelineError(f"{path}: header must be {','.join(ANNOTATION_HEADER)}",
                                kind="malformed_row")
        for lineno, raw in enumerate(reader, 2):
            if not any(c.strip() for c in raw):
                continue
            where = f"{path.name} row {lineno}"
            if len(raw) != len(ANNOTATION_HEADER):
                raise PipelineError(f"{where}: expected {len(ANNOTATION_HEADER)} fields, got {len(raw)}",
                                    kind="malformed_row")
            r = dict(zip(ANNOTATION_HEADER, (c.strip() for c in raw)))
            for key in ("recording_id", "wav_path", "emitter_id", "context"):
                if not r[key]:
                    raise PipelineError(f"{where}: empty {key}", kind="malformed_row")
            try:
                ctx = seq.canonical_context(r["context"])
            except ValueError as exc:
                raise PipelineError(f"{where}: {exc}", kind="malformed_row") from None
            on = _opt_float(r["onset_s"], where)
            off = _opt_float(r["offset_s"], where)
            if (on is None) != (off is None) or (on is not None and off <= on):
                raise PipelineError(f"{where}: onset_s/offset_s must both be given with onset < offset",
                                    kind="malformed_row")
            key = (r["recording_id"], on)
            if key in seen:
                raise PipelineError(f"{where}: duplicate recording_id+onset {key}", kind="malformed_row")
            seen.add(key)
            if ctx in seq.EXCLUDED_CONTEXTS:
                excluded[ctx] += 1
                continue
            wav = Path(audio_dir) / r["wav_path"]
            if not wav.exists():
                raise PipelineError(f"{where}: audio file {r['wav_path']} not found in {audio_dir}",
                                    kind="missing_input")
            r["context"], r["onset_s"], r["offset_s"] = ctx, on, off
            rows.append(r)
    report = {"n_rows": len(rows) + sum(excluded.values()), "n_ingested": len(rows),
              "n_excluded": sum(excluded.values()), "excluded_by_context": dict(sorted(excluded.items()))}
    return rows, report


# --- stages -----------------------------------------------------------------

def run_synth(ws: Workspace):
    c = ws.cfg.synth
    seed = ws.cfg.seed("synth")
    truth_path = ws.path("synth_truth.csv")
    if c.mode == "symbolic":
        seqs = synth.gen_context_corpus(c.corpus, c.n_contexts, c.alphabet, c.n_seqs,
                                        (c.min_len, c.max_len), seed, c.emitters_per_context)
        table = label.LabelTable()
        for q in seqs:
            for k, s in enumerate(q.symbols):
                table.append(label.LabelRow(f"{q.seq_id}_{k:03d}", q.seq_id, round(0.1 * k, 6),
                                            round(0.1 * k + 0.05, 6), q.emitter_id, q.context, s))
        label.write_labels(ws.path("labels.csv"), table)
        ws.stamp("labels.csv", "synth")
        return {"mode": "symbolic", "n_sequences": len(seqs), "n_syllables": len(table)}

    # audio: one wav per sequence, syllable prototypes from synth.SYLLABLE_TYPES
    n_types = len(synth.SYLLABLE_TYPES)
    seqs = synth.gen_context_corpus(c.corpus, c.n_contexts, n_types, c.n_seqs,
                                    (c.min_len, c.max_len), seed, c.emitters_per_context)
    audio_dir = ws.path(ws.cfg.run.audio_dir)
    if audio_dir.exists():
        shutil.rmtree(audio_dir)
    audio_dir.mkdir(parents=True)
    rows, truth = [], []
    clip_seeds = np.random.SeedSequence(seed).generate_state(len(seqs))
    for q, cs in zip(seqs, clip_seeds):
        clip, spans = synth.sequence_audio(q.symbols, noise_db=c.noise_db, seed=int(cs))
        audio.write_wav(audio_dir / f"{q.seq_id}.wav", clip)
        rows.append({"recording_id": q.seq_id, "wav_path": f"{q.seq_id}.wav", "emitter_id": q.emitter_id,
                     "addressee_id": "", "context": q.context, "onset_s": None, "offset_s": None})
        truth.extend((q.seq_id, on, off, s) for (on, off), s in zip(spans, q.symbols))
    write_annotations(ws.path(ws.cfg.run.annotations), rows)
    with open(truth_path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["recording_id", "onset_s", "offset_s", "symbol"])
        for rid, on, off, s in truth:
            w.writerow([rid, repr(round(on, 9)), repr(round(off, 9)), s])
    ws.stamp(ws.cfg.run.annotations, "synth")
    return {"mode": "audio", "n_recordings": len(rows), "n_syllables": len(truth)}


def run_ingest(ws: Workspace):
    rows, report = read_annotations(ws.path(ws.cfg.run.annotations), ws.path(ws.cfg.run.audio_dir))
    write_annotations(ws.path("ingested.csv"), rows)
    dump_json(ws.path("ingest_report.json"), report)
    ws.stamp("ingested.csv", "ingest")
    return report


def _read_ingested(ws):
    path = ws.require("ingested.csv")
    rows, _ = read_annotations(path, ws.path(ws.cfg.run.audio_dir))
    return rows


def _audio_params(cfg: PipelineConfig) -> audio.AudioParams:
    a = cfg.audio
    return audio.AudioParams(
        low_freq=a.low_freq, high_freq=a.high_freq, pre_emphasis=a.pre_emphasis, n_fft=a.n_fft,
        win_length=a.win_length, hop_length=a.hop_length, fmin=a.fmin, fmax=a.fmax, n_mels=a.n_mels,
        n_mfcc=a.n_mfcc, butter_order=a.butter_order,
        noise=audio.NoiseReduceParams(time_constant_s=a.time_constant_s,
                                      time_mask_smooth_ms=a.time_mask_smooth_ms,
                                      freq_mask_smooth_hz=a.freq_mask_smooth_hz,
                                      n_std_thresh=a.n_std_thresh))


class _ClipCache:
    def __init__(self, ws):
        self.ws = ws
        self.params = _audio_params(ws.cfg)
        self._cache = {}

    def get(self, wav_path) -> audio.AudioClip:
        if wav_path not in self._cache:
            self._cache.clear()  # rows arrive grouped by recording
            raw = audio.read_wav(self.ws.path(self.ws.cfg.run.audio_dir) / wav_path)
            self._cache[wav_path] = audio.preprocess(raw, self.params, self.ws.cfg.audio.denoise)
        return self._cache[wav_path]


def _segment_params(cfg) -> segment.SegmentParams:
    s, a = cfg.segment, cfg.audio
    return segment.SegmentParams(
        n_fft=a.n_fft, win_length=a.win_length, hop_length=a.hop_length, n_mels=a.n_mels,
        db_delta=s.db_delta, ref_level_db=s.ref_level_db, min_level_db=s.min_level_db,
        pre_emphasis=0.0,  # already applied in preprocessing
        silence_threshold=s.silence_threshold, min_silence_for_spec=s.min_silence_for_spec,
        max_vocal_for_spec=s.max_vocal_for_spec, min_syllable_length_s=s.min_syllable_length_s,
        spectral_range=(s.spectral_low, s.spectral_high))


def run_segment(ws: Workspace):
    cfg = ws.cfg.segment
    rows = _read_ingested(ws)
    params = _segment_params(ws.cfg)
    clips = _ClipCache(ws)
    by_rec = defaultdict(list)
    for r in rows:
        by_rec[r["recording_id"]].append(r)
    out, per_rec = [], {}

    def seg(clip, rid):
        if cfg.method == "fixed":
            return segment.fixed_floor_segment(clip, cfg.fixed_floor_db, rid, params.win_length,
                                               params.hop_length, params.min_syllable_length_s)
        return segment.dynamic_threshold_segment(clip, params, rid)

    for rid in sorted(by_rec):
        recs = sorted(by_rec[rid], key=lambda r: -1.0 if r["onset_s"] is None else r["onset_s"])
        clip = clips.get(recs[0]["wav_path"])
        spans, flags = [], []
        if cfg.entry == "recording" or all(r["onset_s"] is None for r in recs):
            t = seg(clip, rid)
            spans = [(on, off) for _, _, on, off in t.rows]
            flags.append(t.threshold_db if not t.no_threshold else None)
        else:
            for r in recs:
                if r["onset_s"] is None:
                    continue
                unit = clip.slice_seconds(r["onset_s"], r["offset_s"])
                t = seg(unit, rid) if len(unit) >= params.win_length else segment.SegmentTable(no_threshold=True)
                if len(t):
                    spans.extend((r["onset_s"] + on, r["onset_s"] + off) for _, _, on, off in t.rows)
                    flags.append(t.threshold_db)
                else:
                    # unit cannot be subdivided: keep it whole
                    spans.append((r["onset_s"], r["offset_s"]))
                    flags.append(None)
        spans.sort()
        out.extend((rid, k, on, off) for k, (on, off) in enumerate(spans))
        per_rec[rid] = {"n_segments": len(spans), "thresholds_db": flags}
    segment.write_segments(ws.path("segments.csv"), segment.SegmentTable(out))
    report = {"n_recordings": len(per_rec), "n_segments": len(out),
              "n_no_threshold": sum(1 for v in per_rec.values() if None in v["thresholds_db"]),
              "recordings": per_rec}
    dump_json(ws.path("segment_report.json"), report)
    ws.stamp("segments.csv", "segment", ["ingested.csv"])
    return {k: v for k, v in report.items() if k != "recordings"}


INDEX_HEADER = ["syllable_id", "recording_id", "onset_s", "offset_s", "emitter_id", "context",
                "mfcc_start", "mfcc_frames"]


def run_featurize(ws: Workspace):
    a = ws.cfg.audio
    meta = {r["recording_id"]: r for r in _read_ingested(ws)}
    table = segment.read_segments(ws.require("segments.csv"))
    clips = _ClipCache(ws)
    feat_dir = ws.path("features")
    feat_dir.mkdir(exist_ok=True)
    mfccs, coarse, index = [], [], []
    start = 0
    for rid, k, on, off in table.rows:
        m = meta[rid]
        clip = clips.get(m["wav_path"])
        piece = clip.slice_seconds(on, off)
        if len(piece) < a.win_length:
            piece = audio.AudioClip(np.pad(piece.samples, (0, a.win_length - len(piece))), piece.sample_rate)
        fmax = min(a.fmax, piece.sample_rate / 2)
        mf = audio.mfcc(piece, a.n_mels, a.n_mfcc, a.n_fft, a.win_length, a.hop_length, a.fmin, fmax).coeffs
        mfccs.append(mf.T)
        coarse.append(audio.coarse_mel(piece))
        index.append([f"{rid}_{k:03d}", rid, repr(on), repr(off), m["emitter_id"], m["context"],
                      start, mf.shape[1]])
        start += mf.shape[1]
    if not index:
        raise PipelineError("no segments to featurize", "segment", "empty_input")
    np.concatenate(mfccs).astype("<f8").tofile(feat_dir / "mfcc.f8")
    np.stack(coarse).astype("<f8").tofile(feat_dir / "coarse.f8")
    with open(feat_dir / "index.csv", "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(INDEX_HEADER)
        w.writerows(index)
    dump_json(feat_dir / "shape.json", {"n_mfcc": a.n_mfcc, "coarse": [32, 6], "n_syllables": len(index)})
    ws.stamp("features/index.csv", "featurize", ["segments.csv", "ingested.csv"])
    return {"n_syllables": len(index), "n_mfcc_frames": start}


def load_features(ws: Workspace):
    feat_dir = ws.require("features/index.csv").parent
    shape = load_json(feat_dir / "shape.json")
    with open(feat_dir / "index.csv", newline="") as fh:
        index = list(csv.DictReader(fh))
    mf = np.fromfile(feat_dir / "mfcc.f8", dtype="<f8").reshape(-1, shape["n_mfcc"])
    co = np.fromfile(feat_dir / "coarse.f8", dtype="<f8").reshape(len(index), *shape["coarse"])
    mats = [mf[int(r["mfcc_start"]):int(r["mfcc_start"]) + int(r["mfcc_frames"])].T for r in index]
    return index, mats, co


def _read_truth(path):
    truth = defaultdict(list)
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            truth[r["recording_id"]].append((float(r["onset_s"]), float(r["offset_s"]), int(r["symbol"])))
    return truth


def _match_truth(index, labels, truth):
    """Pairs (cluster label, true symbol) for syllables overlapping a generated one."""
    pred, true = [], []
    for r, lab in zip(index, labels):
        on, off = float(r["onset_s"]), float(r["offset_s"])
        best, best_ov = None, 0.0
        for t_on, t_off, sym in truth.get(r["recording_id"], []):
            ov = min(off, t_off) - max(on, t_on)
            if ov > best_ov:
                best, best_ov = sym, ov
        if best is not None:
            pred.append(int(lab))
            true.append(best)
    return pred, true


def run_label(ws: Workspace):
    cfg = ws.cfg.label
    index, mats, coarse = load_features(ws)
    groups = defaultdict(list)
    for i, r in enumerate(index):
        groups[r["emitter_id"] if cfg.grouping == "emitter" else "all"].append(i)
    labels = np.zeros(len(index), dtype=int)
    dist_dir = ws.path("dist")
    if dist_dir.exists():
        shutil.rmtree(dist_dir)
    dist_dir.mkdir()
    band = None if cfg.dtw_band < 0 else cfg.dtw_band
    offset, group_report = 0, {}
    for g in sorted(groups):
        idx = groups[g]
        ids = [index[i]["syllable_id"] for i in idx]
        if len(idx) == 1:
            lab = np.zeros(1, dtype=int)
            sil = None
        else:
            d = label.pairwise_dtw([mats[i] for i in idx], band, ids, ws.cfg.run.n_jobs)
            d.save(dist_dir / f"{g}.f8")
            lab = label.agglomerative_cluster(d, cfg.q, cfg.linkage)
            k = len(np.unique(lab))
            sil = label.silhouette(d, lab) if 2 <= k < len(idx) else None
        labels[idx] = lab + offset
        n_clusters = int(lab.max()) + 1
        group_report[g] = {"n_syllables": len(idx), "n_clusters": n_clusters, "silhouette": sil}
        offset += n_clusters
    table = label.LabelTable(
        label.LabelRow(r["syllable_id"], r["recording_id"], float(r["onset_s"]), float(r["offset_s"]),
                       r["emitter_id"], r["context"], int(lab)) for r, lab in zip(index, labels))
    label.write_labels(ws.path("labels.csv"), table.validate())

    # plot-ready projection of the coarse mel images
    flat = coarse.reshape(len(index), -1)
    k = min(cfg.pca_components, *flat.shape)
    with open(ws.path("pca.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["syllable_id", "cluster_label", *(f"pc{j + 1}" for j in range(k))])
        if k >= 1 and len(index) > 1:
            proj = label.pca_project(flat, k)
            for r, lab, row in zip(index, labels, proj):
                w.writerow([r["syllable_id"], int(lab), *(repr(round(float(v), 10)) for v in row)])

    counts = Counter(r["emitter_id"] for r in index)
    top5 = [e for e, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]]
    report = {"grouping": cfg.grouping, "n_syllables": len(index), "n_labels": int(offset),
              "groups": group_report, "top5_emitters": top5}
    if cfg.grouping == "emitter":
        sils = [group_report[e]["silhouette"] for e in top5 if group_report[e]["silhouette"] is not None]
        report["top5_mean_silhouette"] = float(np.mean(sils)) if sils else None
    truth_path = ws.path("synth_truth.csv")
    if truth_path.exists():
        pred, true = _match_truth(index, labels, _read_truth(truth_path))
        report["truth_agreement"] = ({"n_matched": len(pred), "ari": label.ari(true, pred),
                                      "nmi": label.nmi(true, pred)} if len(pred) > 1 else None)
    dump_json(ws.path("label_report.json"), report)
    ws.stamp("labels.csv", "label", ["features/index.csv"])
    return {k: v for k, v in report.items() if k != "groups"}


def run_encode(ws: Workspace):
    table = label.read_labels(ws.require("labels.csv"))
    seqs = seq.encode(table)
    seq.write_jsonl(ws.path("sequences.jsonl"), seqs)
    ws.stamp("sequences.jsonl", "encode", ["labels.csv"])
    return {"n_sequences": len(seqs), "n_symbols": sum(len(q) for q in seqs)}


def _sequences(ws):
    seqs = seq.read_jsonl(ws.require("sequences.jsonl"))
    if not seqs:
        raise PipelineError("sequences.jsonl is empty", "encode", "empty_input")
    return seqs


def run_seqfeat(ws: Workspace):
    seqs = _sequences(ws)
    model = seq.build_context_model(seqs, ws.cfg.seq.alpha)
    X = seq.feature_matrix(seqs, model)
    seq.write_feature_csv(ws.path("seqfeatures.csv"), seqs, X)
    ft = seq.syllable_frequency_table(seq.group_by_context(seqs))
    with open(ws.path("syllable_freq.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["context", "symbol", "count", "freq"])
        for ci, ctx in enumerate(ft.contexts):
            for si, s in enumerate(ft.alphabet):
                w.writerow([ctx, s, int(ft.counts[ci, si]), repr(float(ft.freqs[ci, si]))])
    ws.stamp("seqfeatures.csv", "seqfeat", ["sequences.jsonl"])
    return {"n_sequences": len(seqs), "n_features": X.shape[1]}


def _mr_groups(seqs, grouping):
    groups = defaultdict(list)
    for q in seqs:
        key = q.context if grouping == "context" else f"{q.context}/{q.emitter_id}"
        groups[key].append(q.symbols)
    return dict(sorted(groups.items()))


def run_mr(ws: Workspace):
    cfg = ws.cfg.maxrep
    seqs = _sequences(ws)
    groups = _mr_groups(seqs, cfg.grouping)
    invs = [maxrep.inventory(v, k, 2, cfg.min_length) for k, v in groups.items()]
    maxrep.write_inventory_csv(ws.path("mr_inventory.csv"), invs)
    by_ctx = defaultdict(list)
    for inv in invs:
        by_ctx[inv.context.split("/")[0]].append(inv)
    n_syms = Counter()
    n_seqs = Counter()
    for q in seqs:
        n_syms[q.context] += len(q)
        n_seqs[q.context] += 1
    contexts = {}
    for ctx in sorted(by_ctx):
        reps = [r for inv in by_ctx[ctx] for r in inv.repeats]
        qual = [r.length for r in reps if r.support >= cfg.min_support]
        contexts[ctx] = {
            "n_sequences": n_seqs[ctx], "n_symbols": n_syms[ctx], "n_repeats": len(reps),
            "n_repeats_min_support": len(qual),
            "mean_length": float(np.mean(qual)) if qual else None,
            "max_length": max(qual) if qual else None,
            "length_distribution": {str(k): v for k, v in sorted(Counter(r.length for r in reps).items())},
        }

    def pooled(names):
        vals = [r.length for c in names if c in by_ctx for inv in by_ctx[c] for r in inv.repeats
                if r.support >= cfg.min_support]
        return float(np.mean(vals)) if vals else None

    summary = {"grouping": cfg.grouping, "min_support": cfg.min_support, "min_length": cfg.min_length,
               "contexts": contexts, "conflict_mean_length": pooled(seq.CONFLICT_CONTEXTS),
               "cooperative_mean_length": pooled(seq.COOPERATIVE_CONTEXTS)}
    dump_json(ws.path("mr_summary.json"), summary)
    ws.stamp("mr_summary.json", "mr", ["sequences.jsonl"])
    ws.stamp("mr_inventory.csv", "mr", ["sequences.jsonl"])
    return {k: summary[k] for k in ("conflict_mean_length", "cooperative_mean_length")}


def _fit_block(lengths, cfg):
    lengths = np.asarray(lengths, dtype=int)
    out = {"n": int(len(lengths))}
    try:
        xmin = cfg.xmin
        if cfg.xmin_scan:
            xmin, _ = stats.scan_xmin(lengths)
        out.update(stats.compare_tail_models(lengths, xmin))
    except (stats.FitError, ValueError) as exc:
        out["error"] = str(exc)
    return out


def run_fit(ws: Workspace):
    cfg = ws.cfg.stats
    invs = maxrep.read_inventory_csv(ws.require("mr_inventory.csv"), cfg.fit_min_support)
    by_ctx = defaultdict(list)
    for name, inv in invs.items():
        by_ctx[name.split("/")[0]].extend(inv.lengths().tolist())
    pooled = [v for ctx in sorted(by_ctx) for v in by_ctx[ctx]]
    result = {"min_support": cfg.fit_min_support, "pooled": _fit_block(pooled, cfg),
              "contexts": {ctx: _fit_block(by_ctx[ctx], cfg) for ctx in sorted(by_ctx)}}
    dump_json(ws.path("fits.json"), result)
    ws.stamp("fits.json", "fit", ["mr_inventory.csv"])
    return {"pooled_n": result["pooled"]["n"]}


def _forest_params(cfg) -> classify.ForestParams:
    c = cfg.classify
    return classify.ForestParams(n_trees=c.n_trees, max_features=c.max_features,
                                 min_samples_leaf=c.min_samples_leaf, n_jobs=cfg.run.n_jobs)


def run_hp1(ws: Workspace):
    seqs = _sequences(ws)
    try:
        res = classify.permutation_experiment(seqs, _forest_params(ws.cfg), ws.cfg.seed("test-hp1"),
                                              ws.cfg.classify.k_folds, ws.cfg.seq.alpha,
                                              ws.cfg.classify.permutation_scope)
    except ValueError as exc:
        raise PipelineError(f"permutation experiment failed: {exc}", kind="invalid_input") from None
    out = res.to_dict()
    out["scope"] = ws.cfg.classify.permutation_scope
    dump_json(ws.path("hp1.json"), out)
    ws.stamp("hp1.json", "test-hp1", ["sequences.jsonl"])
    return {"f1_original": res.f1_original, "f1_permuted": res.f1_permuted, "delta": res.delta}


def run_hp2(ws: Workspace):
    seqs = _sequences(ws)
    ft = seq.syllable_frequency_table(seq.group_by_context(seqs))
    ctxs = ft.contexts
    W = [[None] * len(ctxs) for _ in ctxs]
    P = [[None] * len(ctxs) for _ in ctxs]
    for i in range(len(ctxs)):
        for j in range(len(ctxs)):
            if i != j:
                W[i][j], P[i][j] = stats.wilcoxon_rank_sum(ft.freqs[i], ft.freqs[j])
    with open(ws.path("wilcoxon.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["context", *ctxs])
        for c, row in zip(ctxs, P):
            w.writerow([c, *("" if v is None else repr(v) for v in row)])
    out = {"contexts": ctxs, "alphabet": ft.alphabet, "frequencies": ft.freqs.tolist(),
           "statistic": W, "p_value": P}
    dump_json(ws.path("hp2.json"), out)
    ws.stamp("hp2.json", "test-hp2", ["sequences.jsonl"])
    return {"n_contexts": len(ctxs)}


def run_classify(ws: Workspace):
    meta, X = seq.read_feature_csv(ws.require("seqfeatures.csv"))
    y = np.array([m[2] for m in meta])
    seed = ws.cfg.seed("classify")
    params = _forest_params(ws.cfg)
    try:
        rep = classify.cross_validate(X, y, ws.cfg.classify.k_folds, seed, params)
        imp = classify.feature_importance(classify.train_forest(X, y, params, seed))
    except ValueError as exc:
        raise PipelineError(f"classification failed: {exc}", kind="invalid_input") from None
    out = rep.to_dict()
    out["feature_importance"] = dict(zip(seq.FEATURE_IDS, imp.tolist()))
    dump_json(ws.path("classify.json"), out)
    with open(ws.path("confusion.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["true\\pred", *rep.classes])
        for c, row in zip(rep.classes, rep.confusion_matrix):
            w.writerow([c, *row])
    with open(ws.path("importance.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["feature", "importance"])
        for f, v in zip(seq.FEATURE_IDS, imp):
            w.writerow([f, repr(float(v))])
    ws.stamp("classify.json", "classify", ["seqfeatures.csv"])
    return {"macro_f1": rep.macro_f1}


def run_network(ws: Workspace):
    c = ws.cfg.netgraph
    seqs = _sequences(ws)
    graphs = {ctx: netgraph.build_transition_graph(qs, ctx) for ctx, qs in seq.group_by_context(seqs).items()}
    rows = netgraph.small_world_sweep(graphs, ws.cfg.seed("network"), c.n_rand, c.swaps_per_edge,
                                      c.lattice_swaps_per_edge)
    netgraph.write_metrics_csv(ws.path("graph_metrics.csv"), rows)
    edge_dir = ws.path("edges")
    if edge_dir.exists():
        shutil.rmtree(edge_dir)
    edge_dir.mkdir()
    for ctx, g in graphs.items():
        netgraph.write_edges_csv(edge_dir / f"{ctx}.csv", g)
    ws.stamp("graph_metrics.csv", "network", ["sequences.jsonl"])
    return {"n_graphs": len(graphs)}


def _read_metrics_csv(path):
    with open(path, newline="") as fh:
        return {r["context"]: {k: (None if v == "" else float(v)) for k, v in r.items() if k != "context"}
                for r in csv.DictReader(fh)}


def run_report(ws: Workspace):
    mr = load_json(ws.require("mr_summary.json"))
    fits = load_json(ws.require("fits.json"))
    hp1 = load_json(ws.require("hp1.json"))
    hp2 = load_json(ws.require("hp2.json"))
    graphs = _read_metrics_csv(ws.require("graph_metrics.csv"))

    def fit_row(block):
        row = {"n": block.get("n")}
        for fam, f in block.get("fits", {}).items():
            row[f"{fam}_loglik"] = f["loglik"]
            for k, v in f["params"].items():
                row[f"{fam}_{k}"] = v
        for name, t in block.get("tests", {}).items():
            row[f"{name}_R"] = t.get("R")
            row[f"{name}_p"] = t.get("p_value")
            row[f"{name}_preferred"] = t.get("preferred")
        return row

    report = {
        "mr": {ctx: {k: v for k, v in d.items() if k != "length_distribution"}
               for ctx, d in mr["contexts"].items()},
        "mr_groups": {"conflict_mean_length": mr["conflict_mean_length"],
                      "cooperative_mean_length": mr["cooperative_mean_length"]},
        "fits": {"pooled": fit_row(fits["pooled"]),
                 **{ctx: fit_row(b) for ctx, b in fits["contexts"].items()}},
        "hp1": {"f1_original": hp1["f1_original"], "f1_permuted": hp1["f1_permuted"],
                "delta": hp1["delta"], "scope": hp1["scope"]},
        "wilcoxon_p": {c: dict(zip(hp2["contexts"], row)) for c, row in zip(hp2["contexts"], hp2["p_value"])},
        "graph_metrics": graphs,
    }
    if ws.path("classify.json").exists():
        report["classify"] = {"macro_f1": load_json(ws.require("classify.json"))["macro_f1"]}
    if ws.path("label_report.json").exists():
        lr = load_json(ws.path("label_report.json"))
        report["labels"] = {k: lr.get(k) for k in ("n_labels", "n_syllables", "top5_mean_silhouette",
                                                   "truth_agreement")}
    dump_json(ws.path("report.json"), report)
    with open(ws.path("report.csv"), "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["table", "row", "column", "value"])
        for table in sorted(report):
            block = report[table]
            for row in sorted(block):
                val = block[row]
                items = sorted(val.items()) if isinstance(val, dict) else [("value", val)]
                for col, v in items:
                    if isinstance(v, dict):
                        v = json.dumps(_clean(v), sort_keys=True)
                    w.writerow([table, row, col, "" if v is None else (repr(v) if isinstance(v, float) else v)])
    return {"sections": sorted(report)}


STAGES = {
    "synth": run_synth,
    "ingest": run_ingest,
    "segment": run_segment,
    "featurize": run_featurize,
    "label": run_label,
    "encode": run_encode,
    "seqfeat": run_seqfeat,
    "mr": run_mr,
    "fit": run_fit,
    "test-hp1": run_hp1,
    "test-hp2": run_hp2,
    "classify": run_classify,
    "network": run_network,
    "report": run_report,
}

AUDIO_CHAIN = ["synth", "ingest", "segment", "featurize", "label", "encode", "seqfeat", "mr", "fit",
               "test-hp1", "test-hp2", "classify", "network", "report"]
SYMBOLIC_CHAIN = ["synth", "encode", "seqfeat", "mr", "fit", "test-hp1", "test-hp2", "classify",
                  "network", "report"]


def run_stage(name: str, cfg: PipelineConfig, workdir) -> dict:
    if name not in STAGES:
        raise PipelineError(f"unknown stage {name!r}", kind="usage")
    return STAGES[name](Workspace(workdir, cfg))
