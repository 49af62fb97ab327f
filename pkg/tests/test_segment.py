import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradedvocal import segment
from gradedvocal.audio import AudioClip
from gradedvocal.segment import SegmentParams, dynamic_threshold_segment, fixed_floor_segment
from gradedvocal.synth import Burst, TestAudioSpec, gen_test_audio, sequence_audio

SR = 250_000
ONSETS = [0.10, 0.18, 0.26]  # 30 ms bursts, 50 ms gaps


def three_bursts(seed=0):
    bursts = [Burst(on, 0.03, 20_000) for on in ONSETS]
    return gen_test_audio(TestAudioSpec(0.45, bursts), SR, seed)


def assert_well_formed(table, min_len=0.0):
    rows = table.rows
    assert all(on < off for _, _, on, off in rows)
    assert all(off - on >= min_len - 1e-12 for _, _, on, off in rows)
    assert all(rows[i][3] <= rows[i + 1][2] for i in range(len(rows) - 1))
    assert [r[1] for r in rows] == list(range(len(rows)))


def test_runs():
    assert segment.runs(np.array([0, 1, 1, 0, 1], bool)) == [(1, 3), (4, 5)]
    assert segment.runs(np.zeros(3, bool)) == []


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dynamic_three_bursts(seed):
    table = dynamic_threshold_segment(three_bursts(seed), recording_id="r")
    assert len(table) == 3
    assert np.max(np.abs(table.onsets - ONSETS)) <= 0.005
    assert np.max(np.abs(table.offsets - (np.array(ONSETS) + 0.03))) <= 0.005
    assert_well_formed(table, 0.01)
    assert table.threshold_db == 20.0


def test_dynamic_silence_is_empty():
    table = dynamic_threshold_segment(AudioClip(np.zeros(SR // 2), SR))
    assert len(table) == 0 and table.no_threshold


def test_dynamic_short_burst_is_empty():
    clip = gen_test_audio(TestAudioSpec(0.4, [Burst(0.1, 0.005, 20_000)]), SR)
    assert len(dynamic_threshold_segment(clip)) == 0


def test_dynamic_deterministic():
    a = dynamic_threshold_segment(three_bursts())
    b = dynamic_threshold_segment(three_bursts())
    assert a.rows == b.rows


def test_sequence_audio_recovered():
    clip, truth = sequence_audio([0, 1, 2, 3, 4, 5, 0], seed=3)
    table = dynamic_threshold_segment(clip)
    assert len(table) == len(truth)
    assert np.max(np.abs(table.onsets - [t[0] for t in truth])) <= 0.005


def test_fixed_floor():
    assert len(fixed_floor_segment(AudioClip(np.zeros(SR // 4), SR), -40)) == 0
    long = gen_test_audio(TestAudioSpec(0.5, [Burst(0.1, 0.2, 10_000)]), SR)
    assert len(fixed_floor_segment(long, -30)) == 1
    table = fixed_floor_segment(three_bursts(), -30, min_syllable_length_s=0.01)
    assert len(table) == 3
    assert np.max(np.abs(table.onsets - ONSETS)) <= 0.005
    with pytest.raises(ValueError):
        fixed_floor_segment(three_bursts(), float("nan"))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.tuples(st.floats(0.002, 0.06), st.floats(0.01, 0.08)), min_size=1, max_size=4),
       st.integers(0, 1000))
def test_segments_sorted_and_monotone_in_min_length(shape, seed):
    bursts, t = [], 0.12
    for dur, gap in shape:
        bursts.append(Burst(t, dur, 25_000))
        t += dur + gap
    clip = gen_test_audio(TestAudioSpec(t + 0.12, bursts), SR, seed)
    counts = []
    for min_len in (0.02, 0.01, 0.005, 0.0):
        p = SegmentParams(min_syllable_length_s=min_len)
        table = dynamic_threshold_segment(clip, p)
        assert_well_formed(table, min_len)
        counts.append(len(table))
    assert counts == sorted(counts)


def test_segments_csv_roundtrip(tmp_path):
    table = dynamic_threshold_segment(three_bursts(), recording_id="rec1")
    segment.write_segments(tmp_path / "s.csv", table)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "recording_id,seg_index,onset_s,offset_s"
    assert segment.read_segments(tmp_path / "s.csv").rows == table.rows
