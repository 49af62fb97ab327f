import json
import subprocess
import sys
from dataclasses import fields

import pytest

from gradedvocal import cli
from gradedvocal.config import PipelineConfig


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_help_lists_every_config_key(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    cfg = PipelineConfig()
    for f in fields(cfg):
        assert f"[{f.name}]" in text
        for g in fields(getattr(cfg, f.name)):
            assert f"{g.name} = {getattr(getattr(cfg, f.name), g.name)}" in text
    for name in cli.SUBCOMMANDS:
        assert name in text


def test_missing_input_error_json(capsys, tmp_path):
    code, out, err = run(capsys, "-w", str(tmp_path), "fit")
    assert code == 1 and out == ""
    msg = json.loads(err)
    assert msg["error"] == "missing_input" and msg["producer"] == "mr"
    assert msg["subcommand"] == "fit"


def test_unknown_config_key_error_json(capsys, tmp_path):
    code, _, err = run(capsys, "-w", str(tmp_path), "--set", "maxrep.bogus=1", "synth")
    assert code == 1
    assert json.loads(err)["error"] == "ValueError"


def test_bad_flag_value(capsys, tmp_path):
    code, _, err = run(capsys, "-w", str(tmp_path), "synth", "--n-seqs", "many")
    assert code == 1 and "n_seqs" in json.loads(err)["message"]


def test_subcommand_flags_reach_config(capsys, tmp_path):
    code, out, _ = run(capsys, "-w", str(tmp_path), "--seed", "4", "synth", "--n-seqs", "40",
                       "--corpus", "combinatorial")
    assert code == 0
    assert json.loads(out)["n_sequences"] == 40
    # later stages see a config without the synth flags, so the labels look stale
    code, _, err = run(capsys, "-w", str(tmp_path), "--seed", "4", "encode")
    assert code == 1 and json.loads(err)["producer"] == "synth"
    same = ["--seed", "4", "--set", "synth.n_seqs=40", "--set", "synth.corpus=combinatorial"]
    assert run(capsys, "-w", str(tmp_path), *same, "encode")[0] == 0
    code, out, _ = run(capsys, "-w", str(tmp_path), *same, "mr", "--min-support", "3")
    assert code == 0
    summary = json.loads((tmp_path / "mr_summary.json").read_text())
    assert summary["min_support"] == 3
    # a different seed makes the stored chain stale
    code, _, err = run(capsys, "-w", str(tmp_path), "--seed", "5", "fit")
    assert code == 1 and json.loads(err)["error"] == "stale_input"


def test_config_file(capsys, tmp_path):
    cfgfile = tmp_path / "run.ini"
    cfgfile.write_text("[synth]\nn_seqs = 24\n")
    code, out, _ = run(capsys, "-c", str(cfgfile), "-w", str(tmp_path), "synth")
    assert code == 0 and json.loads(out)["n_sequences"] == 24


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gradedvocal.cli", "-w", str(tmp_path), "report"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stderr)["producer"] == "mr"
