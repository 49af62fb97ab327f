"""Run the whole stage chain on a synthetic fixture in one work directory.

    python3 scripts/run_pipeline.py -w runs/audio --mode audio --set synth.n_seqs=40
"""

import argparse
import json
import time

from gradedvocal.config import load_config
from gradedvocal.pipeline import AUDIO_CHAIN, SYMBOLIC_CHAIN, run_stage


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-w", "--workdir", required=True)
    ap.add_argument("-c", "--config")
    ap.add_argument("--mode", choices=["symbolic", "audio"], default="symbolic")
    ap.add_argument("--set", dest="overrides", action="append", default=[])
    args = ap.parse_args()
    cfg = load_config(args.config, [f"synth.mode={args.mode}", *args.overrides])
    chain = AUDIO_CHAIN if args.mode == "audio" else SYMBOLIC_CHAIN
    for stage in chain:
        t0 = time.perf_counter()
        summary = run_stage(stage, cfg, args.workdir)
        print(f"{stage:10s} {time.perf_counter() - t0:6.1f} s  {json.dumps(summary, default=str)}")


if __name__ == "__main__":
    main()
