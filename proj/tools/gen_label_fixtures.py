#!/usr/bin/env python3
"""Builds the planted label fixtures by driving `autofeedback annotate` with
scripted answers.

Consolidated label sets carry fixed issue counts per run (over-praise only,
over-inference only, both, neither). Dual-rater overlap files agree on every
record except one planted disagreement. None of these labels come from human
raters.
"""
import argparse
import json
import os
import random
import shutil
import subprocess
import sys
import tempfile

# (over-praise only, over-inference only, both, neither)
PLANTED = {
    "single": (14, 45, 23, 158),
    "multi": (1, 15, 2, 222),
}


def run_ids(run_dir):
    with open(os.path.join(run_dir, "records.jsonl"), encoding="utf-8") as f:
        return [json.loads(line)["response_id"] for line in f if line.strip()]


def planted_labels(ids, counts, seed):
    rng = random.Random(seed)
    shuffled = sorted(ids)
    rng.shuffle(shuffled)
    kinds = []
    for kind, n in zip([(True, False), (False, True), (True, True), (False, False)], counts):
        kinds += [kind] * n
    if len(kinds) != len(ids):
        sys.exit("planted counts do not add up to the run size")
    return dict(zip(shuffled, kinds))


def header_ids(label_file):
    with open(label_file, encoding="utf-8") as f:
        return json.loads(f.readline())["record_ids"]


def annotate(cli, run_dir, rater, label_file, answers_for, extra):
    base = [cli, "annotate", "--run", run_dir, "--rater", rater, "--labels", label_file] + extra
    # First pass with no input writes the header so the presentation order is known.
    subprocess.run(base, input="", text=True, check=True, capture_output=True)
    ids = header_ids(label_file)
    script = ""
    for rid in ids:
        op, oi = answers_for(rid)
        script += ("y" if op else "n") + "\n" + ("y" if oi else "n") + "\n\n"
    subprocess.run(base, input=script, text=True, check=True, capture_output=True)
    return ids


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cli", required=True)
    ap.add_argument("--runs", required=True, help="directory with single/ and multi/ runs")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    for mode, counts in PLANTED.items():
        run_dir = os.path.join(args.runs, mode)
        truth = planted_labels(run_ids(run_dir), counts, args.seed + (mode == "multi"))
        target = os.path.join(args.out, "%s_consensus.jsonl" % mode)
        if os.path.exists(target):
            os.remove(target)
        annotate(args.cli, run_dir, "consensus", target, lambda rid: truth[rid], [])

        if mode != "multi":
            continue
        a_file = os.path.join(args.out, "multi_overlap_rater_a.jsonl")
        b_file = os.path.join(args.out, "multi_overlap_rater_b.jsonl")
        c_file = os.path.join(args.out, "multi_overlap_rater_c.jsonl")
        rest_file = os.path.join(args.out, "multi_remainder_rater_a.jsonl")
        for f in (a_file, b_file, c_file, rest_file):
            if os.path.exists(f):
                os.remove(f)
        overlap = annotate(args.cli, run_dir, "rater-a", a_file, lambda rid: truth[rid], ["--overlap"])
        # Rater C matches rater A everywhere.
        annotate(args.cli, run_dir, "rater-c", c_file, lambda rid: truth[rid], ["--overlap"])
        planted = sorted(overlap)[len(overlap) // 2]

        def rater_b(rid):
            op, oi = truth[rid]
            return (not op, oi) if rid == planted else (op, oi)

        annotate(args.cli, run_dir, "rater-b", b_file, rater_b, ["--overlap"])
        annotate(args.cli, run_dir, "rater-a", rest_file, lambda rid: truth[rid], ["--remainder"])
        op, oi = truth[planted]
        with open(os.path.join(args.out, "multi_overlap_decisions.jsonl"), "w", encoding="utf-8") as f:
            f.write(json.dumps({"record_id": planted, "over_praise": op, "over_inference": oi,
                                "note": "planted disagreement, resolved to rater A"}) + "\n")


if __name__ == "__main__":
    main()
