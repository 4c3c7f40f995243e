#!/usr/bin/env python3
"""Writes the synthetic 845-response corpus used by tests and demos.

Every row is machine-generated from phrase lists; none of it is real student
writing. Output is deterministic for a given seed.
"""
import argparse
import csv
import random

PROFICIENT_CORE = [
    "when the water is heated the particles move faster",
    "the hot water particles have more kinetic energy so they move faster",
    "in the warm dish the water and dye molecules speed up",
    "heating the water makes the molecules move quicker and bump into the candy more",
    "at a higher temperature the particles move faster so the color spreads",
    "the molecules in the heated dish move faster than in the cold dish",
    "adding thermal energy makes the water particles move around faster",
    "the dye particles move faster in the hot water because they gained energy",
]
PROFICIENT_EXTRA = [
    "so the red coating comes off faster.",
    "and in the cold dish they move slower.",
    "which spreads the dye through the whole dish.",
    "so the candy color mixes in quickly.",
    "and the room temperature dish is in between.",
    "",
]
BEGINNING = [
    "the candy melts in the hot water",
    "the color goes away",
    "i think the cold one changes the most",
    "the water gets red",
    "heat makes the candy dissolve",
    "the chocolate sinks to the bottom",
    "it turns pink in all the dishes",
    "the hot water is hotter than the cold water",
    "the candy gets smaller",
    "i dont know",
    "the dye spreads out",
    "the temperature changes the candy",
    "the red comes off the candy",
    "thermal energy goes into the dish",
    "the particles",
    "cold water makes it freeze",
]
BEGINNING_EXTRA = [
    "because of the heat.",
    "after a while.",
    "and it looks cool.",
    "in the middle dish too.",
    "",
    "",
]
GIBBERISH = "erljhfgefb,jkh"


def sentence(rng, core, extra):
    text = rng.choice(core)
    tail = rng.choice(extra)
    if tail:
        text = text + " " + tail
    else:
        text = text + "."
    if rng.random() < 0.5:
        text = text[0].upper() + text[1:]
    return text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--rows", type=int, default=845)
    ap.add_argument("--proficient", type=int, default=331)
    ap.add_argument("--gibberish-id", default="syn-0002")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    labels = ["Proficient"] * args.proficient + ["Beginning"] * (args.rows - args.proficient)
    rng.shuffle(labels)

    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "text", "score_level"])
        for i, label in enumerate(labels, start=1):
            rid = "syn-%04d" % i
            if rid == args.gibberish_id:
                label = "Beginning"
                text = GIBBERISH
            elif label == "Proficient":
                text = sentence(rng, PROFICIENT_CORE, PROFICIENT_EXTRA)
                if rng.random() < 0.3:
                    text += " " + sentence(rng, PROFICIENT_CORE, PROFICIENT_EXTRA)
            else:
                text = sentence(rng, BEGINNING, BEGINNING_EXTRA)
            w.writerow([rid, text, label])


if __name__ == "__main__":
    main()
