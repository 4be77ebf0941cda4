#!/usr/bin/env python3
"""Regenerate the bundled training corpora.

Expands the seed passages in tools/seed_*.txt into the sizes the studio
ships with, by deterministically recombining runs of seed lines into new
scenes/tales. Output is reproducible bit-for-bit (fixed RNG seed).

Usage: python tools/make_corpora.py
"""

import pathlib

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
OUT = HERE.parent / "src" / "charlm" / "corpora"

SHAKESPEARE_TARGET = 1_150_000  # chars; reads "marginal" for the 4M preset
STORIES_TARGET = 600_000

ROMAN = ["I", "II", "III", "IV", "V"]


def parse_passages(path):
    """Split a seed file into passages: (speaker, [lines])."""
    passages = []
    for block in path.read_text(encoding="utf-8").strip().split("\n\n"):
        lines = block.strip().split("\n")
        speaker = lines[0].rstrip(".")
        passages.append((speaker, lines[1:]))
    return passages


def expand_shakespeare(passages, target, rng):
    out = []
    size = 0
    act = scene = 0
    while size < target:
        scene += 1
        if scene > 4:
            scene = 1
            act += 1
        header = f"ACT {ROMAN[act % 5]}. SCENE {ROMAN[scene - 1]}.\n\n"
        out.append(header)
        size += len(header)
        for _ in range(rng.integers(4, 9)):
            speaker, lines = passages[rng.integers(0, len(passages))]
            start = int(rng.integers(0, len(lines)))
            run = int(rng.integers(2, 7))
            speech = "\n".join(lines[start:start + run])
            chunk = f"{speaker}.\n{speech}\n\n"
            out.append(chunk)
            size += len(chunk)
    return "".join(out)


def expand_stories(passages, target, rng):
    out = []
    size = 0
    n = 0
    while size < target:
        n += 1
        title, lines = passages[rng.integers(0, len(passages))]
        out.append(f"{title}.\n")
        size += len(title) + 2
        for _ in range(rng.integers(3, 7)):
            _, src = passages[rng.integers(0, len(passages))]
            start = int(rng.integers(0, len(src)))
            run = int(rng.integers(2, 5))
            chunk = "\n".join(src[start:start + run]) + "\n"
            out.append(chunk)
            size += len(chunk)
        out.append("\n")
        size += 1
    return "".join(out)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240601)
    shakespeare = expand_shakespeare(parse_passages(HERE / "seed_shakespeare.txt"),
                                     SHAKESPEARE_TARGET, rng)
    (OUT / "shakespeare.txt").write_text(shakespeare, encoding="utf-8")
    rng = np.random.default_rng(20240602)
    stories = expand_stories(parse_passages(HERE / "seed_stories.txt"),
                             STORIES_TARGET, rng)
    (OUT / "stories.txt").write_text(stories, encoding="utf-8")
    print(f"shakespeare.txt: {len(shakespeare):,} chars, "
          f"{len(set(shakespeare))} distinct")
    print(f"stories.txt: {len(stories):,} chars, {len(set(stories))} distinct")


if __name__ == "__main__":
    main()
