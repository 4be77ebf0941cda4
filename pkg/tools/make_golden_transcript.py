"""Regenerate tests/data/golden_transcript.json.

Runs a fixed command script against a fresh session and records every event.
The replay test re-runs the same script and demands identical payloads
(timing fields excluded), so regenerate this file whenever the session
contract intentionally changes:

    python tools/make_golden_transcript.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from charlm.session import Session

CORPUS = (
    "once there was a small machine that read letters one at a time. "
    "it learned which letter tends to follow which, and nothing more. "
) * 24

COMMANDS = [
    {"type": "ListPresets"},
    {"type": "UploadCorpus", "name": "golden", "text": CORPUS},
    {"type": "SelectCorpus", "id": "golden"},
    {"type": "ConfigureModel", "seed": 5,
     "config": {"n_layers": 2, "n_heads": 2, "d_model": 32, "context_len": 32}},
    {"type": "StartTraining",
     "hyperparameters": {"steps": 5, "batch": 4, "lr": 1e-3, "seed": 9}},
    {"type": "__pump__"},  # drive training to completion
    {"type": "Generate", "prompt": "once",
     "settings": {"greedy": True, "max_new_tokens": 8, "seed": 0}},
    {"type": "Evaluate", "max_windows": 2},
    {"type": "Export"},
    {"type": "Shutdown"},
]


def run_script(session=None):
    session = session or Session()
    entries = []
    for cmd in COMMANDS:
        if cmd["type"] == "__pump__":
            events = []
            while session.phase == "training":
                events.extend(session.pump(max_steps=10))
        else:
            events = session.handle(cmd)
        entries.append({"command": cmd, "events": events})
    return entries


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_transcript.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = {"commands": COMMANDS, "entries": run_script()}
    out.write_text(json.dumps(doc, indent=1, sort_keys=True))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
