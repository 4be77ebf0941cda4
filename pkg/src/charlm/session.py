"""Command/event state machine binding corpora, model, training, generation,
and evaluation into one steerable workflow.

Commands and events are plain JSON-able dicts with a "type" field, so any
front end or transport can drive a session. The legality table below is the
published contract; illegal commands are answered with an Error event and
leave the state untouched."""

import base64
from importlib import resources

import numpy as np

from . import checkpoint as C
from . import data as D
from . import evaluation as E
from . import inference as I
from . import model as M
from . import training as TR
from .errors import CharlmError, DataError, FormatError, NumericsError

PROTOCOL_VERSION = 1

PHASES = ("idle", "training", "paused")

COMMAND_TYPES = (
    "ListCorpora", "UploadCorpus", "SelectCorpus", "ListPresets",
    "ConfigureModel", "StartTraining", "Pause", "Resume", "Generate",
    "Evaluate", "Export", "Import", "Shutdown",
)

# phase -> commands accepted in that phase (the published legality table)
LEGALITY = {
    "idle": {"ListCorpora", "UploadCorpus", "SelectCorpus", "ListPresets",
             "ConfigureModel", "StartTraining", "Generate", "Evaluate",
             "Export", "Import", "Shutdown"},
    "training": {"ListCorpora", "UploadCorpus", "ListPresets", "Pause",
                 "Generate", "Evaluate", "Export", "Shutdown"},
    "paused": {"ListCorpora", "UploadCorpus", "ListPresets", "Resume",
               "Generate", "Evaluate", "Export", "Shutdown"},
}

PRETRAINED_BUNDLES = {"tiny-stories": "pretrained-tiny.llmc"}


def _error(code, message):
    return {"type": "Error", "code": code, "message": message}


class Session:
    """Single-learner session: one corpus selection, one model, one run."""

    def __init__(self):
        self.phase = "idle"
        self.closed = False
        self._texts = {}          # corpus id -> raw text
        for cid in D.BUILTIN_CORPORA:
            self._texts[cid] = None  # lazy-loaded builtin
        self.selected_corpus = None
        self.cfg = None
        self.vocab = None
        self.state = None
        self.hyper = None
        self.steps_remaining = 0
        self._corpus_cache = {}

    # -- corpus helpers ----------------------------------------------------

    def _text(self, cid):
        t = self._texts[cid]
        if t is None:
            t = D.builtin_corpus_path(cid).read_text(encoding="utf-8")
            self._texts[cid] = t
        return t

    def _corpus(self, cid):
        """Corpus bound to the active vocabulary (checkpoint-derived models
        re-encode text against their own vocabulary)."""
        key = (cid, id(self.vocab))
        if key not in self._corpus_cache:
            source = "builtin" if cid in D.BUILTIN_CORPORA else "uploaded"
            self._corpus_cache[key] = D.Corpus.from_text(
                cid, self._text(cid), vocab=self.vocab, source=source)
        return self._corpus_cache[key]

    def _corpus_info(self, cid):
        text = self._text(cid)
        info = {"type": "CorpusInfo", "id": cid, "name": cid,
                "token_count": len(text)}
        if self.cfg is not None:
            corpus = self._corpus(cid)
            status = D.sufficiency(corpus, M.param_count(self.cfg))
            info["sufficiency"] = {
                "tokens_per_parameter": status.tokens_per_parameter,
                "verdict": status.verdict,
            }
        return info

    # -- command handling --------------------------------------------------

    def handle(self, cmd):
        """Process one command; returns the list of resulting events."""
        ctype = cmd.get("type")
        if ctype not in COMMAND_TYPES:
            return [_error("format-error", f"unknown command type {ctype!r}")]
        if ctype not in LEGALITY[self.phase]:
            return [_error("illegal-state",
                           f"command {ctype} is not legal in phase '{self.phase}'")]
        try:
            return getattr(self, f"_cmd_{ctype}")(cmd)
        except DataError as e:
            return [_error("corpus-too-small", str(e))]
        except FormatError as e:
            return [_error("format-error", str(e))]
        except NumericsError as e:
            return [_error("internal-numeric", str(e))]
        except CharlmError as e:
            return [_error("illegal-state", str(e))]

    def _cmd_ListCorpora(self, cmd):
        return [self._corpus_info(cid) for cid in self._texts]

    def _cmd_ListPresets(self, cmd):
        events = []
        for name, kw in M.PRESETS.items():
            vocab_size = self.vocab.size if self.vocab else 128
            cfg = M.ModelConfig(vocab_size=vocab_size, **kw)
            events.append({"type": "PresetInfo", "name": name,
                           "config": cfg.to_dict(),
                           "param_count": M.param_count(cfg)})
        return events

    def _cmd_UploadCorpus(self, cmd):
        name = cmd.get("name", "upload")
        if "text" in cmd:
            text = cmd["text"]
        else:
            raw = base64.b64decode(cmd.get("data", ""))
            if len(raw) > D.MAX_UPLOAD_BYTES:
                raise DataError("upload exceeds the 20 MB limit")
            try:
                text = raw.decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError("upload is not valid UTF-8 text") from None
        if not text:
            raise DataError("uploaded corpus is empty")
        self._texts[name] = text
        return [self._corpus_info(name)]

    def _cmd_SelectCorpus(self, cmd):
        cid = cmd.get("id")
        if cid not in self._texts:
            raise DataError(f"no corpus with id '{cid}'")
        self.selected_corpus = cid
        return [self._corpus_info(cid)]

    def _cmd_ConfigureModel(self, cmd):
        start = cmd.get("start", "untrained")
        seed = int(cmd.get("seed", 0))
        if start == "pretrained":
            bundle = cmd.get("bundle", "tiny-stories")
            if bundle not in PRETRAINED_BUNDLES:
                raise DataError(f"no pre-trained bundle '{bundle}'")
            blob = (resources.files("charlm") / "corpora" /
                    PRETRAINED_BUNDLES[bundle]).read_bytes()
            self.state, self.vocab, self.cfg = C.import_checkpoint(blob, seed=seed)
        else:
            if self.selected_corpus is None:
                raise CharlmError("select a corpus before configuring an untrained model")
            text = self._text(self.selected_corpus)
            vocab = D.Vocabulary.from_text(text)
            if "preset" in cmd:
                cfg = M.preset(cmd["preset"], vocab.size)
            elif "config" in cmd:
                cfg = M.ModelConfig(vocab_size=vocab.size, **cmd["config"])
            else:
                raise CharlmError("ConfigureModel needs a preset or explicit config")
            self.vocab = vocab
            self.cfg = cfg
            self.state = TR.TrainState.fresh(cfg, seed=seed)
        self._corpus_cache.clear()
        events = [{"type": "ModelConfigured", "config": self.cfg.to_dict(),
                   "param_count": M.param_count(self.cfg), "start": start,
                   "step": self.state.step}]
        if self.selected_corpus is not None:
            events.append(self._corpus_info(self.selected_corpus))
        return events

    def _cmd_StartTraining(self, cmd):
        if self.state is None or self.selected_corpus is None:
            return [_error("illegal-state",
                           "StartTraining needs a selected corpus and a configured model")]
        hp = cmd.get("hyperparameters", {})
        self.hyper = TR.Hyperparameters(
            batch_size=int(hp.get("batch", 16)),
            lr_max=float(hp.get("lr", 3e-3)),
            max_steps=self.state.step + int(hp.get("steps", 2000)),
            precision="half" if hp.get("mixed") else "full",
        )
        if "seed" in hp:
            self.state.rng = np.random.default_rng(int(hp["seed"]))
        self.steps_remaining = int(hp.get("steps", 2000))
        # fail fast if the corpus cannot produce a single batch
        corpus = self._corpus(self.selected_corpus)
        if len(corpus.train_tokens) < self.cfg.context_len + 1:
            raise DataError("corpus too small for one training window")
        self.phase = "training"
        return [{"type": "StateChanged", "phase": "training"}]

    def pump(self, max_steps=1):
        """Run up to max_steps training steps; only meaningful while the
        phase is 'training'. Returns emitted events."""
        events = []
        if self.phase != "training":
            return events
        corpus = self._corpus(self.selected_corpus)
        for _ in range(max_steps):
            if self.steps_remaining <= 0:
                break
            try:
                metrics = TR.step_once(self.state, corpus, self.hyper)
            except NumericsError as e:
                self.phase = "idle"
                events.append(_error("internal-numeric", str(e)))
                events.append({"type": "StateChanged", "phase": "idle"})
                return events
            if not metrics.get("skipped"):
                self.steps_remaining -= 1
            events.append({"type": "TrainingMetrics",
                           "step": metrics["step"], "loss": metrics["loss"],
                           "tokens_seen": metrics["tokens_seen"],
                           "tokens_per_sec": metrics["tokens_per_sec"]})
        if self.steps_remaining <= 0:
            self.phase = "idle"
            events.append({"type": "StateChanged", "phase": "idle"})
        return events

    def _cmd_Pause(self, cmd):
        self.phase = "paused"
        return [{"type": "StateChanged", "phase": "paused"}]

    def _cmd_Resume(self, cmd):
        self.phase = "training"
        return [{"type": "StateChanged", "phase": "training"}]

    def _cmd_Generate(self, cmd):
        if self.state is None:
            return [_error("illegal-state", "no model configured")]
        s = cmd.get("settings", {})
        settings = I.GenerationSettings(
            temperature=float(s.get("temperature", 0.8)),
            top_k=s.get("top_k", 40),
            max_new_tokens=int(s.get("max_new_tokens", 64)),
            seed=int(s.get("seed", 0)),
        )
        if s.get("greedy"):
            settings.temperature = 0.0
        events = []
        for token in I.generate(self.state.weights, self.cfg, self.vocab,
                                cmd.get("prompt", ""), settings):
            events.append({"type": "GeneratedToken",
                           "text": self.vocab.decode([token])})
        events.append({"type": "GenerationDone"})
        return events

    def _cmd_Evaluate(self, cmd):
        if self.state is None:
            return [_error("illegal-state", "no model configured")]
        if self.selected_corpus is None:
            return [_error("illegal-state", "no corpus selected")]
        corpus = self._corpus(self.selected_corpus)
        report = E.evaluate(self.state.weights, self.cfg, self.vocab, corpus,
                            max_windows=cmd.get("max_windows"))
        return [{"type": "EvalResult", "report": report.to_dict()}]

    def _cmd_Export(self, cmd):
        if self.state is None:
            return [_error("illegal-state", "no model to export")]
        blob = C.export_checkpoint(self.state, self.vocab)
        return [{"type": "ExportReady",
                 "data": base64.b64encode(blob).decode("ascii")}]

    def _cmd_Import(self, cmd):
        blob = base64.b64decode(cmd.get("data", ""))
        self.state, self.vocab, self.cfg = C.import_checkpoint(blob)
        self._corpus_cache.clear()
        return [{"type": "ModelConfigured", "config": self.cfg.to_dict(),
                 "param_count": M.param_count(self.cfg), "start": "imported",
                 "step": self.state.step}]

    def _cmd_Shutdown(self, cmd):
        self.closed = True
        self.phase = "idle"
        return [{"type": "StateChanged", "phase": "idle"}]
