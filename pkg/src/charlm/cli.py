"""Command-line interface: train, generate, eval, export-pretrained, serve."""

import argparse
import pathlib
import sys

import numpy as np

from . import checkpoint as C
from . import data as D
from . import evaluation as E
from . import inference as I
from . import model as M
from . import training as TR
from .errors import CharlmError

# fixed recipe for the bundled pre-trained model (regenerate with
# `charlm export-pretrained --out src/charlm/corpora/pretrained-tiny.llmc`)
PRETRAIN_RECIPE = dict(corpus="stories", preset="tiny-2M", steps=300,
                       seed=1234, batch=16, lr=3e-3)


class _UserError(CharlmError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UserError(message)


def load_corpus_text(spec):
    if spec in D.BUILTIN_CORPORA:
        return D.builtin_corpus_path(spec).read_text(encoding="utf-8")
    path = pathlib.Path(spec)
    if not path.is_file():
        raise _UserError(f"corpus '{spec}' is neither a built-in id nor a file")
    return path.read_text(encoding="utf-8")


def _train(args):
    text = load_corpus_text(args.corpus)
    if args.model:
        state, vocab, cfg = C.import_checkpoint(
            pathlib.Path(args.model).read_bytes(), seed=args.seed)
        state.rng = np.random.default_rng(args.seed)
    else:
        vocab = D.Vocabulary.from_text(text)
        cfg = M.preset(args.preset, vocab.size)
        state = TR.TrainState.fresh(cfg, seed=args.seed)
    corpus = D.Corpus.from_text(args.corpus, text, vocab=vocab)
    hyper = TR.Hyperparameters(
        batch_size=args.batch, lr_max=args.lr,
        max_steps=state.step + args.steps,
        precision="half" if args.mixed_precision else "full")
    for i in range(args.steps):
        metrics = TR.step_once(state, corpus, hyper)
        if (i + 1) % 50 == 0 or i == 0:
            print(f"step {metrics['step']}  loss {metrics['loss']:.4f}  "
                  f"{metrics['tokens_per_sec']:.0f} tok/s", file=sys.stderr)
    blob = C.export_checkpoint(state, vocab)
    pathlib.Path(args.out).write_bytes(blob)
    print(f"wrote {args.out} ({len(blob):,} bytes)", file=sys.stderr)
    return 0


def _generate(args):
    state, vocab, cfg = C.import_checkpoint(pathlib.Path(args.model).read_bytes())
    settings = I.GenerationSettings(
        temperature=0.0 if args.greedy else args.temperature,
        top_k=args.top_k, max_new_tokens=args.n, seed=args.seed)
    sys.stdout.write(args.prompt)
    for token in I.generate(state.weights, cfg, vocab, args.prompt, settings):
        sys.stdout.write(vocab.decode([token]))
        sys.stdout.flush()
    sys.stdout.write("\n")
    return 0


def _eval(args):
    state, vocab, cfg = C.import_checkpoint(pathlib.Path(args.model).read_bytes())
    text = load_corpus_text(args.corpus)
    corpus = D.Corpus.from_text(args.corpus, text, vocab=vocab)
    report = E.evaluate(state.weights, cfg, vocab, corpus)
    print(report.to_json())
    return 0


def _export_pretrained(args):
    r = PRETRAIN_RECIPE
    ns = argparse.Namespace(corpus=r["corpus"], preset=r["preset"], model=None,
                            steps=r["steps"], seed=r["seed"], batch=r["batch"],
                            lr=r["lr"], mixed_precision=False, out=args.out)
    return _train(ns)


def _serve(args):
    from . import server
    server.serve(args.serve_addr, once=args.once)
    return 0


def build_parser():
    p = _Parser(prog="charlm",
                description="Miniature character-level transformer training studio")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--corpus", required=True, help="built-in id or UTF-8 file path")
    t.add_argument("--preset", default="tiny-2M", choices=sorted(M.PRESETS))
    t.add_argument("--model", help="checkpoint to fine-tune instead of fresh weights")
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--lr", type=float, default=3e-3)
    t.add_argument("--mixed-precision", action="store_true")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_train)

    g = sub.add_parser("generate", help="sample text from a checkpoint")
    g.add_argument("--model", required=True)
    g.add_argument("--prompt", default="")
    g.add_argument("--greedy", action="store_true")
    g.add_argument("--temperature", type=float, default=0.8)
    g.add_argument("--top-k", type=int, default=40)
    g.add_argument("-n", type=int, default=200, help="tokens to generate")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_generate)

    e = sub.add_parser("eval", help="print the quality report for a checkpoint")
    e.add_argument("--model", required=True)
    e.add_argument("--corpus", required=True)
    e.set_defaults(func=_eval)

    x = sub.add_parser("export-pretrained",
                       help="rebuild the bundled pre-trained model (fixed recipe)")
    x.add_argument("--out", required=True)
    x.set_defaults(func=_export_pretrained)

    s = sub.add_parser("serve", help="serve the session protocol on a local socket")
    s.add_argument("--serve-addr", default="127.0.0.1:7651")
    s.add_argument("--once", action="store_true",
                   help="exit after the first connection closes")
    s.set_defaults(func=_serve)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CharlmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as e:  # internal failure
        print(f"internal error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
