"""Compare the compiled kernel extension against the portable numpy kernels.

Run:
    python benchmarks/bench_kernels.py

Times each fused kernel on training-shaped inputs, then a full train step
under both backends. The engine picks its backend at import via the
CHARLM_KERNELS environment variable ("auto" prefers the extension); this
script reports which choice is actually faster on the current machine.
"""

import time

import numpy as np

from charlm.backend import python_kernels as py

try:
    from charlm.backend import _fastcore
    from charlm.backend import ext_kernels as ext
except ImportError:
    _fastcore = ext = None

# training-shaped inputs: tiny-2M, batch 16, context 128
ROWS = 16 * 128
D_MODEL = 160
D_MLP = 640
HEADS = 4
SEQ = 128


def timeit(fn, repeats=20):
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1000  # ms


def bench_pair(name, py_fn, ext_fn, check=None):
    t_py = timeit(py_fn)
    if ext_fn is None:
        print(f"{name:<22} python {t_py:8.3f} ms   (no extension)")
        return
    t_ext = timeit(ext_fn)
    note = ""
    if check is not None and not check():
        note = "  RESULTS DIFFER"
    faster = "ext" if t_ext < t_py else "python"
    print(f"{name:<22} python {t_py:8.3f} ms   ext {t_ext:8.3f} ms   "
          f"-> {faster}{note}")


def main():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(ROWS, D_MLP)).astype(np.float32)
    g = rng.normal(size=(ROWS, D_MLP)).astype(np.float32)
    xa = rng.normal(size=(ROWS, D_MODEL)).astype(np.float32)
    ga = rng.normal(size=(ROWS, D_MODEL)).astype(np.float32)
    gain = np.ones(D_MODEL, dtype=np.float32)
    scores = rng.normal(size=(16, HEADS, SEQ, SEQ)).astype(np.float32)
    rx = rng.normal(size=(16, SEQ, HEADS, D_MODEL // HEADS)).astype(np.float32)
    from charlm.tensor import rope_tables
    cos, sin = rope_tables(np.arange(SEQ), D_MODEL // HEADS, 10000.0)
    w = rng.normal(size=(D_MODEL, D_MODEL)).astype(np.float32)
    gw = rng.normal(size=(D_MODEL, D_MODEL)).astype(np.float32)
    m = np.zeros_like(w)
    v = np.zeros_like(w)

    e = ext if ext is not None else None
    print(f"kernel timings ({ROWS} rows, d_model {D_MODEL}, mlp {D_MLP}):")
    bench_pair("gelu fwd", lambda: py.gelu_fwd(x),
               (lambda: e.gelu_fwd(x)) if e else None,
               lambda: np.allclose(py.gelu_fwd(x), e.gelu_fwd(x), atol=1e-5))
    bench_pair("gelu bwd", lambda: py.gelu_bwd(x, g),
               (lambda: e.gelu_bwd(x, g)) if e else None)
    bench_pair("rmsnorm fwd", lambda: py.rmsnorm_fwd(xa, gain, 1e-5),
               (lambda: e.rmsnorm_fwd(xa, gain, 1e-5)) if e else None,
               lambda: np.allclose(py.rmsnorm_fwd(xa, gain, 1e-5)[0],
                                   e.rmsnorm_fwd(xa, gain, 1e-5)[0], atol=1e-5))
    inv = py.rmsnorm_fwd(xa, gain, 1e-5)[1]
    bench_pair("rmsnorm bwd", lambda: py.rmsnorm_bwd(xa, gain, inv, ga),
               (lambda: e.rmsnorm_bwd(xa, gain, inv, ga)) if e else None)
    bench_pair("softmax fwd", lambda: py.softmax_fwd(scores),
               (lambda: e.softmax_fwd(scores)) if e else None,
               lambda: np.allclose(py.softmax_fwd(scores),
                                   e.softmax_fwd(scores), atol=1e-6))
    probs = py.softmax_fwd(scores)
    bench_pair("softmax bwd", lambda: py.softmax_bwd(probs, scores),
               (lambda: e.softmax_bwd(probs, scores)) if e else None)
    bench_pair("rope fwd", lambda: py.rope_fwd(rx, cos, sin),
               (lambda: e.rope_fwd(rx, cos, sin)) if e else None,
               lambda: np.allclose(py.rope_fwd(rx, cos, sin),
                                   e.rope_fwd(rx, cos, sin), atol=1e-5))
    bench_pair("adamw update",
               lambda: py.adamw_update(w.copy(), gw, m.copy(), v.copy(),
                                       1e-3, 0.9, 0.95, 1e-8, 0.1, 0.1, 0.05),
               (lambda: e.adamw_update(w.copy(), gw, m.copy(), v.copy(),
                                       1e-3, 0.9, 0.95, 1e-8, 0.1, 0.1, 0.05))
               if e else None)

    print("\nend-to-end train step (tiny-2M, batch 16), per backend:")
    import os
    import subprocess
    import sys
    sys.stdout.flush()  # keep parent output ahead of subprocess output
    script = (
        "import time\n"
        "from charlm import data as D, model as M, training as TR\n"
        "from charlm.backend import active_kernels\n"
        "text = D.builtin_corpus_path('stories').read_text(encoding='utf-8')[:300000]\n"
        "vocab = D.Vocabulary.from_text(text)\n"
        "corpus = D.Corpus.from_text('b', text, vocab=vocab)\n"
        "cfg = M.preset('tiny-2M', vocab.size)\n"
        "state = TR.TrainState.fresh(cfg, seed=0)\n"
        "h = TR.Hyperparameters()\n"
        "TR.train_step(state, corpus, h)\n"
        "t0 = time.perf_counter()\n"
        "for _ in range(5): TR.train_step(state, corpus, h)\n"
        "dt = (time.perf_counter() - t0) / 5\n"
        "print(f'  {active_kernels():<8} {dt:.3f} s/step')\n"
    )
    for backend in ("python", "ext") if ext is not None else ("python",):
        env = dict(os.environ, CHARLM_KERNELS=backend)
        subprocess.run([sys.executable, "-c", script], env=env)


if __name__ == "__main__":
    main()
