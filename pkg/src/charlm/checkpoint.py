"""Bit-exact model checkpoint container (.llmc).

Layout, all little-endian:
  8 bytes   magic "LLMCKPT1"
  4 bytes   u32 format version (currently 1)
  4 bytes   u32 metadata length
  N bytes   canonical JSON metadata (sorted keys, ASCII): config, vocabulary,
            step, tokens_seen, tensor manifest (names/shapes/offsets)
  payload   raw float32 tensors, in manifest order

Optimizer moments are not serialized; import zeroes them and keeps the step
counter, which is exactly the "pre-trained, ready to fine-tune" shape.
"""

import json
import struct

import numpy as np

from . import model as M
from .data import Vocabulary
from .errors import FormatError
from .training import TrainState

MAGIC = b"LLMCKPT1"
VERSION = 1


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def export_checkpoint(state, vocab):
    """Serialize weights + metadata to bytes. Deterministic: identical states
    produce identical byte streams."""
    cfg = state.cfg
    manifest = []
    offset = 0
    for name, shape in M.weight_shapes(cfg):
        nbytes = int(np.prod(shape)) * 4
        manifest.append({"name": name, "shape": list(shape), "offset": offset})
        offset += nbytes
    meta = {
        "config": cfg.to_dict(),
        "vocabulary": vocab.chars,
        "step": state.step,
        "tokens_seen": state.tokens_seen,
        "manifest": manifest,
    }
    meta_bytes = canonical_json(meta).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta_bytes)), meta_bytes]
    for name, _ in M.weight_shapes(cfg):
        parts.append(np.ascontiguousarray(state.weights[name], dtype="<f4").tobytes())
    return b"".join(parts)


def import_checkpoint(blob, seed=0):
    """Parse a checkpoint; returns (TrainState, Vocabulary, ModelConfig)."""
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise FormatError("bad magic: not a .llmc checkpoint")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", blob, 12)
    if 16 + meta_len > len(blob):
        raise FormatError("metadata shorter than its declared length")
    try:
        meta = json.loads(blob[16:16 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"metadata is not valid JSON: {e}") from None
    for key in ("config", "vocabulary", "step", "tokens_seen", "manifest"):
        if key not in meta:
            raise FormatError(f"metadata missing field '{key}'")
    try:
        cfg = M.ModelConfig(**meta["config"])
    except TypeError as e:
        raise FormatError(f"config record malformed: {e}") from None

    expected = M.weight_shapes(cfg)
    manifest = meta["manifest"]
    if len(manifest) != len(expected):
        raise FormatError(
            f"manifest lists {len(manifest)} tensors, config implies {len(expected)}")
    payload = blob[16 + meta_len:]
    weights = {}
    for entry, (name, shape) in zip(manifest, expected):
        if entry.get("name") != name:
            raise FormatError(f"manifest entry '{entry.get('name')}' out of order, expected '{name}'")
        if tuple(entry.get("shape", ())) != shape:
            raise FormatError(f"tensor '{name}' has shape {entry.get('shape')}, expected {list(shape)}")
        nbytes = int(np.prod(shape)) * 4
        off = entry.get("offset")
        if off is None or off + nbytes > len(payload):
            raise FormatError(f"payload shorter than manifest (tensor '{name}')")
        arr = np.frombuffer(payload[off:off + nbytes], dtype="<f4").reshape(shape)
        weights[name] = arr.astype(np.float32)  # copy, native order, writable

    vocab = Vocabulary(meta["vocabulary"])
    if vocab.size != cfg.vocab_size:
        raise FormatError(
            f"vocabulary has {vocab.size} symbols but config says {cfg.vocab_size}")
    state = TrainState(cfg, weights, seed=seed,
                       step=int(meta["step"]), tokens_seen=int(meta["tokens_seen"]))
    return state, vocab, cfg
