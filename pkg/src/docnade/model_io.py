"""Single-file, versioned model serialization.

Layout (all integers little-endian; see docs/model-format.md)::

    magic      7 bytes  b"DNADEK1"
    version    u16
    header     u32 length + UTF-8 JSON (sorted keys)
    directory  u32 count, then per tensor:
                 u16 name length, name, u8 ndim, ndim * u64 dims, u64 offset
    data       packed float64 blocks, row-major, offsets relative to data start
    checksum   32-byte SHA-256 of every preceding byte
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .deep_docnade import DeepDocNadeModel
from .docnade import DocNadeModel
from .docnade_lm import DocNadeLmModel
from .vocab_tree import BinaryWordTree, ClassPartition, TreeError

MAGIC = b"DNADEK1"
VERSION = 1
KINDS = ("docnade", "deep_docnade", "docnade_lm")


class ModelFileError(Exception):
    pass


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class CorruptModelError(ModelFileError):
    pass


class ShapeError(ModelFileError):
    pass


class VocabMismatchError(ModelFileError):
    pass


def _structure_header(model) -> dict:
    if model.kind == "docnade":
        flags, leaves = model.tree.to_preorder()
        return {"activation": model.act, "tree": {"flags": flags, "leaves": leaves}}
    if model.kind == "deep_docnade":
        return {"activation": model.act, "widths": model.widths}
    if model.kind == "docnade_lm":
        return {"activation": model.act, "n": model.n, "doc_context": model.doc_context,
                "class_of": model.partition.class_of.tolist()}
    raise ModelFileError(f"unknown model kind {model.kind!r}")


def to_bytes(model, vocab_hash: str = "", meta: dict | None = None) -> bytes:
    header = {"model_kind": model.kind, "vocab_hash": vocab_hash, "V": int(model.V),
              "meta": meta or {}, **_structure_header(model)}
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    names = sorted(model.params)
    directory, blocks, offset = [], [], 0
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype="<f8")
        enc = name.encode("utf-8")
        directory.append(struct.pack("<H", len(enc)) + enc + struct.pack("<B", arr.ndim)
                         + struct.pack(f"<{arr.ndim}Q", *arr.shape) + struct.pack("<Q", offset))
        blocks.append(arr.tobytes())
        offset += arr.nbytes
    body = (MAGIC + struct.pack("<H", VERSION) + struct.pack("<I", len(head)) + head
            + struct.pack("<I", len(names)) + b"".join(directory) + b"".join(blocks))
    return body + hashlib.sha256(body).digest()


def save(model, path, vocab_hash: str = "", meta: dict | None = None) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    data = to_bytes(model, vocab_hash, meta)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"cannot write model file {path}: {e}") from e


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModelError(f"corrupt model file: truncated {what} at byte offset {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def from_bytes(data: bytes, vocab_hash: str | None = None):
    """Rebuild a model; ``vocab_hash`` (if given) must match the recorded one."""
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    (version,) = r.unpack("<H", "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"model file version {version} is not supported (expected {VERSION})")
    if len(data) < len(MAGIC) + 2 + 32:
        raise CorruptModelError(f"corrupt model file: truncated at byte offset {len(data)}")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        # walk the structure first so truncation reports where it happened
        _parse(_Reader(body), check_only=True)
        raise CorruptModelError(f"corrupt model file: checksum mismatch (file is {len(data)} bytes)")
    model, header = _parse(_Reader(body))
    if vocab_hash is not None and header["vocab_hash"] != vocab_hash:
        raise VocabMismatchError("model was trained with a different vocabulary")
    return model


def _parse(r: _Reader, check_only: bool = False):
    r.take(len(MAGIC) + 2, "preamble")
    (hlen,) = r.unpack("<I", "header length")
    raw = r.take(hlen, "header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptModelError(f"corrupt model file: unreadable header ({e})") from None
    (count,) = r.unpack("<I", "tensor count")
    entries = []
    for _ in range(count):
        (nlen,) = r.unpack("<H", "tensor name length")
        name = r.take(nlen, "tensor name").decode("utf-8", errors="replace")
        (ndim,) = r.unpack("<B", "tensor rank")
        shape = r.unpack(f"<{ndim}Q", "tensor shape")
        (offset,) = r.unpack("<Q", "tensor offset")
        entries.append((name, shape, offset))
    start = r.pos
    params = {}
    for name, shape, offset in entries:
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if start + offset + nbytes > len(r.data):
            raise CorruptModelError(
                f"corrupt model file: tensor {name!r} truncated at byte offset {len(r.data)}")
        if not check_only:
            buf = r.data[start + offset:start + offset + nbytes]
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    if check_only:
        return None, header
    return _build(header, params), header


def _build(header: dict, params: dict):
    kind = header.get("model_kind")
    if kind not in KINDS:
        raise CorruptModelError(f"unknown model kind {kind!r}")
    try:
        if kind == "docnade":
            tree = BinaryWordTree.from_preorder(header["tree"]["flags"], header["tree"]["leaves"])
            model = DocNadeModel(params, tree, header["activation"])
        elif kind == "deep_docnade":
            model = DeepDocNadeModel(params, header["activation"])
            if model.widths != header["widths"]:
                raise ShapeError("layer widths disagree with header")
        else:
            partition = ClassPartition.from_class_of(header["class_of"])
            model = DocNadeLmModel(params, partition, header["n"], header["activation"], header["doc_context"])
    except TreeError as e:
        raise CorruptModelError(f"invalid output structure: {e}") from None
    except (KeyError, ValueError) as e:
        raise ShapeError(f"inconsistent model file: {e}") from None
    if model.V != header.get("V"):
        raise ShapeError("vocabulary size disagrees with header")
    return model


def load(path, vocab_hash: str | None = None):
    data = Path(path).read_bytes()
    return from_bytes(data, vocab_hash)


def read_header(path) -> dict:
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    r.unpack("<H", "version")
    (hlen,) = r.unpack("<I", "header length")
    return json.loads(r.take(hlen, "header").decode("utf-8"))
