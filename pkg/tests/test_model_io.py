import re
import struct

import numpy as np
import pytest

from conftest import jitter
from docnade import model_io
from docnade.deep_docnade import DeepDocNadeModel
from docnade.docnade import DocNadeModel
from docnade.docnade_lm import DocNadeLmModel
from docnade.model_io import (BadMagicError, CorruptModelError, ModelFileError, ShapeError,
                              UnsupportedVersionError, VocabMismatchError)
from docnade.vocab_tree import build_class_partition, build_huffman_tree, build_random_tree


def models():
    rng = np.random.default_rng(0)
    out = [DocNadeModel.init(7, 3, build_random_tree(7, 1), rng),
           DocNadeModel.init(5, 2, build_huffman_tree([8, 4, 2, 1, 1]), rng, act="tanh"),
           DeepDocNadeModel.init(6, [4, 3], rng),
           DeepDocNadeModel.init(6, [2, 2, 2], rng, act="sigmoid"),
           DocNadeLmModel.init(9, 3, 3, build_class_partition(9), rng),
           DocNadeLmModel.init(9, 3, 2, build_class_partition(9), rng, doc_context=False)]
    for m in out:
        jitter(m.params, rng)
    return out


@pytest.mark.parametrize("model", models(), ids=lambda m: m.kind)
def test_roundtrip_bit_exact(model, tmp_path):
    model_io.save(model, tmp_path / "m.dnade", vocab_hash="abc")
    back = model_io.load(tmp_path / "m.dnade", vocab_hash="abc")
    assert type(back) is type(model) and back.act == model.act
    assert sorted(back.params) == sorted(model.params)
    for k, v in model.params.items():
        assert back.params[k].tobytes() == v.tobytes()
    seq = [0, 1, 1, 4]
    assert back.sequence_logprob(seq) == model.sequence_logprob(seq)
    assert model_io.to_bytes(back, "abc") == model_io.to_bytes(model, "abc")


def test_header(tmp_path):
    m = models()[2]
    model_io.save(m, tmp_path / "m.dnade", "h", meta={"seed": 5})
    head = model_io.read_header(tmp_path / "m.dnade")
    assert head["model_kind"] == "deep_docnade" and head["widths"] == [4, 3]
    assert head["meta"] == {"seed": 5} and head["V"] == 6


def test_bytes_deterministic():
    a, b = models()[0], models()[0]
    assert model_io.to_bytes(a) == model_io.to_bytes(b)


def test_bad_magic():
    data = model_io.to_bytes(models()[0])
    with pytest.raises(BadMagicError):
        model_io.from_bytes(b"X" + data[1:])


def test_unsupported_version():
    data = bytearray(model_io.to_bytes(models()[0]))
    data[7:9] = struct.pack("<H", 99)
    with pytest.raises(UnsupportedVersionError):
        model_io.from_bytes(bytes(data))


@pytest.mark.parametrize("keep", [12, 40, 300, -9])
def test_truncation_reports_offset(keep):
    data = model_io.to_bytes(models()[4])
    with pytest.raises(CorruptModelError) as exc:
        model_io.from_bytes(data[:keep])
    assert re.search(r"byte offset \d+", str(exc.value))


def test_mutations_rejected():
    data = model_io.to_bytes(models()[2])
    rng = np.random.default_rng(7)
    for pos in rng.choice(len(data), size=20, replace=False):
        bad = bytearray(data)
        bad[pos] ^= int(rng.integers(1, 256))
        with pytest.raises(ModelFileError):
            model_io.from_bytes(bytes(bad))


def test_vocab_mismatch():
    data = model_io.to_bytes(models()[0], vocab_hash="aaa")
    with pytest.raises(VocabMismatchError):
        model_io.from_bytes(data, vocab_hash="bbb")
    assert model_io.from_bytes(data) is not None


def test_shape_error_with_valid_checksum():
    # a checksummed file whose tensors disagree with the recorded vocabulary size
    m = models()[2]

    class Mislabeled:
        kind, act, widths, V, params = m.kind, m.act, m.widths, m.V + 1, m.params

    with pytest.raises(ShapeError):
        model_io.from_bytes(model_io.to_bytes(Mislabeled()))


def test_atomic_write_leaves_no_temp(tmp_path):
    model_io.save(models()[0], tmp_path / "m.dnade")
    assert [p.name for p in tmp_path.iterdir()] == ["m.dnade"]


def test_documented_layout():
    # decode by hand from the byte layout in docs/model-format.md
    import hashlib
    import json
    m = models()[2]
    data = model_io.to_bytes(m, "h")
    assert data[:7] == b"DNADEK1"
    assert struct.unpack_from("<H", data, 7)[0] == 1
    (hlen,) = struct.unpack_from("<I", data, 9)
    header = json.loads(data[13:13 + hlen])
    assert header["model_kind"] == "deep_docnade"
    pos = 13 + hlen
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    entries = []
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2:pos + 2 + n].decode()
        pos += 2 + n
        rank = data[pos]
        dims = struct.unpack_from(f"<{rank}Q", data, pos + 1)
        (offset,) = struct.unpack_from("<Q", data, pos + 1 + 8 * rank)
        pos += 1 + 8 * rank + 8
        entries.append((name, dims, offset))
    assert [e[0] for e in entries] == sorted(m.params)
    for name, dims, offset in entries:
        block = np.frombuffer(data, "<f8", count=int(np.prod(dims)), offset=pos + offset).reshape(dims)
        assert np.array_equal(block, m.params[name])
    assert data[-32:] == hashlib.sha256(data[:-32]).digest()
