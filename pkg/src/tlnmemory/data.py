"""Pattern ingestion (IDX files, synthetic sets), the additive corruption model
and model persistence.

Model file layout::

    b"TLNM"                 4-byte tag
    uint32 BE               header length H
    H bytes                 UTF-8 JSON header (params, shapes, registry, crc32)
    payload                 W_E then W_D, row-major little-endian float64,
                            then the registered x* and patterns in the same encoding
"""

from __future__ import annotations

import enum
import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (BadMagicError, ChecksumError, CountMismatchError, DataFormatError,
                     ParameterError, TruncatedFileError, UnsupportedVersionError)
from .memory import MemoryModel, RegistryEntry
from .network import CstlnParams, SupportSet

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MODEL_TAG = b"TLNM"
MODEL_VERSION = 1


class Source(enum.Enum):
    IDX = "idx"
    SYNTHETIC = "synthetic"


@dataclass
class PatternSet:
    patterns: np.ndarray                 # (count, d)
    labels: Optional[np.ndarray] = None
    source: Source = Source.SYNTHETIC
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        self.patterns = np.atleast_2d(np.asarray(self.patterns, dtype=float))
        if self.labels is not None and len(self.labels) != len(self.patterns):
            raise CountMismatchError("labels and patterns differ in count")

    def __len__(self) -> int:
        return self.patterns.shape[0]

    @property
    def d(self) -> int:
        return self.patterns.shape[1]

    def subset(self, idx) -> "PatternSet":
        idx = np.asarray(idx, dtype=int)
        lab = None if self.labels is None else self.labels[idx]
        base = idx if self.indices is None else self.indices[idx]
        return PatternSet(self.patterns[idx], lab, self.source, base)


def unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ParameterError("cannot normalize an all-zero pattern")
    return X / norms


def _read(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _parse_idx(buf: bytes, magic: int, ndim: int, what: str) -> tuple[np.ndarray, tuple]:
    if len(buf) < 4:
        raise TruncatedFileError(f"{what}: file shorter than the magic number", len(buf))
    (got,) = struct.unpack(">I", buf[:4])
    if got != magic:
        raise BadMagicError(f"{what}: magic 0x{got:08x}, expected 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(buf) < head:
        raise TruncatedFileError(f"{what}: header cut at byte {len(buf)}", len(buf))
    dims = struct.unpack(">" + "I" * ndim, buf[4:head])
    size = int(np.prod(dims))
    if len(buf) < head + size:
        raise TruncatedFileError(f"{what}: payload ends at byte {len(buf)}, expected {head + size}",
                                 len(buf))
    data = np.frombuffer(buf, dtype=np.uint8, count=size, offset=head)
    return data.reshape(dims), dims


def load_idx(path_images, path_labels=None, normalize: bool = True) -> PatternSet:
    """Parse IDX image (and optional label) files into unit-norm patterns.

    Pixels are scaled to [0, 1] first. ``normalize=False`` keeps that raw
    scale (debugging only; all-zero images are then allowed).
    """
    imgs, (count, rows, cols) = _parse_idx(_read(path_images), IDX_IMAGES_MAGIC, 3, "images")
    X = imgs.reshape(count, rows * cols).astype(float) / 255.0
    labels = None
    if path_labels is not None:
        lab, (n_lab,) = _parse_idx(_read(path_labels), IDX_LABELS_MAGIC, 1, "labels")
        if n_lab != count:
            raise CountMismatchError(f"{count} images but {n_lab} labels")
        labels = lab.astype(int)
    if normalize:
        X = unit_rows(X)
    return PatternSet(X, labels, Source.IDX, np.arange(count))


def write_idx(path_images, images: np.ndarray, path_labels=None, labels=None) -> None:
    """Write uint8 images (count, rows, cols) and optional labels in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path_images, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols))
        fh.write(images.tobytes())
    if path_labels is not None:
        labels = np.asarray(labels, dtype=np.uint8)
        with open(path_labels, "wb") as fh:
            fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
            fh.write(labels.tobytes())


def bundled_mnist() -> PatternSet:
    """The small MNIST subset shipped with the package (200 digits)."""
    base = Path(__file__).resolve().parent / "data"
    return load_idx(base / "mnist-subset-images.idx3-ubyte", base / "mnist-subset-labels.idx1-ubyte")


def synthetic_patterns(count: int, d: int, seed: int = 0, max_cos: float = 0.5,
                       max_draws: int = 10_000) -> PatternSet:
    """Deterministic nonnegative unit-norm patterns with pairwise cosine below max_cos."""
    if count < 1 or d < 1:
        raise ParameterError("count and d must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_draws):
        v = rng.random(d) ** 3
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v = v / nv
        if all(v @ u < max_cos for u in out):
            out.append(v)
            if len(out) == count:
                return PatternSet(np.array(out), None, Source.SYNTHETIC, np.arange(count))
    raise ParameterError(f"could not draw {count} patterns of dimension {d} with pairwise "
                         f"cosine < {max_cos} in {max_draws} draws")


def sample_sequence(ps: PatternSet, length: int, rng: np.random.Generator,
                    distinct_labels: bool = True, max_cos: float = 0.8,
                    max_tries: int = 1000) -> PatternSet:
    """Random sequence without replacement, rejecting near-duplicate patterns.

    With labels present and ``distinct_labels`` set every digit class appears
    at most once. Pairwise cosine similarity stays below max_cos so that each
    new pattern is a mismatch for the trigger.
    """
    for _ in range(max_tries):
        idx = rng.permutation(len(ps))
        chosen = []
        for k in idx:
            if distinct_labels and ps.labels is not None and any(ps.labels[k] == ps.labels[j] for j in chosen):
                continue
            if any(ps.patterns[k] @ ps.patterns[j] >= max_cos for j in chosen):
                continue
            chosen.append(int(k))
            if len(chosen) == length:
                return ps.subset(chosen)
    raise ParameterError(f"no sequence of {length} sufficiently distinct patterns found")


def corrupt(p, radius: float, seed=None) -> np.ndarray:
    """p + eta with eta uniform on the l2 sphere of the given radius."""
    if radius < 0:
        raise ParameterError("radius must be >= 0")
    p = np.asarray(p, dtype=float)
    if radius == 0:
        return p.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal(p.shape)
    return p + radius * g / np.linalg.norm(g)


# --------------------------------------------------------------------------
# model persistence

def _model_payload(model: MemoryModel) -> bytes:
    parts = [model.W_E, model.W_D]
    for e in model.registry:
        parts += [e.x_star, e.pattern]
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in parts)


def model_bytes(model: MemoryModel) -> bytes:
    payload = _model_payload(model)
    header = {
        "format": "tlnmemory-model",
        "version": MODEL_VERSION,
        "params": model.params.to_dict(),
        "n": model.n,
        "d": model.d,
        "encoder_rule": model.encoder_rule,
        "frozen_rows": sorted(int(k) for k in model.frozen_rows),
        "registry": [{"id": e.pattern_id, "support": list(map(int, e.support))} for e in model.registry],
        "latent_state": [float(v) for v in model.latent_state],
        "payload_bytes": len(payload),
        "crc32": zlib.crc32(payload),
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    return MODEL_TAG + struct.pack(">I", len(hb)) + hb + payload


def save_model(path, model: MemoryModel) -> None:
    """Write atomically (temporary file in the target directory, then rename)."""
    path = Path(path)
    data = model_bytes(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> MemoryModel:
    buf = _read(path)
    if buf[:4] != MODEL_TAG:
        raise BadMagicError("not a model file (missing TLNM tag)")
    if len(buf) < 8:
        raise TruncatedFileError("header length missing", len(buf))
    (hlen,) = struct.unpack(">I", buf[4:8])
    if len(buf) < 8 + hlen:
        raise TruncatedFileError("header cut short", len(buf))
    try:
        header = json.loads(buf[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"unreadable header: {exc}") from exc
    version = header.get("version")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"model file version {version}, this build reads version {MODEL_VERSION}; "
            f"re-run 'tlnmem learn' with this build to regenerate the model")
    payload = buf[8 + hlen:]
    if len(payload) != header["payload_bytes"]:
        raise TruncatedFileError(f"payload has {len(payload)} bytes, header says {header['payload_bytes']}",
                                 len(buf))
    if zlib.crc32(payload) != header["crc32"]:
        raise ChecksumError("payload checksum mismatch")
    n, d = header["n"], header["d"]
    params = CstlnParams(**header["params"])
    model = MemoryModel(params, d, header.get("encoder_rule", "projection"))
    flat = np.frombuffer(payload, dtype="<f8")
    pos = 0

    def take(count, shape):
        nonlocal pos
        out = flat[pos:pos + count].reshape(shape).astype(float)
        pos += count
        return out

    model.W_E = take(d * n, (d, n))
    model.W_D = take(n * d, (n, d))
    for rec in header["registry"]:
        x = take(n, (n,))
        p = take(d, (d,))
        model.registry.append(RegistryEntry(rec["id"], SupportSet(rec["support"], n), x, p))
    if pos != flat.size:
        raise CountMismatchError("payload size does not match the registry")
    model.frozen_rows = set(header["frozen_rows"])
    model.latent_state = np.array(header["latent_state"], dtype=float)
    return model
