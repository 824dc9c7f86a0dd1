"""Bit-exact file formats: EMB1 embeddings, the fitted-model container, manifests.

EMB1 layout, all little-endian:

    magic 'EMB1' | version u16 = 1 | modality u8 (0 image, 1 text) |
    reserved u8 | n u64 | dim u64 | tag length u16 | tag UTF-8 bytes |
    payload n*dim float64, row-major

The model container reuses the same style: a fixed header, a section table of
named arrays (means, covariance blocks) each guarded by a SHA-256 digest, and
one trailing digest over the recomputed precisions and log-determinants so a
version-skewed rebuild is caught, not silently accepted.

Writers go through write-temp-then-rename; readers never downcast below
float64.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .gaussmi import GaussianJointModel
from .matstat import RegularizedGaussian

__all__ = [
    "EmbeddingSet",
    "Manifest",
    "read_embeddings",
    "write_embeddings",
    "save_model",
    "load_model",
    "write_manifest",
    "read_manifest",
    "file_digest",
]

_EMB_MAGIC = b"EMB1"
_EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sHBBQQ")

_MODEL_MAGIC = b"MIDM"
_MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHHdQQ")

_MODALITY_CODE = {"image": 0, "text": 1}
_MODALITY_NAME = {0: "image", 1: "text"}

MANIFEST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EmbeddingSet:
    """A feature matrix with its modality and extractor tag."""

    modality: str
    model_tag: str
    data: np.ndarray

    def __post_init__(self):
        if self.modality not in _MODALITY_CODE:
            raise DataError(
                f"modality must be 'image' or 'text', got {self.modality!r}"
            )
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2:
            raise DataError(f"embedding data must be 2-D, got shape {a.shape}")
        if a.shape[1] == 0:
            raise DataError("embedding dimension is 0")
        bad = ~np.isfinite(a)
        if bad.any():
            r, c = (int(v[0]) for v in np.nonzero(bad))
            raise DataError(f"non-finite value at row {r}, col {c}")
        object.__setattr__(self, "data", a)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _atomic_write(path, payload: bytes):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".midm-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embeddings(es: EmbeddingSet, path) -> None:
    """Serialize an EmbeddingSet to EMB1, atomically replacing the target."""
    if not isinstance(es, EmbeddingSet):
        raise DataError("write_embeddings expects an EmbeddingSet")
    tag = es.model_tag.encode("utf-8")
    if len(tag) > 0xFFFF:
        raise DataError(f"model tag is too long ({len(tag)} bytes, max 65535)")
    head = _EMB_HEADER.pack(
        _EMB_MAGIC,
        _EMB_VERSION,
        _MODALITY_CODE[es.modality],
        0,
        es.n,
        es.dim,
    )
    body = np.ascontiguousarray(es.data, dtype="<f8").tobytes(order="C")
    _atomic_write(path, head + struct.pack("<H", len(tag)) + tag + body)


def _parse_emb1(blob: bytes, path) -> EmbeddingSet:
    if len(blob) < _EMB_HEADER.size + 2:
        raise DataError(
            f"{path}: truncated header: expected at least "
            f"{_EMB_HEADER.size + 2} bytes, got {len(blob)}"
        )
    magic, version, modality, _, n, dim = _EMB_HEADER.unpack_from(blob, 0)
    if magic != _EMB_MAGIC:
        raise DataError(f"{path}: not an EMB1 file")
    if version != _EMB_VERSION:
        raise DataError(f"{path}: unsupported EMB1 version {version}")
    if modality not in _MODALITY_NAME:
        raise DataError(f"{path}: unknown modality code {modality}")
    off = _EMB_HEADER.size
    (tag_len,) = struct.unpack_from("<H", blob, off)
    off += 2
    if len(blob) < off + tag_len:
        raise DataError(
            f"{path}: truncated tag: expected {tag_len} bytes, "
            f"got {len(blob) - off}"
        )
    tag = blob[off : off + tag_len].decode("utf-8")
    off += tag_len
    expected = n * dim * 8
    actual = len(blob) - off
    if actual != expected:
        raise DataError(
            f"{path}: truncated payload: expected {expected} bytes "
            f"for {n}x{dim} float64, got {actual}"
        )
    if dim == 0:
        raise DataError(f"{path}: embedding dimension is 0")
    data = np.frombuffer(blob, dtype="<f8", count=n * dim, offset=off)
    data = data.reshape(n, dim).astype(np.float64, copy=True)
    return EmbeddingSet(modality=_MODALITY_NAME[modality], model_tag=tag, data=data)


def _parse_csv(path) -> EmbeddingSet:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise DataError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise DataError(f"{path}: not an EMB1 file") from None
    if not rows:
        raise DataError(f"{path}: not an EMB1 file")
    return EmbeddingSet(
        modality="image", model_tag="csv", data=np.array(rows, dtype=np.float64)
    )


def read_embeddings(path) -> EmbeddingSet:
    """Parse an EMB1 file; plain CSV (no header) is accepted as a fallback."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    if blob[:4] == _EMB_MAGIC:
        return _parse_emb1(blob, path)
    return _parse_csv(path)


def _array_section(name: str, arr: np.ndarray) -> bytes:
    payload = np.ascontiguousarray(arr, dtype="<f8").tobytes(order="C")
    name_b = name.encode("utf-8")
    head = struct.pack("<H", len(name_b)) + name_b
    head += struct.pack("<B", arr.ndim)
    for extent in arr.shape:
        head += struct.pack("<Q", extent)
    head += struct.pack("<Q", len(payload))
    return head + hashlib.sha256(payload).digest() + payload


class _Cursor:
    def __init__(self, blob: bytes, off: int, path):
        self.blob = blob
        self.off = off
        self.path = path

    def take(self, count: int) -> bytes:
        if self.off + count > len(self.blob):
            raise DataError(
                f"{self.path}: truncated model: expected {count} more bytes, "
                f"got {len(self.blob) - self.off}"
            )
        out = self.blob[self.off : self.off + count]
        self.off += count
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def _read_section(cur: _Cursor) -> tuple[str, np.ndarray]:
    (name_len,) = cur.unpack("<H")
    name = cur.take(name_len).decode("utf-8")
    (ndim,) = cur.unpack("<B")
    shape = tuple(cur.unpack("<Q")[0] for _ in range(ndim))
    (nbytes,) = cur.unpack("<Q")
    digest = cur.take(32)
    payload = cur.take(nbytes)
    if hashlib.sha256(payload).digest() != digest:
        raise DataError(f"{cur.path}: corrupt or version-skewed model (section {name})")
    arr = np.frombuffer(payload, dtype="<f8").reshape(shape)
    return name, arr.astype(np.float64, copy=True)


def _derived_digest(model: GaussianJointModel) -> bytes:
    h = hashlib.sha256()
    for g in (model.x_marg, model.y_marg, model.z_joint):
        h.update(np.ascontiguousarray(g.precision, dtype="<f8").tobytes())
        h.update(struct.pack("<d", g.logdet))
    h.update(struct.pack("<d", model.mi))
    return h.digest()


def save_model(model: GaussianJointModel, path) -> None:
    """Persist fitted moments; derived quantities are digest-guarded, not stored."""
    sections = [
        ("mu_x", model.x_marg.mean),
        ("mu_y", model.y_marg.mean),
        ("cov_x", model.x_marg.cov),
        ("cov_y", model.y_marg.cov),
        ("cov_xy", model.z_joint.cov[: model.dim, model.dim :]),
    ]
    head = _MODEL_HEADER.pack(
        _MODEL_MAGIC,
        _MODEL_VERSION,
        0,
        model.epsilon,
        model.dim,
        model.n_ref,
    )
    body = struct.pack("<H", len(sections))
    for name, arr in sections:
        body += _array_section(name, arr)
    payload = head + body
    _atomic_write(path, payload + _derived_digest(model))


def load_model(path) -> GaussianJointModel:
    """Rebuild a model from stored moments, verifying every digest."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    if blob[:4] != _MODEL_MAGIC:
        raise DataError(f"{path}: not a model file")
    cur = _Cursor(blob, 0, path)
    magic, version, _, epsilon, dim, n_ref = cur.unpack(_MODEL_HEADER.format)
    if version != _MODEL_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    (n_sections,) = cur.unpack("<H")
    arrays = {}
    for _ in range(n_sections):
        name, arr = _read_section(cur)
        arrays[name] = arr
    expected = {"mu_x", "mu_y", "cov_x", "cov_y", "cov_xy"}
    missing = expected - arrays.keys()
    if missing:
        raise DataError(f"{path}: model file missing sections {sorted(missing)}")
    stored_digest = cur.take(32)

    mu_x, mu_y = arrays["mu_x"], arrays["mu_y"]
    cov_x, cov_y, cov_xy = arrays["cov_x"], arrays["cov_y"], arrays["cov_xy"]
    d = int(dim)
    shapes = {
        "mu_x": (mu_x.shape, (d,)),
        "mu_y": (mu_y.shape, (d,)),
        "cov_x": (cov_x.shape, (d, d)),
        "cov_y": (cov_y.shape, (d, d)),
        "cov_xy": (cov_xy.shape, (d, d)),
    }
    for name, (got, want) in shapes.items():
        if got != want:
            raise DataError(
                f"{path}: section {name} has shape {got}, header dimension wants {want}"
            )
    cov_z = np.block([[cov_x, cov_xy], [cov_xy.T, cov_y]])
    mu_z = np.concatenate([mu_x, mu_y])
    gx = RegularizedGaussian.from_moments(mu_x, cov_x, epsilon)
    gy = RegularizedGaussian.from_moments(mu_y, cov_y, epsilon)
    gz = RegularizedGaussian.from_moments(mu_z, cov_z, epsilon)
    model = GaussianJointModel(
        dim=int(dim),
        x_marg=gx,
        y_marg=gy,
        z_joint=gz,
        epsilon=float(epsilon),
        mi=float(0.5 * (gx.logdet + gy.logdet - gz.logdet)),
        n_ref=int(n_ref),
    )
    if _derived_digest(model) != stored_digest:
        raise DataError(f"{path}: corrupt or version-skewed model (derived digest)")
    return model


@dataclass(frozen=True)
class Manifest:
    """Run description: inputs, epsilon, seed, and metric selection."""

    fields: dict

    def __post_init__(self):
        if "schema_version" not in self.fields:
            raise DataError("manifest is missing schema_version")
        eps = self.fields.get("epsilon")
        if eps is not None and eps < 0:
            raise DataError(f"manifest epsilon must be >= 0, got {eps}")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, fields: dict) -> None:
    """Write a schema-versioned JSON manifest next to an output file."""
    payload = {"schema_version": MANIFEST_SCHEMA_VERSION}
    payload.update(fields)
    Manifest(fields=payload)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _atomic_write(path, text.encode("utf-8"))


def read_manifest(path) -> Manifest:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid manifest: {exc}") from None
    if not isinstance(payload, dict):
        raise DataError(f"{path}: manifest must be a JSON object")
    return Manifest(fields=payload)
