"""Binary model archives.

Layout: a magic line, one line of JSON manifest, then the raw payload.  The
payload is every tensor in manifest order as little-endian float64,
row-major.  The manifest records the model kind, dimensions, activation,
``[name, shape, offset]`` for each tensor, the payload length and an 8-byte
BLAKE2b checksum of the payload.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .classify import ClassifierEnsemble, ClassMember
from .errors import ArchiveError, CapabilityError, ChecksumError, UsageError, VersionError
from .gae import GaeParams, MeanAeParams
from .structured import MlpParams

MAGIC = b"GATEDAE-ARCHIVE"
FORMAT_VERSION = 1
KINDS = ("gae", "mean_ae", "mc", "mlp", "ensemble")
_DTYPE = np.dtype("<f8")


def _checksum(payload: bytes) -> str:
    return hashlib.blake2b(payload, digest_size=8).hexdigest()


def _member_tensors(prefix, m: ClassMember):
    out = []
    if m.mean is not None:
        out += [(f"{prefix}mean.{k}", v) for k, v in m.mean.arrays().items()]
    if m.cov is not None:
        out += [(f"{prefix}cov.{k}", v) for k, v in m.cov.arrays().items()]
    return out


def _flatten(model):
    """(kind, tensors, info) for a supported model object."""
    if isinstance(model, GaeParams):
        info = {"dims": [model.dx, model.dy, model.n_factors, model.n_hidden],
                "activation": model.activation.value}
        return "gae", list(model.arrays().items()), info
    if isinstance(model, MeanAeParams):
        return "mean_ae", list(model.arrays().items()), {"dims": [model.dim, model.n_hidden]}
    if isinstance(model, MlpParams):
        info = {"dims": [model.dim, model.w1.shape[0], model.n_labels]}
        return "mlp", list(model.arrays().items()), info
    if isinstance(model, ClassMember):
        if model.mean is None or model.cov is None:
            raise UsageError("an 'mc' archive needs both a mean and a covariance model")
        info = {"dims": [model.dim], "activation": model.cov.activation.value}
        return "mc", _member_tensors("", model), info
    if isinstance(model, ClassifierEnsemble):
        tensors = [("biases", model.biases)]
        parts, acts = [], []
        for k, m in enumerate(model.members):
            parts.append([p for p in ("mean", "cov") if getattr(m, p) is not None])
            acts.append(None if m.cov is None else m.cov.activation.value)
            tensors += _member_tensors(f"member{k}.", m)
        info = {"dims": [model.dim, model.n_classes], "members": parts, "activations": acts}
        return "ensemble", tensors, info
    raise CapabilityError(f"cannot archive objects of type {type(model).__name__}")


def save_model(model, path, meta=None):
    """Write ``model`` to ``path``.  ``meta`` is an optional JSON-able dict."""
    kind, tensors, info = _flatten(model)
    entries, chunks, offset = [], [], 0
    for name, arr in tensors:
        a = np.ascontiguousarray(arr, dtype=_DTYPE)
        entries.append([name, list(a.shape), offset])
        chunks.append(a.tobytes(order="C"))
        offset += a.nbytes
    payload = b"".join(chunks)
    manifest = {
        "version": FORMAT_VERSION,
        "kind": kind,
        **info,
        "tensors": entries,
        "payload_bytes": len(payload),
        "checksum": _checksum(payload),
        "meta": meta or {},
    }
    head = MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n"
    body = json.dumps(manifest, sort_keys=True).encode() + b"\n"
    Path(path).write_bytes(head + body + payload)


def read_archive(path):
    """Parse and verify an archive; returns ``(manifest, {name: array})``."""
    raw = Path(path).read_bytes()
    first, sep, rest = raw.partition(b"\n")
    parts = first.split()
    if not sep or len(parts) != 2 or parts[0] != MAGIC:
        raise ArchiveError(f"{path}: not a model archive")
    if parts[1] != str(FORMAT_VERSION).encode():
        raise VersionError(f"{path}: unsupported archive version {parts[1].decode(errors='replace')}")
    line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise ArchiveError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path}: malformed manifest ({exc})") from None
    if manifest.get("version") != FORMAT_VERSION:
        raise VersionError(f"{path}: manifest version {manifest.get('version')!r}")
    if manifest.get("kind") not in KINDS:
        raise CapabilityError(f"{path}: unknown model kind {manifest.get('kind')!r}")
    expected = manifest["payload_bytes"]
    if len(payload) < expected:
        raise ArchiveError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    if len(payload) > expected:
        raise ArchiveError(f"{path}: {len(payload) - expected} trailing bytes after payload")
    if _checksum(payload) != manifest["checksum"]:
        raise ChecksumError(f"{path}: payload checksum mismatch")
    tensors = {}
    for name, shape, offset in manifest["tensors"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > expected:
            raise ArchiveError(f"{path}: tensor {name} runs past the payload")
        tensors[name] = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=offset).reshape(shape).astype(np.float64)
    return manifest, tensors


def _pick(tensors, prefix, names):
    try:
        return {n: tensors[prefix + n] for n in names}
    except KeyError as exc:
        raise ArchiveError(f"archive is missing tensor {exc.args[0]}") from None


def _member(tensors, prefix, parts, activation):
    mean = cov = None
    if "mean" in parts:
        mean = MeanAeParams(**_pick(tensors, prefix + "mean.", MeanAeParams.ARRAYS))
    if "cov" in parts:
        cov = GaeParams(**_pick(tensors, prefix + "cov.", GaeParams.ARRAYS), activation=activation)
    return ClassMember(mean, cov)


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(model, manifest)``."""
    manifest, tensors = read_archive(path)
    kind = manifest["kind"]
    if kind == "gae":
        model = GaeParams(**_pick(tensors, "", GaeParams.ARRAYS), activation=manifest["activation"])
    elif kind == "mean_ae":
        model = MeanAeParams(**_pick(tensors, "", MeanAeParams.ARRAYS))
    elif kind == "mlp":
        model = MlpParams(**_pick(tensors, "", MlpParams.ARRAYS))
    elif kind == "mc":
        model = _member(tensors, "", ("mean", "cov"), manifest["activation"])
    else:
        members = [
            _member(tensors, f"member{k}.", parts, act)
            for k, (parts, act) in enumerate(zip(manifest["members"], manifest["activations"]))
        ]
        model = ClassifierEnsemble(members, tensors["biases"])
    return model, manifest
