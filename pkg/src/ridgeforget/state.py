"""Lossless binary persistence for engine state.

Layout (little-endian throughout):

    bytes 0..3   magic b"RFGS"
    bytes 4..7   header length (uint32)
    header       UTF-8 JSON: format_version, gamma, feature_dim,
                 class_count, extractor (or null), learned/forgotten id
                 counts, checksum algorithm, payload checksum (sha256 hex)
    payload      W entries, T entries (float64), then the sorted learned
                 and forgotten id sets (int64)

Floats travel as raw 64-bit payload bytes, so load(save(state)) reproduces
W, T, the ledger, and the extractor recipe bit-for-bit.  A bad magic,
truncated payload, or checksum mismatch raises IntegrityError without
exposing partial state; an unknown format_version raises VersionError.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .core import AnalyticModel, TrackingMatrix
from .errors import IntegrityError, VersionError
from .features import FeatureExtractor
from .harness import EngineState
from .verify import SampleLedger

MAGIC = b"RFGS"
FORMAT_VERSION = 1
CHECKSUM_ALGORITHM = "sha256"


def _payload_bytes(state: EngineState, learned: np.ndarray, forgotten: np.ndarray):
    return b"".join(
        [
            state.model.weights.astype("<f8").tobytes(),
            state.tracking.matrix.astype("<f8").tobytes(),
            learned.astype("<i8").tobytes(),
            forgotten.astype("<i8").tobytes(),
        ]
    )


def save_state(state: EngineState, path) -> None:
    """Write `state` to `path` in the versioned checksummed container."""
    learned = np.array(sorted(state.ledger.learned_ids), dtype=np.int64)
    forgotten = np.array(sorted(state.ledger.forgotten_ids), dtype=np.int64)
    payload = _payload_bytes(state, learned, forgotten)
    extractor = None
    if state.extractor is not None:
        extractor = {
            "seed": state.extractor.seed,
            "input_dim": state.extractor.input_dim,
            "feature_dim": state.extractor.feature_dim,
            "nonlinearity": state.extractor.nonlinearity,
        }
    header = {
        "format_version": FORMAT_VERSION,
        "gamma": state.gamma,
        "feature_dim": state.model.feature_dim,
        "class_count": state.model.class_count,
        "extractor": extractor,
        "learned_count": int(learned.size),
        "forgotten_count": int(forgotten.size),
        "checksum_algorithm": CHECKSUM_ALGORITHM,
        "payload_checksum": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", len(header_bytes)))
        handle.write(header_bytes)
        handle.write(payload)


def load_state(path) -> EngineState:
    """Read a state file, verifying version and checksum before use."""
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise IntegrityError(f"{path}: not a ridgeforget state file")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise IntegrityError(f"{path}: truncated header")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"{path}: unreadable header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {version!r} is not supported "
            f"(expected {FORMAT_VERSION})"
        )
    try:
        gamma = float(header["gamma"])
        d_f = int(header["feature_dim"])
        d_c = int(header["class_count"])
        learned_count = int(header["learned_count"])
        forgotten_count = int(header["forgotten_count"])
        checksum = header["payload_checksum"]
        extractor_info = header["extractor"]
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: malformed header: {exc}") from exc
    payload = blob[8 + header_len :]
    expected_len = 8 * (d_f * d_c + d_f * d_f + learned_count + forgotten_count)
    if len(payload) != expected_len:
        raise IntegrityError(
            f"{path}: payload is {len(payload)} bytes, expected {expected_len}"
        )
    if hashlib.sha256(payload).hexdigest() != checksum:
        raise IntegrityError(f"{path}: payload checksum mismatch")
    offset = 0

    def take(count: int, dtype: str) -> np.ndarray:
        nonlocal offset
        out = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
        offset += 8 * count
        return out

    weights = take(d_f * d_c, "<f8").reshape(d_f, d_c)
    tracking = take(d_f * d_f, "<f8").reshape(d_f, d_f)
    learned = take(learned_count, "<i8")
    forgotten = take(forgotten_count, "<i8")
    extractor = None
    if extractor_info is not None:
        extractor = FeatureExtractor.from_seed(
            int(extractor_info["seed"]),
            int(extractor_info["input_dim"]),
            int(extractor_info["feature_dim"]),
            str(extractor_info["nonlinearity"]),
        )
    return EngineState(
        AnalyticModel(weights, gamma),
        TrackingMatrix(tracking, gamma),
        SampleLedger(set(learned.tolist()), set(forgotten.tolist())),
        extractor,
    )
