import json
import struct

import numpy as np
import pytest

from ridgeforget import (
    EngineState,
    FeatureExtractor,
    IntegrityError,
    RequestStream,
    VersionError,
    build_stream,
    load_state,
    run_stream,
    save_state,
)
from ridgeforget.state import MAGIC
from test_harness import make_dataset


def run_to_state(seed=0, forget_requests=4):
    rng = np.random.default_rng(seed)
    dataset = make_dataset(rng, 50, 6, 3)
    stream = build_stream(dataset, 3, 16, forget_requests, seed=seed)
    _, state = run_stream(stream, 1e-3)
    state.extractor = FeatureExtractor.from_seed(seed, 4, 6)
    return dataset, stream, state


def assert_states_equal(a, b):
    assert np.array_equal(a.model.weights, b.model.weights)
    assert np.array_equal(a.tracking.matrix, b.tracking.matrix)
    assert a.model.gamma == b.model.gamma
    assert a.ledger.learned_ids == b.ledger.learned_ids
    assert a.ledger.forgotten_ids == b.ledger.forgotten_ids
    if a.extractor is None:
        assert b.extractor is None
    else:
        assert np.array_equal(a.extractor.projection, b.extractor.projection)
        assert a.extractor.nonlinearity == b.extractor.nonlinearity


def test_fresh_state_round_trip_is_bit_identical(tmp_path):
    state = EngineState.fresh(4, 3, 0.5)
    path = tmp_path / "fresh.state"
    save_state(state, path)
    assert_states_equal(load_state(path), state)
    # the writer is deterministic: saving again yields identical bytes
    twin = tmp_path / "fresh2.state"
    save_state(state, twin)
    assert path.read_bytes() == twin.read_bytes()


def test_round_trip_after_requests(tmp_path):
    _, _, state = run_to_state(seed=7)
    path = tmp_path / "mid.state"
    save_state(state, path)
    assert_states_equal(load_state(path), state)


def test_split_run_equals_straight_run_bitwise(tmp_path):
    for seed in (1, 2):
        rng = np.random.default_rng(seed)
        dataset = make_dataset(rng, 60, 5, 3)
        stream = build_stream(dataset, 2, 20, 10, seed=seed)
        _, straight = run_stream(stream, 1e-3)

        first = RequestStream(stream.learn_requests, stream.forget_requests[:5])
        second = RequestStream((), stream.forget_requests[5:])
        _, half_state = run_stream(first, 1e-3)
        path = tmp_path / f"split-{seed}.state"
        save_state(half_state, path)
        resumed = load_state(path)
        _, final = run_stream(second, 1e-3, initial_state=resumed)

        assert np.array_equal(final.model.weights, straight.model.weights)
        assert np.array_equal(final.tracking.matrix, straight.tracking.matrix)


def test_truncated_file_is_integrity_error(tmp_path):
    _, _, state = run_to_state()
    path = tmp_path / "full.state"
    save_state(state, path)
    blob = path.read_bytes()
    clipped = tmp_path / "clipped.state"
    clipped.write_bytes(blob[: len(blob) - 16])
    with pytest.raises(IntegrityError):
        load_state(clipped)


def test_flipped_payload_byte_is_integrity_error(tmp_path):
    _, _, state = run_to_state()
    path = tmp_path / "full.state"
    save_state(state, path)
    blob = bytearray(path.read_bytes())
    blob[-3] ^= 0xFF
    bad = tmp_path / "bad.state"
    bad.write_bytes(bytes(blob))
    with pytest.raises(IntegrityError, match="checksum"):
        load_state(bad)


def test_bad_magic_is_integrity_error(tmp_path):
    path = tmp_path / "junk.state"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(IntegrityError, match="not a ridgeforget state file"):
        load_state(path)


def test_unknown_version_is_version_error(tmp_path):
    _, _, state = run_to_state()
    path = tmp_path / "full.state"
    save_state(state, path)
    blob = path.read_bytes()
    (header_len,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + header_len])
    header["format_version"] = 99
    new_header = json.dumps(header, sort_keys=True).encode()
    future = tmp_path / "future.state"
    future.write_bytes(
        MAGIC + struct.pack("<I", len(new_header)) + new_header + blob[8 + header_len :]
    )
    with pytest.raises(VersionError):
        load_state(future)


def test_state_without_extractor_round_trips(tmp_path):
    state = EngineState.fresh(3, 2, 1.0)
    path = tmp_path / "noext.state"
    save_state(state, path)
    assert load_state(path).extractor is None
