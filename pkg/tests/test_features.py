import hashlib
import subprocess
import sys

import numpy as np
import pytest

from ridgeforget import (
    ContractViolation,
    EncodedDataset,
    FeatureExtractor,
    InputError,
    RawDataset,
    SyntheticSpec,
    accuracy,
    encode,
    generate_synthetic,
    joint_fit,
    load_csv,
    one_hot,
    write_csv,
)

# ------------------------------------------------------------------ one_hot


def test_one_hot_examples():
    assert np.array_equal(one_hot(2, 4), [0.0, 0.0, 1.0, 0.0])
    assert np.array_equal(one_hot(0, 1), [1.0])


def test_one_hot_exhaustive_small_range():
    for k in range(10):
        vec = one_hot(k, 10)
        assert vec.sum() == 1.0
        assert int(np.argmax(vec)) == k


def test_one_hot_out_of_range():
    with pytest.raises(InputError):
        one_hot(4, 4)
    with pytest.raises(InputError):
        one_hot(-1, 4)


# -------------------------------------------------------------- extractor


def test_extract_zero_input_relu_is_zero():
    extractor = FeatureExtractor.from_seed(1, 5, 8)
    assert np.array_equal(extractor.extract(np.zeros(5)), np.zeros(8))


def test_identity_projection_identity_nonlinearity_is_passthrough():
    extractor = FeatureExtractor(0, 4, 4, "identity", np.eye(4))
    x = np.array([-1.5, 0.0, 2.0, 3.5])
    assert np.array_equal(extractor.extract(x), x)


def test_extract_rejects_length_mismatch():
    extractor = FeatureExtractor.from_seed(1, 5, 8)
    with pytest.raises(ContractViolation):
        extractor.extract(np.zeros(4))


def test_same_seed_same_features_across_processes():
    x = np.linspace(-1.0, 1.0, 6)
    extractor = FeatureExtractor.from_seed(42, 6, 9)
    local_hash = hashlib.sha256(extractor.extract(x).tobytes()).hexdigest()
    code = (
        "import hashlib, numpy as np\n"
        "from ridgeforget import FeatureExtractor\n"
        "x = np.linspace(-1.0, 1.0, 6)\n"
        "e = FeatureExtractor.from_seed(42, 6, 9)\n"
        "print(hashlib.sha256(e.extract(x).tobytes()).hexdigest())\n"
    )
    result = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, check=True
    )
    assert result.stdout.strip() == local_hash


def test_projection_is_frozen():
    extractor = FeatureExtractor.from_seed(7, 3, 4)
    with pytest.raises(ValueError):
        extractor.projection[0, 0] = 1.0


def test_extract_rows_matches_per_row_extract_bitwise():
    rng = np.random.default_rng(15)
    extractor = FeatureExtractor.from_seed(3, 5, 7)
    inputs = rng.standard_normal((20, 5))
    stacked = extractor.extract_rows(inputs)
    for row in range(20):
        assert np.array_equal(stacked[row], extractor.extract(inputs[row]))


def test_projection_untouched_by_a_full_run():
    from ridgeforget import build_stream, run_stream

    spec = SyntheticSpec(3, 30, 5, 0.2, 55)
    extractor = FeatureExtractor.from_seed(12, 5, 8)
    fingerprint = extractor.projection_hash()
    encoded = encode(extractor, generate_synthetic(spec))
    stream = build_stream(encoded, 3, 30, 3, seed=55)
    run_stream(stream, 1e-3, dataset=encoded, test_rows=encoded)
    assert extractor.projection_hash() == fingerprint


def test_bad_nonlinearity_rejected():
    with pytest.raises(ContractViolation):
        FeatureExtractor.from_seed(1, 3, 4, nonlinearity="tanh")


# -------------------------------------------------------------- synthetic


def test_synthetic_counts_and_labels():
    spec = SyntheticSpec(2, 5, 3, 0.5, 0)
    raw = generate_synthetic(spec)
    assert len(raw) == 10
    assert np.array_equal(np.sort(raw.labels), [0] * 5 + [1] * 5)
    assert np.unique(raw.sample_ids).size == 10


def test_synthetic_zero_spread_collapses_to_class_means():
    spec = SyntheticSpec(3, 4, 6, 0.0, 9)
    raw = generate_synthetic(spec)
    for label in range(3):
        rows = raw.inputs[raw.labels == label]
        assert np.array_equal(rows, np.repeat(rows[:1], 4, axis=0))


def test_synthetic_is_deterministic_and_draws_are_disjoint():
    spec = SyntheticSpec(2, 3, 4, 0.2, 123)
    a = generate_synthetic(spec)
    b = generate_synthetic(spec)
    assert np.array_equal(a.inputs, b.inputs)
    held_out = generate_synthetic(spec, draw=1)
    assert not np.array_equal(a.inputs, held_out.inputs)
    assert not set(a.sample_ids.tolist()) & set(held_out.sample_ids.tolist())


def test_synthetic_classifier_generalizes_to_held_out_draw():
    spec = SyntheticSpec(4, 100, 8, 0.1, 7)
    extractor = FeatureExtractor.from_seed(99, 8, 32)
    train = encode(extractor, generate_synthetic(spec, draw=0))
    test = encode(extractor, generate_synthetic(spec, draw=1))
    model, _ = joint_fit(train.to_batch(), 1e-3)
    assert accuracy(model, test) >= 95.0


# ----------------------------------------------------------------- encode


def test_encode_empty():
    extractor = FeatureExtractor.from_seed(1, 3, 4)
    raw = RawDataset(np.zeros(0, np.int64), np.zeros((0, 3)), np.zeros(0, np.int64), 2)
    encoded = encode(extractor, raw)
    assert len(encoded) == 0
    assert encoded.feature_dim == 4


def test_encode_single_row_matches_extract():
    extractor = FeatureExtractor.from_seed(4, 3, 5)
    raw = RawDataset([7], [[0.1, -0.3, 2.0]], [1], 3)
    encoded = encode(extractor, raw)
    assert np.array_equal(encoded.features[0], extractor.extract([0.1, -0.3, 2.0]))
    assert np.array_equal(encoded.one_hots[0], [0.0, 1.0, 0.0])


def test_encode_rows_match_per_row_recomputation():
    rng = np.random.default_rng(21)
    extractor = FeatureExtractor.from_seed(5, 6, 10)
    raw = RawDataset(
        np.arange(100), rng.standard_normal((100, 6)), rng.integers(0, 4, 100), 4
    )
    encoded = encode(extractor, raw)
    for row in (3, 17):
        assert np.array_equal(encoded.features[row], extractor.extract(raw.inputs[row]))


def test_encode_error_carries_row_index():
    extractor = FeatureExtractor.from_seed(1, 2, 3)
    raw = RawDataset([0, 1, 2], np.zeros((3, 2)), [0, 1, 1], 2)
    with pytest.raises(InputError, match="row 1"):
        encode(extractor, raw, class_count=1)


def test_encode_is_referentially_transparent():
    spec = SyntheticSpec(3, 20, 5, 0.3, 77)
    raw = generate_synthetic(spec)
    extractor_a = FeatureExtractor.from_seed(11, 5, 7)
    extractor_b = FeatureExtractor.from_seed(11, 5, 7)
    assert encode(extractor_a, raw).content_hash() == encode(extractor_b, raw).content_hash()


def test_dataset_one_hot_rows_always_sum_to_one():
    spec = SyntheticSpec(5, 8, 4, 0.2, 3)
    encoded = encode(FeatureExtractor.from_seed(2, 4, 6), generate_synthetic(spec))
    assert np.array_equal(encoded.one_hots.sum(axis=1), np.ones(len(encoded)))


def test_subset_by_ids_rejects_unknown():
    encoded = EncodedDataset.from_features([1, 2], np.zeros((2, 3)), [0, 1], 2)
    with pytest.raises(ContractViolation):
        encoded.subset_by_ids([1, 5])


# -------------------------------------------------------------------- CSV


def test_raw_csv_round_trip_is_exact(tmp_path):
    spec = SyntheticSpec(3, 7, 5, 0.4, 31)
    raw = generate_synthetic(spec)
    path = tmp_path / "raw.csv"
    write_csv(path, raw)
    loaded = load_csv(path)
    assert isinstance(loaded, RawDataset)
    assert np.array_equal(loaded.inputs, raw.inputs)
    assert np.array_equal(loaded.labels, raw.labels)
    assert np.array_equal(loaded.sample_ids, raw.sample_ids)


def test_feature_csv_round_trip_is_exact(tmp_path):
    spec = SyntheticSpec(2, 6, 4, 0.4, 13)
    encoded = encode(FeatureExtractor.from_seed(8, 4, 5), generate_synthetic(spec))
    path = tmp_path / "features.csv"
    write_csv(path, encoded)
    loaded = load_csv(path)
    assert isinstance(loaded, EncodedDataset)
    assert loaded.content_hash() == encoded.content_hash()


def test_csv_header_selects_mode(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("id,label,f0,f1\n0,1,0.5,0.25\n", encoding="utf-8")
    loaded = load_csv(path)
    assert isinstance(loaded, EncodedDataset)
    path.write_text("id,label,x0,x1\n0,1,0.5,0.25\n", encoding="utf-8")
    loaded = load_csv(path)
    assert isinstance(loaded, RawDataset)


def test_csv_parse_errors_use_one_based_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,label,x0\n0,0,1.0\n1,zero,2.0\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 3"):
        load_csv(path)
    path.write_text("id,label,x0\n0,0,1.0\n0,1,2.0\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 3.*duplicate id 0"):
        load_csv(path)
    path.write_text("id,label,x0\n5,0\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 2"):
        load_csv(path)


def test_csv_header_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample,label,x0\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 1"):
        load_csv(path)
    path.write_text("id,label,q0\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 1"):
        load_csv(path)
    path.write_text("id,label,x0,x2\n", encoding="utf-8")
    with pytest.raises(InputError, match="line 1"):
        load_csv(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(InputError, match="line 1"):
        load_csv(path)


def test_csv_class_count_override(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("id,label,f0\n0,1,0.5\n", encoding="utf-8")
    loaded = load_csv(path, class_count=4)
    assert loaded.class_count == 4
    with pytest.raises(InputError):
        load_csv(path, class_count=1)
