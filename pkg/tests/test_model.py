import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccnz import ComplexTensor, RawModel, load_raw, save_raw, total_raw_bytes
from ccnz.errors import (
    CorruptStream,
    DuplicateLayer,
    MagicMismatch,
    NonFiniteWeight,
    TruncatedFile,
    VersionUnsupported,
)

from conftest import make_model


def test_empty_model_is_header_only(tmp_path):
    path = tmp_path / "empty.cwt"
    save_raw(RawModel([]), path)
    assert path.stat().st_size == 16  # magic + version + count + reserved
    assert load_raw(path).layers == []


def test_2x2_layer_round_trips_bit_exactly(tmp_path):
    vals = np.array([1 + 0j, 0 + 1j, -1 + 0j, 0 - 1j], dtype=np.complex64)
    model = RawModel([ComplexTensor("w", (2, 2), vals)])
    path = tmp_path / "m.cwt"
    save_raw(model, path)
    got = load_raw(path)
    assert got == model
    assert got.layers[0].values.tobytes() == vals.tobytes()


def test_nan_real_component_rejected():
    vals = np.array([1 + 1j, np.nan + 0j], dtype=np.complex64)
    with pytest.raises(NonFiniteWeight, match="flat index 1"):
        ComplexTensor("bad", (2,), vals)


def test_infinite_imag_component_rejected():
    vals = np.array([complex(0, np.inf)], dtype=np.complex64)
    with pytest.raises(NonFiniteWeight):
        ComplexTensor("bad", (1,), vals)


def test_duplicate_layer_names_rejected(tmp_path):
    t = ComplexTensor("w", (1,), np.ones(1, dtype=np.complex64))
    with pytest.raises(DuplicateLayer):
        RawModel([t, t])
    model = RawModel([t])
    model.layers.append(t)  # bypasses construction-time check
    with pytest.raises(DuplicateLayer):
        save_raw(model, tmp_path / "dup.cwt")


def test_total_raw_bytes():
    rng = np.random.default_rng(0)
    mk = lambda name, n: ComplexTensor(
        name, (n,), (rng.normal(size=n) + 1j * rng.normal(size=n)).astype(np.complex64)
    )
    assert total_raw_bytes(RawModel([])) == 0
    assert total_raw_bytes(RawModel([mk("a", 1024)])) == 8192
    assert total_raw_bytes(RawModel([mk("a", 10), mk("b", 20)])) == 240


def test_total_raw_bytes_additive(rng):
    model = make_model(rng, n_layers=4)
    assert total_raw_bytes(model) == sum(
        total_raw_bytes(RawModel([t])) for t in model.layers
    )
    assert total_raw_bytes(model) == 8 * sum(t.weight_count for t in model.layers)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.cwt"
    path.write_bytes(b"NOPE" + b"\x00" * 12)
    with pytest.raises(MagicMismatch):
        load_raw(path)


def test_bad_version(tmp_path):
    path = tmp_path / "bad.cwt"
    path.write_bytes(b"CWT0" + (99).to_bytes(4, "little") + b"\x00" * 8)
    with pytest.raises(VersionUnsupported):
        load_raw(path)


def test_truncated_file(tmp_path):
    vals = np.ones(4, dtype=np.complex64)
    model = RawModel([ComplexTensor("w", (4,), vals)])
    path = tmp_path / "m.cwt"
    save_raw(model, path)
    data = path.read_bytes()
    path.write_bytes(data[:-5])
    with pytest.raises(TruncatedFile):
        load_raw(path)


def test_trailing_garbage_rejected(tmp_path):
    path = tmp_path / "m.cwt"
    save_raw(RawModel([]), path)
    path.write_bytes(path.read_bytes() + b"x")
    with pytest.raises(CorruptStream):
        load_raw(path)


def test_shape_value_mismatch_rejected():
    with pytest.raises(CorruptStream):
        ComplexTensor("w", (3,), np.ones(2, dtype=np.complex64))
    with pytest.raises(CorruptStream):
        ComplexTensor("w", (), np.ones(1, dtype=np.complex64))


def test_metadata_not_persisted(tmp_path):
    t = ComplexTensor("w", (1,), np.ones(1, dtype=np.complex64))
    model = RawModel([t], metadata={"src": "test"})
    path = tmp_path / "m.cwt"
    save_raw(model, path)
    got = load_raw(path)
    assert got.metadata == {}
    assert got == model  # equality is on layers only


def test_values_frozen():
    t = ComplexTensor("w", (2,), np.ones(2, dtype=np.complex64))
    with pytest.raises(ValueError):
        t.values[0] = 0


finite_f32 = st.floats(
    allow_nan=False, allow_infinity=False, width=32, min_value=-1e6, max_value=1e6
)


@st.composite
def tensors(draw, name):
    shape = tuple(draw(st.lists(st.integers(1, 5), min_size=1, max_size=3)))
    n = math.prod(shape)
    re = draw(st.lists(finite_f32, min_size=n, max_size=n))
    im = draw(st.lists(finite_f32, min_size=n, max_size=n))
    vals = np.array(re, dtype=np.float32) + 1j * np.array(im, dtype=np.float32)
    return ComplexTensor(name, shape, vals.astype(np.complex64))


@st.composite
def models(draw):
    count = draw(st.integers(0, 3))
    return RawModel([draw(tensors(f"t{i}")) for i in range(count)])


@settings(max_examples=50, deadline=None)
@given(models())
def test_save_load_round_trip_is_identity(tmp_path_factory, model):
    path = tmp_path_factory.mktemp("cwt") / "m.cwt"
    save_raw(model, path)
    assert load_raw(path) == model
    # a second write produces identical bytes
    data = path.read_bytes()
    save_raw(load_raw(path), path)
    assert path.read_bytes() == data
