import struct

import numpy as np
import pytest

from cwt_export import (
    NonFiniteValue,
    PairingRule,
    ShapeMismatch,
    UnpairedArray,
    UnsupportedDtype,
    export,
)
from cwt_export.cli import main


def parse_cwt(data: bytes):
    """Reference parser used only by tests: walks the documented byte layout."""
    magic, version, count, reserved = struct.unpack_from("<4sIII", data, 0)
    assert magic == b"CWT0" and version == 1 and reserved == 0
    off = 16
    layers = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n = int(np.prod(shape))
        comp = np.frombuffer(data, dtype="<f4", count=2 * n, offset=off).reshape(n, 2)
        off += 8 * n
        layers.append((name, shape, comp))
    assert off == len(data)
    return layers


@pytest.fixture
def five_pair_checkpoint(tmp_path):
    rng = np.random.default_rng(8)
    shapes = [(2, 2), (3, 3, 4, 4), (7,), (1, 5), (4, 2, 2)]
    arrays = {}
    for i, shape in enumerate(shapes):
        arrays[f"block{i}_real"] = rng.normal(size=shape).astype(np.float32)
        arrays[f"block{i}_imag"] = rng.normal(size=shape).astype(np.float32)
    path = tmp_path / "ckpt.npz"
    np.savez(path, **arrays)
    return path, arrays, shapes


def test_export_five_pairs_bit_identical(tmp_path, five_pair_checkpoint):
    ckpt, arrays, shapes = five_pair_checkpoint
    out = tmp_path / "model.cwt"
    summary = export(ckpt, PairingRule(), out)
    assert summary.layers_exported == 5
    assert summary.weights_exported == sum(int(np.prod(s)) for s in shapes)
    assert summary.skipped == []

    layers = parse_cwt(out.read_bytes())
    assert [name for name, _, _ in layers] == [f"block{i}" for i in range(5)]
    for i, (name, shape, comp) in enumerate(layers):
        assert shape == shapes[i]
        real = arrays[f"{name}_real"].reshape(-1)
        imag = arrays[f"{name}_imag"].reshape(-1)
        assert comp[:, 0].tobytes() == real.tobytes()
        assert comp[:, 1].tobytes() == imag.tobytes()


def test_total_bytes_counting(tmp_path, five_pair_checkpoint):
    ckpt, _, shapes = five_pair_checkpoint
    out = tmp_path / "model.cwt"
    export(ckpt, PairingRule(), out)
    layers = parse_cwt(out.read_bytes())
    weight_bytes = sum(8 * int(np.prod(shape)) for _, shape, _ in layers)
    assert weight_bytes == 8 * sum(int(np.prod(s)) for s in shapes)


def test_unpaired_array_strict_vs_lenient(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        conv1_real=np.ones((2, 2), dtype=np.float32),
        conv1_imag=np.ones((2, 2), dtype=np.float32),
        conv2_real=np.ones((2, 2), dtype=np.float32),
    )
    out = tmp_path / "model.cwt"
    with pytest.raises(UnpairedArray, match="conv2_real"):
        export(path, PairingRule(), out, strict=True)
    with pytest.warns(UserWarning, match="conv2_real"):
        summary = export(path, PairingRule(), out)
    assert summary.layers_exported == 1
    assert ("conv2_real", "no partner") in summary.skipped
    assert len(parse_cwt(out.read_bytes())) == 1


def test_shape_mismatch_is_always_an_error(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        w_real=np.ones((2, 2), dtype=np.float32),
        w_imag=np.ones((2, 3), dtype=np.float32),
    )
    with pytest.raises(ShapeMismatch):
        export(path, PairingRule(), tmp_path / "model.cwt")


def test_float64_downcast_with_warning(tmp_path):
    rng = np.random.default_rng(3)
    real64 = rng.normal(size=(3, 3))
    imag64 = rng.normal(size=(3, 3))
    path = tmp_path / "ckpt.npz"
    np.savez(path, k_real=real64, k_imag=imag64)
    out = tmp_path / "model.cwt"
    with pytest.warns(UserWarning, match="down-converted"):
        summary = export(path, PairingRule(), out)
    assert summary.downcast == ["k_real", "k_imag"]
    (_, _, comp), = parse_cwt(out.read_bytes())
    assert comp[:, 0].tobytes() == real64.astype(np.float32).reshape(-1).tobytes()
    assert comp[:, 1].tobytes() == imag64.astype(np.float32).reshape(-1).tobytes()


def test_non_float_arrays(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        step_real=np.array([1, 2], dtype=np.int64),
        step_imag=np.array([3, 4], dtype=np.int64),
        ok_real=np.ones(2, dtype=np.float32),
        ok_imag=np.ones(2, dtype=np.float32),
    )
    out = tmp_path / "model.cwt"
    with pytest.raises(UnsupportedDtype):
        export(path, PairingRule(), out, strict=True)
    with pytest.warns(UserWarning, match="unsupported dtype"):
        summary = export(path, PairingRule(), out)
    assert summary.layers_exported == 1
    assert ("step_real", "unsupported dtype") in summary.skipped


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        w_real=np.array([1.0, np.nan], dtype=np.float32),
        w_imag=np.zeros(2, dtype=np.float32),
    )
    with pytest.raises(NonFiniteValue, match="flat index 1"):
        export(path, PairingRule(), tmp_path / "model.cwt")


def test_custom_suffixes(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        dense_kernel_re=np.ones((2,), dtype=np.float32),
        dense_kernel_im=np.full((2,), 2.0, dtype=np.float32),
    )
    out = tmp_path / "model.cwt"
    summary = export(path, PairingRule("_re", "_im"), out)
    assert summary.layers_exported == 1
    (name, shape, comp), = parse_cwt(out.read_bytes())
    assert name == "dense_kernel"
    assert comp[:, 1].tolist() == [2.0, 2.0]


def test_hdf5_checkpoint(tmp_path):
    h5py = pytest.importorskip("h5py")
    rng = np.random.default_rng(4)
    path = tmp_path / "ckpt.h5"
    with h5py.File(path, "w") as fh:
        grp = fh.create_group("stage1/conv1")
        grp["kernel_real"] = rng.normal(size=(3, 2)).astype(np.float32)
        grp["kernel_imag"] = rng.normal(size=(3, 2)).astype(np.float32)
        fh["bias_real"] = rng.normal(size=(4,)).astype(np.float32)
        fh["bias_imag"] = rng.normal(size=(4,)).astype(np.float32)
    out = tmp_path / "model.cwt"
    summary = export(path, PairingRule(), out)
    assert summary.layers_exported == 2
    names = [name for name, _, _ in parse_cwt(out.read_bytes())]
    assert "stage1/conv1/kernel" in names
    assert "bias" in names


def test_scalar_array_exports_as_rank_one(tmp_path):
    path = tmp_path / "ckpt.npz"
    np.savez(
        path,
        s_real=np.array(1.5, dtype=np.float32),
        s_imag=np.array(-2.5, dtype=np.float32),
    )
    out = tmp_path / "model.cwt"
    export(path, PairingRule(), out)
    (name, shape, comp), = parse_cwt(out.read_bytes())
    assert shape == (1,)
    assert comp.tolist() == [[1.5, -2.5]]


def test_cli_round_trip(tmp_path, five_pair_checkpoint, capsys):
    ckpt, _, _ = five_pair_checkpoint
    out = tmp_path / "model.cwt"
    rc = main(["--checkpoint", str(ckpt), "--output", str(out)])
    assert rc == 0
    assert "layers exported: 5" in capsys.readouterr().out
    assert out.exists()


def test_cli_strict_failure(tmp_path, capsys):
    path = tmp_path / "ckpt.npz"
    np.savez(path, only_real=np.ones(2, dtype=np.float32))
    rc = main(["--checkpoint", str(path), "--output", str(tmp_path / "m.cwt"),
               "--strict"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_loadable_by_primary_toolkit(tmp_path, five_pair_checkpoint):
    ccnz = pytest.importorskip("ccnz")
    ckpt, arrays, _ = five_pair_checkpoint
    out = tmp_path / "model.cwt"
    export(ckpt, PairingRule(), out)
    model = ccnz.load_raw(out)
    assert [t.name for t in model.layers] == [f"block{i}" for i in range(5)]
    for t in model.layers:
        real = arrays[f"{t.name}_real"].reshape(-1)
        imag = arrays[f"{t.name}_imag"].reshape(-1)
        assert t.values.real.tobytes() == real.tobytes()
        assert t.values.imag.tobytes() == imag.tobytes()
