import warnings

import numpy as np
import pytest

from ccnz import (
    ClusterSpec,
    ComplexTensor,
    InitScheme,
    PipelineConfig,
    PruneConfig,
    RawModel,
    compress,
    decompress,
    parse_container,
    read_container,
    serialize_container,
    write_container,
)
from ccnz.container import HEADER, _serialize_layer, layer_accounting
from ccnz.errors import (
    AllPrunedWarning,
    ChecksumMismatch,
    ConfigError,
    MagicMismatch,
    VersionUnsupported,
)

from conftest import make_model, make_tensor

IDENTITY = PipelineConfig(
    prune=PruneConfig(0.0), stages=frozenset({"prune"}), entropy_mode="none"
)

CORNERS = np.array([0 + 0j, 1 + 0j, 0 + 1j, 1 + 1j], dtype=np.complex64)


def test_identity_pipeline_round_trip(rng):
    model = make_model(rng, n_layers=3)
    out = decompress(compress(model, IDENTITY))
    assert out == model


def test_four_corner_toy_container():
    model = RawModel([ComplexTensor("toy", (2, 2), CORNERS)])
    cfg = PipelineConfig(
        prune=PruneConfig(0.0),
        clusters=ClusterSpec(2),
        init=InitScheme.linear_vertical(),
        stages=frozenset({"prune", "quantize"}),
        entropy_mode="none",
    )
    comp = compress(model, cfg)
    rec = comp.layers[0]
    assert rec.cluster_count == 2
    assert rec.index_bits == 1
    acct = layer_accounting(rec)
    assert acct["codebook"] == 16  # 2 centroids x 8 bytes
    assert acct["indices_packed"] == 1  # 4 indices x 1 bit, one byte
    out = decompress(comp)
    assert np.isin(out.layers[0].values, rec.codebook.centroids).all()


def test_write_read_byte_identity(tmp_path, rng):
    model = make_model(rng, n_layers=3)
    cfg = PipelineConfig(
        prune=PruneConfig(0.6), clusters=ClusterSpec(4), init=InitScheme.forgy(11)
    )
    comp = compress(model, cfg)
    path = tmp_path / "m.ccnz"
    write_container(comp, path)
    data = path.read_bytes()
    again = read_container(path)
    assert serialize_container(again) == data


def test_empty_model_container():
    blob = serialize_container(compress(RawModel([]), IDENTITY))
    comp = parse_container(blob)
    assert comp.layers == []
    assert blob[:4] == b"CCNZ"


def test_single_bit_corruption_detected(tmp_path, rng):
    model = make_model(rng, n_layers=2)
    comp = compress(model, PipelineConfig(prune=PruneConfig(0.5)))
    blob = bytearray(serialize_container(comp))
    pos = HEADER.size + 3  # inside the CRC-covered payload
    blob[pos] ^= 0x10
    with pytest.raises(ChecksumMismatch):
        parse_container(bytes(blob))


def test_magic_and_version_checks():
    blob = bytearray(serialize_container(compress(RawModel([]), IDENTITY)))
    with pytest.raises(MagicMismatch):
        parse_container(b"WHAT" + bytes(blob[4:]))
    bad = bytearray(blob)
    bad[4] = 9
    with pytest.raises(VersionUnsupported):
        parse_container(bytes(bad))


def test_pruned_positions_zero_and_survivors_in_codebook(rng):
    model = make_model(rng, n_layers=2, scale=0.5)
    cfg = PipelineConfig(
        prune=PruneConfig(0.4), clusters=ClusterSpec(6), init=InitScheme.density(5)
    )
    comp = compress(model, cfg)
    out = decompress(comp)
    for tensor, rec in zip(model.layers, comp.layers):
        got = out.layer(tensor.name)
        key = np.abs(tensor.values.astype(np.complex128))
        pruned = key < 0.4
        assert (got.values[pruned] == 0).all()
        if (~pruned).any():
            assert np.isin(got.values[~pruned], rec.codebook.centroids).all()


def test_disabling_huffman_preserves_values(rng):
    model = make_model(rng, n_layers=2)
    base = dict(
        prune=PruneConfig(0.5), clusters=ClusterSpec(5), init=InitScheme.forgy(3)
    )
    with_h = compress(model, PipelineConfig(**base))
    without = compress(
        model, PipelineConfig(**base, stages=frozenset({"prune", "quantize"}))
    )
    assert decompress(with_h) == decompress(without)
    for mode in ("split", "indices"):
        again = compress(model, PipelineConfig(**base, entropy_mode=mode))
        assert decompress(again) == decompress(with_h)


def test_file_size_is_header_plus_records(rng):
    model = make_model(rng, n_layers=3)
    cfg = PipelineConfig(prune=PruneConfig(0.5), clusters=ClusterSpec(4),
                         init=InitScheme.forgy(0))
    comp = compress(model, cfg)
    blob = serialize_container(comp)
    records = sum(len(_serialize_layer(rec)) for rec in comp.layers)
    config_blob_len = len(blob) - HEADER.size - 4 - records
    assert len(blob) == HEADER.size + 4 + config_blob_len + records
    # stored section lengths equal actual serialized section lengths
    comp2 = parse_container(blob)
    for a, b in zip(comp.layers, comp2.layers):
        assert layer_accounting(a) == layer_accounting(b)


def test_fully_pruned_layer_round_trips(rng):
    t = make_tensor("tiny", (3, 3), rng, scale=0.01)
    cfg = PipelineConfig(prune=PruneConfig(5.0), clusters=ClusterSpec(4),
                         init=InitScheme.forgy(0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AllPrunedWarning)
        comp = compress(RawModel([t]), cfg)
    blob = serialize_container(comp)
    out = decompress(parse_container(blob))
    assert np.array_equal(out.layers[0].values, np.zeros(9, dtype=np.complex64))


def test_cluster_and_threshold_overrides(rng):
    model = RawModel([
        make_tensor("conv1", (4, 4), rng),
        make_tensor("dense1", (4, 4), rng),
    ])
    cfg = PipelineConfig(
        prune=PruneConfig(0.5),
        threshold_overrides=(("dense*", 0.0),),
        clusters=ClusterSpec(3, (("conv*", 2),)),
        init=InitScheme.forgy(0),
        stages=frozenset({"prune", "quantize"}),
        entropy_mode="none",
    )
    comp = compress(model, cfg)
    assert comp.layers[0].cluster_count == 2
    assert comp.layers[1].cluster_count == 3
    assert comp.layers[1].nnz == 16  # threshold override kept everything


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(stages=frozenset({"huffman"}))
    with pytest.raises(ConfigError):
        PipelineConfig(stages=frozenset({"prune", "warp"}))
    with pytest.raises(ConfigError):
        PipelineConfig(entropy_mode="ans")
    with pytest.raises(ConfigError):
        PipelineConfig(kmeans_max_iters=0)
    # entropy mode and stage flags normalize to one statement
    cfg = PipelineConfig(stages=frozenset({"prune", "quantize"}), entropy_mode="split")
    assert cfg.entropy_mode == "none"
    cfg = PipelineConfig(entropy_mode="none")
    assert "huffman" not in cfg.stages


def test_quantize_only_config_keeps_structure_at_threshold_zero(rng):
    # quantization still runs through prune's bookkeeping at threshold 0
    model = RawModel([make_tensor("w", (3, 4), rng)])
    cfg = PipelineConfig(
        clusters=ClusterSpec(2),
        init=InitScheme.forgy(0),
        stages=frozenset({"quantize"}),
        entropy_mode="none",
    )
    comp = compress(model, cfg)
    assert comp.layers[0].nnz == 12
    out = decompress(comp)
    assert np.isin(out.layers[0].values, comp.layers[0].codebook.centroids).all()


def test_errors_name_the_layer(rng):
    model = RawModel([make_tensor("oddball", (2, 2), rng)])
    cfg = PipelineConfig(clusters=ClusterSpec(2), init=InitScheme.forgy(0))
    comp = compress(model, cfg)
    # corrupt a parsed record so decompression fails inside the layer
    comp.layers[0].row_ptr = np.array([0, 2, 99], dtype=np.uint32)
    with pytest.raises(Exception, match="oddball"):
        decompress(comp)


def test_workers_do_not_change_bytes(rng):
    model = make_model(rng, n_layers=4)
    cfg = PipelineConfig(prune=PruneConfig(0.4), clusters=ClusterSpec(5),
                         init=InitScheme.forgy(9))
    blobs = {serialize_container(compress(model, cfg, workers=w)) for w in (1, 2, 7)}
    assert len(blobs) == 1


def test_negative_zero_survives_raw_path_and_never_enters_codebooks(tmp_path):
    # raw storage must keep -0.0 bit patterns; quantization canonicalizes
    # centroids to +0.0 so split and indices modes stay bit-identical
    vals = np.array([-0.0 - 0.0j, 1 + 1j, -0.0 + 2j, 3 - 0.0j], dtype=np.complex64)
    assert np.signbit(vals.real[0])  # the fixture really carries -0.0
    model = RawModel([ComplexTensor("z", (2, 2), vals)])

    comp = compress(model, IDENTITY)
    path = tmp_path / "z.ccnz"
    write_container(comp, path)
    out = decompress(read_container(path))
    assert out == model  # uint64-view equality, so -0.0 round-tripped

    cfg = PipelineConfig(clusters=ClusterSpec(2), init=InitScheme.forgy(0))
    comp = compress(model, cfg)
    cents = comp.layers[0].codebook.centroids
    assert not np.signbit(cents.real).any()
    assert not np.signbit(cents.imag).any()
    split_out = decompress(comp)
    idx_out = decompress(compress(model, PipelineConfig(
        clusters=ClusterSpec(2), init=InitScheme.forgy(0), entropy_mode="indices")))
    assert split_out == idx_out
