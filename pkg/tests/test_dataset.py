"""Dataset tests: binary record framing, build determinism, split
hygiene, and the loader contract."""

import json

import numpy as np
import pytest

from molforge.catalog import ICFamily, N_FRAMES, N_GRID, get_equation
from molforge.dataset import (BuildConfig, D_MAX, SPLIT_RANGES, SPLITS,
                              _family_rng, build_dataset, load_manifest,
                              load_samples, plan_manifest)
from molforge.dataset.serialization import (RawRecord, pack_record,
                                            read_records, unpack_record)
from molforge.descriptions import generate_descriptions
from molforge.errors import CorruptRecord


def _record(seed=0):
    rng = np.random.default_rng(seed)
    return RawRecord(
        family_index=13, ic_kind=ICFamily.SINE_MIXTURE,
        params=rng.standard_normal(2).astype(np.float32),
        ic=rng.standard_normal(N_GRID).astype(np.float32),
        times=np.linspace(0, 5, N_FRAMES).astype(np.float32),
        values=rng.standard_normal((N_FRAMES, N_GRID)).astype(np.float32),
        sentence="The equation is u_t = c1 u_xx where c1 = <num> .",
        description="A parabolic equation; it diffuses.",
        description_index=3)


def test_record_roundtrip():
    rec = _record()
    blob = pack_record(rec)
    out, consumed = unpack_record(blob, 0)
    assert consumed == len(blob)
    assert out.family_index == rec.family_index
    assert out.ic_kind == rec.ic_kind
    assert out.description_index == rec.description_index
    np.testing.assert_array_equal(out.params, rec.params)
    np.testing.assert_array_equal(out.ic, rec.ic)
    np.testing.assert_array_equal(out.values, rec.values)
    assert out.sentence == rec.sentence
    assert out.description == rec.description


def test_record_crc_detects_corruption():
    blob = bytearray(pack_record(_record()))
    blob[len(blob) // 2] ^= 0xFF
    with pytest.raises(CorruptRecord):
        unpack_record(bytes(blob), 0)


def test_record_truncation_detected():
    blob = pack_record(_record())
    with pytest.raises(CorruptRecord):
        unpack_record(blob[: len(blob) - 5], 0)


def test_read_records_offsets(tmp_path):
    blobs = [pack_record(_record(s)) for s in range(3)]
    path = tmp_path / "f.bin"
    path.write_bytes(b"".join(blobs))
    out = read_records(path)
    assert [off for off, _ in out] == [0, len(blobs[0]),
                                       len(blobs[0]) + len(blobs[1])]


def test_build_is_byte_reproducible(tmp_path):
    cfg = dict(master_seed=11, n_params=2, n_ics=2, n_ood_params=1,
               n_ood_ics=1, families=(2, 27))
    build_dataset(BuildConfig(out_dir=str(tmp_path / "a"), **cfg))
    build_dataset(BuildConfig(out_dir=str(tmp_path / "b"), **cfg))
    for name in ("family_02.bin", "family_27.bin", "vocab.json",
                 "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_family_rng_streams_are_independent():
    a = _family_rng(0, 13, "train_pool").standard_normal(4)
    b = _family_rng(0, 13, "id_split").standard_normal(4)
    c = _family_rng(0, 14, "train_pool").standard_normal(4)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)
    np.testing.assert_array_equal(
        a, _family_rng(0, 13, "train_pool").standard_normal(4))


def test_plan_manifest_paper_counts():
    cfg = BuildConfig(out_dir="unused", scale="paper")
    plan = plan_manifest(cfg)
    assert plan["plan_only"] is True
    assert plan["total_parameterized_equations"] == 5200
    assert len(plan["families"]) == 52
    for idx, entry in plan["families"].items():
        spec = get_equation(int(idx))
        assert entry["n_params"] == 100
        assert entry["n_ics"] == (50 if spec.is_ode else 100)


def test_manifest_structure(mixed_data):
    out, manifest = mixed_data
    reloaded = load_manifest(str(out))
    assert reloaded["splits"] == {s: {"relative_range": SPLIT_RANGES[s]}
                                  for s in SPLITS}
    for key, entry in reloaded["families"].items():
        offs = entry["offsets"]
        assert set(offs) == set(SPLITS)
        flat = sorted(o for lst in offs.values() for o in lst)
        assert len(flat) == len(set(flat))          # disjoint records
        assert entry["n_records"] == len(flat)


def test_split_sizes(mixed_data, mixed_samples):
    out, manifest = mixed_data
    n_fam = len(manifest["families"])
    # pool of 2x2 = 4 per family, 12.5% (at least one) held out as ID
    assert len(mixed_samples["id"]) == n_fam
    assert len(mixed_samples["train"]) == 3 * n_fam
    assert len(mixed_samples["ood20"]) == 2 * n_fam
    assert len(mixed_samples["ood30"]) == 2 * n_fam


def test_loaded_sample_shapes(mixed_samples):
    for split, samples in mixed_samples.items():
        for s in samples:
            spec = get_equation(s.family_index)
            assert s.times.shape == (N_FRAMES,)
            if spec.is_ode:
                n_q = N_FRAMES
                assert s.values.shape == (N_FRAMES, spec.state_dim)
            else:
                n_q = N_FRAMES * N_GRID
                assert s.values.shape == (N_FRAMES, N_GRID)
            assert s.queries.shape == (n_q, 2)
            assert s.targets.shape == (n_q, D_MAX)
            assert s.channel_mask.shape == (D_MAX,)
            assert s.split == split
            assert np.all(np.isfinite(s.targets))


def test_targets_match_values(mixed_samples):
    for s in mixed_samples["train"]:
        spec = get_equation(s.family_index)
        if spec.is_ode:
            np.testing.assert_array_equal(
                s.targets[:, : spec.state_dim], s.values)
            assert np.all(s.targets[:, spec.state_dim:] == 0)
            np.testing.assert_array_equal(s.queries[:, 0], s.times)
            assert np.all(s.queries[:, 1] == 0)
        else:
            np.testing.assert_array_equal(
                s.targets[:, 0], s.values.astype(np.float64).ravel())
            assert np.all(s.channel_mask == [True, False, False])


def test_description_indices_valid(mixed_samples):
    for split, samples in mixed_samples.items():
        for s in samples:
            ds = generate_descriptions(get_equation(s.family_index))
            assert 0 <= s.description_index < len(ds.descriptions)
            assert s.description == ds.descriptions[s.description_index]


def test_load_samples_family_filter(mixed_data):
    out, _ = mixed_data
    got = [s.family_index for s in load_samples(str(out), "train",
                                                families=(13, 19))]
    assert set(got) == {13, 19}


def test_load_samples_unknown_split(mixed_data):
    out, _ = mixed_data
    with pytest.raises(ValueError):
        list(load_samples(str(out), "test"))


def test_build_config_validates():
    cfg = BuildConfig(out_dir="x")
    assert cfg.families == tuple(range(1, 53))
    assert cfg.scale == "desk"
